import { describe, expect, it } from "vitest";

import type { ArgumentDecl } from "./api.js";
import { buildParamFormModel, collectFormValues } from "./formModel.js";

function decl(partial: Partial<ArgumentDecl> & { name: string; kind: string }): ArgumentDecl {
  return { required: false, description: "", ...partial };
}

describe("buildParamFormModel", () => {
  it("maps every kind to its widget", () => {
    const model = buildParamFormModel([
      decl({ name: "a", kind: "string" }),
      decl({ name: "b", kind: "integer" }),
      decl({ name: "c", kind: "float" }),
      decl({ name: "d", kind: "boolean" }),
      decl({ name: "e", kind: "file" }),
      decl({ name: "f", kind: "directory" }),
    ]);
    expect(model.fields.map((f) => f.widget)).toEqual([
      "text",
      "number",
      "number",
      "checkbox",
      "file_path",
      "directory_path",
    ]);
    expect(model.fields.every((f) => f.warning === undefined)).toBe(true);
  });

  it("preserves order, required flags, defaults, and help text", () => {
    const model = buildParamFormModel([
      decl({ name: "input", kind: "file", required: true, description: "image to segment" }),
      decl({ name: "threshold", kind: "float", default: 0.5 }),
      decl({ name: "verbose", kind: "boolean", default: true }),
    ]);
    expect(model.fields.map((f) => f.name)).toEqual(["input", "threshold", "verbose"]);
    expect(model.fields[0].required).toBe(true);
    expect(model.fields[0].default).toBeUndefined();
    expect(model.fields[0].help).toBe("image to segment");
    expect(model.fields[1].default).toBe(0.5);
    expect(model.fields[2].default).toBe(true); // checkbox prechecked
  });

  it("falls back to text with a warning badge on unknown kinds", () => {
    const model = buildParamFormModel([decl({ name: "m", kind: "matrix" })]);
    expect(model.fields[0].widget).toBe("text");
    expect(model.fields[0].warning).toContain("matrix");
  });
});

describe("collectFormValues", () => {
  const model = buildParamFormModel([
    decl({ name: "input", kind: "file", required: true }),
    decl({ name: "threshold", kind: "float", default: 0.5 }),
    decl({ name: "verbose", kind: "boolean" }),
  ]);

  it("posts exactly the declared names, omitting blank fields", () => {
    const args = collectFormValues(
      model,
      new Map([
        ["input", "/data/cells.tif"],
        ["threshold", ""],
        ["stray", "never"], // not declared: never posted
      ]),
      new Map([["verbose", false]]),
    );
    expect(args).toEqual({ input: "/data/cells.tif", verbose: "false" });
  });

  it("renders checkbox values as the exact boolean lexemes", () => {
    const args = collectFormValues(model, new Map(), new Map([["verbose", true]]));
    expect(args).toEqual({ verbose: "true" });
  });
});
