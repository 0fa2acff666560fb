// Parameter forms are generated from the solution's declared argument
// schema; the widget mapping is fixed and unknown kinds degrade to a
// text input with a visible warning badge.

import type { ArgumentDecl } from "./api.js";

export type Widget = "text" | "number" | "checkbox" | "file_path" | "directory_path";

export interface FormField {
  name: string;
  label: string;
  widget: Widget;
  required: boolean;
  default?: unknown;
  help: string;
  /** set when the declared kind is unknown to this UI version */
  warning?: string;
}

export interface ParamFormModel {
  fields: FormField[];
}

const WIDGET_BY_KIND: Record<string, Widget> = {
  string: "text",
  integer: "number",
  float: "number",
  boolean: "checkbox",
  file: "file_path",
  directory: "directory_path",
};

export function buildParamFormModel(args: ArgumentDecl[]): ParamFormModel {
  const fields = args.map((decl): FormField => {
    const widget = WIDGET_BY_KIND[decl.kind];
    const field: FormField = {
      name: decl.name,
      label: decl.name,
      widget: widget ?? "text",
      required: decl.required,
      help: decl.description,
    };
    if (decl.default !== undefined && decl.default !== null) {
      field.default = decl.default;
    }
    if (widget === undefined) {
      field.warning = `unknown kind "${decl.kind}"`;
    }
    return field;
  });
  return { fields };
}

/**
 * Collect submitted values for the run request: exactly the declared
 * names, no extras; fields left blank are omitted so server-side
 * defaults apply.
 */
export function collectFormValues(
  model: ParamFormModel,
  rawValues: Map<string, string>,
  checked: Map<string, boolean>,
): Record<string, string> {
  const args: Record<string, string> = {};
  for (const field of model.fields) {
    if (field.widget === "checkbox") {
      if (checked.has(field.name)) {
        args[field.name] = checked.get(field.name) ? "true" : "false";
      }
      continue;
    }
    const raw = rawValues.get(field.name);
    if (raw !== undefined && raw !== "") {
      args[field.name] = raw;
    }
  }
  return args;
}
