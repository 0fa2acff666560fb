import { describe, expect, it } from "vitest";

import type { SolutionDetail } from "./api.js";
import { buildParamFormModel } from "./formModel.js";
import { escapeHtml, renderDashboard, renderParamForm, renderSolutionDetail } from "./render.js";

describe("escapeHtml", () => {
  it("escapes markup-significant characters", () => {
    expect(escapeHtml(`<img src="x" onerror=alert(1)> & more`)).toBe(
      "&lt;img src=&quot;x&quot; onerror=alert(1)&gt; &amp; more",
    );
  });
});

describe("renderDashboard", () => {
  it("shows catalogs, results, and recent runs from the API payloads", () => {
    const html = renderDashboard(
      [{ name: "main", source: "/src", kind: "directory", entries: 2 }],
      [
        {
          catalog: "main",
          coordinates: "org.example:seg:1.2.0",
          checksum: "ff",
          installed: "installed",
          title: "Segment <b>nuclei</b>",
        },
      ],
      [
        {
          coordinates: "org.example:seg:1.2.0",
          started_at: "2024-01-01T00:00:00+00:00",
          finished_at: null,
          exit_status: 0,
          args_rendered: [],
        },
      ],
      "seg",
    );
    expect(html).toContain("main");
    expect(html).toContain("org.example:seg:1.2.0");
    expect(html).toContain("Segment &lt;b&gt;nuclei&lt;/b&gt;"); // titles are escaped
    expect(html).toContain('data-action="rerun"');
    expect(html).toContain('value="seg"'); // the query survives re-render
  });
});

describe("renderParamForm", () => {
  it("renders the widget per field and marks required and unknown kinds", () => {
    const model = buildParamFormModel([
      { name: "input", kind: "file", required: true, description: "image" },
      { name: "level", kind: "integer", required: false, description: "", default: 3 },
      { name: "weird", kind: "tensor", required: false, description: "" },
    ]);
    const html = renderParamForm(model);
    expect(html).toContain('class="file_path"');
    expect(html).toContain('type="number"');
    expect(html).toContain('value="3"');
    expect(html).toContain('<span class="req">*</span>');
    expect(html).toContain("unknown kind &quot;tensor&quot;");
  });
});

describe("renderSolutionDetail", () => {
  const detail: SolutionDetail = {
    manifest: {
      coordinates: "org.example:seg:1.2.0",
      title: "Segment nuclei",
      description: "desc",
      license: "MIT",
      tags: ["imaging"],
      authors: [{ name: "ada", affiliation: "lab" }],
      cite: [{ text: "Ada et al.", doi: "10.1234/x" }],
      documentation: [],
      args: [],
      environment: { channels: [], dependencies: ["numpy=1.26"] },
      hooks: { run: ["python", "main.py"] },
    },
    provenance: "main",
    install: null,
  };

  it("disables lifecycle buttons until installed", () => {
    const html = renderSolutionDetail(detail, buildParamFormModel([]));
    expect(html).toContain('data-action="install"');
    expect(html).toMatch(/data-action="test" disabled/);
    expect(html).toMatch(/data-action="uninstall" disabled/);
    expect(html).toContain("not installed");
    expect(html).toContain("ada (lab)");
    expect(html).toContain("10.1234/x");
    expect(html).toContain("numpy=1.26");
  });

  it("enables test/uninstall and shows the orphaned badge when applicable", () => {
    const installed: SolutionDetail = {
      ...detail,
      install: {
        state: "installed",
        catalog_name: "main",
        environment_name: "e",
        install_path: "/p",
        installed_at: "2024-01-01T00:00:00+00:00",
        orphaned: true,
      },
    };
    const html = renderSolutionDetail(installed, buildParamFormModel([]));
    expect(html).toMatch(/data-action="install" disabled/);
    expect(html).not.toMatch(/data-action="test" disabled/);
    expect(html).toContain("orphaned");
  });
});
