// HTML renderers for the three views. Pure string builders so tests can
// assert that displayed values are exactly the API's values.

import type { CatalogInfo, RecentRun, SearchResult, SolutionDetail, TaskInfo } from "./api.js";
import type { ParamFormModel } from "./formModel.js";

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function badge(text: string, cls: string): string {
  return `<span class="badge ${cls}">${escapeHtml(text)}</span>`;
}

export function statusBadge(state: string): string {
  const cls =
    state === "succeeded" ? "ok" : state === "failed" ? "bad" : state === "running" ? "busy" : "idle";
  return badge(state, cls);
}

export function renderDashboard(
  catalogs: CatalogInfo[],
  results: SearchResult[],
  recent: RecentRun[],
  query: string,
): string {
  const catalogRows = catalogs
    .map(
      (c) => `
      <tr>
        <td>${escapeHtml(c.name)}</td>
        <td class="muted">${escapeHtml(c.source)}</td>
        <td>${escapeHtml(c.kind)}</td>
        <td>${c.entries}</td>
        <td>
          <button data-action="sync-catalog" data-name="${escapeHtml(c.name)}">sync</button>
          <button data-action="remove-catalog" data-name="${escapeHtml(c.name)}">remove</button>
        </td>
      </tr>`,
    )
    .join("");
  const resultRows = results
    .map(
      (r) => `
      <tr>
        <td><a href="#/solution/${encodeURIComponent(r.coordinates)}">${escapeHtml(r.coordinates)}</a></td>
        <td>${escapeHtml(r.title ?? "")}</td>
        <td>${escapeHtml(r.catalog)}</td>
        <td>${r.installed ? statusBadge(r.installed) : ""}</td>
      </tr>`,
    )
    .join("");
  const recentRows = recent
    .map(
      (r) => `
      <tr>
        <td><a href="#/solution/${encodeURIComponent(r.coordinates)}">${escapeHtml(r.coordinates)}</a></td>
        <td>${escapeHtml(r.started_at)}</td>
        <td>${r.exit_status === null ? "" : r.exit_status}</td>
        <td><button data-action="rerun" data-coords="${escapeHtml(r.coordinates)}">re-run</button></td>
      </tr>`,
    )
    .join("");
  return `
  <section>
    <h2>Catalogs</h2>
    <table><thead><tr><th>name</th><th>source</th><th>kind</th><th>solutions</th><th></th></tr></thead>
    <tbody>${catalogRows || '<tr><td colspan="5" class="muted">no catalogs configured</td></tr>'}</tbody></table>
    <form id="add-catalog-form">
      <input name="name" placeholder="catalog name" required>
      <input name="source" placeholder="path or git URL" required>
      <button type="submit">add catalog</button>
    </form>
  </section>
  <section>
    <h2>Solutions</h2>
    <form id="search-form">
      <input name="query" placeholder="search coordinates, title, tags" value="${escapeHtml(query)}">
      <button type="submit">search</button>
    </form>
    <table><thead><tr><th>coordinates</th><th>title</th><th>catalog</th><th>installed</th></tr></thead>
    <tbody>${resultRows || '<tr><td colspan="4" class="muted">no matches</td></tr>'}</tbody></table>
  </section>
  <section>
    <h2>Recent runs</h2>
    <table><thead><tr><th>coordinates</th><th>started</th><th>exit</th><th></th></tr></thead>
    <tbody>${recentRows || '<tr><td colspan="4" class="muted">nothing run yet</td></tr>'}</tbody></table>
  </section>`;
}

export function renderParamForm(model: ParamFormModel): string {
  const rows = model.fields
    .map((field) => {
      const required = field.required ? " required" : "";
      const requiredMark = field.required ? ' <span class="req">*</span>' : "";
      const warning = field.warning ? ` <span class="badge warn">${escapeHtml(field.warning)}</span>` : "";
      const help = field.help ? `<div class="muted">${escapeHtml(field.help)}</div>` : "";
      let input: string;
      switch (field.widget) {
        case "checkbox":
          input = `<input type="checkbox" name="${escapeHtml(field.name)}"${field.default === true ? " checked" : ""}>`;
          break;
        case "number":
          input = `<input type="number" step="any" name="${escapeHtml(field.name)}" value="${
            field.default !== undefined ? escapeHtml(String(field.default)) : ""
          }"${required}>`;
          break;
        case "file_path":
        case "directory_path":
          input = `<input type="text" class="${field.widget}" name="${escapeHtml(field.name)}" value="${
            field.default !== undefined ? escapeHtml(String(field.default)) : ""
          }" placeholder="${field.widget === "file_path" ? "file path" : "directory path"}"${required}>`;
          break;
        default:
          input = `<input type="text" name="${escapeHtml(field.name)}" value="${
            field.default !== undefined ? escapeHtml(String(field.default)) : ""
          }"${required}>`;
      }
      return `<label class="field">${escapeHtml(field.label)}${requiredMark}${warning}<br>${input}${help}</label>`;
    })
    .join("\n");
  return `<form id="run-form">${rows}<button type="submit">Run</button></form>`;
}

export function renderSolutionDetail(detail: SolutionDetail, form: ParamFormModel): string {
  const manifest = detail.manifest;
  const install = detail.install;
  const authors = manifest.authors
    .map((a) => escapeHtml(a.affiliation ? `${a.name} (${a.affiliation})` : a.name))
    .join(", ");
  const cite = manifest.cite
    .map((c) => `<li>${escapeHtml(c.text)}${c.doi ? ` — <code>${escapeHtml(c.doi)}</code>` : ""}</li>`)
    .join("");
  const deps = manifest.environment.dependencies.map((d) => `<code>${escapeHtml(d)}</code>`).join(" ");
  const installed = install !== null && install.state === "installed";
  return `
  <p><a href="#/">&larr; collection</a></p>
  <h2>${escapeHtml(manifest.title)}</h2>
  <p><code>${escapeHtml(manifest.coordinates)}</code> ${
    install ? statusBadge(install.state) : badge("not installed", "idle")
  }${install?.orphaned ? " " + badge("orphaned", "warn") : ""}</p>
  <p>${escapeHtml(manifest.description)}</p>
  <p class="muted">from ${escapeHtml(detail.provenance)} · license ${escapeHtml(manifest.license || "unspecified")}
     ${manifest.tags.length ? "· tags: " + escapeHtml(manifest.tags.join(", ")) : ""}</p>
  ${authors ? `<p>authors: ${authors}</p>` : ""}
  ${cite ? `<h3>Cite</h3><ul>${cite}</ul>` : ""}
  ${deps ? `<p>environment: ${deps}</p>` : ""}
  <p>
    <button data-action="install" ${installed || install?.state === "installing" ? "disabled" : ""}>Install</button>
    <button data-action="test" ${installed ? "" : "disabled"}>Test</button>
    <button data-action="uninstall" ${installed ? "" : "disabled"}>Uninstall</button>
  </p>
  <h3>Run</h3>
  ${installed ? "" : '<p class="muted">install the solution to enable the run form</p>'}
  ${renderParamForm(form)}`;
}

export function renderTaskMonitor(
  task: TaskInfo | null,
  status: string,
  logLines: string[],
  errorBanner: string | null,
): string {
  const header = task
    ? `<p><code>${escapeHtml(task.kind)}</code> ${escapeHtml(task.subject)} ${statusBadge(status)}${
        task.exit_status !== null ? ` exit ${task.exit_status}` : ""
      }</p>`
    : "";
  const banner = errorBanner
    ? `<div class="banner">${escapeHtml(errorBanner)} <button data-action="dismiss">dismiss</button></div>`
    : "";
  const log = logLines.map((line) => escapeHtml(line)).join("\n");
  return `
  <p><a href="#/">&larr; collection</a></p>
  <h2>Task</h2>
  ${banner}
  ${header}
  <pre class="log" id="task-log">${log}</pre>`;
}
