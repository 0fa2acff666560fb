// Hash-routed single-page client over the solcat service API.
// Views: collection dashboard, solution detail (generated run form),
// task monitor with live log polling.

import { ApiClient, ApiError } from "./api.js";
import { buildParamFormModel, collectFormValues } from "./formModel.js";
import { renderDashboard, renderSolutionDetail, renderTaskMonitor, escapeHtml } from "./render.js";
import { RunViewState } from "./runView.js";

const client = new ApiClient("");
const app = document.getElementById("app") as HTMLElement;

let activeMonitor: RunViewState | null = null;
let monitorTimer: number | null = null;

function goto(hash: string): void {
  if (location.hash === hash) {
    void route();
  } else {
    location.hash = hash;
  }
}

function fail(err: unknown): void {
  const message = err instanceof ApiError ? `${err.kind}: ${err.message}` : String(err);
  const banner = document.createElement("div");
  banner.className = "banner";
  banner.textContent = message;
  const dismiss = document.createElement("button");
  dismiss.textContent = "dismiss";
  dismiss.addEventListener("click", () => banner.remove());
  banner.append(" ", dismiss);
  app.prepend(banner);
}

async function showDashboard(query: string): Promise<void> {
  const [catalogs, results, recent] = await Promise.all([
    client.catalogs(),
    client.search(query),
    client.recent(),
  ]);
  app.innerHTML = renderDashboard(catalogs, results, recent, query);

  (app.querySelector("#add-catalog-form") as HTMLFormElement).addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(event.target as HTMLFormElement);
    client
      .addCatalog(String(data.get("name")), String(data.get("source")))
      .then(() => route())
      .catch(fail);
  });
  (app.querySelector("#search-form") as HTMLFormElement).addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(event.target as HTMLFormElement);
    goto(`#/?query=${encodeURIComponent(String(data.get("query") ?? ""))}`);
  });
  app.querySelectorAll("button[data-action]").forEach((button) => {
    button.addEventListener("click", () => {
      const el = button as HTMLButtonElement;
      const action = el.dataset.action;
      if (action === "sync-catalog") {
        client.syncCatalog(el.dataset.name!).then((task) => goto(`#/task/${task.id}`)).catch(fail);
      } else if (action === "remove-catalog") {
        client.removeCatalog(el.dataset.name!).then(() => route()).catch(fail);
      } else if (action === "rerun") {
        client.run(el.dataset.coords!, {}).then((task) => goto(`#/task/${task.id}`)).catch(fail);
      }
    });
  });
}

async function showSolution(coords: string): Promise<void> {
  const detail = await client.solution(coords);
  const form = buildParamFormModel(detail.manifest.args);
  app.innerHTML = renderSolutionDetail(detail, form);

  app.querySelectorAll("button[data-action]").forEach((button) => {
    const action = (button as HTMLButtonElement).dataset.action;
    button.addEventListener("click", () => {
      const submit =
        action === "install"
          ? client.install(coords)
          : action === "test"
            ? client.test(coords)
            : client.uninstall(coords);
      submit.then((task) => goto(`#/task/${task.id}`)).catch(fail);
    });
  });
  (app.querySelector("#run-form") as HTMLFormElement).addEventListener("submit", (event) => {
    event.preventDefault();
    const values = new Map<string, string>();
    const checked = new Map<string, boolean>();
    for (const field of form.fields) {
      const input = (event.target as HTMLFormElement).elements.namedItem(field.name) as HTMLInputElement | null;
      if (input === null) continue;
      if (field.widget === "checkbox") {
        checked.set(field.name, input.checked);
      } else {
        values.set(field.name, input.value);
      }
    }
    client
      .run(coords, collectFormValues(form, values, checked))
      .then((task) => goto(`#/task/${task.id}`))
      .catch(fail);
  });
}

async function showTask(taskId: string): Promise<void> {
  if (monitorTimer !== null) {
    clearTimeout(monitorTimer);
    monitorTimer = null;
  }
  const state = new RunViewState(taskId);
  activeMonitor = state;

  const repaint = () => {
    app.innerHTML = renderTaskMonitor(state.task, state.status, state.logLines, state.errorBanner);
    app.querySelector('button[data-action="dismiss"]')?.addEventListener("click", () => {
      state.dismissError();
      repaint();
    });
    const log = app.querySelector("#task-log");
    if (log) log.scrollTop = log.scrollHeight;
  };

  const step = async () => {
    if (activeMonitor !== state) return; // navigated away
    let keepPolling = false;
    try {
      keepPolling = await state.poll(client);
    } catch (err) {
      state.errorBanner = err instanceof ApiError ? `${err.kind}: ${err.message}` : String(err);
    }
    repaint();
    if (keepPolling && activeMonitor === state) {
      monitorTimer = window.setTimeout(step, 500);
    }
  };
  repaint();
  await step();
}

async function route(): Promise<void> {
  activeMonitor = null;
  const hash = location.hash || "#/";
  try {
    const solution = hash.match(/^#\/solution\/(.+)$/);
    const task = hash.match(/^#\/task\/([0-9a-f]+)$/);
    if (solution) {
      await showSolution(decodeURIComponent(solution[1]));
    } else if (task) {
      await showTask(task[1]);
    } else {
      const query = new URLSearchParams(hash.replace(/^#\/\??/, "")).get("query") ?? "";
      await showDashboard(query);
    }
  } catch (err) {
    app.innerHTML = `<p><a href="#/">&larr; collection</a></p>`;
    fail(err);
  }
}

window.addEventListener("hashchange", () => void route());
void route();

export { escapeHtml };
