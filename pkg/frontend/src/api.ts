// Typed client for the solcat service API. Pure transport: no business
// logic lives here or anywhere else client-side; every displayed value
// comes from a response body.

export interface CatalogInfo {
  name: string;
  source: string;
  kind: string;
  entries: number;
}

export interface SearchResult {
  catalog: string;
  coordinates: string;
  checksum: string;
  installed: string | null;
  title?: string;
  description?: string;
  tags?: string[];
}

export interface ArgumentDecl {
  name: string;
  kind: string;
  required: boolean;
  description: string;
  default?: unknown;
}

export interface ManifestView {
  coordinates: string;
  title: string;
  description: string;
  license: string;
  tags: string[];
  authors: { name: string; affiliation?: string }[];
  cite: { text: string; doi?: string }[];
  documentation: string[];
  args: ArgumentDecl[];
  environment: { channels: string[]; dependencies: string[] };
  hooks: Record<string, string[]>;
}

export interface InstallInfo {
  state: string;
  catalog_name: string;
  environment_name: string;
  install_path: string;
  installed_at: string | null;
  orphaned: boolean;
}

export interface SolutionDetail {
  manifest: ManifestView;
  provenance: string;
  install: InstallInfo | null;
}

export interface TaskInfo {
  id: string;
  kind: string;
  subject: string;
  state: string;
  exit_status: number | null;
  log_path: string;
  created_at: string;
  finished_at: string | null;
}

export interface LogSegment {
  data_b64: string;
  next_offset: number;
  eof: boolean;
}

export interface RecentRun {
  coordinates: string;
  started_at: string;
  finished_at: string | null;
  exit_status: number | null;
  args_rendered: string[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public kind: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    const response = await this.fetchFn(this.base + path, init);
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload.error ?? "Error", payload.message ?? "request failed");
    }
    return payload as T;
  }

  async catalogs(): Promise<CatalogInfo[]> {
    return (await this.request<{ catalogs: CatalogInfo[] }>("GET", "/api/catalogs")).catalogs;
  }

  async addCatalog(name: string, source: string): Promise<void> {
    await this.request("POST", "/api/catalogs", { name, source });
  }

  async removeCatalog(name: string): Promise<void> {
    await this.request("DELETE", `/api/catalogs/${encodeURIComponent(name)}`);
  }

  async syncCatalog(name: string): Promise<TaskInfo> {
    const body = await this.request<{ task: TaskInfo }>(
      "POST",
      `/api/catalogs/${encodeURIComponent(name)}/sync`,
    );
    return body.task;
  }

  async search(query: string): Promise<SearchResult[]> {
    const path = query ? `/api/solutions?query=${encodeURIComponent(query)}` : "/api/solutions";
    return (await this.request<{ results: SearchResult[] }>("GET", path)).results;
  }

  async solution(coords: string): Promise<SolutionDetail> {
    return this.request<SolutionDetail>("GET", `/api/solutions/${encodeURIComponent(coords)}`);
  }

  private async submit(coords: string, action: string, body?: unknown): Promise<TaskInfo> {
    const path = `/api/solutions/${encodeURIComponent(coords)}/${action}`;
    return (await this.request<{ task: TaskInfo }>("POST", path, body)).task;
  }

  install(coords: string): Promise<TaskInfo> {
    return this.submit(coords, "install");
  }

  uninstall(coords: string): Promise<TaskInfo> {
    return this.submit(coords, "uninstall");
  }

  test(coords: string): Promise<TaskInfo> {
    return this.submit(coords, "test");
  }

  run(coords: string, args: Record<string, string>): Promise<TaskInfo> {
    return this.submit(coords, "run", { args });
  }

  async recent(): Promise<RecentRun[]> {
    return (await this.request<{ recent: RecentRun[] }>("GET", "/api/recent")).recent;
  }

  async task(id: string): Promise<TaskInfo> {
    return (await this.request<{ task: TaskInfo }>("GET", `/api/tasks/${id}`)).task;
  }

  async taskLog(id: string, offset: number, maxLen: number): Promise<LogSegment> {
    return this.request<LogSegment>(
      "GET",
      `/api/tasks/${id}/log?offset=${offset}&max_len=${maxLen}`,
    );
  }
}

/** Decode a base64 log segment into raw bytes. */
export function decodeSegment(segment: LogSegment): Uint8Array {
  const binary = atob(segment.data_b64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}
