// Typed client for the icskit HTTP API. Every request the console makes
// goes through this module, so the set of routes the UI can touch is
// exactly the set listed here.

export interface ToolResponse<T = Record<string, unknown>> {
  status: "ok" | "error";
  result: T;
  output_text: string;
  evidence_id: string | null;
  elapsed_ms: number;
}

export interface FieldDetail {
  field: string;
  message: string;
}

export interface ErrorBody {
  status: string;
  result?: { error?: { type?: string; message?: string; code?: number } };
  error?: { type?: string; message?: string; details?: FieldDetail[] };
  retryable?: boolean;
}

export interface HealthInfo {
  status: string;
  version: string;
  llm_mode: "online" | "offline";
}

export interface ScanFinding {
  host: string;
  port: number;
  state: string;
  service_tag: string;
  evidence: string;
  timestamp: string;
}

export interface InboxItem {
  id: string;
  t: string;
  category: string;
  params: Record<string, unknown>;
  output: unknown;
}

export interface BrowseNode {
  node_id: string;
  browse_name: string;
  node_class: string;
  namespace_index: number;
  children: BrowseNode[];
}

export interface VariableProfile {
  node_id: string;
  display_name: string;
  data_type: string | null;
  readable: boolean;
  writable: boolean;
  value: { type: string; value: unknown } | null;
}

export interface ReportResult {
  status: string;
  report_id: string;
  audience: string;
  title: string;
  markdown: string;
}

/** The service answered with a non-2xx status. */
export class ApiError extends Error {
  constructor(
    public httpStatus: number,
    public body: ErrorBody,
  ) {
    super(describeError(httpStatus, body));
  }

  get fieldDetails(): FieldDetail[] {
    return this.body.error?.details ?? [];
  }
}

/** The service itself could not be reached (network layer). */
export class ServiceDownError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
  }
}

function describeError(httpStatus: number, body: ErrorBody): string {
  const err = body.result?.error ?? body.error;
  if (err?.message) return `${err.type ?? "error"}: ${err.message}`;
  if (err?.type) return err.type;
  return `HTTP ${httpStatus}`;
}

export class ApiClient {
  constructor(public baseUrl = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new ServiceDownError(cause);
    }
    if (!response.ok) {
      let parsed: ErrorBody;
      try {
        parsed = (await response.json()) as ErrorBody;
      } catch {
        parsed = { status: "error" };
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthInfo> {
    return this.request<HealthInfo>("GET", "/healthz");
  }

  scan(params: Record<string, unknown>): Promise<ToolResponse<{ findings: ScanFinding[]; open_count: number }>> {
    return this.request("POST", "/api/scan", params);
  }

  modbus(action: "read" | "write" | "enumerate" | "scan-units" | "scan-range",
         params: Record<string, unknown>): Promise<ToolResponse> {
    return this.request("POST", `/api/modbus/${action}`, params);
  }

  opcua(action: "endpoints" | "browse" | "enumerate" | "read" | "write",
        params: Record<string, unknown>): Promise<ToolResponse> {
    return this.request("POST", `/api/opcua/${action}`, params);
  }

  inboxList(category?: string): Promise<{ status: string; count: number; items: InboxItem[] }> {
    const query = category ? `?category=${encodeURIComponent(category)}` : "";
    return this.request("GET", `/api/inbox${query}`);
  }

  inboxClear(): Promise<{ status: string; cleared: boolean }> {
    return this.request("DELETE", "/api/inbox");
  }

  generateReport(body: { audience: string; title: string; model?: string; max_items?: number }): Promise<ReportResult> {
    return this.request("POST", "/api/report", body);
  }

  async downloadReport(reportId: string): Promise<Uint8Array> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}/api/report/${reportId}/download`);
    } catch (cause) {
      throw new ServiceDownError(cause);
    }
    if (!response.ok) {
      throw new ApiError(response.status, { status: "error" });
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}
