/** HTTP client for the targeting service.
 *
 * The panel talks to the service exclusively through this interface; it never
 * assembles SELL text on its own, so every serialization runs server-side.
 */

import type {
  CardJson,
  ExportResult,
  HealthResponse,
  SelectUsersResponse,
  TagInfo,
  TranslateResponse,
  ValidationReport,
} from "./types.js";

/** Non-2xx service response, carrying the service's stable error code. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
    public readonly path: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface RequestOptions {
  signal?: AbortSignal;
}

export interface ApiClient {
  translate(demand: string, opts?: RequestOptions): Promise<TranslateResponse>;
  parse(sell: string, opts?: RequestOptions): Promise<CardJson>;
  print(card: CardJson, opts?: RequestOptions): Promise<string>;
  validate(sell: string, opts?: RequestOptions): Promise<ValidationReport>;
  structure(sell: string, opts?: RequestOptions): Promise<string>;
  searchTags(q: string, n?: number, opts?: RequestOptions): Promise<TagInfo[]>;
  selectUsers(sell: string, opts?: RequestOptions): Promise<SelectUsersResponse>;
  exportSegment(
    sell: string,
    format: "csv" | "json",
    opts?: RequestOptions,
  ): Promise<ExportResult>;
  health(opts?: RequestOptions): Promise<HealthResponse>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const FALLBACK_FILENAME: Record<string, string> = {
  csv: "segment.csv",
  json: "segment.json",
};

export function filenameFromDisposition(
  disposition: string | null,
  fallback: string,
): string {
  if (!disposition) return fallback;
  const match = /filename=("?)([^";]+)\1/.exec(disposition);
  return match?.[2] ?? fallback;
}

/** fetch-backed client; `baseUrl` points at the service root. */
export class HttpApiClient implements ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(
    method: "GET" | "POST",
    path: string,
    body?: unknown,
    opts?: RequestOptions,
  ): Promise<Response> {
    const init: RequestInit = { method, signal: opts?.signal ?? null };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let code = `Http${response.status}`;
      let message = response.statusText || `HTTP ${response.status}`;
      let errorPath: unknown = null;
      try {
        const payload = await response.json();
        if (payload && typeof payload === "object") {
          code = String(payload.code ?? code);
          message = String(payload.message ?? message);
          errorPath = payload.path ?? null;
        }
      } catch {
        // non-JSON error body: keep the status-derived code/message
      }
      throw new ApiError(response.status, code, message, errorPath);
    }
    return response;
  }

  private async postJson<T>(
    path: string,
    body: unknown,
    opts?: RequestOptions,
  ): Promise<T> {
    const response = await this.request("POST", path, body, opts);
    return (await response.json()) as T;
  }

  async translate(demand: string, opts?: RequestOptions): Promise<TranslateResponse> {
    return this.postJson("/v1/translate", { demand }, opts);
  }

  async parse(sell: string, opts?: RequestOptions): Promise<CardJson> {
    const data = await this.postJson<{ card: CardJson }>("/v1/parse", { sell }, opts);
    return data.card;
  }

  async print(card: CardJson, opts?: RequestOptions): Promise<string> {
    const data = await this.postJson<{ sell: string }>("/v1/print", { card }, opts);
    return data.sell;
  }

  async validate(sell: string, opts?: RequestOptions): Promise<ValidationReport> {
    return this.postJson("/v1/validate", { sell }, opts);
  }

  async structure(sell: string, opts?: RequestOptions): Promise<string> {
    const data = await this.postJson<{ skeleton: string }>(
      "/v1/structure",
      { sell },
      opts,
    );
    return data.skeleton;
  }

  async searchTags(q: string, n?: number, opts?: RequestOptions): Promise<TagInfo[]> {
    const params = new URLSearchParams({ q });
    if (n !== undefined) params.set("n", String(n));
    const response = await this.request(
      "GET",
      `/v1/tags/search?${params.toString()}`,
      undefined,
      opts,
    );
    const data = (await response.json()) as { tags: TagInfo[] };
    return data.tags;
  }

  async selectUsers(sell: string, opts?: RequestOptions): Promise<SelectUsersResponse> {
    return this.postJson("/v1/select-users", { sell }, opts);
  }

  async exportSegment(
    sell: string,
    format: "csv" | "json",
    opts?: RequestOptions,
  ): Promise<ExportResult> {
    const response = await this.request("POST", "/v1/export", { sell, format }, opts);
    const content = await response.text();
    return {
      content,
      contentType: response.headers.get("content-type") ?? "",
      filename: filenameFromDisposition(
        response.headers.get("content-disposition"),
        FALLBACK_FILENAME[format] ?? "segment",
      ),
    };
  }

  async health(opts?: RequestOptions): Promise<HealthResponse> {
    const response = await this.request("GET", "/v1/health", undefined, opts);
    return (await response.json()) as HealthResponse;
  }
}
