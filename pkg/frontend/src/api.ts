// Thin fetch client over the generation service's JSON contract.

import type {
  ExportFormat,
  ExportResult,
  GenerateResponse,
  HealthResponse,
  WireMCQItem,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export class NetworkError extends Error {}

export interface ApiClient {
  generate(text: string, count: number): Promise<GenerateResponse>;
  exportQuiz(items: WireMCQItem[], format: ExportFormat): Promise<ExportResult>;
  health(): Promise<HealthResponse>;
}

declare global {
  // Runtime configuration: set window.LEAF_API_BASE before loading the app.
  // eslint-disable-next-line no-var
  var LEAF_API_BASE: string | undefined;
}

async function parseErrorBody(res: Response): Promise<ApiError> {
  let code = "http_error";
  let message = `Request failed with status ${res.status}.`;
  try {
    const body = await res.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
      if (Array.isArray(body.error.fields) && body.error.fields.length > 0) {
        const field = body.error.fields[0];
        message = `${message} (${field.loc.join(".")}: ${field.message})`;
      }
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(res.status, code, message);
}

export function createApiClient(baseUrl?: string): ApiClient {
  const base = baseUrl ?? globalThis.LEAF_API_BASE ?? "";

  async function request(path: string, init?: RequestInit): Promise<Response> {
    let res: Response;
    try {
      res = await fetch(base + path, init);
    } catch {
      throw new NetworkError("Cannot reach the generation server.");
    }
    if (!res.ok) throw await parseErrorBody(res);
    return res;
  }

  function post(path: string, body: unknown): Promise<Response> {
    return request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  return {
    async generate(text, count) {
      const res = await post("/api/v1/generate", { text, count });
      return (await res.json()) as GenerateResponse;
    },
    async exportQuiz(items, format) {
      const res = await post("/api/v1/export", { items, format });
      const disposition = res.headers.get("content-disposition") ?? "";
      const match = /filename="([^"]+)"/.exec(disposition);
      return {
        content: await res.text(),
        filename: match ? match[1] : `quiz.${format}`,
        mediaType: res.headers.get("content-type") ?? "application/octet-stream",
      };
    },
    async health() {
      const res = await request("/api/v1/health");
      return (await res.json()) as HealthResponse;
    },
  };
}
