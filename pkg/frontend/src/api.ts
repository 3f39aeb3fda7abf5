// Typed client for the inference service. Every number displayed in the UI
// comes from these responses verbatim; the client never derives entropy
// itself. A new request of the same kind supersedes the in-flight one.

export interface TopKEntry {
  code: string;
  probability: number;
}

export interface PredictResponse {
  schema_version: number;
  entropy_bits: number;
  step_entropies: number[];
  top_k: TopKEntry[];
  warnings: string[];
}

export interface WhatIfRow {
  code: string;
  posterior_entropy_bits: number;
  delta_bits: number;
}

export interface WhatIfResponse {
  schema_version: number;
  current_entropy_bits: number;
  ranked: WhatIfRow[];
  warnings: string[];
}

export class ApiError extends Error {
  constructor(message: string, readonly code: string) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  try {
    const body = await resp.json();
    return new ApiError(body.error.message, body.error.code);
  } catch {
    return new ApiError(`request failed with status ${resp.status}`, "http_error");
  }
}

export class ApiClient {
  private inflight = new Map<string, AbortController>();

  constructor(private readonly base = "") {}

  private async post<T>(kind: string, path: string, payload: unknown): Promise<T> {
    this.inflight.get(kind)?.abort();
    const controller = new AbortController();
    this.inflight.set(kind, controller);
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
      signal: controller.signal,
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  predict(procedures: string[], topK = 10): Promise<PredictResponse> {
    return this.post("predict", "/predict", { procedures, top_k: topK });
  }

  whatIf(prefix: string[], candidates?: string[]): Promise<WhatIfResponse> {
    const payload: Record<string, unknown> = { prefix };
    if (candidates) payload.candidates = candidates;
    return this.post("whatif", "/whatif", payload);
  }

  async searchProcedures(q: string, limit = 10): Promise<string[]> {
    const params = new URLSearchParams({ q, limit: String(limit) });
    const resp = await fetch(`${this.base}/vocab/procedures?${params}`);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()).codes as string[];
  }
}
