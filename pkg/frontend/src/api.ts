// Minimal typed client for the audit service. The fetch implementation is
// injectable so tests can run against an in-memory fixture service.

import type {
  CfRequest,
  CfResponse,
  ModelRecord,
  ModelSummary,
  PredictResponse,
  ServiceError,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(response: Response): Promise<never> {
  let body: Partial<ServiceError> = {};
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; fall through to the status line
  }
  throw new ApiError(
    response.status,
    body.code ?? "error",
    body.message ?? `request failed with status ${response.status}`,
  );
}

export class AuditApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  private async post<T>(
    path: string,
    body: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  async listModels(): Promise<ModelSummary[]> {
    const body = await this.get<{ models: ModelSummary[] }>("/models");
    return body.models;
  }

  getModel(modelId: string, version: number): Promise<ModelRecord> {
    return this.get(`/models/${modelId}/${version}`);
  }

  predict(
    modelId: string,
    version: number,
    x: number[],
  ): Promise<PredictResponse> {
    return this.post(`/models/${modelId}/${version}/predict`, { x });
  }

  counterfactuals(
    modelId: string,
    version: number,
    request: CfRequest,
    signal?: AbortSignal,
  ): Promise<CfResponse> {
    return this.post(
      `/models/${modelId}/${version}/counterfactuals`,
      request,
      signal,
    );
  }
}
