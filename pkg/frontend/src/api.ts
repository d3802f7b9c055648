// Typed client for the prediction service. Every call goes through fetch
// against same-origin /api paths (the dev server proxies them).

export interface TechniqueInfo {
  id: string;
  name: string | null;
}

export interface Prediction {
  technique_id: string;
  technique_name?: string;
  score: number;
  rank: number;
}

export interface PredictResponse {
  predictions: Prediction[];
  unknown_ids: string[];
}

export interface ModelInfo {
  trained_by: string;
  d: number;
  m: number;
  n: number;
  similarity: string;
}

export interface PredictParams {
  observed: string[];
  k: number;
  similarity: string | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let code = "http-error";
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as { error?: { code?: string; message?: string } };
    if (body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(response.status, code, message);
}

function predictBody(params: PredictParams): string {
  const body: Record<string, unknown> = { observed: params.observed, k: params.k };
  if (params.similarity) body.similarity = params.similarity;
  return JSON.stringify(body);
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async techniques(): Promise<TechniqueInfo[]> {
    const response = await fetch(this.url("/api/techniques"));
    await raiseForStatus(response);
    return (await response.json()) as TechniqueInfo[];
  }

  async modelInfo(): Promise<ModelInfo> {
    const response = await fetch(this.url("/api/model"));
    await raiseForStatus(response);
    return (await response.json()) as ModelInfo;
  }

  async predict(params: PredictParams, signal?: AbortSignal): Promise<PredictResponse> {
    const response = await fetch(this.url("/api/predict"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: predictBody(params),
      signal,
    });
    await raiseForStatus(response);
    return (await response.json()) as PredictResponse;
  }

  // Exports are rendered server-side so a downloaded file is byte-identical
  // to what the API produces for the same request.
  async exportCsv(params: PredictParams): Promise<ArrayBuffer> {
    const response = await fetch(this.url("/api/export/csv"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: predictBody(params),
    });
    await raiseForStatus(response);
    return response.arrayBuffer();
  }

  async exportNavigator(params: PredictParams, name: string): Promise<ArrayBuffer> {
    const body = { ...JSON.parse(predictBody(params)), name };
    const response = await fetch(this.url("/api/export/navigator"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    await raiseForStatus(response);
    return response.arrayBuffer();
  }
}
