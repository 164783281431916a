/** Thin HTTP client for the design-generation service.
 *
 * Every number the UI displays comes from these endpoints; the client never
 * computes designs itself.
 */

export interface ModelInfo {
  id: string;
  kind: "tabular" | "airfoil";
  schema: { names: string[]; bounds: [number, number][] };
  condition_names: string[];
  has_classifier: boolean;
  has_predictor: boolean;
  T: number;
  problem: string | null;
}

export interface GeneratePayload {
  model: string;
  condition: { target: number; env?: Record<string, number> };
  mask_spec: string;
  reference: number[] | null;
  n: number;
  seed: number;
  gamma?: number | null;
  lambda?: number | null;
  resample_u?: number;
}

export interface JobStatus {
  id: string;
  state: "queued" | "running" | "done" | "failed";
  progress: number;
  error: string | null;
  result: string | null;
}

export interface DesignItem {
  values: number[];
  predicted_performance: number | null;
  feasible: boolean | null;
  geometry:
    | { stations: number[]; upper: number[]; lower: number[] }
    | { parameters: { name: string; value: number }[] };
}

export interface GenerateResult {
  model: string;
  seed: number;
  mask_bits: number[];
  condition: { target: number; env: Record<string, number> };
  designs: DesignItem[];
  mape_vs_target?: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, init);
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && body.detail) detail = String(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

function post<T>(base: string, path: string, body: unknown): Promise<T> {
  return request<T>(base, path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export class Client {
  constructor(readonly base: string) {}

  listModels(): Promise<ModelInfo[]> {
    return request<ModelInfo[]>(this.base, "/api/models");
  }

  parseMask(model: string, spec: string): Promise<{ bits: number[] }> {
    return post(this.base, "/api/masks/parse", { model, spec });
  }

  generate(payload: GeneratePayload): Promise<{ job_id: string }> {
    return post(this.base, "/api/generate", payload);
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return request<JobStatus>(this.base, `/api/jobs/${jobId}`);
  }

  jobResult(jobId: string): Promise<GenerateResult> {
    return request<GenerateResult>(this.base, `/api/jobs/${jobId}/result`);
  }

  evaluate(body: {
    set_a: number[][] | number[];
    set_b?: number[][];
    metrics: string[];
    target?: number;
  }): Promise<Record<string, any>> {
    return post(this.base, "/api/evaluate", body);
  }

  /** Poll a job until it reaches a terminal state. */
  async waitForJob(
    jobId: string,
    opts: { intervalMs?: number; timeoutMs?: number; onProgress?: (p: number) => void } = {},
  ): Promise<JobStatus> {
    const interval = opts.intervalMs ?? 250;
    const deadline = Date.now() + (opts.timeoutMs ?? 300_000);
    for (;;) {
      const status = await this.jobStatus(jobId);
      opts.onProgress?.(status.progress);
      if (status.state === "done" || status.state === "failed") return status;
      if (Date.now() > deadline) throw new Error(`job ${jobId} timed out`);
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  }
}
