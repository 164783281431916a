/** In-process mock of the generation service for e2e smoke tests.
 *
 * Implements the documented API surface: model listing, mask-spec parsing by
 * the published grammar, asynchronous generate jobs with deterministic
 * seed-driven results, result payloads with geometry, and the evaluate
 * endpoint. No diffusion math; values come from a seeded PRNG so identical
 * requests yield identical payloads.
 */

import http from "node:http";
import { AddressInfo } from "node:net";

const COMPONENTS: Record<string, [number, number]> = {
  midship: [6, 9],
  bow: [10, 18],
  stern: [19, 29],
  bulb: [30, 43],
};

export function parseMaskSpec(dim: number, spec: string): number[] {
  const bits = new Array(dim).fill(0);
  const trimmed = (spec ?? "").trim();
  if (!trimmed) return bits;
  for (const raw of trimmed.split(",")) {
    const token = raw.trim().toLowerCase();
    if (!token) throw new Error("empty token in mask spec");
    let lo: number;
    let hi: number;
    const prefix = token.match(/^first-(\d+)\/8$/);
    const range = token.match(/^(\d+)-(\d+)$/);
    const single = token.match(/^(\d+)$/);
    if (token in COMPONENTS) {
      [lo, hi] = COMPONENTS[token];
    } else if (prefix) {
      const k = Number(prefix[1]);
      if (k < 1 || k > 8) throw new Error(`prefix fraction out of range: ${token}`);
      for (let i = 0; i < Math.floor((dim * k) / 8); i++) bits[i] = 1;
      continue;
    } else if (range) {
      lo = Number(range[1]);
      hi = Number(range[2]);
      if (lo > hi) throw new Error(`reversed range ${token}`);
    } else if (single) {
      lo = hi = Number(single[1]);
    } else {
      throw new Error(`bad token ${token}; mask spec grammar: ranges, indices, components, first-k/8`);
    }
    if (hi >= dim) throw new Error(`index ${hi} out of range for dim ${dim}`);
    for (let i = lo; i <= hi; i++) bits[i] = 1;
  }
  return bits;
}

/** Small deterministic PRNG so generate results are reproducible per seed. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface MockModel {
  id: string;
  kind: "tabular" | "airfoil";
  dim: number;
}

export interface MockServer {
  base: string;
  close(): Promise<void>;
  jobsSeen(): number;
}

export function startMockServer(models: MockModel[]): Promise<MockServer> {
  const jobs = new Map<string, any>();
  let jobCounter = 0;

  const makeResult = (model: MockModel, body: any) => {
    const bits = parseMaskSpec(model.dim, body.mask_spec ?? "");
    const rng = mulberry32((body.seed ?? 0) + 1);
    const target = body.condition?.target ?? 0;
    const designs = [];
    for (let i = 0; i < (body.n ?? 4); i++) {
      const values = [];
      for (let j = 0; j < model.dim; j++) {
        values.push(
          bits[j] && body.reference ? body.reference[j] : Math.round(rng() * 1e6) / 1e6,
        );
      }
      const predicted = target * (0.9 + 0.2 * rng());
      const half = model.dim / 2;
      const geometry =
        model.kind === "airfoil"
          ? {
              stations: Array.from({ length: half }, (_, j) => j / (half - 1)),
              upper: values.slice(0, half),
              lower: values.slice(half),
            }
          : { parameters: values.map((v, j) => ({ name: `x${j}`, value: v })) };
      designs.push({
        values,
        predicted_performance: predicted,
        feasible: rng() > 0.1,
        geometry,
      });
    }
    const perfs = designs.map((d) => d.predicted_performance);
    const mape =
      target === 0
        ? undefined
        : (perfs.reduce((acc, v) => acc + Math.abs(v - target) / Math.abs(target), 0) /
            perfs.length) *
          100;
    return {
      model: model.id,
      seed: body.seed ?? 0,
      mask_bits: bits,
      condition: { target, env: body.condition?.env ?? {} },
      designs,
      ...(mape === undefined ? {} : { mape_vs_target: mape }),
    };
  };

  const server = http.createServer((req, res) => {
    const send = (status: number, body: unknown) => {
      res.writeHead(status, { "Content-Type": "application/json" });
      res.end(JSON.stringify(body));
    };
    let raw = "";
    req.on("data", (chunk) => (raw += chunk));
    req.on("end", () => {
      const url = req.url ?? "";
      const body = raw ? JSON.parse(raw) : {};
      if (req.method === "GET" && url === "/api/models") {
        return send(
          200,
          models.map((m) => ({
            id: m.id,
            kind: m.kind,
            schema: {
              names: Array.from({ length: m.dim }, (_, i) => `x${i}`),
              bounds: Array.from({ length: m.dim }, () => [0, 1]),
            },
            condition_names: ["target"],
            has_classifier: m.kind === "tabular",
            has_predictor: true,
            T: 200,
            problem: null,
          })),
        );
      }
      if (req.method === "POST" && url === "/api/masks/parse") {
        const model = models.find((m) => m.id === body.model);
        const dim = body.dim ?? model?.dim;
        if (dim === undefined) return send(422, { detail: "need model or dim" });
        try {
          return send(200, { spec: body.spec, dim, bits: parseMaskSpec(dim, body.spec) });
        } catch (err) {
          return send(422, { detail: String(err instanceof Error ? err.message : err) });
        }
      }
      if (req.method === "POST" && url === "/api/generate") {
        const model = models.find((m) => m.id === body.model);
        if (!model) return send(404, { detail: `unknown model ${body.model}` });
        try {
          parseMaskSpec(model.dim, body.mask_spec ?? "");
        } catch (err) {
          return send(422, { detail: String(err instanceof Error ? err.message : err) });
        }
        const id = `job-${jobCounter++}`;
        jobs.set(id, { state: "running", progress: 0.5, result: null });
        // jobs complete asynchronously, like the real service
        setTimeout(() => {
          jobs.set(id, { state: "done", progress: 1, result: makeResult(model, body) });
        }, 20);
        return send(200, { job_id: id });
      }
      const jobMatch = url.match(/^\/api\/jobs\/([^/]+)(\/result)?$/);
      if (req.method === "GET" && jobMatch) {
        const job = jobs.get(jobMatch[1]);
        if (!job) return send(404, { detail: "unknown job" });
        if (jobMatch[2]) {
          if (job.state !== "done") return send(409, { detail: `job is ${job.state}` });
          return send(200, job.result);
        }
        return send(200, {
          id: jobMatch[1],
          state: job.state,
          progress: job.progress,
          error: null,
          result: job.state === "done" ? `/api/jobs/${jobMatch[1]}/result` : null,
        });
      }
      if (req.method === "POST" && url === "/api/evaluate") {
        const values: number[] = (body.set_a as number[][] | number[]).map((row: any) =>
          Array.isArray(row) ? row[0] : row,
        );
        const target = body.target ?? 0;
        const mape =
          (values.reduce((acc, v) => acc + Math.abs(v - target) / Math.abs(target), 0) /
            values.length) *
          100;
        return send(200, { mape });
      }
      send(404, { detail: `no route ${req.method} ${url}` });
    });
  });

  return new Promise((resolve) => {
    server.listen(0, "127.0.0.1", () => {
      const addr = server.address() as AddressInfo;
      resolve({
        base: `http://127.0.0.1:${addr.port}`,
        close: () => new Promise((r) => server.close(() => r())),
        jobsSeen: () => jobCounter,
      });
    });
  });
}
