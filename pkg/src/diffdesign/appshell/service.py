"""HTTP service backing the mask studio UI.

Generation is asynchronous: POST /api/generate returns a job id, the client
polls GET /api/jobs/{id}, and fetches the finished designs from
GET /api/jobs/{id}/result. Checkpoints are never mutated; each job owns its
seeded random streams, so concurrent jobs on one model stay independent and
reproducible.
"""

from __future__ import annotations

import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .. import diffusion, repaint
from ..designs import ConditionVector, cosine_stations, mask_from_spec, MASK_GRAMMAR_HINT
from ..errors import DiffDesignError, MaskSpecError
from ..evalkit import mape, mmd_rbf, prd
from .bundles import load_bundle
from .runs import build_guidance


class GenerateRequest(BaseModel):
    model: str
    condition: dict = Field(default_factory=dict)  # {"target": float, "env": {...}}
    mask_spec: str = ""
    reference: list | None = None
    n: int = 8
    seed: int = 0
    gamma: float | None = None
    lambda_: float | None = Field(default=None, alias="lambda")
    resample_u: int = 20

    model_config = {"populate_by_name": True, "protected_namespaces": ()}


class EvaluateRequest(BaseModel):
    set_a: list
    set_b: list | None = None
    metrics: list[str] = Field(default_factory=lambda: ["mmd"])
    target: float | None = None
    seed: int = 0


class MaskParseRequest(BaseModel):
    spec: str = ""
    model: str | None = None
    dim: int | None = None

    model_config = {"protected_namespaces": ()}


class JobStore:
    def __init__(self, workers=2):
        self._lock = threading.Lock()
        self._jobs = {}
        self._pool = ThreadPoolExecutor(max_workers=workers)

    def submit(self, fn):
        job_id = uuid.uuid4().hex
        with self._lock:
            self._jobs[job_id] = {"id": job_id, "state": "queued", "progress": 0.0,
                                  "result": None, "error": None}

        def progress(frac):
            with self._lock:
                self._jobs[job_id]["progress"] = float(frac)

        def work():
            with self._lock:
                self._jobs[job_id]["state"] = "running"
            try:
                result = fn(progress)
            except Exception as exc:
                with self._lock:
                    self._jobs[job_id].update(state="failed", error=str(exc))
                return
            with self._lock:
                self._jobs[job_id].update(state="done", progress=1.0, result=result)

        self._pool.submit(work)
        return job_id

    def get(self, job_id):
        with self._lock:
            job = self._jobs.get(job_id)
            return None if job is None else dict(job)


def _geometry_payload(bundle, design):
    """Per-design geometry view: polyline for airfoils, named table otherwise."""
    if bundle.kind == "airfoil":
        n = bundle.schema.dim // 2
        stations = cosine_stations(n)
        return {
            "stations": stations.tolist(),
            "upper": design[:n].tolist(),
            "lower": design[n:].tolist(),
        }
    return {
        "parameters": [
            {"name": name, "value": float(v)} for name, v in zip(bundle.schema.names, design)
        ]
    }


def create_app(models_dir) -> FastAPI:
    app = FastAPI(title="diffdesign service")
    jobs = JobStore()
    registry = {}
    registry_lock = threading.Lock()

    def get_bundle(name):
        with registry_lock:
            if name in registry:
                return registry[name]
        path = os.path.join(models_dir, name)
        if not os.path.isdir(path) or not os.path.exists(os.path.join(path, "meta.json")):
            raise HTTPException(status_code=404, detail=f"unknown model {name!r}")
        bundle = load_bundle(path)
        with registry_lock:
            registry[name] = bundle
        return bundle

    @app.get("/api/models")
    def list_models():
        out = []
        for name in sorted(os.listdir(models_dir)) if os.path.isdir(models_dir) else []:
            if not os.path.exists(os.path.join(models_dir, name, "meta.json")):
                continue
            b = get_bundle(name)
            out.append(
                {
                    "id": name,
                    "kind": b.kind,
                    "schema": b.schema.to_json(),
                    "condition_names": list(b.model.cond_names),
                    "has_classifier": b.classifier is not None,
                    "has_predictor": b.predictor is not None,
                    "T": b.model.schedule.T,
                    "problem": b.problem_name,
                }
            )
        return out

    @app.post("/api/masks/parse")
    def parse_mask(req: MaskParseRequest):
        if req.dim is not None:
            dim = req.dim
        elif req.model is not None:
            dim = get_bundle(req.model).schema.dim
        else:
            raise HTTPException(status_code=422, detail="need model or dim")
        try:
            bits = mask_from_spec(dim, req.spec)
        except MaskSpecError as exc:
            raise HTTPException(status_code=422, detail=f"{exc}")
        return {"spec": req.spec, "dim": dim, "bits": bits.astype(int).tolist()}

    @app.post("/api/generate")
    def generate(req: GenerateRequest):
        bundle = get_bundle(req.model)
        try:
            mask = mask_from_spec(bundle.schema, req.mask_spec)
        except MaskSpecError as exc:
            raise HTTPException(status_code=422, detail=f"{exc}")
        target = float(req.condition.get("target", 0.0))
        cond = ConditionVector(target, req.condition.get("env") or {})
        guidance = build_guidance(bundle, target, req.gamma, req.lambda_)
        use_repaint = bool(mask.any())
        if use_repaint and req.reference is None:
            raise HTTPException(status_code=422, detail="mask set but no reference design given")
        reference = None if req.reference is None else np.asarray(req.reference, dtype=float)
        if reference is not None and reference.shape != (bundle.schema.dim,):
            raise HTTPException(status_code=422, detail=f"reference must have dim {bundle.schema.dim}")
        n, seed, resample_u = req.n, req.seed, req.resample_u
        mask_bits = mask.astype(int).tolist()

        def work(progress):
            if use_repaint:
                cfg = repaint.RepaintConfig(resample_u=resample_u, seed=seed)
                designs = repaint.repaint_sample(
                    bundle.model, guidance, reference, mask, cond, cfg, n, progress_cb=progress
                )
            else:
                designs = diffusion.sample(
                    bundle.model, cond, n, guidance=guidance, seed=seed, progress_cb=progress
                )
            perf = bundle.predicted_performance(designs)
            feas = bundle.feasibility(designs)
            items = []
            for i in range(designs.shape[0]):
                items.append(
                    {
                        "values": designs[i].tolist(),
                        "predicted_performance": None if perf is None else float(perf[i]),
                        "feasible": None if feas is None else bool(feas[i]),
                        "geometry": _geometry_payload(bundle, designs[i]),
                    }
                )
            result = {
                "model": req.model,
                "seed": seed,
                "mask_bits": mask_bits,
                "condition": {"target": target, "env": req.condition.get("env") or {}},
                "designs": items,
            }
            if perf is not None and target != 0:
                result["mape_vs_target"] = mape(perf, target)
            return result

        return {"job_id": jobs.submit(work)}

    @app.get("/api/jobs/{job_id}")
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return {
            "id": job["id"],
            "state": job["state"],
            "progress": job["progress"],
            "error": job["error"],
            "result": f"/api/jobs/{job_id}/result" if job["state"] == "done" else None,
        }

    @app.get("/api/jobs/{job_id}/result")
    def job_result(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if job["state"] != "done":
            raise HTTPException(status_code=409, detail=f"job is {job['state']}, not done")
        return job["result"]

    @app.post("/api/evaluate")
    def evaluate(req: EvaluateRequest):
        a = np.asarray(req.set_a, dtype=float)
        report = {}
        try:
            for metric in req.metrics:
                if metric == "mape":
                    if req.target is None:
                        raise HTTPException(status_code=422, detail="mape needs a target")
                    report["mape"] = mape(a.reshape(-1) if a.ndim == 1 else a[:, 0], req.target)
                elif metric == "mmd":
                    if req.set_b is None:
                        raise HTTPException(status_code=422, detail="mmd needs set_b")
                    b = np.asarray(req.set_b, dtype=float)
                    res = mmd_rbf(np.atleast_2d(a), np.atleast_2d(b))
                    report["mmd"] = {"value": res.value, "bandwidth": res.bandwidth}
                elif metric == "prd":
                    if req.set_b is None:
                        raise HTTPException(status_code=422, detail="prd needs set_b")
                    b = np.asarray(req.set_b, dtype=float)
                    k = min(20, len(a), len(b))
                    curve = prd(np.atleast_2d(a), np.atleast_2d(b), k=k, seed=req.seed)
                    report["prd"] = {
                        "k": k,
                        "precision": curve.precision.tolist(),
                        "recall": curve.recall.tolist(),
                    }
                else:
                    raise HTTPException(status_code=422, detail=f"unknown metric {metric!r}")
        except DiffDesignError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return report

    @app.get("/api/mask-grammar")
    def mask_grammar():
        return {"hint": MASK_GRAMMAR_HINT}

    return app


def serve(models_dir, host="127.0.0.1", port=8787):
    import uvicorn

    uvicorn.run(create_app(models_dir), host=host, port=port)
