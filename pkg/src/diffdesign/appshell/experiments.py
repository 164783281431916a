"""Canned experiment drivers over a trained checkpoint.

Each driver mirrors one of the study protocols (single-parameter fixing,
component fixing, prefix-fraction fixing, stability repeats, training-set
frequency and correlation scans, per-parameter range sweeps, and the
2^3 factorial with three-way ANOVA) and emits a JSON report plus a CSV table.
"""

from __future__ import annotations

import csv
import json
import os
import time

import numpy as np

from .. import diffusion, repaint
from ..designs import ConditionVector, mask_from_spec, synth_generate
from ..errors import ConfigError, DataError
from ..evalkit import (
    anova3,
    correlation_scan,
    doe_run,
    frequency_analysis,
    mape,
    median_pairwise_distance,
    mmd_rbf,
    stability_run,
    DoePlan,
)
from .bundles import load_bundle
from .manifests import RunManifest
from .runs import build_guidance

EXPERIMENTS = (
    "fix-scan",
    "component-scan",
    "prefix-scan",
    "stability",
    "frequency",
    "correlation",
    "range-scan",
    "doe",
)


class _Ctx:
    """Shared experiment context: bundle, oracle, reference, defaults."""

    def __init__(self, bundle, cfg):
        self.bundle = bundle
        self.cfg = cfg
        self.problem = bundle.problem()
        if self.problem is None:
            raise DataError("experiment drivers need a checkpoint bound to a builtin problem")
        self.train = synth_generate(
            self.problem,
            int(bundle.meta.get("train_rows", 2000)),
            int(bundle.meta.get("train_seed", 0)),
        )
        ref_cfg = cfg.get("reference")
        self.reference = (
            np.asarray(ref_cfg, dtype=float) if ref_cfg is not None else self.train.x[0]
        )
        self.target = float(cfg.get("target", self.problem.performance(self.reference)))
        self.n = int(cfg.get("n", 24))
        self.resample_u = int(cfg.get("resample_u", 4))
        self.seed = int(cfg.get("seed", 0))
        self.gamma = cfg.get("gamma")
        self.lambda_ = cfg.get("lambda")

    def condition(self):
        return ConditionVector(self.target, self.cfg.get("env") or {})

    def guidance(self, gamma=None, lambda_=None):
        return build_guidance(
            self.bundle,
            self.target,
            self.gamma if gamma is None else gamma,
            self.lambda_ if lambda_ is None else lambda_,
        )

    def generate(self, mask, seed=None, resample_u=None, gamma=None, lambda_=None, n=None):
        cfg = repaint.RepaintConfig(
            resample_u=resample_u or self.resample_u,
            seed=self.seed if seed is None else seed,
        )
        return repaint.repaint_sample(
            self.bundle.model,
            self.guidance(gamma, lambda_),
            self.reference,
            mask,
            self.condition(),
            cfg,
            self.n if n is None else n,
        )

    def sample_plain(self, seed=None, n=None):
        return diffusion.sample(
            self.bundle.model,
            self.condition(),
            self.n if n is None else n,
            guidance=self.guidance(),
            seed=self.seed if seed is None else seed,
        )

    def score(self, designs):
        perf = self.problem.performance(designs)
        return float(np.mean(perf)), mape(perf, self.target)

    def feasibility_rate(self, designs):
        return float(np.mean([self.problem.check(row)[0] for row in np.atleast_2d(designs)]))


def _default_components(dim):
    """Hull component groups when the schema is wide enough, else quarters."""
    if dim >= 44:
        return {"midship": "6-9", "bow": "10-18", "stern": "19-29", "bulb": "30-43"}
    q = dim // 4
    return {
        "A": f"0-{q - 1}",
        "B": f"{q}-{2 * q - 1}",
        "C": f"{2 * q}-{3 * q - 1}",
        "D": f"{3 * q}-{dim - 1}",
    }


def fix_scan(ctx: _Ctx):
    """Fix each parameter individually; one row per parameter."""
    params = ctx.cfg.get("parameters", list(range(ctx.bundle.schema.dim)))
    rows = []
    for i in params:
        designs = ctx.generate(mask_from_spec(ctx.bundle.schema, str(i)), seed=ctx.seed + i)
        perf_mean, err = ctx.score(designs)
        rows.append(
            {
                "fixed_parameter": int(i),
                "name": ctx.bundle.schema.names[i],
                "performance_mean": perf_mean,
                "mape_pct": err,
            }
        )
    return {"layout": "one row per individually fixed parameter", "rows": rows}


def component_scan(ctx: _Ctx):
    """Fix named component groups, singly and in pairs."""
    comps = ctx.cfg.get("components") or _default_components(ctx.bundle.schema.dim)
    names = list(comps)
    cases = [[n] for n in names]
    cases += [[a, b] for i, a in enumerate(names) for b in names[i + 1 :]]
    rows = []
    for case_idx, case in enumerate(cases):
        spec = ",".join(comps[name] for name in case)
        designs = ctx.generate(mask_from_spec(ctx.bundle.schema, spec), seed=ctx.seed + case_idx)
        perf_mean, err = ctx.score(designs)
        rows.append(
            {
                "fixed_components": "+".join(case),
                "mask_spec": spec,
                "performance_mean": perf_mean,
                "mape_pct": err,
            }
        )
    return {"layout": "one row per fixed component combination", "rows": rows}


def prefix_scan(ctx: _Ctx):
    """Fix the first k/8 of the vector for k = 1..7 over a pool of references.

    Mirrors the study protocol: several unseen reference designs, a batch of
    completions per reference each conditioned on its own performance value,
    MAPE against those values, and MMD of the pooled output vs training.
    """
    n_refs = int(ctx.cfg.get("references", 16))
    per_ref = int(ctx.cfg.get("per_reference", 8))
    held_out = synth_generate(
        ctx.problem, n_refs, int(ctx.bundle.meta.get("train_seed", 0)) + 7919
    )
    refs = np.repeat(held_out.x, per_ref, axis=0)
    targets = np.repeat(held_out.perf, per_ref)
    conds = targets[:, None]
    n = refs.shape[0]
    bandwidth = median_pairwise_distance(ctx.train.x)

    def evaluate(designs):
        perf = ctx.problem.performance(designs)
        err = float(np.mean(np.abs(perf - targets) / np.abs(targets)) * 100.0)
        return float(np.mean(perf)), err, mmd_rbf(designs, ctx.train.x, bandwidth=bandwidth).value

    baseline = diffusion.sample(
        ctx.bundle.model, conds, n, guidance=ctx.guidance(), seed=ctx.seed
    )
    base_mean, base_mape, base_mmd = evaluate(baseline)
    rows = []
    for k in range(1, 8):
        cfg = repaint.RepaintConfig(resample_u=ctx.resample_u, seed=ctx.seed + k)
        designs = repaint.repaint_sample(
            ctx.bundle.model,
            ctx.guidance(),
            refs,
            mask_from_spec(ctx.bundle.schema, f"first-{k}/8"),
            conds,
            cfg,
            n,
        )
        perf_mean, err, mmd = evaluate(designs)
        rows.append(
            {
                "fixed_area": f"first-{k}/8",
                "performance_mean": perf_mean,
                "mape_pct": err,
                "mmd_vs_training": mmd,
            }
        )
    return {
        "layout": "one row per prefix fraction; MAPE and MMD vs training",
        "baseline": {
            "fixed_area": "none",
            "performance_mean": base_mean,
            "mape_pct": base_mape,
            "mmd_vs_training": base_mmd,
        },
        "references": n_refs,
        "per_reference": per_ref,
        "bandwidth": bandwidth,
        "rows": rows,
    }


def stability(ctx: _Ctx):
    """Repeat generation with fixed conditions; std of MAPE and feasibility."""
    repeats = int(ctx.cfg.get("repeats", 30))
    cases = ctx.cfg.get("cases")
    if cases is None:
        comps = _default_components(ctx.bundle.schema.dim)
        first = next(iter(comps))
        cases = [
            {"name": "pretrained-model", "mask": ""},
            {"name": f"fixed-{first}", "mask": comps[first]},
            {"name": "fixed-parameter-0", "mask": "0"},
        ]
    rows = []
    for case in cases:
        mask = mask_from_spec(ctx.bundle.schema, case["mask"])

        def one(i, _mask=mask, _spec=case["mask"]):
            if _spec:
                designs = ctx.generate(_mask, seed=ctx.seed + 1000 + i)
            else:
                designs = ctx.sample_plain(seed=ctx.seed + 1000 + i)
            _, err = ctx.score(designs)
            return err, ctx.feasibility_rate(designs)

        res = stability_run(one, repeats)
        rows.append(
            {
                "case": case["name"],
                "mask_spec": case["mask"],
                "mape_mean": res.mape_mean,
                "mape_std": res.mape_std,
                "feasibility_mean": res.feasibility_mean,
                "feasibility_std": res.feasibility_std,
            }
        )
    return {"layout": "std of MAPE and feasibility over repeated runs", "repeats": repeats, "rows": rows}


def frequency(ctx: _Ctx):
    """Fix each parameter at its most and least frequent training value."""
    params = ctx.cfg.get("parameters", list(range(min(4, ctx.bundle.schema.dim))))
    bins = int(ctx.cfg.get("bins", 20))
    rows = []
    for i in params:
        freq = frequency_analysis(ctx.train.x[:, i], ctx.bundle.schema.bounds[i], bins=bins)
        case = {"parameter": int(i), "name": ctx.bundle.schema.names[i],
                "high_midpoint": freq.high_midpoint, "low_midpoint": freq.low_midpoint}
        for tag, value in (("high", freq.high_midpoint), ("low", freq.low_midpoint)):
            ref = ctx.reference.copy()
            ref[i] = value
            cfg = repaint.RepaintConfig(resample_u=ctx.resample_u, seed=ctx.seed + i)
            designs = repaint.repaint_sample(
                ctx.bundle.model, ctx.guidance(), ref,
                mask_from_spec(ctx.bundle.schema, str(i)), ctx.condition(), cfg, ctx.n,
            )
            case[f"mape_{tag}_pct"] = ctx.score(designs)[1]
        case["mape_difference_pct"] = case["mape_high_pct"] - case["mape_low_pct"]
        rows.append(case)
    return {"layout": "MAPE when fixing each parameter at its most/least frequent value", "rows": rows}


def correlation(ctx: _Ctx):
    """Pearson correlation of each training parameter with the performance label."""
    scan = correlation_scan(ctx.train.x, ctx.train.perf)
    rows = [
        {
            "parameter": i,
            "name": ctx.bundle.schema.names[i],
            "r": None if not scan.valid[i] else float(scan.r[i]),
            "p_value": None if not scan.valid[i] else float(scan.p[i]),
            "significant": bool(scan.significant()[i]),
        }
        for i in range(ctx.bundle.schema.dim)
    ]
    return {"layout": "per-parameter Pearson r and p-value vs performance", "rows": rows}


def range_scan(ctx: _Ctx):
    """Fix a parameter at 11 evenly spaced values across its range."""
    params = ctx.cfg.get("parameters", [0])
    points = int(ctx.cfg.get("points", 11))
    rows = []
    for i in params:
        lo, hi = ctx.bundle.schema.bounds[i]
        for j, value in enumerate(np.linspace(lo, hi, points)):
            ref = ctx.reference.copy()
            ref[i] = value
            cfg = repaint.RepaintConfig(resample_u=ctx.resample_u, seed=ctx.seed + 100 * i + j)
            designs = repaint.repaint_sample(
                ctx.bundle.model, ctx.guidance(), ref,
                mask_from_spec(ctx.bundle.schema, str(i)), ctx.condition(), cfg, ctx.n,
            )
            perf_mean, err = ctx.score(designs)
            rows.append(
                {
                    "parameter": int(i),
                    "fixed_value": float(value),
                    "performance_mean": perf_mean,
                    "mape_pct": err,
                    "feasibility_rate": ctx.feasibility_rate(designs),
                }
            )
    return {"layout": "MAPE across fixed values sweeping each parameter range", "rows": rows}


def doe(ctx: _Ctx):
    """2^3 factorial over (U, gamma, lambda) with a three-way ANOVA."""
    levels = ctx.cfg.get("levels") or {}
    plan = DoePlan(
        {
            "lambda": tuple(levels.get("lambda", (0.3, 0.7))),
            "gamma": tuple(levels.get("gamma", (0.3, 0.7))),
            "U": tuple(levels.get("U", (20, 30))),
        },
        replicates=int(ctx.cfg.get("replicates", 2)),
        seed=ctx.seed,
    )
    mask = mask_from_spec(ctx.bundle.schema, ctx.cfg.get("mask", "first-2/8"))

    def run_one(factors, seed):
        designs = ctx.generate(
            mask,
            seed=seed,
            resample_u=int(factors["U"]),
            gamma=float(factors["gamma"]) if ctx.bundle.classifier is not None else 0.0,
            lambda_=float(factors["lambda"]),
        )
        return ctx.score(designs)[1]

    rows = doe_run(plan, run_one)
    table = anova3(rows, alpha=float(ctx.cfg.get("alpha", 0.05)))
    return {
        "layout": "16-run factorial responses plus ANOVA (interactions included)",
        "plan": {"factors": {k: list(v) for k, v in plan.factors.items()},
                 "replicates": plan.replicates},
        "runs": [
            {**r["factors"], "replicate": r["replicate"], "run": r["run"],
             "seed": r["seed"], "response_mape_pct": r["response"], "failed": r["failed"]}
            for r in rows
        ],
        "anova": table.to_json(),
    }


_DRIVERS = {
    "fix-scan": fix_scan,
    "component-scan": component_scan,
    "prefix-scan": prefix_scan,
    "stability": stability,
    "frequency": frequency,
    "correlation": correlation,
    "range-scan": range_scan,
    "doe": doe,
}


def _write_csv(path, rows):
    if not rows:
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)


def run_experiment(args, out_dir):
    name = args["name"]
    if name not in _DRIVERS:
        raise ConfigError(f"unknown experiment {name!r}; have {EXPERIMENTS}")
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    cfg = dict(args.get("config") or {})
    ctx = _Ctx(load_bundle(args["ckpt"]), cfg)
    report = _DRIVERS[name](ctx)
    report["experiment"] = name
    report["config"] = cfg
    report["target"] = ctx.target
    json_path = os.path.join(out_dir, f"{name}.json")
    with open(json_path, "w") as fh:
        json.dump(report, fh, indent=2)
    _write_csv(os.path.join(out_dir, f"{name}.csv"), report.get("rows") or report.get("runs") or [])
    manifest = RunManifest(
        "experiment",
        args,
        seed=ctx.seed,
        config=cfg,
        inputs={"checkpoint": args["ckpt"]},
        outputs={"report": json_path},
    )
    manifest.wall_clock_s = time.perf_counter() - started
    manifest.save(os.path.join(out_dir, f"{name}.manifest.json"))
    return manifest
