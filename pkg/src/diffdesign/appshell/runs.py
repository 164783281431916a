"""Shared run entry points behind both the CLI and the HTTP service.

Every run takes a plain args dict and produces output files plus a
RunManifest; re-running a manifest's command with its stored args reproduces
the outputs byte-for-byte.
"""

from __future__ import annotations

import json
import os
import time

import numpy as np

from .. import diffusion, repaint
from ..designs import (
    ConditionVector,
    DesignSchema,
    get_problem,
    load_tabular,
    mask_from_spec,
    save_tabular,
    synth_generate,
)
from ..errors import ConfigError, DataError
from ..evalkit import mape, mmd_rbf, prd
from ..guidance import (
    GuidanceConfig,
    GuidanceTrainConfig,
    train_classifier,
    train_predictor,
)
from .bundles import ModelBundle, load_bundle, save_bundle
from .manifests import RunManifest

DEFAULT_GAMMA = 0.7
DEFAULT_LAMBDA = 0.3


def parse_env(text):
    """'k=v,k2=v2' -> dict of floats."""
    env = {}
    if not text:
        return env
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad env entry {part!r}; expected k=v")
        k, v = part.split("=", 1)
        env[k.strip()] = float(v)
    return env


def build_guidance(bundle: ModelBundle, target, gamma=None, lambda_=None, coupling="paper"):
    """Guidance wiring with bundle-aware defaults.

    gamma defaults to 0.7 when a classifier is present (else 0); lambda to 0.3
    when a predictor and target are present (else 0).
    """
    if gamma is None:
        gamma = DEFAULT_GAMMA if bundle.classifier is not None else 0.0
    if lambda_ is None:
        lambda_ = DEFAULT_LAMBDA if (bundle.predictor is not None and target is not None) else 0.0
    return GuidanceConfig(
        gamma=float(gamma),
        lambda_=float(lambda_),
        target=target,
        classifier=bundle.classifier,
        predictor=bundle.predictor,
        noise_coupling=coupling,
    )


def _write_designs(path, bundle: ModelBundle, designs):
    perf = bundle.predicted_performance(designs)
    feas = bundle.feasibility(designs)
    save_tabular(
        path,
        bundle.schema,
        designs,
        perf=perf,
        feasible=None if feas is None else feas.astype(float),
    )
    return perf, feas


def run_train(args, out_dir):
    """Train a model (plus guidance nets) from a dataset CSV or builtin problem."""
    os.makedirs(out_dir, exist_ok=True)
    started = time.perf_counter()
    cfg = dict(args.get("config") or {})
    seed = int(cfg.get("seed", 0))

    problem_name = args.get("problem") or cfg.get("problem")
    problem_args = cfg.get("problem_args") or {}
    if args.get("dataset"):
        schema = DesignSchema.load(args["schema"])
        ds = load_tabular(args["dataset"], schema)
    elif problem_name:
        problem = get_problem(problem_name, **problem_args)
        schema = problem.schema
        ds = synth_generate(problem, int(cfg.get("train_rows", 2000)), seed)
    else:
        raise ConfigError("need either a dataset CSV or a builtin problem name")

    sched = diffusion.build_schedule(
        int(cfg.get("T", diffusion.DEFAULT_T)),
        float(cfg.get("beta_min", diffusion.DEFAULT_BETA_MIN)),
        float(cfg.get("beta_max", diffusion.DEFAULT_BETA_MAX)),
    )
    model = diffusion.build_model(
        schema.dim,
        cond_names=("target", *cfg.get("env_names", [])),
        schedule=sched,
        width=int(cfg.get("width", 128)),
        blocks=int(cfg.get("blocks", 2)),
        embed_dim=int(cfg.get("embed_dim", 128)),
        seed=seed,
    )
    tcfg = diffusion.TrainConfig(
        epochs=int(cfg.get("epochs", 100)),
        batch_size=int(cfg.get("batch_size", 128)),
        lr=float(cfg.get("lr", 1e-3)),
        lr_final=cfg.get("lr_final"),
        seed=seed,
    )
    records = diffusion.train(model, ds.x, ds.perf[:, None], tcfg)

    predictor = classifier = None
    gcfg = GuidanceTrainConfig(
        epochs=int(cfg.get("guidance_epochs", 120)),
        batch_size=int(cfg.get("batch_size", 128)),
        lr=float(cfg.get("lr", 1e-3)),
        seed=seed,
        time_dim=int(cfg.get("guidance_time_dim", model.embed_dim)),
        schedule=sched,
        predictor_width=int(cfg.get("predictor_width", 128)),
        classifier_hidden=tuple(cfg.get("classifier_hidden", (128, 64, 64, 64))),
    )
    if cfg.get("train_predictor", True):
        predictor = train_predictor(ds.x, ds.perf, gcfg, x_stats=model.x_stats)
    want_classifier = cfg.get("train_classifier", "auto")  # auto: train when labels allow
    if want_classifier is not False:
        clf_ds = None
        if problem_name == "synthetic-16":
            # the training set is all-feasible by construction; classifier data
            # comes from unfiltered box draws labeled by the oracle
            clf_ds = synth_generate(
                get_problem(problem_name, **problem_args),
                int(cfg.get("train_rows", 2000)),
                seed + 1,
                feasible_only=False,
            )
        elif ds.feasible is not None and len(np.unique(ds.feasible)) > 1:
            clf_ds = ds
        if clf_ds is not None:
            classifier = train_classifier(clf_ds.x, clf_ds.feasible, gcfg, x_stats=model.x_stats)
        elif want_classifier is True:
            raise DataError("classifier requested but no two-class feasibility labels available")

    bundle = ModelBundle(
        model=model,
        schema=schema,
        kind=cfg.get("kind", "airfoil" if problem_name == "synthetic-airfoil" else "tabular"),
        predictor=predictor,
        classifier=classifier,
        problem_name=problem_name,
        problem_args=problem_args,
        meta={
            "train_rows": len(ds),
            "train_seed": seed,
            "dataset_path": args.get("dataset"),
            "loss_curve": [r.mean_loss for r in records],
        },
    )
    save_bundle(out_dir, bundle)
    manifest = RunManifest(
        "train",
        args,
        seed=seed,
        config=cfg,
        inputs={"dataset": args.get("dataset"), "problem": problem_name},
        outputs={"checkpoint": out_dir},
        metrics={
            "final_loss": records[-1].mean_loss if records else None,
            "predictor_mape": predictor.holdout_mape if predictor else None,
            "predictor_r2": predictor.holdout_r2 if predictor else None,
            "classifier_accuracy": classifier.holdout_accuracy if classifier else None,
        },
    )
    manifest.wall_clock_s = time.perf_counter() - started
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest


def _resolve_out(args, out_dir, default_name):
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        return os.path.join(out_dir, os.path.basename(args.get("out") or default_name))
    return args.get("out") or default_name


def run_sample(args, out_dir=None):
    """Guided generation: n designs for a target condition, written as CSV."""
    started = time.perf_counter()
    bundle = load_bundle(args["ckpt"])
    seed = int(args.get("seed", 0))
    n = int(args.get("n", 16))
    target = float(args["target"])
    cond = ConditionVector(target, parse_env(args.get("env")))
    guidance = build_guidance(
        bundle, target, args.get("gamma"), args.get("lambda"), args.get("coupling", "paper")
    )
    designs = diffusion.sample(bundle.model, cond, n, guidance=guidance, seed=seed)
    out_path = _resolve_out(args, out_dir, "designs.csv")
    perf, feas = _write_designs(out_path, bundle, designs)
    metrics = {}
    if perf is not None:
        metrics["mape_vs_target"] = mape(perf, target)
    if feas is not None:
        metrics["feasibility_rate"] = float(np.mean(feas))
    manifest = RunManifest(
        "sample",
        args,
        seed=seed,
        config={
            "T": bundle.model.schedule.T,
            "gamma": guidance.gamma,
            "lambda": guidance.lambda_,
            "condition": {"target": target, "env": parse_env(args.get("env"))},
            "n": n,
        },
        inputs={"checkpoint": args["ckpt"]},
        outputs={"designs": out_path},
        metrics=metrics,
    )
    manifest.wall_clock_s = time.perf_counter() - started
    manifest.save(out_path + ".manifest.json")
    return manifest


def _load_reference(args, bundle):
    ref = args.get("reference")
    if isinstance(ref, (list, tuple)):
        return np.asarray(ref, dtype=float)
    row = int(args.get("reference_row", 0))
    ds = load_tabular(ref, bundle.schema)
    if row >= len(ds):
        raise DataError(f"reference row {row} out of range for {ref}")
    return ds.x[row]


def run_repaint(args, out_dir=None):
    """Design completion: fix masked coordinates of a reference, generate the rest."""
    started = time.perf_counter()
    bundle = load_bundle(args["ckpt"])
    seed = int(args.get("seed", 0))
    n = int(args.get("n", 16))
    target = float(args["target"])
    mask_spec = args.get("mask", "")
    mask = mask_from_spec(bundle.schema, mask_spec)
    reference = _load_reference(args, bundle)
    cond = ConditionVector(target, parse_env(args.get("env")))
    guidance = build_guidance(
        bundle, target, args.get("gamma"), args.get("lambda"), args.get("coupling", "paper")
    )
    cfg = repaint.RepaintConfig(
        resample_u=int(args.get("resample", 20)),
        seed=seed,
        align_mode=args.get("align_mode", "standard"),
    )
    designs = repaint.repaint_sample(bundle.model, guidance, reference, mask, cond, cfg, n)
    out_path = _resolve_out(args, out_dir, "designs.csv")
    perf, feas = _write_designs(out_path, bundle, designs)
    metrics = {}
    if perf is not None:
        metrics["mape_vs_target"] = mape(perf, target)
    if feas is not None:
        metrics["feasibility_rate"] = float(np.mean(feas))
    manifest = RunManifest(
        "repaint",
        args,
        seed=seed,
        config={
            "T": bundle.model.schedule.T,
            "U": cfg.resample_u,
            "gamma": guidance.gamma,
            "lambda": guidance.lambda_,
            "mask_spec": mask_spec,
            "condition": {"target": target, "env": parse_env(args.get("env"))},
            "n": n,
        },
        inputs={"checkpoint": args["ckpt"], "reference": args.get("reference")},
        outputs={"designs": out_path},
        metrics=metrics,
    )
    manifest.wall_clock_s = time.perf_counter() - started
    manifest.save(out_path + ".manifest.json")
    return manifest


def _design_columns(path):
    """Parameter columns of a design CSV (drops perf/feasible)."""
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    drop = {i for i, h in enumerate(header) if h.strip() in ("perf", "feasible")}
    keep = [i for i in range(len(header)) if i not in drop]
    x = np.asarray(rows, dtype=float)
    perf_idx = next((i for i, h in enumerate(header) if h.strip() == "perf"), None)
    return x[:, keep], (x[:, perf_idx] if perf_idx is not None else None)


def run_eval(args, out_dir=None):
    """Metric report between two design CSVs (or one CSV and a target)."""
    started = time.perf_counter()
    metric = args["metric"]
    out_path = _resolve_out(args, out_dir, f"{metric}.json")
    a_x, a_perf = _design_columns(args["a"])
    report = {"metric": metric, "a": args["a"]}
    if metric == "mape":
        if a_perf is None:
            raise DataError(f"{args['a']}: no 'perf' column for MAPE")
        report["target"] = float(args["target"])
        report["value"] = mape(a_perf, report["target"])
    elif metric == "mmd":
        b_x, _ = _design_columns(args["b"])
        res = mmd_rbf(a_x, b_x, bandwidth=args.get("bandwidth"))
        report.update({"b": args["b"], "value": res.value, "bandwidth": res.bandwidth,
                       "n_a": res.n_a, "n_b": res.n_b})
    elif metric == "prd":
        b_x, _ = _design_columns(args["b"])
        k = int(args.get("k", 20))
        curve = prd(a_x, b_x, k=k, seed=int(args.get("seed", 0)))
        report.update({"b": args["b"], "k": k,
                       "precision": curve.precision.tolist(), "recall": curve.recall.tolist()})
        curve.to_csv(out_path.rsplit(".", 1)[0] + ".csv")
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2)
    manifest = RunManifest(
        "eval", args, seed=args.get("seed"),
        inputs={"a": args["a"], "b": args.get("b")},
        outputs={"report": out_path},
        metrics={"value": report.get("value")},
    )
    manifest.wall_clock_s = time.perf_counter() - started
    manifest.save(out_path + ".manifest.json")
    return manifest


def dispatch(command, args, out_dir):
    if command == "train":
        return run_train(args, out_dir)
    if command == "sample":
        return run_sample(args, out_dir)
    if command == "repaint":
        return run_repaint(args, out_dir)
    if command == "eval":
        return run_eval(args, out_dir)
    if command == "experiment":
        from . import experiments

        return experiments.run_experiment(args, out_dir)
    raise ConfigError(f"unknown command {command!r}")
