"""Command line interface.

Subcommands: train, sample, repaint, eval, experiment, replay, serve.
All heavy lifting lives in runs.py / experiments.py, which the HTTP service
shares, so CLI and service outputs are identical for identical inputs.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import DiffDesignError
from . import experiments, runs
from .manifests import replay_manifest


def _load_json(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="diffdesign",
        description="Guided tabular diffusion for parametric design generation and completion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model; emits a checkpoint bundle + manifest")
    p.add_argument("--dataset", help="design CSV (header: names + perf [+ feasible])")
    p.add_argument("--schema", help="schema JSON (required with --dataset)")
    p.add_argument("--problem", help="builtin problem instead of a CSV (synthetic-16, synthetic-airfoil)")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--out", required=True, help="checkpoint output directory")

    p = sub.add_parser("sample", help="guided generation toward a target performance")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--env", default="", help="environment variables, k=v,...")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--coupling", choices=["paper", "conventional"], default="paper",
                   help="reverse-noise form: sigma*(Z*(1-gamma)) or sigma*Z")
    p.add_argument("--out", required=True, help="designs CSV path")

    p = sub.add_parser("repaint", help="complete a partial design via mask resampling")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--reference", required=True, help="CSV holding the reference design")
    p.add_argument("--reference-row", type=int, default=0)
    p.add_argument("--mask", required=True, help="mask spec, e.g. '6-9,30-43' or 'first-2/8'")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--env", default="")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--resample", type=int, default=20, help="resampling iterations U")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--coupling", choices=["paper", "conventional"], default="paper")
    p.add_argument("--align-mode", choices=["standard", "paper-literal"], default="standard",
                   help="noise alignment of the known part")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="metric report over design CSVs")
    p.add_argument("metric", choices=["mape", "mmd", "prd"])
    p.add_argument("--a", required=True)
    p.add_argument("--b")
    p.add_argument("--target", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment", help="canned study protocols on a checkpoint")
    p.add_argument("name", choices=list(experiments.EXPERIMENTS))
    p.add_argument("--ckpt", required=True)
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", required=True, help="report output directory")

    p = sub.add_parser("replay", help="re-run a manifest into a new directory")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP service for the mask studio UI")
    p.add_argument("--models-dir", required=True, help="directory of checkpoint bundles")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            if args.dataset and not args.schema:
                raise DiffDesignError("--dataset requires --schema")
            m = runs.run_train(
                {
                    "dataset": args.dataset,
                    "schema": args.schema,
                    "problem": args.problem,
                    "config": _load_json(args.config),
                },
                args.out,
            )
        elif args.command == "sample":
            m = runs.run_sample(
                {
                    "ckpt": args.ckpt,
                    "target": args.target,
                    "env": args.env,
                    "n": args.n,
                    "seed": args.seed,
                    "gamma": args.gamma,
                    "lambda": args.lambda_,
                    "coupling": args.coupling,
                    "out": args.out,
                }
            )
        elif args.command == "repaint":
            m = runs.run_repaint(
                {
                    "ckpt": args.ckpt,
                    "reference": args.reference,
                    "reference_row": args.reference_row,
                    "mask": args.mask,
                    "target": args.target,
                    "env": args.env,
                    "n": args.n,
                    "resample": args.resample,
                    "gamma": args.gamma,
                    "lambda": args.lambda_,
                    "coupling": args.coupling,
                    "align_mode": args.align_mode,
                    "seed": args.seed,
                    "out": args.out,
                }
            )
        elif args.command == "eval":
            m = runs.run_eval(
                {
                    "metric": args.metric,
                    "a": args.a,
                    "b": args.b,
                    "target": args.target,
                    "seed": args.seed,
                    "out": args.out,
                }
            )
        elif args.command == "experiment":
            m = experiments.run_experiment(
                {"name": args.name, "ckpt": args.ckpt, "config": _load_json(args.config)},
                args.out,
            )
        elif args.command == "replay":
            m = replay_manifest(args.manifest, args.out)
        elif args.command == "serve":
            from .service import serve

            serve(args.models_dir, host=args.host, port=args.port)
            return 0
        else:  # pragma: no cover
            raise DiffDesignError(f"unhandled command {args.command}")
    except FileNotFoundError as exc:
        print(f"error: {exc.filename or exc} not found", file=sys.stderr)
        return 2
    except DiffDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = {k: v for k, v in m.metrics.items() if v is not None}
    print(json.dumps({"run_id": m.run_id, "outputs": m.outputs, "metrics": summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
