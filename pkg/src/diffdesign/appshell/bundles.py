"""Checkpoint bundles: a directory holding a trained model and its companions.

Layout:
    model.json        diffusion model (trunk, condition embedder, schedule, stats)
    predictor.json    optional performance predictor
    classifier.json   optional feasibility classifier
    meta.json         schema, condition names, problem tag, training provenance
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..designs import DesignSchema, get_problem
from ..diffusion import DiffusionModel
from ..errors import ConfigError
from ..guidance import FeasibilityClassifier, PerformancePredictor


@dataclass
class ModelBundle:
    model: DiffusionModel
    schema: DesignSchema
    kind: str = "tabular"  # or "airfoil"
    predictor: PerformancePredictor | None = None
    classifier: FeasibilityClassifier | None = None
    problem_name: str | None = None
    problem_args: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    path: str | None = None

    def problem(self):
        """Instantiate the bound synthetic problem, if any (exact oracle)."""
        if self.problem_name is None:
            return None
        return get_problem(self.problem_name, **self.problem_args)

    def predicted_performance(self, designs_raw):
        """Exact oracle when a problem is bound, else the predictor, else None."""
        prob = self.problem()
        if prob is not None:
            return np.atleast_1d(prob.performance(designs_raw))
        if self.predictor is not None:
            from ..designs import normalize

            xn = normalize(np.atleast_2d(designs_raw), self.model.x_stats)
            t = 0 if self.predictor.time_dim else None
            return np.atleast_1d(self.predictor.predict(xn, t=t))
        return None

    def feasibility(self, designs_raw):
        prob = self.problem()
        if prob is None:
            return None
        x = np.atleast_2d(np.asarray(designs_raw, dtype=float))
        return np.array([prob.check(row)[0] for row in x])


def save_bundle(directory, bundle: ModelBundle):
    os.makedirs(directory, exist_ok=True)
    bundle.model.save(os.path.join(directory, "model.json"))
    if bundle.predictor is not None:
        bundle.predictor.save(os.path.join(directory, "predictor.json"))
    if bundle.classifier is not None:
        bundle.classifier.save(os.path.join(directory, "classifier.json"))
    meta = {
        "kind": bundle.kind,
        "schema": bundle.schema.to_json(),
        "cond_names": list(bundle.model.cond_names),
        "problem": bundle.problem_name,
        "problem_args": bundle.problem_args,
    }
    meta.update(bundle.meta)
    with open(os.path.join(directory, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    bundle.path = directory
    return directory


def load_bundle(directory) -> ModelBundle:
    meta_path = os.path.join(directory, "meta.json")
    if not os.path.exists(meta_path):
        raise ConfigError(f"{directory}: not a checkpoint bundle (no meta.json)")
    with open(meta_path) as fh:
        meta = json.load(fh)
    model = DiffusionModel.load(os.path.join(directory, "model.json"))
    predictor = classifier = None
    ppath = os.path.join(directory, "predictor.json")
    if os.path.exists(ppath):
        predictor = PerformancePredictor.load(ppath)
    cpath = os.path.join(directory, "classifier.json")
    if os.path.exists(cpath):
        classifier = FeasibilityClassifier.load(cpath)
    known = {"kind", "schema", "cond_names", "problem", "problem_args"}
    return ModelBundle(
        model=model,
        schema=DesignSchema.from_json(meta["schema"]),
        kind=meta.get("kind", "tabular"),
        predictor=predictor,
        classifier=classifier,
        problem_name=meta.get("problem"),
        problem_args=meta.get("problem_args") or {},
        meta={k: v for k, v in meta.items() if k not in known},
        path=directory,
    )
