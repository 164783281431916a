"""Feasibility classifier and performance predictor used as sampling guidance.

Both nets see the current (noisy) chain state, optionally concatenated with a
time embedding so they stay informative at high noise levels; training
augments clean inputs with forward-process noise at random timesteps. Their
input-gradients supply the two guidance terms of the sampler:

    gamma * grad_x f(x_t)            toward the feasible class
    -lambda * grad_x (target - P(x_t))^2   toward the target performance
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import rngs
from .designs import fit_normalization, normalize
from .diffusion import NoiseSchedule, default_schedule, q_sample
from .errors import ConfigError, DataError, ShapeError
from .netcore import (
    OptimizerState,
    backward,
    decode_network,
    encode_network,
    forward,
    init_params,
    mlp_spec,
    optimizer_step,
    resnet_spec,
    time_embed_table,
)

GUIDANCE_FORMAT_VERSION = 1

# Architectures of the two guidance nets (latent widths; scale down for desk runs).
CLASSIFIER_HIDDEN = (128, 64, 64, 64)
PREDICTOR_WIDTH = 512
PREDICTOR_BLOCKS = 2


def classifier_spec(input_dim, hidden=CLASSIFIER_HIDDEN):
    """MLP with SiLU hidden layers and a sigmoid output in (0,1)."""
    return mlp_spec([input_dim, *hidden, 1], out_activation="sigmoid")


def predictor_spec(input_dim, width=PREDICTOR_WIDTH, blocks=PREDICTOR_BLOCKS):
    """Residual regression net; blocks=2 gives the six-matrix layout."""
    return resnet_spec(input_dim, width, 1, blocks=blocks)


@dataclass
class GuidanceConfig:
    """Weights and targets for the two guidance terms of the reverse step."""

    gamma: float = 0.0
    lambda_: float = 0.0
    target: float | None = None
    classifier: "FeasibilityClassifier | None" = None
    predictor: "PerformancePredictor | None" = None
    noise_coupling: str = "paper"

    def __post_init__(self):
        if self.gamma < 0 or self.lambda_ < 0:
            raise ConfigError("guidance weights must be >= 0")


class _GuidanceNet:
    """Shared plumbing: optional time embedding, normalized-space evaluation."""

    kind = "guidance"

    def __init__(self, spec, params, design_dim, time_dim=0, x_stats=None):
        self.spec = spec
        self.params = params
        self.design_dim = design_dim
        self.time_dim = time_dim
        self.x_stats = x_stats
        self._temb = None

    def _embed(self, t, n):
        if self.time_dim == 0:
            return None
        if t is None:
            raise ConfigError(f"{self.kind} was trained with a time embedding; pass t")
        if self._temb is None:
            self._temb = {}
        t = int(t)
        if t not in self._temb:
            self._temb[t] = time_embed_table(t, self.time_dim)[t]
        return np.broadcast_to(self._temb[t], (n, self.time_dim))

    def _input(self, x, t):
        x2 = np.atleast_2d(np.asarray(x, dtype=float))
        if x2.shape[1] != self.design_dim:
            raise ShapeError(f"design dim {x2.shape[1]}, expected {self.design_dim}")
        temb = self._embed(t, x2.shape[0])
        return x2 if temb is None else np.concatenate([x2, temb], axis=1)

    def _forward(self, x, t):
        out, trace = forward(self.spec, self.params, self._input(x, t))
        return np.atleast_2d(out)[:, 0], trace

    def _input_grad(self, trace, grad_scalar):
        """grad wrt the design part of the input; grad_scalar is (n,)."""
        _, g_in = backward(self.spec, self.params, trace, grad_scalar[:, None])
        return np.atleast_2d(g_in)[:, : self.design_dim]

    def _encode(self, extra):
        doc = {
            "format_version": GUIDANCE_FORMAT_VERSION,
            "kind": self.kind,
            "design_dim": self.design_dim,
            "time_dim": self.time_dim,
            "net": encode_network(self.spec, self.params),
            "x_stats": None
            if self.x_stats is None
            else {"mean": np.asarray(self.x_stats[0]).tolist(), "std": np.asarray(self.x_stats[1]).tolist()},
        }
        doc.update(extra)
        return doc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self._encode({}), fh)


def _decode_stats(obj):
    if obj is None:
        return None
    return np.asarray(obj["mean"], dtype=float), np.asarray(obj["std"], dtype=float)


class FeasibilityClassifier(_GuidanceNet):
    """Sigmoid-output net scoring the probability a design is feasible."""

    kind = "classifier"

    def __init__(self, spec, params, design_dim, time_dim=0, x_stats=None, holdout_accuracy=None):
        super().__init__(spec, params, design_dim, time_dim, x_stats)
        self.holdout_accuracy = holdout_accuracy

    def prob(self, x, t=None):
        single = np.asarray(x).ndim == 1
        out, _ = self._forward(x, t)
        return float(out[0]) if single else out

    def input_grad(self, x, t=None):
        """grad_x f(x): ascent direction for the feasible class."""
        single = np.asarray(x).ndim == 1
        out, trace = self._forward(x, t)
        g = self._input_grad(trace, np.ones_like(out))
        return g[0] if single else g

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self._encode({"holdout_accuracy": self.holdout_accuracy}), fh)

    @staticmethod
    def load(path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("kind") != "classifier":
            raise ConfigError(f"{path}: not a classifier checkpoint")
        spec, params = decode_network(doc["net"])
        return FeasibilityClassifier(
            spec, params, doc["design_dim"], doc["time_dim"],
            _decode_stats(doc["x_stats"]), doc.get("holdout_accuracy"),
        )


class PerformancePredictor(_GuidanceNet):
    """Regression net for the performance indicator; targets z-scored internally."""

    kind = "predictor"

    def __init__(self, spec, params, design_dim, time_dim=0, x_stats=None,
                 y_mean=0.0, y_std=1.0, holdout_mape=None, holdout_r2=None):
        super().__init__(spec, params, design_dim, time_dim, x_stats)
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)
        self.holdout_mape = holdout_mape
        self.holdout_r2 = holdout_r2

    def predict_norm(self, x, t=None):
        single = np.asarray(x).ndim == 1
        out, _ = self._forward(x, t)
        return float(out[0]) if single else out

    def predict(self, x, t=None):
        out = self.predict_norm(x, t)
        return self.y_mean + self.y_std * out

    def sq_error_grad(self, x, target, t=None):
        """grad_x (target - P(x))^2 = -2 (target - P(x)) grad_x P(x).

        Computed in the normalized target scale, matching the net's output.
        """
        single = np.asarray(x).ndim == 1
        tn = (float(target) - self.y_mean) / self.y_std
        out, trace = self._forward(x, t)
        g = self._input_grad(trace, -2.0 * (tn - out))
        return g[0] if single else g

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(
                self._encode(
                    {
                        "y_mean": self.y_mean,
                        "y_std": self.y_std,
                        "holdout_mape": self.holdout_mape,
                        "holdout_r2": self.holdout_r2,
                    }
                ),
                fh,
            )

    @staticmethod
    def load(path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("kind") != "predictor":
            raise ConfigError(f"{path}: not a predictor checkpoint")
        spec, params = decode_network(doc["net"])
        return PerformancePredictor(
            spec, params, doc["design_dim"], doc["time_dim"],
            _decode_stats(doc["x_stats"]), doc["y_mean"], doc["y_std"],
            doc.get("holdout_mape"), doc.get("holdout_r2"),
        )


def classifier_grad(clf: FeasibilityClassifier, x, t=None):
    """Module-level alias for the gamma guidance term."""
    return clf.input_grad(x, t)


def performance_grad(pred: PerformancePredictor, x, target, t=None):
    """Module-level alias for the lambda guidance term."""
    return pred.sq_error_grad(x, target, t)


@dataclass
class GuidanceTrainConfig:
    epochs: int = 120
    batch_size: int = 128
    lr: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.2
    time_dim: int = 0                      # 0 = time-blind net
    schedule: NoiseSchedule | None = None  # for noise augmentation when time_dim > 0
    classifier_hidden: tuple = CLASSIFIER_HIDDEN
    predictor_width: int = PREDICTOR_WIDTH
    predictor_blocks: int = PREDICTOR_BLOCKS


def _split(n, val_fraction, rng):
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * val_fraction))) if val_fraction > 0 and n > 1 else 0
    return perm[n_val:], perm[:n_val]


def _augment(xb, config, rng):
    """Concatenate a random-timestep embedding, noising the design part.

    t=0 rows stay clean so the net also fits the noise-free distribution.
    """
    if config.time_dim == 0:
        return xb
    sched = config.schedule or default_schedule()
    tb = rng.integers(0, sched.T + 1, size=xb.shape[0])
    noisy = xb.copy()
    hot = tb > 0
    if hot.any():
        eps = rng.standard_normal((int(hot.sum()), xb.shape[1]))
        noisy[hot] = q_sample(xb[hot], tb[hot], eps, sched)
    temb = time_embed_table(sched.T, config.time_dim)[tb]
    return np.concatenate([noisy, temb], axis=1)


def train_classifier(x, labels, config: GuidanceTrainConfig, x_stats=None) -> FeasibilityClassifier:
    """Binary cross-entropy fit; returns the net with its held-out accuracy."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(labels, dtype=float).reshape(-1)
    if x.shape[0] != y.size:
        raise ShapeError("labels do not match design rows")
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("classifier training needs both classes present")
    if x_stats is None:
        x_stats = fit_normalization(x)
    xn = normalize(x, x_stats)
    rng = rngs.stream(config.seed, 1, rngs.ROLE_TRAIN)
    tr, va = _split(xn.shape[0], config.val_fraction, rng)
    spec = classifier_spec(x.shape[1] + config.time_dim, hidden=config.classifier_hidden)
    params = init_params(spec, rng)
    opt = OptimizerState("adam", lr=config.lr)
    for _ in range(config.epochs):
        perm = rng.permutation(tr.size)
        for lo in range(0, tr.size, config.batch_size):
            idx = tr[perm[lo : lo + config.batch_size]]
            inp = _augment(xn[idx], config, rng)
            out, trace = forward(spec, params, inp)
            p = np.clip(np.atleast_2d(out)[:, 0], 1e-12, 1.0 - 1e-12)
            # dBCE/dp; the sigmoid derivative in backward turns this into (p - y)/n
            g = ((p - y[idx]) / (p * (1.0 - p)) / idx.size)[:, None]
            grads, _ = backward(spec, params, trace, g)
            optimizer_step(params, grads, opt)
    clf = FeasibilityClassifier(spec, params, x.shape[1], config.time_dim, x_stats)
    if va.size:
        t_eval = 0 if config.time_dim else None
        pred = clf.prob(xn[va], t=t_eval)
        clf.holdout_accuracy = float(np.mean((pred > 0.5) == (y[va] > 0.5)))
    return clf


def train_predictor(x, y, config: GuidanceTrainConfig, x_stats=None) -> PerformancePredictor:
    """MSE fit on z-scored targets; reports test-split MAPE and R^2."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise DataError("empty predictor dataset")
    if x.shape[0] != y.size:
        raise ShapeError("targets do not match design rows")
    if x_stats is None:
        x_stats = fit_normalization(x)
    xn = normalize(x, x_stats)
    y_mean = float(y.mean())
    y_std = float(y.std())
    constant_targets = y_std == 0.0
    if constant_targets:
        y_std = 1.0
    yn = (y - y_mean) / y_std
    rng = rngs.stream(config.seed, 2, rngs.ROLE_TRAIN)
    tr, va = _split(xn.shape[0], config.val_fraction, rng)
    spec = predictor_spec(
        x.shape[1] + config.time_dim, width=config.predictor_width, blocks=config.predictor_blocks
    )
    params = init_params(spec, rng)
    opt = OptimizerState("adam", lr=config.lr)
    for _ in range(config.epochs):
        perm = rng.permutation(tr.size)
        for lo in range(0, tr.size, config.batch_size):
            idx = tr[perm[lo : lo + config.batch_size]]
            inp = _augment(xn[idx], config, rng)
            out, trace = forward(spec, params, inp)
            diff = np.atleast_2d(out)[:, 0] - yn[idx]
            grads, _ = backward(spec, params, trace, (2.0 / idx.size) * diff[:, None])
            optimizer_step(params, grads, opt)
    pred = PerformancePredictor(spec, params, x.shape[1], config.time_dim, x_stats, y_mean, y_std)
    if va.size:
        t_eval = 0 if config.time_dim else None
        yhat = pred.predict(xn[va], t=t_eval)
        nonzero = np.abs(y[va]) > 0
        if nonzero.any():
            pred.holdout_mape = float(
                np.mean(np.abs(yhat[nonzero] - y[va][nonzero]) / np.abs(y[va][nonzero])) * 100.0
            )
        if constant_targets:
            pred.holdout_r2 = None  # flagged: R^2 undefined for constant targets
        else:
            ss_res = float(np.sum((y[va] - yhat) ** 2))
            ss_tot = float(np.sum((y[va] - y[va].mean()) ** 2))
            pred.holdout_r2 = None if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return pred
