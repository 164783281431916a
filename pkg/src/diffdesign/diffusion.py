"""Denoising-diffusion core: schedule, forward noising, training, guided sampling.

The reverse step implements the guided update

    x_{t-1} = (x_t - (1-a_t)/sqrt(1-abar_t) eps(x_t,t,C)) / sqrt(a_t)
              + sigma_t (Z (1-gamma))
              + gamma grad_x f(x_t) - lambda grad_x (target - P(x_t))^2

with Z ~ N(0,I) for t > 1 and Z = 0 at the final step. The sigma*(Z*(1-gamma))
coupling is kept as the default; a conventional sigma*Z form is available
behind GuidanceConfig.noise_coupling.

All chain states live in normalized (z-scored) design space; samplers
denormalize on exit.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from . import rngs
from .designs import ConditionVector, denormalize, fit_normalization, normalize
from .errors import ConfigError, DataError, SamplingError, ShapeError
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

DEFAULT_T = 200
DEFAULT_BETA_MIN = 1e-3
DEFAULT_BETA_MAX = 0.099

MODEL_FORMAT_VERSION = 1


@dataclass
class NoiseSchedule:
    """Index-by-timestep tables; entry 0 is the identity sentinel (abar_0 = 1)."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray


def build_schedule(T, beta_min, beta_max, kind="linear") -> NoiseSchedule:
    if kind != "linear":
        raise ConfigError(f"unknown schedule kind {kind!r}")
    if T < 1:
        raise ConfigError(f"need T >= 1, got {T}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ConfigError(f"need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")
    beta = np.concatenate([[0.0], np.linspace(beta_min, beta_max, T)])
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    sigma = np.sqrt(beta)
    return NoiseSchedule(T, beta, alpha, alpha_bar, sigma)


def default_schedule() -> NoiseSchedule:
    """Desk-scale default: T=200 with sum(beta) ~ 10, so abar_T < 1e-3."""
    return build_schedule(DEFAULT_T, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX)


def q_sample(x0, t, eps, sched: NoiseSchedule):
    """Forward marginal sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.

    t may be a scalar or a per-row array for batched x0.
    """
    x0 = np.asarray(x0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if x0.shape != eps.shape:
        raise ShapeError(f"eps shape {eps.shape} does not match x0 {x0.shape}")
    t_arr = np.asarray(t)
    if np.any(t_arr < 1) or np.any(t_arr > sched.T):
        raise ShapeError(f"timestep out of range 1..{sched.T}")
    ab = sched.alpha_bar[t_arr]
    if x0.ndim == 2 and np.ndim(ab) == 1:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


@dataclass
class TrainRecord:
    epoch: int
    mean_loss: float
    duration_s: float


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    lr_final: float | None = None  # cosine-decay floor; None keeps lr constant
    seed: int = 0

    def lr_at(self, epoch):
        if self.lr_final is None or self.epochs <= 1:
            return self.lr
        frac = epoch / (self.epochs - 1)
        return self.lr_final + 0.5 * (self.lr - self.lr_final) * (1.0 + np.cos(np.pi * frac))


class DiffusionModel:
    """Conditional noise predictor plus its schedule and normalization stats.

    The trunk consumes [x_t | time embedding | condition embedding]; the
    condition embedding is one dense layer from the raw condition vector to
    embed_dim, so trunk input is design_dim + embed_dim + embed_dim.
    """

    def __init__(self, design_dim, cond_names, schedule, trunk_spec, trunk_params,
                 cond_spec, cond_params, embed_dim=128, x_stats=None, c_stats=None):
        self.design_dim = design_dim
        self.cond_names = tuple(cond_names)
        self.schedule = schedule
        self.trunk_spec = trunk_spec
        self.trunk_params = trunk_params
        self.cond_spec = cond_spec
        self.cond_params = cond_params
        self.embed_dim = embed_dim
        self.x_stats = x_stats
        self.c_stats = c_stats
        self._temb = None
        expected = design_dim + 2 * embed_dim
        if trunk_spec.input_dim != expected or trunk_spec.output_dim != design_dim:
            raise ConfigError(
                f"trunk must map {expected} -> {design_dim}, "
                f"got {trunk_spec.input_dim} -> {trunk_spec.output_dim}"
            )
        if cond_spec.input_dim != len(self.cond_names) or cond_spec.output_dim != embed_dim:
            raise ConfigError("condition embedder dims do not match cond_names/embed_dim")

    @property
    def cond_dim(self):
        return len(self.cond_names)

    def temb_table(self):
        if self._temb is None:
            self._temb = time_embed_table(self.schedule.T, self.embed_dim)
        return self._temb

    def _assemble(self, x_t, t, c_norm):
        x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
        n = x_t.shape[0]
        t_arr = np.broadcast_to(np.asarray(t, dtype=int), (n,))
        temb = self.temb_table()[t_arr]
        c = np.atleast_2d(np.asarray(c_norm, dtype=float))
        if c.shape[0] == 1 and n > 1:
            c = np.broadcast_to(c, (n, c.shape[1]))
        cemb, cond_trace = forward(self.cond_spec, self.cond_params, c)
        inp = np.concatenate([x_t, temb, np.atleast_2d(cemb)], axis=1)
        return inp, cond_trace

    def predict_eps(self, x_t, t, c_norm):
        """eps_theta(x_t, t, C) for a vector or batch; t scalar or per-row."""
        single = np.asarray(x_t).ndim == 1
        inp, _ = self._assemble(x_t, t, c_norm)
        out, _ = forward(self.trunk_spec, self.trunk_params, inp)
        out = np.atleast_2d(out)
        return out[0] if single else out

    def _forward_train(self, x_t, t, c_norm):
        inp, cond_trace = self._assemble(x_t, t, c_norm)
        out, trunk_trace = forward(self.trunk_spec, self.trunk_params, inp)
        return np.atleast_2d(out), (trunk_trace, cond_trace)

    def _backward_train(self, aux, grad_out):
        trunk_trace, cond_trace = aux
        g_trunk, g_inp = backward(self.trunk_spec, self.trunk_params, trunk_trace, grad_out)
        g_cemb = np.atleast_2d(g_inp)[:, self.design_dim + self.embed_dim :]
        g_cond, _ = backward(self.cond_spec, self.cond_params, cond_trace, g_cemb)
        return g_trunk, g_cond

    # --- persistence ---

    def save(self, path):
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "diffusion_model",
            "design_dim": self.design_dim,
            "cond_names": list(self.cond_names),
            "embed_dim": self.embed_dim,
            "schedule": {"T": self.schedule.T, "beta": self.schedule.beta[1:].tolist()},
            "trunk": encode_network(self.trunk_spec, self.trunk_params),
            "cond": encode_network(self.cond_spec, self.cond_params),
            "x_stats": _stats_to_json(self.x_stats),
            "c_stats": _stats_to_json(self.c_stats),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @staticmethod
    def load(path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format_version") != MODEL_FORMAT_VERSION or doc.get("kind") != "diffusion_model":
            raise ConfigError(f"{path}: not a diffusion model checkpoint")
        beta = np.asarray(doc["schedule"]["beta"], dtype=float)
        T = doc["schedule"]["T"]
        beta_full = np.concatenate([[0.0], beta])
        alpha = 1.0 - beta_full
        sched = NoiseSchedule(T, beta_full, alpha, np.cumprod(alpha), np.sqrt(beta_full))
        trunk_spec, trunk_params = decode_network(doc["trunk"])
        cond_spec, cond_params = decode_network(doc["cond"])
        return DiffusionModel(
            doc["design_dim"],
            doc["cond_names"],
            sched,
            trunk_spec,
            trunk_params,
            cond_spec,
            cond_params,
            embed_dim=doc["embed_dim"],
            x_stats=_stats_from_json(doc["x_stats"]),
            c_stats=_stats_from_json(doc["c_stats"]),
        )


def _stats_to_json(stats):
    if stats is None:
        return None
    return {"mean": np.asarray(stats[0]).tolist(), "std": np.asarray(stats[1]).tolist()}


def _stats_from_json(obj):
    if obj is None:
        return None
    return np.asarray(obj["mean"], dtype=float), np.asarray(obj["std"], dtype=float)


def build_model(design_dim, cond_names=("target",), schedule=None, width=128,
                blocks=2, embed_dim=128, seed=0) -> DiffusionModel:
    """Fresh model: residual trunk (dense in, `blocks` residual blocks, dense out)."""
    schedule = schedule or default_schedule()
    rng = rngs.stream(seed, 0, rngs.ROLE_TRAIN)
    trunk_spec = resnet_spec(design_dim + 2 * embed_dim, width, design_dim, blocks=blocks)
    cond_spec = mlp_spec([len(cond_names), embed_dim], out_activation="identity")
    return DiffusionModel(
        design_dim,
        cond_names,
        schedule,
        trunk_spec,
        init_params(trunk_spec, rng),
        cond_spec,
        init_params(cond_spec, rng),
        embed_dim=embed_dim,
    )


def train(model: DiffusionModel, x0, c, config: TrainConfig) -> list[TrainRecord]:
    """Noise-prediction training: per sample draw t ~ U{1..T}, eps ~ N(0,I),
    and step the MSE between eps and eps_theta(q_sample(x0,t,eps), t, C).
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if x0.shape[0] == 0:
        raise DataError("empty training dataset")
    if c.shape[0] != x0.shape[0]:
        raise ShapeError("condition rows do not match design rows")
    if model.x_stats is None:
        model.x_stats = fit_normalization(x0)
    if model.c_stats is None:
        model.c_stats = fit_normalization(c)
    xn = normalize(x0, model.x_stats)
    cn = normalize(c, model.c_stats)

    rng = rngs.stream(config.seed, 0, rngs.ROLE_TRAIN)
    opt_trunk = OptimizerState("adam", lr=config.lr)
    opt_cond = OptimizerState("adam", lr=config.lr)
    n = xn.shape[0]
    sched = model.schedule
    records = []
    for epoch in range(config.epochs):
        start = time.perf_counter()
        opt_trunk.lr = opt_cond.lr = config.lr_at(epoch)
        perm = rng.permutation(n)
        losses = []
        for b, lo in enumerate(range(0, n, config.batch_size)):
            idx = perm[lo : lo + config.batch_size]
            xb, cb = xn[idx], cn[idx]
            tb = rng.integers(1, sched.T + 1, size=idx.size)
            eps = rng.standard_normal(xb.shape)
            x_t = q_sample(xb, tb, eps, sched)
            eps_hat, aux = model._forward_train(x_t, tb, cb)
            diff = eps_hat - eps
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise DataError(f"NaN loss at epoch {epoch}, batch {b}")
            g_trunk, g_cond = model._backward_train(aux, (2.0 / diff.size) * diff)
            optimizer_step(model.trunk_params, g_trunk, opt_trunk)
            optimizer_step(model.cond_params, g_cond, opt_cond)
            losses.append(loss)
        records.append(TrainRecord(epoch, float(np.mean(losses)), time.perf_counter() - start))
    return records


def _guidance_terms(guidance):
    """(gamma, lambda, classifier, predictor, target, coupling) with validation."""
    if guidance is None:
        return 0.0, 0.0, None, None, None, "paper"
    gamma = float(guidance.gamma)
    lam = float(guidance.lambda_)
    if gamma < 0 or lam < 0:
        raise ConfigError("guidance weights must be >= 0")
    if gamma != 0.0 and guidance.classifier is None:
        raise ConfigError("gamma != 0 but no classifier loaded")
    if lam != 0.0 and (guidance.predictor is None or guidance.target is None):
        raise ConfigError("lambda != 0 but predictor/target missing")
    return gamma, lam, guidance.classifier, guidance.predictor, guidance.target, guidance.noise_coupling


def guided_step(model: DiffusionModel, x_t, t, c_norm, guidance=None, rng=None, z=None):
    """One reverse step x_t -> x_{t-1} in normalized space.

    Z is drawn from `rng` (N(0,I) for t > 1, zero at t = 1) unless an explicit
    `z` is supplied, which the batch samplers use to keep per-chain streams.
    """
    sched = model.schedule
    if not 1 <= t <= sched.T:
        raise ShapeError(f"timestep {t} out of range 1..{sched.T}")
    gamma, lam, clf, pred, target, coupling = _guidance_terms(guidance)
    x_t = np.asarray(x_t, dtype=float)
    if z is None:
        if t > 1:
            if rng is None:
                raise ConfigError("guided_step needs an rng when z is not given")
            z = rng.standard_normal(x_t.shape)
        else:
            z = np.zeros_like(x_t)
    a = sched.alpha[t]
    ab = sched.alpha_bar[t]
    eps_hat = model.predict_eps(x_t, t, c_norm)
    out = (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a)
    if coupling == "paper":
        out = out + sched.sigma[t] * (z * (1.0 - gamma))
    elif coupling == "conventional":
        out = out + sched.sigma[t] * z
    else:
        raise ConfigError(f"unknown noise coupling {coupling!r}")
    if gamma != 0.0:
        out = out + gamma * clf.input_grad(x_t, t)
    if lam != 0.0:
        out = out - lam * pred.sq_error_grad(x_t, target, t)
    return out


def condition_array(model: DiffusionModel, condition):
    """Condition as an array: a ConditionVector, one row, or per-chain rows."""
    if isinstance(condition, ConditionVector):
        return condition.to_array(env_names=model.cond_names[1:])
    arr = np.asarray(condition, dtype=float)
    if arr.ndim <= 1:
        arr = arr.reshape(-1)
        if arr.size != model.cond_dim:
            raise ShapeError(f"condition has {arr.size} entries, model expects {model.cond_dim}")
        return arr
    if arr.ndim == 2 and arr.shape[1] == model.cond_dim:
        return arr
    raise ShapeError(f"condition shape {arr.shape} does not fit cond_dim {model.cond_dim}")


def sample(model: DiffusionModel, condition, n, guidance=None, seed=0, progress_cb=None):
    """Draw n designs: X_T ~ N(0,I), guided steps down to X_0, denormalize.

    Chains use independent (seed, chain, role) streams, so results are
    reproducible and independent of n for any chain prefix.
    """
    d = model.design_dim
    if n == 0:
        return np.zeros((0, d))
    c_arr = condition_array(model, condition)
    if c_arr.ndim == 2 and c_arr.shape[0] != n:
        raise ShapeError(f"per-chain condition has {c_arr.shape[0]} rows for n={n}")
    c_norm = normalize(c_arr, model.c_stats)
    init_rngs = rngs.chain_streams(seed, n, rngs.ROLE_INIT)
    step_rngs = rngs.chain_streams(seed, n, rngs.ROLE_STEP)
    x = np.stack([r.standard_normal(d) for r in init_rngs])
    sched = model.schedule
    for t in range(sched.T, 0, -1):
        if t > 1:
            z = np.stack([r.standard_normal(d) for r in step_rngs])
        else:
            z = np.zeros((n, d))
        x = guided_step(model, x, t, c_norm, guidance=guidance, z=z)
        if not np.isfinite(x).all():
            raise SamplingError(f"non-finite state at step t={t}")
        if progress_cb is not None:
            progress_cb((sched.T - t + 1) / sched.T)
    return denormalize(x, model.x_stats) if model.x_stats is not None else x
