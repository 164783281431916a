"""Mask-based design completion: noise alignment, splicing, resampling.

At every denoising step the known coordinates of a reference design are
noised to the current level, spliced into the generated state by a boolean
mask, and the splice is repeated U times with one-step re-noising in between
to harmonize the two parts. No retraining of the underlying model is needed;
the mask can change freely between runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rngs
from .designs import denormalize, normalize
from .diffusion import DiffusionModel, condition_array, guided_step
from .errors import ConfigError, SamplingError, ShapeError

ALIGN_MODES = ("standard", "paper-literal")


@dataclass
class RepaintConfig:
    resample_u: int = 20
    seed: int = 0
    align_mode: str = "standard"

    def __post_init__(self):
        if self.resample_u < 1:
            raise ConfigError(f"resample count must be >= 1, got {self.resample_u}")
        if self.align_mode not in ALIGN_MODES:
            raise ConfigError(f"align_mode must be one of {ALIGN_MODES}")


def align_known(x0_ref, t, sched, rng=None, eps=None, mode="standard"):
    """Noise the clean reference to the level of X_{t-1}.

    standard: sqrt(abar_{t-1}) x0 + sqrt(1 - abar_{t-1}) eps, the forward
    marginal at t-1 (abar_0 = 1, so t=1 returns x0 exactly).
    paper-literal: sqrt(a_t) x0 + (1 - a_t) eps, the printed form, whose noise
    scale does not track the generated part.
    eps ~ N(0, I) for t > 1, zero at t = 1.
    """
    if mode not in ALIGN_MODES:
        raise ConfigError(f"align_mode must be one of {ALIGN_MODES}")
    if not 1 <= t <= sched.T:
        raise IndexError(f"timestep {t} out of range 1..{sched.T}")
    x0_ref = np.asarray(x0_ref, dtype=float)
    if eps is None:
        if t > 1:
            if rng is None:
                raise ConfigError("align_known needs an rng when eps is not given")
            eps = rng.standard_normal(x0_ref.shape)
        else:
            eps = np.zeros_like(x0_ref)
    if mode == "standard":
        ab = sched.alpha_bar[t - 1]
        return np.sqrt(ab) * x0_ref + np.sqrt(1.0 - ab) * eps
    a = sched.alpha[t]
    return np.sqrt(a) * x0_ref + (1.0 - a) * eps


def splice(x_gen, x_known, mask):
    """Coordinate i of the result is x_known[i] where mask[i] else x_gen[i]."""
    x_gen = np.asarray(x_gen, dtype=float)
    x_known = np.asarray(x_known, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if x_gen.shape != x_known.shape or mask.shape[-1] != x_gen.shape[-1]:
        raise ShapeError(
            f"splice shapes disagree: gen {x_gen.shape}, known {x_known.shape}, mask {mask.shape}"
        )
    return np.where(mask, x_known, x_gen)


def renoise(x_prev, t, sched, rng=None, z=None):
    """One forward step back up: sqrt(1 - beta_{t-1}) x_{t-1} + sqrt(beta_{t-1}) z.

    Only legal for t >= 2; the resampling loop guard must prevent t = 1 calls.
    """
    if t < 2 or t > sched.T:
        raise ConfigError(f"renoise needs 2 <= t <= T, got t={t}")
    x_prev = np.asarray(x_prev, dtype=float)
    if z is None:
        if rng is None:
            raise ConfigError("renoise needs an rng when z is not given")
        z = rng.standard_normal(x_prev.shape)
    b = sched.beta[t - 1]
    return np.sqrt(1.0 - b) * x_prev + np.sqrt(b) * z


def repaint_sample(model: DiffusionModel, guidance, reference, mask, condition,
                   cfg: RepaintConfig, n, progress_cb=None):
    """Generate n designs completing `reference` on the unmasked coordinates.

    With an all-zero mask and U=1 this reproduces the plain guided sampler
    bit-for-bit under the same seed: alignment and re-noising consume their
    own random streams, so the reverse-step stream is untouched.
    Masked coordinates of the output equal the reference exactly.
    """
    d = model.design_dim
    mask = np.asarray(mask, dtype=bool)
    reference = np.asarray(reference, dtype=float)
    if mask.shape != (d,):
        raise ShapeError(f"mask must have dim {d}")
    if reference.shape != (d,) and reference.shape != (n, d):
        raise ShapeError(f"reference must have shape ({d},) or ({n}, {d})")
    if n == 0:
        return np.zeros((0, d))
    sched = model.schedule
    c_arr = condition_array(model, condition)
    if c_arr.ndim == 2 and c_arr.shape[0] != n:
        raise ShapeError(f"per-chain condition has {c_arr.shape[0]} rows for n={n}")
    c_norm = normalize(c_arr, model.c_stats)
    ref_norm = normalize(reference, model.x_stats) if model.x_stats is not None else reference

    seed = cfg.seed
    init_rngs = rngs.chain_streams(seed, n, rngs.ROLE_INIT)
    step_rngs = rngs.chain_streams(seed, n, rngs.ROLE_STEP)
    align_rngs = rngs.chain_streams(seed, n, rngs.ROLE_ALIGN)
    renoise_rngs = rngs.chain_streams(seed, n, rngs.ROLE_RENOISE)

    x = np.stack([r.standard_normal(d) for r in init_rngs])
    for t in range(sched.T, 0, -1):
        for u in range(1, cfg.resample_u + 1):
            if t > 1:
                eps = np.stack([r.standard_normal(d) for r in align_rngs])
            else:
                eps = np.zeros((n, d))
            x_known = align_known(ref_norm, t, sched, eps=eps, mode=cfg.align_mode)
            if t > 1:
                z = np.stack([r.standard_normal(d) for r in step_rngs])
            else:
                z = np.zeros((n, d))
            x_gen = guided_step(model, x, t, c_norm, guidance=guidance, z=z)
            x = splice(x_gen, x_known, mask)
            if u < cfg.resample_u and t > 1:
                zr = np.stack([r.standard_normal(d) for r in renoise_rngs])
                x = renoise(x, t, sched, z=zr)
        if not np.isfinite(x).all():
            raise SamplingError(f"non-finite state at step t={t}")
        if progress_cb is not None:
            progress_cb((sched.T - t + 1) / sched.T)
    out = denormalize(x, model.x_stats) if model.x_stats is not None else x
    # Finalize: a completion tool must return the fixed coordinates verbatim.
    return np.where(mask, reference, out)
