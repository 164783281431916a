"""Deterministic per-run random streams.

Every run owns a single integer seed. Streams are derived from
(seed, chain, role) through SeedSequence spawn keys, so each sampling chain
and each noise role (init draw, reverse-step noise, known-part alignment,
re-noising) consumes an independent stream. Adding draws to one role never
shifts another, which is what makes the plain sampler and the mask-resampling
sampler bit-identical when the mask is empty and U=1.
"""

import numpy as np

ROLE_INIT = 0
ROLE_STEP = 1
ROLE_ALIGN = 2
ROLE_RENOISE = 3
ROLE_TRAIN = 4
ROLE_DATA = 5


def stream(seed, chain=0, role=0):
    """Generator for one (seed, chain, role) triple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chain), int(role)))
    return np.random.default_rng(ss)


def chain_streams(seed, n_chains, role):
    return [stream(seed, chain, role) for chain in range(n_chains)]
