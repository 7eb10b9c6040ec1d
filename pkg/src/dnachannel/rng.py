"""Deterministic random-number plumbing.

All randomness in this package flows through numpy's Philox bit generator,
a counter-based PRNG.  Substreams are derived with ``numpy.random.SeedSequence``
using the substream's index path as the ``spawn_key``, so the stream for
(seed, trial 17) or (seed, trial 17, molecule 3) is a pure function of those
integers.  That makes parallel trial execution bit-identical to serial
execution regardless of worker count.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["derive_seed", "substream", "poisson_counts"]


def derive_seed(base_seed: int, *path: int) -> int:
    """Derive a 64-bit substream seed from a base seed and an index path."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(path))
    return int(ss.generate_state(1, np.uint64)[0])


def substream(base_seed: int, *path: int) -> np.random.Generator:
    """Return a Philox generator for the substream at ``path`` under ``base_seed``."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=tuple(path))
    return np.random.Generator(np.random.Philox(seed=ss))


def generator_from_seed(seed: int) -> np.random.Generator:
    """Philox generator seeded directly with an integer (e.g. a derived seed)."""
    return np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(seed)))


# Switch point between the two Poisson sampling algorithms.
_PTRS_THRESHOLD = 10.0


def poisson_counts(rng: np.random.Generator, lam: float, size: int) -> np.ndarray:
    """Draw ``size`` i.i.d. Poisson(lam) variates with a documented algorithm.

    For lam <= 10 uses inversion by sequential search (one uniform per
    variate); above that, Hormann's transformed-rejection method PTRS
    (two uniforms per attempt).  Both consume the stream in array order,
    so results are reproducible from the generator state alone.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if lam == 0:
        return np.zeros(size, dtype=np.int64)
    if lam <= _PTRS_THRESHOLD:
        return _poisson_inversion(rng, lam, size)
    return _poisson_ptrs(rng, lam, size)


def _poisson_inversion(rng: np.random.Generator, lam: float, size: int) -> np.ndarray:
    u = rng.random(size)
    k = np.zeros(size, dtype=np.int64)
    p = np.full(size, math.exp(-lam))
    cdf = p.copy()
    active = u > cdf
    # P(K > lam + 40*sqrt(lam) + 50) is far below the 1e-12 truncation mass.
    k_max = int(lam + 40.0 * math.sqrt(lam) + 50.0)
    while active.any():
        k[active] += 1
        p[active] *= lam / k[active]
        cdf[active] += p[active]
        active &= u > cdf
        if k.max() >= k_max:
            break
    return k


def _poisson_ptrs(rng: np.random.Generator, lam: float, size: int) -> np.ndarray:
    # Hormann (1993), algorithm PTRS; valid for lam >= 10.
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_lam = math.log(lam)

    out = np.empty(size, dtype=np.int64)
    pending = np.arange(size)
    while pending.size:
        u = rng.random(pending.size) - 0.5
        v = rng.random(pending.size)
        us = 0.5 - np.abs(u)
        k = np.floor((2.0 * a / us + b) * u + lam + 0.43).astype(np.int64)

        accept = (us >= 0.07) & (v <= v_r)
        # Squeeze failed: do the full acceptance test on the remainder.
        check = ~accept & (k >= 0) & ((us >= 0.013) | (v <= us))
        if check.any():
            kc = k[check]
            lhs = np.log(v[check] * inv_alpha / (a / (us[check] ** 2) + b))
            rhs = -lam + kc * log_lam - _log_factorial(kc)
            accept[check] = lhs <= rhs

        out[pending[accept]] = k[accept]
        pending = pending[~accept]
    return out


def _log_factorial(k: np.ndarray) -> np.ndarray:
    # Squeeze failures are rare, so the per-element lgamma loop stays cheap.
    return np.array([math.lgamma(float(x) + 1.0) for x in k])
