"""Deterministic, counter-based Gaussian perturbation sampling.

Each noise entry is a pure function of ``(seed, k, t, j)``: the indices are
fed through a chain of splitmix64 finalizers to produce a uniform, which is
mapped to a standard normal with the inverse CDF (scipy ``ndtri``) and scaled
by the per-dimension standard deviation.  There is no sequential RNG state,
so generation is bit-identical regardless of evaluation order, chunking, or
thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z):
    """splitmix64 finalizer, vectorized over uint64 arrays."""
    with np.errstate(over="ignore"):   # wrap-around is the point
        z = (z + _GOLDEN) & _MASK
        z ^= z >> np.uint64(30)
        z = (z * _MIX1) & _MASK
        z ^= z >> np.uint64(27)
        z = (z * _MIX2) & _MASK
        z ^= z >> np.uint64(31)
    return z


@dataclass(frozen=True)
class NoiseTensor:
    """K x N x m Gaussian perturbations plus the recipe that made them."""

    values: np.ndarray
    seed: int
    sigma: np.ndarray


@dataclass(frozen=True)
class SampleBatch:
    """Perturbed control sequences: controls = base + noises."""

    controls: np.ndarray   # (K, N, m)
    noises: NoiseTensor
    base: np.ndarray       # (N, m)


def draw_noise(seed: int, K: int, N: int, m: int, sigma) -> NoiseTensor:
    """Zero-mean i.i.d. Gaussian tensor of shape (K, N, m).

    sigma may be a scalar or a length-m vector of per-dimension standard
    deviations; it must be strictly positive.
    """
    if K < 1 or N < 1 or m < 1:
        raise ValueError("K, N, m must all be >= 1")
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (m,)).copy()
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("sigma must be strictly positive and finite")
    seed_u = np.uint64(np.int64(seed).astype(np.uint64))
    ks = np.arange(K, dtype=np.uint64)[:, None, None]
    ts = np.arange(N, dtype=np.uint64)[None, :, None]
    js = np.arange(m, dtype=np.uint64)[None, None, :]
    h = _splitmix(seed_u)
    h = _splitmix(h ^ ks)
    h = _splitmix(h ^ ts)
    h = _splitmix(h ^ js)
    # 53-bit mantissa, offset by half an ulp so u is never exactly 0 or 1
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    values = ndtri(u) * sigma
    return NoiseTensor(values=values, seed=int(seed), sigma=sigma)


def perturb(base, noise: NoiseTensor) -> SampleBatch:
    """Add the noise tensor to the nominal sequence; base is not modified."""
    base = np.asarray(base, dtype=float)
    if base.shape != noise.values.shape[1:]:
        raise ValueError(
            f"base shape {base.shape} does not match noise {noise.values.shape[1:]}")
    return SampleBatch(controls=base + noise.values, noises=noise, base=base)


def derive_step_seed(seed: int, step_index: int) -> int:
    """Per-environment-step seed, decorrelated from neighbouring steps."""
    h = _splitmix(np.uint64(np.int64(seed).astype(np.uint64)))
    h = _splitmix(h ^ np.uint64(step_index))
    return int(h & np.uint64(0x7FFFFFFFFFFFFFFF))
