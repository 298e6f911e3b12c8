"""Post-hoc trial metrics: MSE, settling times, and Welch's one-tailed t-test.

Settling time is the earliest time after which the signal stays inside the
band for every remaining sample.  A trial only counts as converged if that
time falls within the first 75% of the record, so truncated logs cannot fake
convergence.  Non-convergence is a value (None), not an error, and summary
statistics exclude non-converged trials while reporting their count.

The Student-t CDF used by the Welch test is computed from the regularized
incomplete beta function via a Lentz continued fraction (1e-12 threshold).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cost import wrap_angle


@dataclass(frozen=True)
class TrialRecord:
    """Per-timestep log of one episode.

    states has one more row than controls; times align with states and are
    strictly increasing.
    """

    times: np.ndarray            # (T+1,) seconds
    states: np.ndarray           # (T+1, n)
    controls: np.ndarray         # (T, m)
    step_wall_times: np.ndarray  # (T,) seconds

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise ValueError("states and times must have equal length")
        if len(self.controls) != len(self.states) - 1:
            raise ValueError("controls must be one shorter than states")
        if len(self.step_wall_times) != len(self.controls):
            raise ValueError("one wall time per control")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class SettlingCriterion:
    """Band definition for a settling-time measurement.

    mode "absolute": band is the half-width in signal units.
    mode "fraction_of_range": half-width is band * step_range (the step
    range is pi for the swing-up angle).
    """

    signal_index: int
    target: float
    band: float
    mode: str = "absolute"
    step_range: float = math.pi
    wrap_angle: bool = False

    def __post_init__(self):
        if self.band <= 0:
            raise ValueError("band must be positive")
        if self.mode not in ("absolute", "fraction_of_range"):
            raise ValueError("mode must be 'absolute' or 'fraction_of_range'")

    @property
    def half_width(self) -> float:
        if self.mode == "absolute":
            return self.band
        return self.band * self.step_range


def _signal_error(record: TrialRecord, signal_index: int, target: float,
                  wrap: bool) -> np.ndarray:
    e = record.states[:, signal_index] - target
    return wrap_angle(e) if wrap else e


def mse(record: TrialRecord, signal_index: int, target: float,
        wrap: bool = False) -> float:
    """Mean squared (optionally angle-wrapped) error over all timesteps."""
    if len(record.states) == 0:
        raise ValueError("empty record")
    e = _signal_error(record, signal_index, target, wrap)
    return float(np.mean(e * e))


def settling_time(record: TrialRecord,
                  criterion: SettlingCriterion) -> float | None:
    """Earliest time the signal permanently enters the band, or None."""
    err = np.abs(_signal_error(record, criterion.signal_index,
                               criterion.target, criterion.wrap_angle))
    inside = err <= criterion.half_width
    outside_idx = np.nonzero(~inside)[0]
    settle = 0 if outside_idx.size == 0 else int(outside_idx[-1]) + 1
    if settle >= len(inside):
        return None
    # Guard against truncation: the in-band tail must span >= 25% of the log.
    if settle > 0.75 * (len(inside) - 1):
        return None
    return float(record.times[settle])


def _betainc_cf(a: float, b: float, x: float, tol=1e-12, max_iter=500) -> float:
    """Continued fraction for the regularized incomplete beta I_x(a, b)."""
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    tiny = 1e-300
    c = 1.0
    d = 1.0 - (a + b) * x / (a + 1.0)
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return math.exp(ln_front) * h / a


def _betainc(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    # Use the symmetry relation on whichever side converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return _betainc_cf(a, b, x)
    return 1.0 - _betainc_cf(b, a, 1.0 - x)


def student_t_cdf(t: float, dof: float) -> float:
    """P(T <= t) for Student's t with (possibly fractional) dof."""
    if dof <= 0:
        raise ValueError("dof must be positive")
    x = dof / (dof + t * t)
    tail = 0.5 * _betainc(0.5 * dof, 0.5, x)
    return 1.0 - tail if t >= 0 else tail


def welch_t_test_one_tailed(group_a, group_b):
    """Welch statistic, Welch-Satterthwaite dof, and one-tailed p.

    Tests the hypothesis "group_a has a smaller mean than group_b" (smaller
    is better): p = P(T_dof < t).  Identical groups give p = 0.5.
    """
    a = np.asarray(group_a, dtype=float)
    b = np.asarray(group_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each group needs at least two values")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("groups must be finite")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 or vb == 0.0:
        raise ValueError("degenerate group: zero variance")
    na, nb = a.size, b.size
    se2 = va / na + vb / nb
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    dof = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return t, dof, student_t_cdf(t, dof)


@dataclass(frozen=True)
class SummaryRow:
    metric: str
    mean: float
    std: float
    median: float
    n: int
    n_nonconverged: int


def summarize(records: list[TrialRecord],
              metric_fns: dict[str, Callable[[TrialRecord], float | None]]
              ) -> list[SummaryRow]:
    """Mean/std/median per metric; non-converged trials are counted but
    excluded from the statistics (the std is the n-1 sample std, reported as
    0.0 when only one value is available)."""
    if not records:
        raise ValueError("need at least one trial")
    rows = []
    for name, fn in metric_fns.items():
        values = [fn(r) for r in records]
        kept = np.array([v for v in values if v is not None], dtype=float)
        n_bad = sum(v is None for v in values)
        if kept.size == 0:
            rows.append(SummaryRow(name, math.nan, math.nan, math.nan,
                                   0, n_bad))
            continue
        std = float(kept.std(ddof=1)) if kept.size > 1 else 0.0
        rows.append(SummaryRow(name, float(kept.mean()), std,
                               float(np.median(kept)), int(kept.size), n_bad))
    return rows
