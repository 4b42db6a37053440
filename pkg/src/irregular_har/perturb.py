"""Irregular-sampling operators: timestamp jitter, random dropout, downsampling.

All operators are pure functions of ``(series, magnitude, seed)``; randomness
comes from a fresh ``numpy.random.default_rng(seed)`` per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional

import numpy as np

from .core import SampledSeries

Kind = Literal["jitter", "dropout", "downsample"]


@dataclass(frozen=True)
class PerturbationSpec:
    """One perturbation to apply to a test series.

    ``epsilon`` is the jitter amplitude as a fraction of the nominal
    interval, ``alpha`` the fraction of samples to drop and ``factor`` the
    integer decimation factor.
    """

    kind: Kind
    epsilon: float = 0.0
    alpha: float = 0.0
    factor: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("jitter", "dropout", "downsample"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0 <= self.alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        if int(self.factor) != self.factor or self.factor < 1:
            raise ValueError("factor must be an integer >= 1")

    @property
    def magnitude(self) -> float:
        return {"jitter": self.epsilon, "dropout": self.alpha, "downsample": self.factor}[
            self.kind
        ]

    def with_seed(self, seed: int) -> "PerturbationSpec":
        return PerturbationSpec(self.kind, self.epsilon, self.alpha, self.factor, seed)

    def apply(self, series: SampledSeries, seed: Optional[int] = None) -> SampledSeries:
        seed = self.seed if seed is None else seed
        if self.kind == "jitter":
            return jitter_timestamps(series, self.epsilon, seed)
        if self.kind == "dropout":
            return random_dropout(series, self.alpha, seed)
        return downsample(series, int(self.factor))


def interpolate_at(series: SampledSeries, query_times) -> np.ndarray:
    """Piecewise-linear value of every channel at ``query_times``.

    Returns an array of shape ``(len(query_times), d)``. Queries that hit a
    knot return the stored sample exactly.
    """
    t = series.timestamps
    x = series.values
    q = np.atleast_1d(np.asarray(query_times, dtype=np.float64))
    if q.ndim != 1:
        raise ValueError("query_times must be 1-D")
    if q.size and (q.min() < t[0] or q.max() > t[-1] or not np.all(np.isfinite(q))):
        raise ValueError(
            f"query times must lie within [{t[0]!r}, {t[-1]!r}] (no extrapolation)"
        )
    if len(t) == 1:
        return np.repeat(x, q.size, axis=0)

    # left knot index i with t[i] <= q, clipped so i + 1 exists
    i = np.clip(np.searchsorted(t, q, side="right") - 1, 0, len(t) - 2)
    t0 = t[i]
    slope = (x[i + 1] - x[i]) / (t[i + 1] - t0)[:, None]
    out = x[i] + slope * (q - t0)[:, None]
    # exact knots, including the right end t_N
    hit = q == t0
    out[hit] = x[i[hit]]
    hit_right = q == t[i + 1]
    out[hit_right] = x[i[hit_right] + 1]
    return out


def _repair_strict(t: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Break exact ties left after sorting/clamping by nudging one ulp.

    Ties have probability zero unless clamping piles offsets onto a
    boundary, which only happens for epsilon >= 1.
    """
    if len(t) < 2 or np.all(np.diff(t) > 0):
        return t
    t = t.copy()
    for k in range(1, len(t)):
        if t[k] <= t[k - 1]:
            t[k] = np.nextafter(t[k - 1], np.inf)
    if t[-1] > hi:
        t[-1] = hi
        for k in range(len(t) - 2, -1, -1):
            if t[k] >= t[k + 1]:
                t[k] = np.nextafter(t[k + 1], -np.inf)
    if t[0] < lo:
        raise ValueError("too many samples to keep timestamps strictly increasing")
    return t


def _respect_bound(new_t: np.ndarray, t: np.ndarray, amp: float) -> np.ndarray:
    # float rounding of t + offset can overshoot the bound by an ulp
    for _ in range(4):
        over = np.abs(new_t - t) > amp
        if not over.any():
            break
        new_t = np.where(over, np.nextafter(new_t, t), new_t)
    return new_t


def jitter_timestamps(series: SampledSeries, epsilon: float, seed: int) -> SampledSeries:
    """Shift each timestamp by ``U(-epsilon*dt, +epsilon*dt)`` and resample.

    Offsets are drawn relative to the nominal interval ``dt``. The shifted
    times are clamped to the original span and sorted, values are linearly
    interpolated from the original series at the new times and every
    position keeps its original label.
    """
    if not epsilon >= 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return series.replace()
    rng = np.random.default_rng(seed)
    t = series.timestamps
    amp = epsilon * series.nominal_interval
    offsets = rng.uniform(-amp, amp, size=len(t))
    lo, hi = t[0], t[-1]
    new_t = np.sort(np.clip(t + offsets, lo, hi), kind="stable")
    new_t = _respect_bound(new_t, t, amp)
    new_t = _repair_strict(new_t, lo, hi)
    new_x = interpolate_at(series, new_t)
    return series.replace(timestamps=new_t, values=new_x)


def dropout_count(n: int, alpha: float) -> int:
    """Number of samples removed from ``n`` at rate ``alpha``: ``floor(alpha * n)``.

    ``alpha`` is read as the decimal it prints as, so 0.29 of 100 samples
    is 29 rather than the 28 that binary float multiplication yields.
    """
    return math.floor(Fraction(repr(float(alpha))) * n)


def random_dropout(series: SampledSeries, alpha: float, seed: int) -> SampledSeries:
    """Remove ``floor(alpha * N)`` uniformly chosen samples without replacement."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    n = len(series)
    n_drop = dropout_count(n, alpha)
    if n_drop == 0:
        return series.replace()
    rng = np.random.default_rng(seed)
    drop = rng.choice(n, size=n_drop, replace=False)
    keep = np.ones(n, dtype=bool)
    keep[drop] = False
    return series.replace(
        timestamps=series.timestamps[keep],
        values=series.values[keep],
        labels=series.labels[keep],
    )


def downsample(series: SampledSeries, factor: int) -> SampledSeries:
    """Keep every ``factor``-th sample (plain decimation, no anti-alias filter)."""
    if int(factor) != factor or factor < 1:
        raise ValueError("factor must be an integer >= 1")
    factor = int(factor)
    if factor > len(series):
        raise ValueError(f"factor {factor} exceeds series length {len(series)}")
    if factor == 1:
        return series.replace()
    sl = slice(0, None, factor)
    return series.replace(
        timestamps=series.timestamps[sl],
        values=series.values[sl],
        labels=series.labels[sl],
        nominal_interval=series.nominal_interval * factor,
    )


def resample_to_rate(series: SampledSeries, rate: float) -> SampledSeries:
    """Bring a regular series to ``rate`` Hz.

    Uses :func:`downsample` when the rate ratio is an integer and linear
    interpolation onto the new grid otherwise (e.g. 50 Hz -> 40 Hz). Labels
    on an interpolated grid are taken from the nearest earlier sample.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    ratio = series.sample_rate / rate
    factor = round(ratio)
    if factor >= 1 and abs(ratio - factor) < 1e-9:
        return downsample(series, factor)
    if ratio < 1:
        raise ValueError("upsampling is not supported")
    dt = 1.0 / rate
    t = series.timestamps
    n = int(np.floor((t[-1] - t[0]) / dt + 1e-9)) + 1
    grid = t[0] + np.arange(n) * dt
    grid = grid[grid <= t[-1]]
    idx = np.searchsorted(t, grid, side="right") - 1
    return SampledSeries(grid, interpolate_at(series, grid), series.labels[idx], dt)
