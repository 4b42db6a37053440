"""Time-based sliding windows over (possibly irregular) series."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional

import numpy as np

from .core import SampledSeries

# absolute slack (as a fraction of the nominal interval) on window bounds, so
# that grid timestamps like 100 * 0.02 land on the intended side
_BOUNDARY_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class Window:
    """One classifier input: ``m`` samples, their time gaps and a label.

    ``elapsed[j]`` is ``t_j - t_{j-1}`` inside the window and
    ``elapsed[0]`` is the nominal interval.
    """

    values: np.ndarray
    elapsed: np.ndarray
    label: int
    start_time: float
    subject_id: Hashable = None
    nominal_interval: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        elapsed = np.asarray(self.elapsed, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("window values must be an m x d matrix with m >= 1")
        if elapsed.shape != (values.shape[0],):
            raise ValueError("elapsed must have one entry per sample")
        if np.any(elapsed[1:] <= 0):
            raise ValueError("elapsed gaps must be positive")
        if not np.all(np.isfinite(values)):
            raise ValueError("window values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "elapsed", elapsed)
        object.__setattr__(self, "label", int(self.label))
        if not self.nominal_interval:
            object.__setattr__(self, "nominal_interval", float(elapsed[0]))

    def __len__(self) -> int:
        return self.values.shape[0]


def majority_label(labels: np.ndarray) -> int:
    """Most frequent class id; ties resolve to the smallest id."""
    return int(np.argmax(np.bincount(np.asarray(labels, dtype=np.int64))))


def window_starts(
    t_first: float, t_end: float, window_seconds: float, step_seconds: float
) -> np.ndarray:
    """Start times ``t_first + k*step`` whose window fits before ``t_end``."""
    span = t_end - t_first
    if span < window_seconds * (1 - 1e-12):
        return np.empty(0)
    count = int(np.floor((span - window_seconds) / step_seconds + 1e-9)) + 1
    return t_first + np.arange(count) * step_seconds


def sliding_windows(
    series: SampledSeries,
    window_seconds: float = 2.0,
    step_seconds: float = 1.0,
    subject_id: Hashable = None,
    start_time: Optional[float] = None,
    end_time: Optional[float] = None,
) -> list[Window]:
    """Cut ``series`` into fixed-duration windows.

    A window starting at ``s`` holds every sample with
    ``s <= t < s + window_seconds``. The recording is taken to cover
    ``[t_1, t_N + nominal_interval)``, so a regular 10 s recording at 50 Hz
    yields 9 windows of 2 s. ``start_time``/``end_time`` override that span;
    pass the span of the unperturbed recording so that windows of a
    perturbed copy line up with the original ones. Empty windows are
    skipped.
    """
    if not window_seconds > 0 or not step_seconds > 0:
        raise ValueError("window and step durations must be positive")
    t = series.timestamps
    dt = series.nominal_interval
    first = t[0] if start_time is None else float(start_time)
    end = t[-1] + dt if end_time is None else float(end_time)
    slack = _BOUNDARY_SLACK * dt
    starts = window_starts(first, end, window_seconds, step_seconds)

    lo = np.searchsorted(t, starts - slack, side="left")
    hi = np.searchsorted(t, starts + window_seconds - slack, side="left")
    windows = []
    for s, a, b in zip(starts, lo, hi):
        if b <= a:
            continue
        ts = t[a:b]
        elapsed = np.empty(b - a)
        elapsed[0] = dt
        elapsed[1:] = np.diff(ts)
        windows.append(
            Window(
                values=series.values[a:b],
                elapsed=elapsed,
                label=majority_label(series.labels[a:b]),
                start_time=float(s),
                subject_id=subject_id,
                nominal_interval=dt,
            )
        )
    return windows


def pad_to_length(window: Window, target: int) -> Window:
    """Repeat the last sample (or truncate the tail) to exactly ``target`` rows."""
    if target < 1:
        raise ValueError("target must be >= 1")
    m = len(window)
    if m == target:
        return window
    if m > target:
        values = window.values[:target]
        elapsed = window.elapsed[:target]
    else:
        pad = target - m
        values = np.concatenate([window.values, np.repeat(window.values[-1:], pad, axis=0)])
        elapsed = np.concatenate([window.elapsed, np.full(pad, window.nominal_interval)])
    return Window(
        values=values,
        elapsed=elapsed,
        label=window.label,
        start_time=window.start_time,
        subject_id=window.subject_id,
        nominal_interval=window.nominal_interval,
    )


def stack_windows(windows: list[Window], length: Optional[int] = None):
    """Batch windows into arrays.

    Returns ``(values, elapsed, lengths, labels)`` with shapes
    ``(B, L, d)``, ``(B, L)``, ``(B,)``, ``(B,)``. Without ``length`` the
    batch is zero-padded to the longest window and ``lengths`` records the
    true sizes; with ``length`` every window goes through
    :func:`pad_to_length` first.
    """
    if not windows:
        raise ValueError("no windows to stack")
    if length is not None:
        windows = [pad_to_length(w, length) for w in windows]
    lengths = np.array([len(w) for w in windows], dtype=np.int64)
    big = int(lengths.max())
    d = windows[0].values.shape[1]
    values = np.zeros((len(windows), big, d))
    elapsed = np.zeros((len(windows), big))
    for i, w in enumerate(windows):
        values[i, : len(w)] = w.values
        elapsed[i, : len(w)] = w.elapsed
    labels = np.array([w.label for w in windows], dtype=np.int64)
    return values, elapsed, lengths, labels
