"""Canonical time-series and dataset containers.

A :class:`SampledSeries` is one subject's recording: strictly increasing
timestamps (seconds), an ``N x d`` value matrix and one class id per sample.
Every array is copied on construction and frozen, so instances can be shared
freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """Timestamps, values and per-sample labels of one recording.

    Parameters
    ----------
    timestamps : array_like, shape (N,)
        Sample times in seconds, strictly increasing.
    values : array_like, shape (N, d)
        Sensor readings. A 1-D array is treated as a single channel.
    labels : array_like, shape (N,)
        Non-negative integer class id per sample.
    nominal_interval : float
        Spacing of the regular grid the series originates from.
    """

    timestamps: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    nominal_interval: float

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps, dtype=np.float64)
        x = np.asarray(self.values, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim == 1:
            x = x[:, None]
        if t.ndim != 1 or x.ndim != 2 or y.ndim != 1:
            raise ValueError("timestamps and labels must be 1-D, values 2-D")
        n = t.shape[0]
        if n < 1:
            raise ValueError("a series needs at least one sample")
        if x.shape[0] != n or y.shape[0] != n:
            raise ValueError(
                f"shape mismatch: {n} timestamps, {x.shape[0]} value rows, "
                f"{y.shape[0]} labels"
            )
        if x.shape[1] < 1:
            raise ValueError("values need at least one channel")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(x)):
            raise ValueError("timestamps and values must be finite")
        if n > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if y.size and not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise ValueError("labels must be integer class ids")
        y = y.astype(np.int64)
        if np.any(y < 0):
            raise ValueError("labels must be non-negative")
        dt = float(self.nominal_interval)
        if not (np.isfinite(dt) and dt > 0):
            raise ValueError("nominal_interval must be positive")

        object.__setattr__(self, "timestamps", _frozen(t))
        object.__setattr__(self, "values", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y))
        object.__setattr__(self, "nominal_interval", dt)

    def __len__(self) -> int:
        return self.timestamps.shape[0]

    @property
    def num_channels(self) -> int:
        return self.values.shape[1]

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.nominal_interval

    def replace(self, **changes) -> "SampledSeries":
        kwargs = dict(
            timestamps=self.timestamps,
            values=self.values,
            labels=self.labels,
            nominal_interval=self.nominal_interval,
        )
        kwargs.update(changes)
        return SampledSeries(**kwargs)

    def equals(self, other: "SampledSeries") -> bool:
        """Exact (bitwise) equality of all fields."""
        return (
            self.nominal_interval == other.nominal_interval
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class ClassLabel:
    id: int
    name: str

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("class ids are non-negative")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Recordings grouped by subject plus the shared class and channel names.

    ``recordings`` is a tuple of ``(subject_id, SampledSeries)`` pairs; a
    subject may own several recordings.
    """

    recordings: tuple
    class_names: tuple
    channel_names: tuple
    _subjects: tuple = field(init=False, repr=False)

    def __post_init__(self) -> None:
        recs = tuple((sid, s) for sid, s in self.recordings)
        names = tuple(str(c) for c in self.class_names)
        channels = tuple(str(c) for c in self.channel_names)
        if len(names) < 1:
            raise ValueError("dataset needs at least one class")
        if len(set(channels)) != len(channels):
            raise ValueError("channel names must be unique")
        for sid, series in recs:
            if not isinstance(series, SampledSeries):
                raise TypeError(f"recording of subject {sid!r} is not a SampledSeries")
            if series.num_channels != len(channels):
                raise ValueError(
                    f"subject {sid!r}: {series.num_channels} channels, "
                    f"expected {len(channels)}"
                )
            if series.labels.max() >= len(names):
                raise ValueError(f"subject {sid!r}: label outside class universe")
        subjects = []
        for sid, _ in recs:
            if sid not in subjects:
                subjects.append(sid)
        object.__setattr__(self, "recordings", recs)
        object.__setattr__(self, "class_names", names)
        object.__setattr__(self, "channel_names", channels)
        object.__setattr__(self, "_subjects", tuple(subjects))

    @property
    def subjects(self) -> tuple:
        """Subject ids in order of first appearance."""
        return self._subjects

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def num_channels(self) -> int:
        return len(self.channel_names)

    @property
    def classes(self) -> list[ClassLabel]:
        return [ClassLabel(i, n) for i, n in enumerate(self.class_names)]

    def series_of(self, subject_id) -> list[SampledSeries]:
        return [s for sid, s in self.recordings if sid == subject_id]

    def map_series(self, fn) -> "Dataset":
        """Apply ``fn`` to every recording, keeping subjects and names."""
        return Dataset(
            recordings=tuple((sid, fn(s)) for sid, s in self.recordings),
            class_names=self.class_names,
            channel_names=self.channel_names,
        )


def from_regular_grid(
    t1: float,
    delta_t: float,
    values: np.ndarray,
    labels: Sequence[int],
) -> SampledSeries:
    """Build a series on the grid ``t1 + i * delta_t``."""
    if not (np.isfinite(delta_t) and delta_t > 0):
        raise ValueError("delta_t must be positive")
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0] if values.ndim else 0
    timestamps = t1 + np.arange(n, dtype=np.float64) * delta_t
    return SampledSeries(timestamps, values, labels, delta_t)


def is_regular(series: SampledSeries, tolerance: float = 1e-9) -> bool:
    """True when every interval is within ``tolerance`` of the nominal one."""
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    if len(series) < 2:
        return True
    gaps = np.diff(series.timestamps)
    return bool(np.max(np.abs(gaps - series.nominal_interval)) <= tolerance)
