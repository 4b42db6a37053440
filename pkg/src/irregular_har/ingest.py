"""Loading HAR recordings from CSV and generating synthetic stand-in datasets."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .core import Dataset, SampledSeries


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of a one-row-per-sample CSV file."""

    channel_columns: tuple
    subject_column: str = "subject"
    label_column: str = "label"
    timestamp_column: Optional[str] = None

    def __post_init__(self) -> None:
        channels = tuple(self.channel_columns)
        object.__setattr__(self, "channel_columns", channels)
        if not channels:
            raise ValueError("at least one channel column is required")
        named = [self.subject_column, self.label_column, *channels]
        if self.timestamp_column is not None:
            named.append(self.timestamp_column)
        if len(set(named)) != len(named):
            raise ValueError(f"column names must be distinct: {named}")

    @property
    def columns(self) -> list[str]:
        cols = [self.subject_column]
        if self.timestamp_column is not None:
            cols.append(self.timestamp_column)
        return cols + [self.label_column, *self.channel_columns]


def generate_timestamps(n: int, sample_rate: float) -> np.ndarray:
    """Timestamps ``i / sample_rate`` for ``i = 0 .. n-1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    return np.arange(n, dtype=np.float64) / sample_rate


def _natural_key(value: str):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", value)]


def _label_order(raw: Sequence[str]) -> list[str]:
    distinct = sorted(set(raw))
    try:
        return sorted(distinct, key=float)
    except ValueError:
        return sorted(distinct, key=_natural_key)


def _subject_key(value: str):
    try:
        as_int = int(value)
    except ValueError:
        return value
    return as_int if str(as_int) == value else value


def load_csv(
    path,
    schema: CsvSchema,
    sample_rate: float,
    class_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """Read a CSV file into a :class:`Dataset` with one series per subject.

    Label values are mapped to class ids by their position in ``class_names``;
    without it every distinct label value becomes a class, ordered
    numerically when all labels are numbers. Files without a timestamp column
    get ``generate_timestamps`` times starting at 0.
    """
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    missing = [c for c in schema.columns if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing column(s) {missing}")

    numeric_cols = list(schema.channel_columns)
    if schema.timestamp_column is not None:
        numeric_cols.append(schema.timestamp_column)
    numeric = {}
    for col in numeric_cols:
        try:
            numeric[col] = np.array([float(v) for v in df[col]], dtype=np.float64)
        except ValueError as exc:
            raise ValueError(f"{path}: column {col!r}: {exc}") from None
        bad = ~np.isfinite(numeric[col])
        if bad.any():
            row = int(np.argmax(bad)) + 2
            raise ValueError(f"{path}: non-finite value in column {col!r} at line {row}")

    labels_raw = df[schema.label_column].str.strip().tolist()
    if class_names is None:
        names = _label_order(labels_raw)
    else:
        names = [str(c) for c in class_names]
    index = {name: i for i, name in enumerate(names)}
    unknown = sorted(set(labels_raw) - set(index))
    if unknown:
        raise ValueError(f"{path}: unknown label value(s) {unknown}")
    label_ids = np.array([index[v] for v in labels_raw], dtype=np.int64)

    subjects_raw = df[schema.subject_column].str.strip().tolist()
    order: list[str] = []
    for s in subjects_raw:
        if s not in order:
            order.append(s)
    subj = np.array(subjects_raw, dtype=object)
    values_all = np.column_stack([numeric[c] for c in schema.channel_columns])

    recordings = []
    dt = 1.0 / sample_rate
    for sid in order:
        rows = np.flatnonzero(subj == sid)
        if schema.timestamp_column is not None:
            t = numeric[schema.timestamp_column][rows]
            if len(t) > 1 and not np.all(np.diff(t) > 0):
                raise ValueError(
                    f"{path}: timestamps of subject {sid!r} are not strictly increasing"
                )
        else:
            t = generate_timestamps(len(rows), sample_rate)
        series = SampledSeries(t, values_all[rows], label_ids[rows], dt)
        recordings.append((_subject_key(sid), series))
    return Dataset(tuple(recordings), tuple(names), tuple(schema.channel_columns))


def format_float(x: float) -> str:
    """Shortest representation that round-trips to the same double."""
    return repr(float(x))


def write_csv(dataset: Dataset, path, include_timestamps: bool = True) -> CsvSchema:
    """Write ``dataset`` in the layout :func:`load_csv` reads back.

    Labels are written as class names and numbers in shortest round-trip
    form, so load -> write -> load reproduces the arrays bit for bit.
    """
    schema = CsvSchema(
        channel_columns=dataset.channel_names,
        timestamp_column="timestamp" if include_timestamps else None,
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.columns)
        for sid, series in dataset.recordings:
            for i in range(len(series)):
                row = [str(sid)]
                if include_timestamps:
                    row.append(format_float(series.timestamps[i]))
                row.append(dataset.class_names[series.labels[i]])
                row.extend(format_float(v) for v in series.values[i])
                writer.writerow(row)
    return schema


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the synthetic sinusoid-family activity dataset."""

    num_subjects: int = 5
    num_classes: int = 4
    channels: int = 3
    sample_rate: float = 50.0
    segment_seconds: float = 10.0
    segments_per_subject: int = 8
    noise_std: float = 0.1
    seed: int = 0
    drift_amplitude: float = 0.1

    def __post_init__(self) -> None:
        for name in ("num_subjects", "num_classes", "channels", "segments_per_subject"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not self.segment_seconds > 0:
            raise ValueError("segment_seconds must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")

    @property
    def samples_per_segment(self) -> int:
        return int(round(self.segment_seconds * self.sample_rate))

    @property
    def samples_per_subject(self) -> int:
        return self.samples_per_segment * self.segments_per_subject


def class_frequencies(num_classes: int) -> np.ndarray:
    """Fundamental frequency (Hz) of each synthetic class: ``1 + c``."""
    return 1.0 + np.arange(num_classes, dtype=np.float64)


def class_amplitudes(num_classes: int) -> np.ndarray:
    return 1.0 + 0.5 * np.arange(num_classes, dtype=np.float64)


def synth_generate(config: SynthConfig) -> Dataset:
    """Generate a labeled multi-subject dataset of noisy class sinusoids.

    Channel ``j`` of a class-``c`` segment is
    ``a_c * m_s * w_cj * sin(2 pi f_c t + phi) + o_cj + drift_s(t) + noise``
    with class frequency/amplitude ``(f_c, a_c)``, a fixed per-class channel
    mixing ``w_cj``, offset ``o_cj`` and inter-channel phase pattern,
    per-subject amplitude multiplier ``m_s`` and a random phase per segment.
    Segment classes cycle through a per-subject permutation so every class
    appears with near-equal share.
    """
    k = config.num_classes
    d = config.channels
    root = np.random.SeedSequence(config.seed)
    class_ss, *subject_ss = root.spawn(1 + config.num_subjects)
    class_rng = np.random.default_rng(class_ss)
    freqs = class_frequencies(k)
    amps = class_amplitudes(k)
    weights = class_rng.uniform(0.5, 1.5, size=(k, d))
    offsets = class_rng.uniform(-0.5, 0.5, size=(k, d))
    channel_phase = class_rng.uniform(0, 2 * math.pi, size=(k, d))

    n_seg = config.samples_per_segment
    dt = 1.0 / config.sample_rate
    recordings = []
    for s in range(config.num_subjects):
        rng = np.random.default_rng(subject_ss[s])
        multiplier = rng.uniform(0.8, 1.2)
        drift_phase = rng.uniform(0, 2 * math.pi)
        perm = rng.permutation(k)
        t_all = np.arange(n_seg * config.segments_per_subject) * dt
        values = np.empty((t_all.size, d))
        labels = np.empty(t_all.size, dtype=np.int64)
        for seg in range(config.segments_per_subject):
            c = int(perm[seg % k])
            sl = slice(seg * n_seg, (seg + 1) * n_seg)
            t = t_all[sl]
            phase = rng.uniform(0, 2 * math.pi) + channel_phase[c]
            carrier = np.sin(2 * math.pi * freqs[c] * t[:, None] + phase)
            values[sl] = amps[c] * multiplier * weights[c] * carrier + offsets[c]
            labels[sl] = c
        drift = config.drift_amplitude * np.sin(2 * math.pi * 0.05 * t_all + drift_phase)
        values += drift[:, None]
        if config.noise_std > 0:
            values += rng.normal(0.0, config.noise_std, size=values.shape)
        recordings.append((s, SampledSeries(t_all, values, labels, dt)))
    return Dataset(
        tuple(recordings),
        tuple(f"class_{c}" for c in range(k)),
        tuple(f"ch{j}" for j in range(d)),
    )
