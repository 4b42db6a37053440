"""Training loop, leave-one-subject-out folds and the robustness sweep.

The sweep trains every architecture on regularly sampled data of all but one
subject, scores it on the held-out subject's regular windows (``P_regular``)
and on windows cut from perturbed copies of the same recordings
(``P_irregular``), and reports the relative loss between the two.
"""

from __future__ import annotations

import csv
import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Hashable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .core import Dataset
from .ingest import CsvSchema, SynthConfig, format_float, load_csv, synth_generate
from .metrics import confusion_matrix, macro_f1, performance_loss
from .models import ARCHITECTURES, Model, ModelConfig, build_model
from .perturb import PerturbationSpec, resample_to_rate
from .windowing import Window, sliding_windows

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "seed",
    "train_rate",
    "fold",
    "test_subject",
    "architecture",
    "perturbation",
    "magnitude",
    "p_regular",
    "p_irregular",
    "p_loss",
)
BASELINE = "regular"
DEFAULT_EPSILONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
DEFAULT_ALPHAS = (0.1, 0.2, 0.4, 0.6, 0.8)


class SweepError(RuntimeError):
    """A fold or grid cell of a sweep failed."""


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a base seed and any job keys."""
    words = [zlib.crc32(repr(p).encode()) for p in parts]
    state = np.random.SeedSequence(words).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


# ----------------------------------------------------------------- folds


@dataclass(frozen=True)
class Fold:
    index: int
    test_subject: Hashable
    train_subjects: tuple


def loso_folds(dataset: Dataset) -> list[Fold]:
    """One fold per subject: that subject is tested, all others train."""
    subjects = dataset.subjects
    if len(subjects) < 2:
        raise ValueError("leave-one-subject-out needs at least two subjects")
    return [
        Fold(i, s, tuple(o for o in subjects if o != s)) for i, s in enumerate(subjects)
    ]


def validation_split(
    windows: Sequence[Window], fraction: float, seed: int
) -> tuple[list[Window], list[Window]]:
    """Randomly hold out ``round(fraction * n)`` windows for validation."""
    if not 0 <= fraction < 1:
        raise ValueError("validation fraction must lie in [0, 1)")
    n = len(windows)
    n_val = int(round(fraction * n))
    if n_val == 0:
        return list(windows), []
    picked = np.zeros(n, dtype=bool)
    picked[np.random.default_rng(seed).choice(n, size=n_val, replace=False)] = True
    train = [w for w, p in zip(windows, picked) if not p]
    val = [w for w, p in zip(windows, picked) if p]
    return train, val


def subject_windows(
    dataset: Dataset, window_seconds: float, step_seconds: float
) -> dict:
    """Windows of every recording, grouped by subject id."""
    out: dict = {s: [] for s in dataset.subjects}
    for sid, series in dataset.recordings:
        out[sid].extend(sliding_windows(series, window_seconds, step_seconds, sid))
    return out


# -------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.02
    momentum: float = 0.9
    clip_norm: float = 5.0
    val_fraction: float = 0.1


def evaluate_f1(model: Model, windows: Sequence[Window], num_classes: int) -> float:
    if not windows:
        raise ValueError("no windows to evaluate")
    pred = model.predict_batch(windows)
    truth = [w.label for w in windows]
    return macro_f1(confusion_matrix(pred, truth, num_classes))


def fit_normalization(model: Model, windows: Sequence[Window]) -> None:
    values = np.concatenate([w.values for w in windows], axis=0)
    model.set_normalization(values.mean(axis=0), values.std(axis=0))


def train(
    model: Model,
    train_windows: Sequence[Window],
    val_windows: Sequence[Window],
    hyper: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> Model:
    """Mini-batch momentum SGD on the mean cross-entropy.

    Input normalization is fitted on the training windows. After each epoch
    the validation macro F1 is measured and the best parameters seen so far
    are restored at the end (the last epoch's parameters when there is no
    validation set).
    """
    if not train_windows:
        raise ValueError("empty training set")
    fit_normalization(model, train_windows)
    k = model.config.num_classes
    values, elapsed, lengths, labels = model.prepare(train_windows)
    rng = np.random.default_rng(seed)
    n = len(labels)
    best_score = -np.inf
    best_state = None
    history = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            logits = model.forward(values[idx], elapsed[idx], lengths[idx])
            loss = ad.cross_entropy(logits, labels[idx])
            ad.backward(loss, model.store)
            if hyper.clip_norm:
                norm = model.store.grad_norm()
                if norm > hyper.clip_norm:
                    for p in model.store.params.values():
                        p.grad *= hyper.clip_norm / norm
            ad.sgd_step(model.store, hyper.learning_rate, hyper.momentum)
            total += float(loss.data) * len(idx)
        record = {"epoch": epoch + 1, "loss": total / n}
        if val_windows:
            score = evaluate_f1(model, val_windows, k)
            record["val_f1"] = score
            if score > best_score:
                best_score = score
                best_state = model.store.state()
        history.append(record)
    if best_state is not None:
        model.store.load_state(best_state)
    model.history = history
    return model


# ----------------------------------------------------------------- sweep


@dataclass(frozen=True)
class CsvSource:
    path: str
    schema: CsvSchema
    sample_rate: float
    class_names: Optional[tuple] = None

    def load(self) -> Dataset:
        return load_csv(self.path, self.schema, self.sample_rate, self.class_names)


def default_perturbations() -> tuple:
    jit = tuple(PerturbationSpec("jitter", epsilon=e) for e in DEFAULT_EPSILONS)
    drop = tuple(PerturbationSpec("dropout", alpha=a) for a in DEFAULT_ALPHAS)
    return jit + drop


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything a sweep needs. ``synth`` and ``csv`` are mutually exclusive."""

    architectures: tuple = ("conv_dense", "cfc_net")
    train_rates: tuple = (50.0,)
    perturbations: tuple = field(default_factory=default_perturbations)
    window_seconds: float = 2.0
    step_seconds: float = 1.0
    training: TrainConfig = TrainConfig()
    seeds: tuple = (0,)
    hidden_size: int = 32
    conv_channels: int = 16
    kernel_size: int = 5
    synth: Optional[SynthConfig] = None
    csv: Optional[CsvSource] = None
    dropout_for_discrete: bool = False
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if not self.architectures or not self.train_rates or not self.seeds:
            raise ValueError("architectures, train_rates and seeds must be non-empty")
        for arch in self.architectures:
            if arch not in ARCHITECTURES:
                raise ValueError(f"unknown architecture {arch!r}")
        if any(not r > 0 for r in self.train_rates):
            raise ValueError("train rates must be positive")
        if self.synth is not None and self.csv is not None:
            raise ValueError("choose either a synthetic or a CSV dataset, not both")
        if not self.window_seconds > 0 or not self.step_seconds > 0:
            raise ValueError("window and step must be positive")

    def load_dataset(self) -> Dataset:
        if self.csv is not None:
            return self.csv.load()
        return synth_generate(self.synth or SynthConfig())

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        raw = dict(raw)
        kwargs = {}
        if "perturbations" in raw:
            kwargs["perturbations"] = tuple(_parse_perturbations(raw.pop("perturbations")))
        if "training" in raw:
            kwargs["training"] = TrainConfig(**raw.pop("training"))
        if raw.get("synth") is not None:
            kwargs["synth"] = SynthConfig(**raw.pop("synth"))
        if raw.get("csv") is not None:
            c = dict(raw.pop("csv"))
            schema = CsvSchema(
                channel_columns=tuple(c.pop("channel_columns")),
                subject_column=c.pop("subject_column", "subject"),
                label_column=c.pop("label_column", "label"),
                timestamp_column=c.pop("timestamp_column", None),
            )
            names = c.pop("class_names", None)
            kwargs["csv"] = CsvSource(
                c.pop("path"), schema, float(c.pop("sample_rate")),
                tuple(names) if names else None,
            )
            if c:
                raise ValueError(f"unknown csv keys {sorted(c)}")
        raw.pop("synth", None)
        raw.pop("csv", None)
        for key in ("architectures", "train_rates", "seeds"):
            if key in raw:
                kwargs[key] = tuple(raw.pop(key))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown experiment keys {sorted(unknown)}")
        kwargs.update(raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["perturbations"] = [
            {"kind": p.kind, "magnitude": p.magnitude} for p in self.perturbations
        ]
        return out


def _parse_perturbations(items) -> list[PerturbationSpec]:
    """Accept ``{"kind": "jitter", "magnitude": 0.3}`` or grid form
    ``{"kind": "jitter", "values": [0.1, 0.2]}``."""
    out = []
    for item in items:
        kind = item["kind"]
        mags = item["values"] if "values" in item else [item["magnitude"]]
        for m in mags:
            if kind == "jitter":
                out.append(PerturbationSpec("jitter", epsilon=float(m)))
            elif kind == "dropout":
                out.append(PerturbationSpec("dropout", alpha=float(m)))
            elif kind == "downsample":
                out.append(PerturbationSpec("downsample", factor=int(m)))
            else:
                raise ValueError(f"unknown perturbation kind {kind!r}")
    return out


@dataclass
class SweepResult:
    rows: list
    summary: list

    def write_csv(self, path) -> None:
        write_results_csv(self.rows, path)

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"cells": self.summary}, fh, indent=2, sort_keys=True)
            fh.write("\n")


def write_results_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    format_float(row[c]) if isinstance(row[c], float) else row[c]
                    for c in RESULT_COLUMNS
                ]
            )


def read_results_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != RESULT_COLUMNS:
            raise ValueError(f"{path}: not a results file (header {reader.fieldnames})")
        rows = []
        for raw in reader:
            row = dict(raw)
            row["seed"] = int(row["seed"])
            row["fold"] = int(row["fold"])
            for key in ("train_rate", "magnitude", "p_regular", "p_irregular", "p_loss"):
                row[key] = float(row[key])
            rows.append(row)
    return rows


def _discrete(arch: str) -> bool:
    return arch != "cfc_net"


def _fold_job(args) -> list[dict]:
    spec, dataset, seed, rate, fold = args
    windows = subject_windows(dataset, spec.window_seconds, spec.step_seconds)
    pool = [w for s in fold.train_subjects for w in windows[s]]
    test_regular = windows[fold.test_subject]
    if not pool or not test_regular:
        raise ValueError("fold has no training or no test windows")
    train_w, val_w = validation_split(
        pool, spec.training.val_fraction, derive_seed(seed, "val", rate, fold.index)
    )

    # perturbed test windows are shared by all architectures of this fold
    perturbed = []
    for p_idx, pert in enumerate(spec.perturbations):
        p_seed = derive_seed(seed, "perturb", rate, fold.index, p_idx, pert.kind, pert.magnitude)
        wins = []
        for r_idx, (sid, series) in enumerate(dataset.recordings):
            if sid != fold.test_subject:
                continue
            irregular = pert.apply(series, seed=derive_seed(p_seed, r_idx))
            wins.extend(
                sliding_windows(
                    irregular,
                    spec.window_seconds,
                    spec.step_seconds,
                    sid,
                    start_time=series.timestamps[0],
                    end_time=series.timestamps[-1] + series.nominal_interval,
                )
            )
        perturbed.append((pert, wins))

    window_len = int(round(spec.window_seconds * rate))
    rows = []
    for arch in spec.architectures:
        cell = f"{arch}@{rate:g}Hz"
        config = ModelConfig(
            architecture=arch,
            input_channels=dataset.num_channels,
            num_classes=dataset.num_classes,
            window_len=window_len if _discrete(arch) else None,
            hidden_size=spec.hidden_size,
            conv_channels=spec.conv_channels,
            kernel_size=spec.kernel_size,
            seed=derive_seed(seed, "init", arch, rate, fold.index),
        )
        model = train(
            build_model(config),
            train_w,
            val_w,
            spec.training,
            seed=derive_seed(seed, "train", arch, rate, fold.index),
        )
        k = dataset.num_classes
        p_regular = evaluate_f1(model, test_regular, k)
        if p_regular == 0:
            raise SweepError(f"{cell}: P_regular is 0, performance loss undefined")
        base = dict(
            seed=seed,
            train_rate=float(rate),
            fold=fold.index,
            test_subject=str(fold.test_subject),
            architecture=arch,
        )
        rows.append(
            dict(base, perturbation=BASELINE, magnitude=0.0, p_regular=p_regular,
                 p_irregular=p_regular, p_loss=0.0)
        )
        for pert, wins in perturbed:
            if pert.kind == "dropout" and _discrete(arch) and not spec.dropout_for_discrete:
                continue
            if not wins:
                raise SweepError(f"{cell}, {pert.kind}={pert.magnitude}: no test windows")
            p_irr = evaluate_f1(model, wins, k)
            rows.append(
                dict(base, perturbation=pert.kind, magnitude=float(pert.magnitude),
                     p_regular=p_regular, p_irregular=p_irr,
                     p_loss=performance_loss(p_regular, p_irr))
            )
    return rows


def _run_job(args) -> list[dict]:
    spec, dataset, seed, rate, fold = args
    try:
        return _fold_job(args)
    except Exception as exc:
        raise SweepError(
            f"sweep failed at seed {seed}, train rate {rate:g} Hz, fold {fold.index} "
            f"(test subject {fold.test_subject!r}): {exc}"
        ) from exc


def run_sweep(spec: ExperimentSpec, dataset: Optional[Dataset] = None) -> SweepResult:
    """Train per fold on regular data and score every perturbation cell.

    Rows come back ordered by (seed, train rate, fold, architecture,
    perturbation) regardless of ``n_jobs``.
    """
    if dataset is None:
        dataset = spec.load_dataset()
    folds = loso_folds(dataset)
    jobs = []
    for rate in spec.train_rates:
        resampled = dataset.map_series(lambda s, r=rate: resample_to_rate(s, r))
        for seed in spec.seeds:
            for fold in folds:
                jobs.append((spec, resampled, seed, rate, fold))
    log.info("running %d fold jobs", len(jobs))
    if spec.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.n_jobs) as ex:
            chunks = list(ex.map(_run_job, jobs))
    else:
        chunks = [_run_job(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]
    arch_order = {a: i for i, a in enumerate(spec.architectures)}
    rows.sort(key=lambda r: (r["seed"], r["train_rate"], r["fold"], arch_order[r["architecture"]]))
    return SweepResult(rows, summarize(rows))


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Mean over folds, then over seeds, per (architecture, rate, perturbation).

    ``std_p_loss`` is the population standard deviation over all fold rows
    of the cell.
    """
    cells: dict = {}
    for r in rows:
        key = (r["architecture"], r["train_rate"], r["perturbation"], r["magnitude"])
        cells.setdefault(key, []).append(r)
    out = []
    for (arch, rate, kind, mag), members in cells.items():
        by_seed: dict = {}
        for r in members:
            by_seed.setdefault(r["seed"], []).append(r)
        def two_level(col):
            return float(np.mean([np.mean([r[col] for r in rs]) for rs in by_seed.values()]))
        out.append(
            dict(
                architecture=arch,
                train_rate=rate,
                perturbation=kind,
                magnitude=mag,
                mean_p_loss=two_level("p_loss"),
                std_p_loss=float(np.std([r["p_loss"] for r in members])),
                mean_p_regular=two_level("p_regular"),
                mean_p_irregular=two_level("p_irregular"),
                n_rows=len(members),
                n_seeds=len(by_seed),
            )
        )
    return out
