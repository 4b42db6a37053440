"""Turn per-fold sweep rows into plot-ready tables.

* ``loss_table``: one row per (train rate, architecture) with the mean
  regular macro F1 and the mean jitter loss for every epsilon, i.e. the
  layout of a loss-vs-variation summary table.
* ``rate_series``: mean jitter loss against training sample rate.
* ``dropout_series``: mean dropout loss against dropout rate.

Means are taken over folds first and then over seeds.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .evaluation import BASELINE, summarize
from .ingest import format_float


def _cells(rows: Sequence[dict]) -> dict:
    return {
        (c["architecture"], c["train_rate"], c["perturbation"], c["magnitude"]): c
        for c in summarize(rows)
    }


def _ordered(values):
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return seen


def loss_table(rows: Sequence[dict]) -> tuple[list[str], list[list]]:
    if not rows:
        raise ValueError("no result rows")
    cells = _cells(rows)
    archs = _ordered(r["architecture"] for r in rows)
    rates = sorted({r["train_rate"] for r in rows})
    eps = sorted({r["magnitude"] for r in rows if r["perturbation"] == "jitter"})
    header = ["train_rate", "architecture", "macro_f1"] + [f"jitter_{format_float(e)}" for e in eps]
    table = []
    for rate in rates:
        for arch in archs:
            keys = [k for k in cells if k[0] == arch and k[1] == rate]
            if not keys:
                continue
            base = cells.get((arch, rate, BASELINE, 0.0)) or cells[keys[0]]
            line = [rate, arch, base["mean_p_regular"]]
            for e in eps:
                cell = cells.get((arch, rate, "jitter", e))
                line.append(cell["mean_p_loss"] if cell else "")
            table.append(line)
    return header, table


def _series(rows: Sequence[dict], kind: str, x_name: str) -> tuple[list[str], list[list]]:
    cells = _cells(rows)
    header = ["architecture", "train_rate", x_name, "mean_p_loss", "std_p_loss", "n_rows"]
    table = []
    for (arch, rate, pert, mag), c in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][3], kv[0][1])):
        if pert != kind:
            continue
        table.append([arch, rate, mag, c["mean_p_loss"], c["std_p_loss"], c["n_rows"]])
    return header, table


def rate_series(rows: Sequence[dict]):
    """Jitter loss per (architecture, epsilon) as a function of training rate."""
    return _series(rows, "jitter", "epsilon")


def dropout_series(rows: Sequence[dict]):
    return _series(rows, "dropout", "alpha")


def _write(path: Path, header, table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for line in table:
            w.writerow([format_float(v) if isinstance(v, float) else v for v in line])


def write_report(rows: Sequence[dict], out_dir) -> dict:
    """Write ``loss_table.csv``, ``rate_series.csv`` and ``dropout_series.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "loss_table": out / "loss_table.csv",
        "rate_series": out / "rate_series.csv",
        "dropout_series": out / "dropout_series.csv",
    }
    _write(paths["loss_table"], *loss_table(rows))
    _write(paths["rate_series"], *rate_series(rows))
    _write(paths["dropout_series"], *dropout_series(rows))
    return paths
