"""Figure rendering over the sweep CSV schema.

Aggregate rows (``rep == -1``) drive the mean lines; detail rows drive the
+/-1 standard deviation bands.  Overhead charts drop full-similarity points,
where the metric is undefined and the CSV holds an empty cell.  Output is
deterministic for a fixed input file: the SVG hash salt is pinned and no
timestamps are embedded.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

FIGURE_METRICS = ["metadata_bytes", "total_bytes", "overhead", "encode_ms", "decode_ms"]

_LABELS = {
    "metadata_bytes": "transmitted metadata (bytes)",
    "total_bytes": "total transmitted (bytes)",
    "overhead": "communication overhead (total / minimum)",
    "encode_ms": "encoding time (ms)",
    "decode_ms": "decoding time (ms)",
}


@dataclass
class FigureSpec:
    metric: str
    out_path: str
    algorithms: list[str] | None = None  # None = every algorithm in the file
    log_y: bool = False
    log_x: bool = False


@dataclass
class RenderSummary:
    out_path: str
    metric: str
    n_series: int
    n_bands: int
    excluded_points: int
    checksum: str = ""


@dataclass
class SweepTable:
    columns: list[str]
    detail: list[dict] = field(default_factory=list)
    aggregate: list[dict] = field(default_factory=list)

    def algorithms(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.aggregate:
            seen.setdefault(row["algorithm"])
        return list(seen)


REQUIRED_COLUMNS = ["algorithm", "n", "jaccard", "d", "rep"]


def load_table(csv_path: str) -> SweepTable:
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in columns]
        if missing:
            raise ValueError(f"CSV {csv_path} lacks required column(s): {', '.join(missing)}")
        table = SweepTable(columns=columns)
        for row in reader:
            (table.aggregate if row["rep"] == "-1" else table.detail).append(row)
    return table


def _series_points(rows: list[dict], metric: str) -> tuple[np.ndarray, np.ndarray, int]:
    """(d values, metric values, excluded count) from rows; empty cells drop out."""
    xs, ys, excluded = [], [], 0
    for row in rows:
        val = row.get(metric, "")
        if val == "" or val is None:
            excluded += 1
            continue
        xs.append(float(row["d"]))
        ys.append(float(val))
    order = np.argsort(xs, kind="stable")
    return np.asarray(xs)[order], np.asarray(ys)[order], excluded


def _band(detail: list[dict], metric: str) -> dict[float, tuple[float, float]]:
    """d -> (mean, population stddev) over detail rows, skipping empty cells."""
    groups: dict[float, list[float]] = {}
    for row in detail:
        val = row.get(metric, "")
        if val == "" or val is None:
            continue
        groups.setdefault(float(row["d"]), []).append(float(val))
    return {
        d: (float(np.mean(v)), float(np.std(v)))
        for d, v in groups.items()
    }


def render(csv_path: str, spec: FigureSpec) -> RenderSummary:
    table = load_table(csv_path)
    if spec.metric not in table.columns:
        raise ValueError(
            f"metric column {spec.metric!r} not in CSV (columns: {', '.join(table.columns)})"
        )
    algorithms = spec.algorithms or table.algorithms()
    missing = [a for a in algorithms if a not in table.algorithms()]
    if missing:
        raise ValueError(f"algorithm(s) not in CSV: {', '.join(missing)}")

    plt.rcParams["svg.hashsalt"] = "recon-plots"
    fig, ax = plt.subplots(figsize=(7.0, 4.5), dpi=100)
    n_series = n_bands = excluded = 0
    for algo in algorithms:
        agg = [r for r in table.aggregate if r["algorithm"] == algo]
        det = [r for r in table.detail if r["algorithm"] == algo]
        xs, ys, skipped = _series_points(agg, spec.metric)
        excluded += skipped
        if len(xs) == 0:
            continue
        line, = ax.plot(xs, ys, marker="o", markersize=3, label=algo)
        n_series += 1
        band = _band(det, spec.metric)
        bx = np.asarray(sorted(band))
        if len(bx):
            mean = np.asarray([band[d][0] for d in bx])
            sd = np.asarray([band[d][1] for d in bx])
            ax.fill_between(bx, mean - sd, mean + sd, alpha=0.2, color=line.get_color())
            n_bands += 1
    if n_series == 0:
        raise ValueError(f"no plottable data for column {spec.metric!r}")
    ax.set_xlabel("symmetric difference d")
    ax.set_ylabel(_LABELS.get(spec.metric, spec.metric))
    if spec.log_y:
        ax.set_yscale("log")
    if spec.log_x:
        ax.set_xscale("symlog")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(spec.out_path, metadata=_no_date_metadata(spec.out_path))
    plt.close(fig)
    return RenderSummary(
        out_path=spec.out_path,
        metric=spec.metric,
        n_series=n_series,
        n_bands=n_bands,
        excluded_points=excluded,
        checksum=_file_checksum(spec.out_path),
    )


def _no_date_metadata(out_path: str) -> dict | None:
    # SVG embeds a creation date unless suppressed; PNG has no such field
    return {"Date": None} if out_path.endswith(".svg") else None


def _file_checksum(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def render_all(csv_path: str, outdir: str, fmt: str = "svg") -> list[RenderSummary]:
    os.makedirs(outdir, exist_ok=True)
    summaries = []
    for metric in FIGURE_METRICS:
        out = os.path.join(outdir, f"fig_{metric}.{fmt}")
        summaries.append(render(csv_path, FigureSpec(metric=metric, out_path=out)))
    return summaries
