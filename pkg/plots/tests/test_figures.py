import hashlib
import os
import subprocess
import sys
from pathlib import Path

import pytest

from recon_plots.figures import (
    FIGURE_METRICS,
    FigureSpec,
    load_table,
    render,
    render_all,
)

GOLDEN = Path(__file__).parent / "data" / "golden.csv"
GOLDEN_ALGOS = 4  # hybrid, riblt, full-state, pinsketch


def test_load_table_splits_rows():
    t = load_table(str(GOLDEN))
    assert t.algorithms() == ["hybrid", "riblt", "full-state", "pinsketch"]
    assert all(r["rep"] == "-1" for r in t.aggregate)
    assert len(t.aggregate) == GOLDEN_ALGOS * 5  # 5 grid points
    assert len(t.detail) == GOLDEN_ALGOS * 5 * 3  # 3 reps


@pytest.mark.parametrize("metric", FIGURE_METRICS)
def test_render_each_figure_type(tmp_path, metric):
    out = tmp_path / f"{metric}.svg"
    s = render(str(GOLDEN), FigureSpec(metric=metric, out_path=str(out)))
    assert out.exists() and out.stat().st_size > 0
    assert s.n_series == GOLDEN_ALGOS
    assert s.n_bands == GOLDEN_ALGOS


def test_overhead_excludes_full_similarity(tmp_path):
    out = tmp_path / "overhead.svg"
    s = render(str(GOLDEN), FigureSpec(metric="overhead", out_path=str(out)))
    # the jaccard=1.0 aggregate cell is empty for every algorithm
    assert s.excluded_points == GOLDEN_ALGOS
    s2 = render(str(GOLDEN), FigureSpec(metric="metadata_bytes", out_path=str(out)))
    assert s2.excluded_points == 0


def test_checksums_stable_across_two_renders(tmp_path):
    sums = {}
    for metric in FIGURE_METRICS:
        pair = []
        for tag in ("x", "y"):
            out = tmp_path / f"{metric}_{tag}.svg"
            s = render(str(GOLDEN), FigureSpec(metric=metric, out_path=str(out)))
            pair.append(s.checksum)
            assert s.checksum == hashlib.sha256(out.read_bytes()).hexdigest()
        assert pair[0] == pair[1], f"{metric} render not deterministic"
        sums[metric] = pair[0]
    assert len(set(sums.values())) == len(FIGURE_METRICS)  # figures differ


def test_algorithm_subset(tmp_path):
    out = tmp_path / "subset.svg"
    s = render(
        str(GOLDEN),
        FigureSpec(metric="metadata_bytes", out_path=str(out), algorithms=["hybrid", "riblt"]),
    )
    assert s.n_series == 2


def test_missing_column_is_named(tmp_path):
    with pytest.raises(ValueError, match="does_not_exist"):
        render(str(GOLDEN), FigureSpec(metric="does_not_exist", out_path=str(tmp_path / "x.svg")))


def test_unknown_algorithm_is_named(tmp_path):
    with pytest.raises(ValueError, match="mystery"):
        render(
            str(GOLDEN),
            FigureSpec(metric="overhead", out_path=str(tmp_path / "x.svg"), algorithms=["mystery"]),
        )


def test_empty_selection_fails(tmp_path):
    # a CSV without timing data cannot drive a timing figure
    stripped = tmp_path / "no_timing.csv"
    lines = GOLDEN.read_text().splitlines()
    cols = lines[0].split(",")
    e_idx, d_idx = cols.index("encode_ms"), cols.index("decode_ms")
    out_lines = [lines[0]]
    for line in lines[1:]:
        cells = line.split(",")
        cells[e_idx] = cells[d_idx] = ""
        out_lines.append(",".join(cells))
    stripped.write_text("\n".join(out_lines) + "\n")
    with pytest.raises(ValueError, match="encode_ms"):
        render(str(stripped), FigureSpec(metric="encode_ms", out_path=str(tmp_path / "x.svg")))


def test_render_all_writes_five_figures(tmp_path):
    outdir = tmp_path / "figs"
    summaries = render_all(str(GOLDEN), str(outdir))
    assert len(summaries) == 5
    assert sorted(os.listdir(outdir)) == sorted(f"fig_{m}.svg" for m in FIGURE_METRICS)


def test_cli_render_and_all(tmp_path):
    out = tmp_path / "meta.svg"
    r = subprocess.run(
        [sys.executable, "-m", "recon_plots.cli", "render", "--csv", str(GOLDEN),
         "--metric", "metadata_bytes", "--out", str(out), "--log-y"],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    assert out.exists()
    r2 = subprocess.run(
        [sys.executable, "-m", "recon_plots.cli", "all", "--csv", str(GOLDEN),
         "--outdir", str(tmp_path / "suite")],
        capture_output=True, text=True,
    )
    assert r2.returncode == 0, r2.stderr
    assert len(os.listdir(tmp_path / "suite")) == 5
