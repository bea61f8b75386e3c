"""Benchmark orchestration: algorithm x similarity grid x repetitions -> CSV.

Every sweep cell is an independent job with a seed derived from the base
seed and the cell coordinates, so cells can run in any order (or in
parallel, capped by ``RECON_THREADS``) and still merge into byte-identical
output.  Detail rows carry one run each; aggregate rows (rep = -1) append
per-(algorithm, jaccard) means with population standard deviations in the
trailing ``metric_stddev_*`` columns.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from recon import baselines
from recon.errors import ReconError
from recon.hashing import U64_MASK, digest
from recon.protocol import SyncConfig
from recon.workload import WorkloadSpec, Workload, generate_workload

BASE_COLUMNS = [
    "algorithm", "n", "jaccard", "d", "rep",
    "metadata_bytes", "state_bytes", "total_bytes", "min_bytes",
    "overhead", "encode_ms", "decode_ms",
]
STDDEV_METRICS = [
    "metadata_bytes", "state_bytes", "total_bytes", "min_bytes",
    "overhead", "encode_ms", "decode_ms",
]
CSV_HEADER = ",".join(BASE_COLUMNS + [f"metric_stddev_{m}" for m in STDDEV_METRICS])

EXECUTABLE_ALGOS = ("hybrid", "riblt", "sbf", "optimal-sbf", "full-state")
ALL_ALGOS = EXECUTABLE_ALGOS + ("pinsketch",)


@dataclass
class SweepSpec:
    algorithms: list[str]
    jaccard_grid: list[float]
    reps: int
    n: int
    seed: int
    size_range: tuple[int, int] = (5, 80)
    timing: bool = True
    verify: bool = False
    overshoot_slices: int = 0


def parse_algorithm(spec: str) -> tuple[str, dict]:
    """``"sbf:0.01"`` -> ("sbf", {"epsilon": 0.01}); plain names pass through."""
    name, _, arg = spec.partition(":")
    if name == "sbf":
        if not arg:
            raise ValueError("sbf needs a rate, e.g. sbf:0.01")
        return "sbf", {"epsilon": float(arg)}
    if arg:
        raise ValueError(f"algorithm {name!r} takes no argument")
    if name not in ALL_ALGOS:
        raise ValueError(f"unknown algorithm {spec!r}; expected one of {ALL_ALGOS}")
    return name, {}


def parse_grid(text: str) -> list[float]:
    """``"0:1:0.05"`` -> [0.0, 0.05, ..., 1.0] with exact decimal steps."""
    from decimal import Decimal

    parts = text.split(":")
    if len(parts) == 1:
        vals = [Decimal(parts[0])]
    elif len(parts) == 3:
        start, stop, step = (Decimal(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        vals, k = [], 0
        while True:
            v = start + k * step
            if v > stop:
                break
            vals.append(v)
            k += 1
    else:
        raise ValueError(f"grid must be 'start:stop:step' or a single value, got {text!r}")
    out = [float(v) for v in vals]
    if any(not 0.0 <= v <= 1.0 for v in out):
        raise ValueError(f"grid values must lie in [0, 1], got {out}")
    return out


def cell_seed(base_seed: int, algorithm: str, jaccard: float, rep: int) -> int:
    return (base_seed ^ digest(f"{algorithm}|{jaccard!r}|{rep}".encode())) & U64_MASK


def difference_framing_bytes(w: Workload) -> int:
    from recon.protocol import varint_len

    n_common = len(w.elements_a) - w.d // 2
    diff = w.elements_a[n_common:] + w.elements_b[n_common:]
    return sum(varint_len(len(e)) for e in diff)


def run_cell(algo_spec: str, n: int, jaccard: float, rep: int, sweep: SweepSpec) -> dict:
    """One sweep cell: fresh workload, one algorithm run, one metrics row."""
    name, params = parse_algorithm(algo_spec)
    seed = cell_seed(sweep.seed, algo_spec, jaccard, rep)
    w = generate_workload(WorkloadSpec(n=n, jaccard=jaccard, size_range=sweep.size_range, seed=seed))
    row = {
        "algorithm": algo_spec, "n": n, "jaccard": jaccard, "d": w.d, "rep": rep,
        "min_bytes": w.min_bytes, "failed": False,
    }
    config = SyncConfig(
        overshoot_slices=sweep.overshoot_slices,
        build_outputs=sweep.verify,
        collect_messages=False,
        measure_time=sweep.timing,
    )
    stores = (
        dict(zip(w.digests_a.tolist(), w.elements_a)),
        dict(zip(w.digests_b.tolist(), w.elements_b)),
    )
    kw = {"digests": (w.digests_a, w.digests_b), "stores": stores}
    try:
        if name == "hybrid":
            r = baselines.run_hybrid(w.elements_a, w.elements_b, config, **kw)
        elif name == "riblt":
            r = baselines.run_pure_riblt(w.elements_a, w.elements_b, config, **kw)
        elif name == "sbf":
            r = baselines.run_sbf_hybrid(w.elements_a, w.elements_b, params["epsilon"], config, **kw)
        elif name == "optimal-sbf":
            r = baselines.run_optimal_sbf(w.elements_a, w.elements_b, config, **kw)
        elif name == "full-state":
            r = baselines.run_full_state(w.elements_a, w.elements_b, config, **kw)
        elif name == "pinsketch":
            r = baselines.pinsketch_analytic(
                w.d // 2, w.d // 2, w.min_bytes, difference_framing_bytes(w)
            )
        else:  # pragma: no cover - parse_algorithm rejects earlier
            raise ValueError(name)
        if sweep.verify and name != "pinsketch":
            union = set(w.elements_a) | set(w.elements_b)
            if set(r.elements_a.values()) != union or set(r.elements_b.values()) != union:
                raise ReconError("reconciled outputs differ from the set union")
    except ReconError as exc:
        row["failed"] = True
        row["error"] = str(exc)
        return row
    row.update(
        metadata_bytes=r.metadata_bytes,
        state_bytes=r.state_bytes,
        total_bytes=r.total_bytes,
        overhead=(r.total_bytes / w.min_bytes) if w.min_bytes else None,
        encode_ms=r.encode_seconds * 1e3 if sweep.timing else None,
        decode_ms=r.decode_seconds * 1e3 if sweep.timing else None,
    )
    return row


def _run_cell_job(args: tuple) -> dict:
    algo, n, jac, rep, sweep = args
    return run_cell(algo, n, jac, rep, sweep)


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get("RECON_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(sweep: SweepSpec, out_path: str) -> list[dict]:
    """Run the full grid and write the CSV; returns all detail rows."""
    jobs = [
        (algo, sweep.n, jac, rep, sweep)
        for algo in sweep.algorithms
        for jac in sweep.jaccard_grid
        for rep in range(sweep.reps)
    ]
    workers = workers_from_env()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_job, jobs, chunksize=1))
    else:
        rows = [_run_cell_job(j) for j in jobs]
    write_csv(rows, sweep, out_path)
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _fmt_ms(value) -> str:
    return "" if value is None else f"{value:.3f}"


def _detail_line(row: dict) -> str:
    cells = [
        row["algorithm"], str(row["n"]), _fmt(row["jaccard"]), str(row["d"]), str(row["rep"]),
        _fmt(row.get("metadata_bytes")), _fmt(row.get("state_bytes")),
        _fmt(row.get("total_bytes")), _fmt(row.get("min_bytes")),
        _fmt(row.get("overhead")), _fmt_ms(row.get("encode_ms")), _fmt_ms(row.get("decode_ms")),
    ]
    return ",".join(cells + [""] * len(STDDEV_METRICS))


def _mean(vals: list[float]) -> float:
    return sum(vals) / len(vals)


def _pstd(vals: list[float]) -> float:
    mu = _mean(vals)
    return (sum((v - mu) ** 2 for v in vals) / len(vals)) ** 0.5


def _aggregate_line(algo: str, n: int, jaccard: float, rows: list[dict]) -> str:
    ok = [r for r in rows if not r["failed"]]

    def stats(key, fmt):
        vals = [r[key] for r in ok if r.get(key) is not None]
        if not vals:
            return "", ""
        return fmt(_mean(vals)), fmt(_pstd(vals))

    mean_sd = {k: stats(k, _fmt) for k in ("metadata_bytes", "state_bytes", "total_bytes", "min_bytes", "overhead")}
    mean_sd["encode_ms"] = stats("encode_ms", _fmt_ms)
    mean_sd["decode_ms"] = stats("decode_ms", _fmt_ms)
    d_mean = _fmt(_mean([float(r["d"]) for r in ok])) if ok else ""
    cells = [
        algo, str(n), _fmt(jaccard), d_mean, "-1",
        mean_sd["metadata_bytes"][0], mean_sd["state_bytes"][0], mean_sd["total_bytes"][0],
        mean_sd["min_bytes"][0], mean_sd["overhead"][0],
        mean_sd["encode_ms"][0], mean_sd["decode_ms"][0],
    ]
    cells += [mean_sd[m][1] for m in STDDEV_METRICS]
    return ",".join(cells)


def write_csv(rows: list[dict], sweep: SweepSpec, out_path: str) -> None:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(_detail_line(row) if not row["failed"] else _failed_line(row))
    for algo in sweep.algorithms:
        for jac in sweep.jaccard_grid:
            group = [r for r in rows if r["algorithm"] == algo and r["jaccard"] == jac]
            lines.append(_aggregate_line(algo, sweep.n, jac, group))
    with open(out_path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _failed_line(row: dict) -> str:
    cells = [
        row["algorithm"], str(row["n"]), _fmt(row["jaccard"]), str(row["d"]), str(row["rep"]),
        "", "", "", _fmt(row.get("min_bytes")), "", "", "",
    ]
    return ",".join(cells + [""] * len(STDDEV_METRICS))


def run_single(
    algo_spec: str,
    n: int,
    jaccard: float,
    seed: int,
    size_range: tuple[int, int] = (5, 80),
    transcript_path: str | None = None,
    overshoot_slices: int = 0,
) -> dict:
    """One fully metered run with optional JSONL transcript dump."""
    name, params = parse_algorithm(algo_spec)
    w = generate_workload(WorkloadSpec(n=n, jaccard=jaccard, size_range=size_range, seed=seed))
    config = SyncConfig(overshoot_slices=overshoot_slices, build_outputs=True)
    kw = {"digests": (w.digests_a, w.digests_b)}
    runner = {
        "hybrid": lambda: baselines.run_hybrid(w.elements_a, w.elements_b, config, **kw),
        "riblt": lambda: baselines.run_pure_riblt(w.elements_a, w.elements_b, config, **kw),
        "sbf": lambda: baselines.run_sbf_hybrid(w.elements_a, w.elements_b, params.get("epsilon", 0.01), config, **kw),
        "optimal-sbf": lambda: baselines.run_optimal_sbf(w.elements_a, w.elements_b, config, **kw),
        "full-state": lambda: baselines.run_full_state(w.elements_a, w.elements_b, config, **kw),
        "pinsketch": lambda: baselines.pinsketch_analytic(
            w.d // 2, w.d // 2, w.min_bytes, difference_framing_bytes(w)
        ),
    }[name]
    r = runner()
    if transcript_path and r.transcript is not None:
        with open(transcript_path, "w") as fh:
            for msg in r.transcript.message_rows():
                fh.write(json.dumps(msg, separators=(",", ":")) + "\n")
    summary = {
        "algorithm": algo_spec,
        "n": n,
        "jaccard": jaccard,
        "d": w.d,
        "seed": seed,
        "metadata_bytes": r.metadata_bytes,
        "state_bytes": r.state_bytes,
        "total_bytes": r.total_bytes,
        "min_bytes": w.min_bytes,
        "overhead": (r.total_bytes / w.min_bytes) if w.min_bytes else None,
        "params": r.params,
    }
    if name != "pinsketch":
        union = set(w.elements_a) | set(w.elements_b)
        summary["correct"] = (
            set(r.elements_a.values()) == union and set(r.elements_b.values()) == union
        )
    return summary
