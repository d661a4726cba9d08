"""Command-line front end: scenario validation, closed-loop runs, and
cluster dumps with plot-ready CSV/JSON outputs.

Exit codes: 0 success, 1 domain failure (infeasible cycle, empty cluster),
2 usage or schema error. All numeric output is locale-independent at nine
significant digits; the run manifest is written last so its presence marks
a complete run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .endpoint_regulation import regulated_cluster, select_reference_candidate
from .errors import EmptyCluster, NoFeasibleCandidate, PlannerError, ScenarioInvalid
from .evaluation import CONSTRAINT_ORDER
from .quintic_sampling import generate_cluster
from .replanning_sim import Scenario, SimLog, run, validate_scenario_dict

_HIST_BIN = 0.05


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.9g}"


def _quantize(obj):
    """Round floats to 9 significant digits for stable serialized output."""
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.9g}")
    if isinstance(obj, dict):
        return {k: _quantize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_quantize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_quantize(v) for v in obj.tolist()]
    return obj


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_quantize(payload), indent=2) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _load_scenario(path_str: str):
    path = Path(path_str)
    if not path.is_file():
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        return None, None
    raw = path.read_bytes()
    try:
        data = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as err:
        print(
            f"error: malformed JSON at line {err.lineno}, column {err.colno}: {err.msg}",
            file=sys.stderr,
        )
        return None, None
    return data, raw


def _planner_threads() -> int:
    """Parallelism cap from PLANNER_THREADS (0 = auto); execution is
    currently sequential, which satisfies any cap."""
    value = os.environ.get("PLANNER_THREADS", "0")
    try:
        threads = int(value)
    except ValueError:
        raise ValueError(f"PLANNER_THREADS must be an integer, got {value!r}")
    if threads < 0:
        raise ValueError("PLANNER_THREADS must be nonnegative")
    return threads


def cmd_validate(args) -> int:
    data, _ = _load_scenario(args.scenario)
    if data is None:
        return 2
    violations = validate_scenario_dict(data)
    if violations:
        print(f"scenario invalid ({len(violations)} violation(s)):")
        for item in violations:
            print(f"  - {item}")
        return 2
    print(f"scenario ok: {data.get('name', 'unnamed')}")
    return 0


def _executed_series(log: SimLog):
    """Concatenated executed samples; drops the duplicated splice sample."""
    rows = []
    for rec in log.cycles:
        start = 1 if rec.cycle > 0 else 0
        for i in range(start, len(rec.times)):
            st = rec.states[i]
            rows.append(
                (
                    rec.cycle,
                    rec.times[i],
                    st[0],
                    st[1],
                    st[2],
                    rec.jerk_lon[i],
                    st[3],
                    st[4],
                    st[5],
                    rec.jerk_lat[i],
                )
            )
    return rows


def _abs_stats(values: np.ndarray) -> tuple:
    mags = np.abs(values)
    if mags.size == 0:
        return 0.0, 0.0, 0.0, 0.0
    q25, q75 = np.percentile(mags, [25, 75])
    return (
        float(np.median(mags)),
        float(q75 - q25),
        float(np.sqrt(np.mean(mags**2))),
        float(mags.max()),
    )


def write_run_outputs(log: SimLog, out_dir: Path) -> list:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    _write_json(out_dir / "simlog.json", log.to_dict())
    written.append("simlog.json")

    _write_csv(
        out_dir / "profiles.csv",
        ("cycle", "t", "s", "s_dot", "s_ddot", "jerk_lon", "d", "d_dot", "d_ddot", "jerk_lat"),
        _executed_series(log),
    )
    written.append("profiles.csv")

    jerk_lon = np.concatenate([rec.jerk_lon for rec in log.cycles]) if log.cycles else np.array([])
    jerk_lat = np.concatenate([rec.jerk_lat for rec in log.cycles]) if log.cycles else np.array([])
    rows = []
    for axis, series in (("longitudinal", jerk_lon), ("lateral", jerk_lat)):
        median, iqr, rms, peak = _abs_stats(series)
        rows.append((axis, median, iqr, rms, peak))
    _write_csv(out_dir / "jerk_stats.csv", ("axis", "median", "iqr", "rms", "peak"), rows)
    written.append("jerk_stats.csv")

    nn_rows = []
    for rec in log.cycles:
        if rec.nn_stats is None:
            continue
        nn = rec.nn_stats
        nn_rows.append((rec.cycle, nn.count, nn.nn_mean, nn.nn_std, nn.nn_min, nn.nn_max))
    _write_csv(
        out_dir / "endpoint_nn.csv",
        ("cycle", "count", "nn_mean", "nn_std", "nn_min", "nn_max"),
        nn_rows,
    )
    written.append("endpoint_nn.csv")

    feas_rows = []
    for rec in log.cycles:
        for cand in rec.candidates:
            feas_rows.append(
                (
                    rec.cycle,
                    cand["index"],
                    cand["feasible"],
                    cand["cost"],
                    ";".join(cand["violations"]),
                    *(cand["margins"][c.value] for c in CONSTRAINT_ORDER),
                )
            )
    _write_csv(
        out_dir / "feasibility.csv",
        (
            "cycle",
            "candidate",
            "feasible",
            "cost",
            "violations",
            *(f"margin_{c.value}" for c in CONSTRAINT_ORDER),
        ),
        feas_rows,
    )
    written.append("feasibility.csv")
    return written


def cmd_run(args) -> int:
    data, raw = _load_scenario(args.scenario)
    if data is None:
        return 2
    violations = validate_scenario_dict(data)
    if violations:
        for item in violations:
            print(f"schema violation: {item}", file=sys.stderr)
        return 2
    scenario = Scenario.from_dict(data)
    if args.seed is not None:
        from dataclasses import replace

        scenario.sim = replace(scenario.sim, seed=args.seed)

    _planner_threads()
    out_dir = Path(args.out)
    started = time.perf_counter()
    try:
        log = run(scenario, mode=args.mode)
    except NoFeasibleCandidate as err:
        print(f"run failed: {err}", file=sys.stderr)
        if err.partial_log is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_json(out_dir / "simlog.json", err.partial_log.to_dict())
            print(f"partial log written to {out_dir / 'simlog.json'}", file=sys.stderr)
        return 1
    outputs = write_run_outputs(log, out_dir)

    manifest = {
        "tool": "frenetplan",
        "version": __version__,
        "scenario_path": str(args.scenario),
        "scenario_sha256": hashlib.sha256(raw).hexdigest(),
        "mode": log.mode,
        "seed": scenario.sim.seed,
        "outputs": outputs,
        "duration_s": time.perf_counter() - started,
    }
    _write_json(out_dir / "manifest.json", manifest)
    print(f"wrote {len(outputs) + 1} files to {out_dir}")
    return 0


def cmd_cluster(args) -> int:
    data, _ = _load_scenario(args.scenario)
    if data is None:
        return 2
    violations = validate_scenario_dict(data)
    if violations:
        for item in violations:
            print(f"schema violation: {item}", file=sys.stderr)
        return 2
    scenario = Scenario.from_dict(data)
    path = scenario.build_path()
    try:
        if args.mode == "proposed":
            cluster = regulated_cluster(
                scenario.initial, path, scenario.grid, scenario.regulation
            )
        else:
            cluster = generate_cluster(scenario.initial, path, scenario.grid)
            cluster.reference_index = select_reference_candidate(cluster)
    except EmptyCluster as err:
        print(f"cluster generation failed: {err}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    terms = cluster.terminal_matrix()

    if args.dump == "endpoints":
        rows = []
        for i, cand in enumerate(cluster.candidates):
            gap = 0.0 if i == 0 else float(np.linalg.norm(terms[i] - terms[i - 1]))
            energy = cand.regulation_energy if cand.regulation_energy is not None else ""
            rows.append((i, *terms[i], gap, energy))
        _write_csv(
            out_dir / "endpoints.csv",
            ("index", "s", "s_dot", "s_ddot", "d", "d_dot", "d_ddot",
             "consecutive_gap", "regulation_energy"),
            rows,
        )
    else:
        rows = []
        for i, cand in enumerate(cluster.candidates):
            for j in range(len(cand.times)):
                st = cand.states[j]
                rows.append((i, cand.times[j], *st, cand.jerk_lon[j], cand.jerk_lat[j]))
        _write_csv(
            out_dir / "states.csv",
            ("candidate", "t", "s", "s_dot", "s_ddot", "d", "d_dot", "d_ddot",
             "jerk_lon", "jerk_lat"),
            rows,
        )

    if len(cluster.candidates) >= 2:
        diff = terms[:, None, :] - terms[None, :, :]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        nearest = dist.min(axis=1)
        edges = np.arange(0.0, nearest.max() + _HIST_BIN, _HIST_BIN)
        if len(edges) < 2:
            edges = np.array([0.0, _HIST_BIN])
        counts, edges = np.histogram(nearest, bins=edges)
        _write_csv(
            out_dir / "nn_hist.csv",
            ("bin_lo", "bin_hi", "count"),
            [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))],
        )
    print(f"cluster of {len(cluster.candidates)} candidates dumped to {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="frenetplan",
        description="Frenet-frame trajectory generation and replanning simulator",
    )
    parser.add_argument("--version", action="version", version=f"frenetplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a scenario file against the schema")
    p_val.add_argument("scenario")
    p_val.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="execute a closed-loop replanning run")
    p_run.add_argument("scenario")
    p_run.add_argument("--mode", choices=("proposed", "baseline"), default="proposed")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.set_defaults(func=cmd_run)

    p_cl = sub.add_parser("cluster", help="dump one planning cluster at the initial state")
    p_cl.add_argument("scenario")
    p_cl.add_argument("--dump", choices=("endpoints", "full"), default="endpoints")
    p_cl.add_argument("--mode", choices=("proposed", "baseline"), default="proposed")
    p_cl.add_argument("--out", default="out", help="output directory")
    p_cl.set_defaults(func=cmd_cluster)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioInvalid as err:
        for item in err.violations:
            print(f"schema violation: {item}", file=sys.stderr)
        return 2
    except (NoFeasibleCandidate, EmptyCluster, PlannerError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
