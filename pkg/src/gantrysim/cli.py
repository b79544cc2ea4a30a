"""Scenario runner: the experiment suite as CLI subcommands.

Each scenario validates its configuration fully, simulates its runs (in
parallel when GANTRY_SIM_THREADS allows), and writes per-run trace CSVs plus
a summary.json/summary.txt into <out>/<scenario>/.  Everything is
deterministic: a fixed config yields byte-identical outputs regardless of
rerun or thread count.  The report subcommand re-summarizes existing traces
and renders figures next to the delimited output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from importlib import resources
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    axis_limits,
    belt_params,
    load_config,
    plant_params,
    workspace_limits,
)
from .dynamics import SimTrace, settle_time, simulate
from .evaluation import (
    achieved_speed,
    align,
    error_stats,
    render_text,
    speed_error,
    summarize,
)
from .kinematics import JOINT_NAMES, LINEAR_AXES, WRIST_AXES, JointState
from .motion import (
    AxisLimits,
    CurveExceedsWorkspace,
    WaypointPath,
    lemniscate_path,
    pick_run_path,
)
from .singmap import WorkspaceGrid, build_map, load_chain_spec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

PACKAGED_CHAINS = ("gantry", "two_link", "ur5_like", "seven_dof_arm")


def thread_count() -> int:
    env = os.environ.get("GANTRY_SIM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return 1


def _run_jobs(jobs):
    """Execute callables, preserving submission order in the results."""
    workers = thread_count()
    if workers == 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def _json_value(v):
    if isinstance(v, float) and math.isinf(v):
        return None
    return v


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _axis_stats(trace: SimTrace, axis: str):
    col = JOINT_NAMES.index(axis)
    paired = align(trace.t, trace.desired[:, col], trace.t, trace.actual[:, col])
    kind = "linear" if axis in LINEAR_AXES else "angular"
    return error_stats(paired, trace.motion_end, kind=kind)


def _xyz_stats(trace: SimTrace):
    paired = align(trace.t, trace.desired[:, :3], trace.t, trace.actual[:, :3])
    return error_stats(paired, trace.motion_end, kind="linear")


def _write_scenario(out_root: Path, scenario: str, results, report: dict, extra: dict | None = None):
    """Write traces, summary.json, and summary.txt for one scenario."""
    sdir = out_root / scenario
    sdir.mkdir(parents=True, exist_ok=True)
    runs = {}
    for name, trace, meta in results:
        fname = f"{name}.csv"
        trace.to_csv(sdir / fname)
        runs[name] = {
            "trace": fname,
            "motion_end": trace.motion_end,
            "rate": trace.rate,
            **{k: _json_value(v) for k, v in meta.items()},
        }
    summary = {"schema_version": 1, "scenario": scenario, "runs": runs, "report": report}
    if extra:
        summary.update(extra)
    _write_json(sdir / "summary.json", summary)
    (sdir / "summary.txt").write_text(render_text(report), encoding="utf-8")
    return summary


def cmd_axis_test(cfg: dict, out_root: Path, rate: float) -> None:
    """Single-axis runs: fast/slow x high/low carriage height, plus the wrist."""
    ws = workspace_limits(cfg)
    plant = plant_params(cfg)
    bp = belt_params(cfg)
    gain = cfg["transmission"]["desync_rate_gain"]
    at = cfg["axis_test"]
    tail = at["tail"]
    margin = at["margin"]
    cx = 0.5 * sum(ws.x)
    cy = 0.5 * sum(ws.y)
    mid_z = 0.5 * sum(ws.z)

    specs = []
    for axis in LINEAR_AXES:
        lo, hi = ws.bounds(axis)
        a, b = lo + margin, hi - margin
        for tier in ("fast", "slow"):
            lims = axis_limits(cfg, tier)
            for hname in ("high", "low"):
                height = at["heights"][hname]
                if axis == "z":
                    mid = 0.5 * (a + b)
                    travel = (mid, b) if hname == "high" else (a, mid)
                    base = JointState(x=cx, y=cy, z=travel[0])
                    goal = base.replace(z=travel[1])
                else:
                    base = JointState(x=cx, y=cy, z=height).replace(**{axis: a})
                    goal = base.replace(**{axis: b})
                path = WaypointPath.from_states([base, goal, base])
                specs.append((f"{axis}_{tier}_{hname}", axis, path, lims))
    for axis in WRIST_AXES:
        half = 0.5 * at["wrist_travel"]
        for tier in ("fast", "slow"):
            lims = axis_limits(cfg, tier)
            base = JointState(x=cx, y=cy, z=mid_z).replace(**{axis: -half})
            goal = base.replace(**{axis: half})
            path = WaypointPath.from_states([base, goal, base])
            specs.append((f"{axis}_{tier}", axis, path, lims))

    def make_job(spec):
        name, axis, path, lims = spec

        def job():
            trace = simulate(
                path, lims, plant, rate=rate, tail=tail,
                belt=bp, desync_rate_gain=gain, workspace=ws,
            )
            stats = _axis_stats(trace, axis)
            meta = {
                "axis": axis,
                "kind": "linear" if axis in LINEAR_AXES else "angular",
                "settle_time": settle_time(trace, plant.settle_tolerance),
            }
            return name, trace, meta, stats

        return job

    results = _run_jobs([make_job(s) for s in specs])
    report = summarize([(name, stats) for name, _, _, stats in results])
    _write_scenario(out_root, "axis_test", [(n, t, m) for n, t, m, _ in results], report)
    print(f"axis-test: wrote {len(results)} traces to {out_root / 'axis_test'}")


def _build_lemniscate(cfg: dict, height: float, z_amplitude: float, speed: float, ws):
    lm = cfg["lemniscate"]
    geometry = lemniscate_path(
        lm["scale"], height, period=1.0, z_amplitude=z_amplitude,
        center=tuple(lm["center"]),
    )
    period = geometry.arc_length() / speed
    return lemniscate_path(
        lm["scale"], height, period=period, z_amplitude=z_amplitude,
        center=tuple(lm["center"]), limits=ws,
    )


def cmd_lemniscate(cfg: dict, out_root: Path, rate: float) -> None:
    """Closed-curve runs: single plane at each height plus the multi-plane variant."""
    ws = workspace_limits(cfg)
    plant = plant_params(cfg)
    bp = belt_params(cfg)
    gain = cfg["transmission"]["desync_rate_gain"]
    lm = cfg["lemniscate"]
    lims = axis_limits(cfg, "fast")
    speeds = (("fast", lm["speed_fast"]), ("slow", lm["speed_slow"]))

    specs = []
    try:
        for height in lm["heights"]:
            for tier, speed in speeds:
                path = _build_lemniscate(cfg, height, 0.0, speed, ws)
                specs.append((f"h{height:g}_{tier}", path))
        for tier, speed in speeds:
            path = _build_lemniscate(cfg, lm["multi_plane_height"], lm["z_amplitude"], speed, ws)
            specs.append((f"multi_{tier}", path))
    except CurveExceedsWorkspace as err:
        raise ConfigError(f"lemniscate: {err}") from err

    def make_job(spec):
        name, path = spec

        def job():
            trace = simulate(
                path, lims, plant, rate=rate, tail=lm["tail"],
                belt=bp, desync_rate_gain=gain,
            )
            stats = _xyz_stats(trace)
            meta = {
                "kind": "xyz",
                "settle_time": settle_time(trace, plant.settle_tolerance),
            }
            return name, trace, meta, stats

        return job

    results = _run_jobs([make_job(s) for s in specs])
    report = summarize([(name, stats) for name, _, _, stats in results])
    _write_scenario(out_root, "lemniscate", [(n, t, m) for n, t, m, _ in results], report)
    print(f"lemniscate: wrote {len(results)} traces to {out_root / 'lemniscate'}")


def cmd_pick_run(cfg: dict, out_root: Path, rate: float) -> None:
    """Pick, place, and return, with the payload riding between pick and place."""
    ws = workspace_limits(cfg)
    plant = plant_params(cfg)
    bp = belt_params(cfg)
    gain = cfg["transmission"]["desync_rate_gain"]
    pr = cfg["pick_run"]
    try:
        path = pick_run_path(
            JointState.from_array(pr["start"]),
            JointState.from_array(pr["pick"]),
            JointState.from_array(pr["place"]),
            retract_z=pr["retract_z"],
            payload=pr["payload"],
            limits=ws,
        )
    except CurveExceedsWorkspace as err:
        raise ConfigError(f"pick_run: {err}") from err
    lims = axis_limits(cfg, "fast")
    trace = simulate(
        path, lims, plant, rate=rate, tail=pr["tail"],
        belt=bp, desync_rate_gain=gain, workspace=ws,
    )
    stats = _xyz_stats(trace)
    final_return_error = float(trace.position_error()[-1])
    meta = {
        "kind": "xyz",
        "settle_time": settle_time(trace, plant.settle_tolerance),
        "final_return_error_m": final_return_error,
        "payload_kg": pr["payload"],
    }
    report = summarize([("pick_run", stats)])
    _write_scenario(out_root, "pick_run", [("pick_run", trace, meta)], report)
    print(f"pick-run: wrote 1 trace to {out_root / 'pick_run'}")


def cmd_speed_verify(cfg: dict, out_root: Path, rate: float) -> None:
    """Command each axis at its rated speed under the slip cap; measure the peak."""
    ws = workspace_limits(cfg)
    plant = plant_params(cfg)
    sv = cfg["speed_verify"]
    amax_lin = cfg["limits"]["amax_linear"]
    amax_wrist = cfg["limits"]["amax_wrist"]
    cx = 0.5 * sum(ws.x)
    cy = 0.5 * sum(ws.y)
    mid_z = 0.5 * sum(ws.z)

    specs = []
    for axis in JOINT_NAMES:
        commanded = cfg["speeds"]["fast"][axis]
        lims = axis_limits(cfg, "fast")
        if axis in LINEAR_AXES:
            lo, hi = ws.bounds(axis)
            lims[axis] = AxisLimits(vmax=commanded, amax=amax_lin)
            base = JointState(x=cx, y=cy, z=mid_z).replace(**{axis: lo})
            goal = base.replace(**{axis: hi})
        else:
            half = 0.5 * sv["wrist_travel"]
            lims[axis] = AxisLimits(vmax=commanded, amax=amax_wrist)
            base = JointState(x=cx, y=cy, z=mid_z).replace(**{axis: -half})
            goal = base.replace(**{axis: half})
        specs.append((axis, commanded, WaypointPath.from_states([base, goal]), lims))

    def make_job(spec):
        axis, commanded, path, lims = spec

        def job():
            trace = simulate(path, lims, plant, rate=rate, tail=sv["tail"], workspace=ws)
            achieved = achieved_speed(trace, axis)
            rec = speed_error(axis, commanded, achieved)
            meta = {"axis": axis, "kind": "speed", "commanded": commanded, "achieved": achieved}
            return axis, trace, meta, rec

        return job

    results = _run_jobs([make_job(s) for s in specs])
    report = summarize([], [rec for _, _, _, rec in results])
    _write_scenario(out_root, "speed_verify", [(n, t, m) for n, t, m, _ in results], report)
    print(f"speed-verify: wrote {len(results)} traces to {out_root / 'speed_verify'}")


def _resolve_chain(ref: str) -> Path:
    if ref in PACKAGED_CHAINS:
        return Path(str(resources.files("gantrysim.data.chains") / f"{ref}.json"))
    p = Path(ref)
    if not p.exists():
        raise ConfigError(f"chain file not found: {ref}")
    return p


def _load_chain(ref: str):
    path = _resolve_chain(ref)
    try:
        return load_chain_spec(path)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"chain file {path}: line {err.lineno}, column {err.colno}: {err.msg}"
        ) from err
    except (KeyError, ValueError, TypeError) as err:
        raise ConfigError(f"chain file {path}: {err}") from err


def cmd_singmap(cfg: dict, out_root: Path) -> None:
    """Discontinuity maps for the gantry and each configured comparison chain."""
    sm = cfg["singmap"]
    shared_grid = sm["grid"]
    shared_threshold = sm.get("threshold", "auto")
    entries = []
    for entry in sm["chains"]:
        chain, seeds, task_rows = _load_chain(entry["chain"])
        grid_spec = entry.get("grid", shared_grid)
        try:
            grid = WorkspaceGrid(tuple(grid_spec["lo"]), tuple(grid_spec["hi"]),
                                 tuple(grid_spec["shape"]))
        except ValueError as err:
            raise ConfigError(f"singmap grid for {entry['chain']}: {err}") from err
        entries.append((entry["chain"], chain, seeds, task_rows, grid,
                        entry.get("threshold", shared_threshold)))

    def make_job(entry):
        ref, chain, seeds, task_rows, grid, threshold = entry

        def job():
            dmap = build_map(chain, grid, threshold=threshold, seeds=seeds, task_rows=task_rows)
            return ref, chain, dmap

        return job

    results = _run_jobs([make_job(e) for e in entries])
    sdir = out_root / "singmap"
    sdir.mkdir(parents=True, exist_ok=True)
    chains_summary = {}
    for ref, chain, dmap in results:
        name = chain.name or ref
        dmap.to_csv(sdir / f"{name}.csv")
        _write_json(sdir / f"{name}.json", dmap.sidecar(chain))
        chains_summary[name] = {
            "map": f"{name}.csv",
            "sidecar": f"{name}.json",
            "threshold": dmap.threshold,
            "reachable_cells": int(np.count_nonzero(dmap.reachable)),
            "boundary_cells": dmap.boundary_cell_count(),
            "interior_boundary_cells": dmap.interior_boundary_count(),
        }
    _write_json(sdir / "summary.json", {
        "schema_version": 1,
        "scenario": "singmap",
        "chains": chains_summary,
    })
    print(f"singmap: wrote {len(results)} maps to {sdir}")


def _report_scenario(sdir: Path, fig_dir: Path, with_plots: bool):
    """Recompute statistics for one scenario directory from its traces."""
    from . import plots  # lazy: pulls in matplotlib

    summary = json.loads((sdir / "summary.json").read_text(encoding="utf-8"))
    scenario = summary.get("scenario", sdir.name)
    error_rows = []
    speed_rows = []
    figures = []
    # keep the scenario's own run order (the report tables preserve it;
    # the runs mapping is key-sorted on disk)
    prior = summary.get("report", {})
    order = [row["name"] for row in prior.get("error_table", [])]
    order += [row["axis"] for row in prior.get("speed_table", [])]
    order += sorted(set(summary.get("runs", {})) - set(order))
    for name in order:
        run = summary["runs"][name]
        trace = SimTrace.from_csv(sdir / run["trace"], motion_end=run["motion_end"])
        kind = run.get("kind", "linear")
        if kind == "speed":
            achieved = achieved_speed(trace, run["axis"])
            speed_rows.append(speed_error(run["axis"], run["commanded"], achieved))
        elif kind == "xyz":
            error_rows.append((name, _xyz_stats(trace)))
        else:
            error_rows.append((name, _axis_stats(trace, run["axis"])))
        if with_plots:
            stem = f"{scenario}__{name}"
            if kind == "xyz":
                fig = fig_dir / f"{stem}__path.png"
                plots.plot_path_xy(trace, f"{scenario} {name}", fig)
                figures.append(fig.name)
                fig = fig_dir / f"{stem}__error.png"
                plots.plot_position_error(trace, f"{scenario} {name}", fig)
                figures.append(fig.name)
            else:
                fig = fig_dir / f"{stem}__trace.png"
                plots.plot_axis_trace(trace, run["axis"], f"{scenario} {name}", fig)
                figures.append(fig.name)
                if kind != "speed" and run["axis"] in ("y", "z"):
                    fig = fig_dir / f"{stem}__coupling.png"
                    plots.plot_coupling(trace, f"{scenario} {name} y/z coupling", fig)
                    figures.append(fig.name)
    report = summarize(error_rows, speed_rows)
    if with_plots and speed_rows:
        fig = fig_dir / f"{scenario}__speeds.png"
        plots.plot_speed_table(report, f"{scenario} commanded vs achieved", fig)
        figures.append(fig.name)
    return scenario, report, figures


def cmd_report(out_root: Path, with_plots: bool = True) -> None:
    """Re-summarize every scenario under the output directory; render figures."""
    rdir = out_root / "report"
    fig_dir = rdir / "figures"
    scenario_dirs = sorted(
        p.parent for p in out_root.glob("*/summary.json") if p.parent.name != "report"
    )
    if not scenario_dirs:
        raise ConfigError(f"no scenario outputs under {out_root}")
    rdir.mkdir(parents=True, exist_ok=True)
    if with_plots:
        fig_dir.mkdir(parents=True, exist_ok=True)
    scenarios = {}
    figures = []
    text_blocks = []
    for sdir in scenario_dirs:
        if sdir.name == "singmap":
            summary = json.loads((sdir / "summary.json").read_text(encoding="utf-8"))
            scenarios["singmap"] = summary.get("chains", {})
            if with_plots:
                from . import plots  # lazy: pulls in matplotlib

                for name, info in sorted(summary.get("chains", {}).items()):
                    fig = fig_dir / f"singmap__{name}.png"
                    plots.plot_map_slice(sdir / info["map"], f"manipulability map: {name}", fig)
                    figures.append(fig.name)
            continue
        scenario, report, figs = _report_scenario(sdir, fig_dir, with_plots)
        scenarios[scenario] = report
        figures.extend(figs)
        text_blocks.append(f"== {scenario} ==\n{render_text(report)}")
    _write_json(rdir / "report.json", {
        "schema_version": 1,
        "scenarios": scenarios,
        "figures": sorted(figures),
    })
    (rdir / "report.txt").write_text("\n".join(text_blocks), encoding="utf-8")
    print(f"report: summarized {len(scenario_dirs)} scenario(s) into {rdir}")


@contextmanager
def seedless_guard():
    """Trip any RNG use while a --seedless run executes."""
    import random as _random

    def _forbid(*_a, **_k):
        raise RuntimeError("RNG use is forbidden under --seedless")

    rand_names = ("random", "uniform", "randint", "gauss", "seed", "choice", "shuffle")
    np_names = ("seed", "rand", "randn", "random", "uniform", "normal", "default_rng")
    saved_r = {n: getattr(_random, n) for n in rand_names}
    saved_np = {n: getattr(np.random, n) for n in np_names}
    try:
        for n in rand_names:
            setattr(_random, n, _forbid)
        for n in np_names:
            setattr(np.random, n, _forbid)
        yield
    finally:
        for n, f in saved_r.items():
            setattr(_random, n, f)
        for n, f in saved_np.items():
            setattr(np.random, n, f)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="scenario config JSON")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--rate", type=float, default=None, help="trace sample rate, Hz")
    common.add_argument("--seedless", action="store_true",
                        help="assert that no RNG is touched during the run")
    parser = argparse.ArgumentParser(
        prog="gantrysim",
        description="Deterministic gantry-manipulator simulation scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("axis-test", "single-axis fast/slow runs at high/low heights plus the wrist"),
        ("lemniscate", "closed-curve multi-axis runs at several heights"),
        ("pick-run", "pick, place, and return with payload"),
        ("speed-verify", "commanded vs achieved speed per axis under the slip cap"),
        ("singmap", "workspace discontinuity maps per kinematic chain"),
    ):
        sub.add_parser(name, parents=[common], help=doc)
    rp = sub.add_parser("report", parents=[common],
                        help="re-summarize existing traces; render figures")
    rp.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            cmd_report(args.out, with_plots=not args.no_plots)
            return EXIT_OK
        cfg = load_config(args.config)
        rate = args.rate if args.rate is not None else cfg["trace_rate"]
        if rate <= 0:
            raise ConfigError("--rate must be > 0")
        guard = seedless_guard() if args.seedless else None
        try:
            if guard is not None:
                guard.__enter__()
            if args.command == "axis-test":
                cmd_axis_test(cfg, args.out, rate)
            elif args.command == "lemniscate":
                cmd_lemniscate(cfg, args.out, rate)
            elif args.command == "pick-run":
                cmd_pick_run(cfg, args.out, rate)
            elif args.command == "speed-verify":
                cmd_speed_verify(cfg, args.out, rate)
            elif args.command == "singmap":
                cmd_singmap(cfg, args.out)
        finally:
            if guard is not None:
                guard.__exit__(None, None, None)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # noqa: BLE001  simulation/runtime failure
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
