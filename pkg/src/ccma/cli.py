"""Command-line front end (``ccma``).

Every command writes ``manifest.json`` next to its outputs; ``ccma replay``
re-runs a manifest. CSV files start with a ``# schema=...`` line followed
by one header row; numbers are written with 17 significant digits.

Exit codes: 0 success, 1 input error, 2 non-convergence, 3 validation
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import statistics
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .assembly import CANONICAL_NAMES, TASK_COORDS, SceneError, dump_scene, initial_assembly, resolve_scene
from .base_sim import OmniBaseGeometry, PiGains, simulate_execution
from .forward_solver import FkConfig, SolverBreakdown, solve_fk
from .ik_control import (
    IkConfig,
    TrackReport,
    TrackRow,
    combined_perturbation,
    ee_state,
    solve_ik_step,
    track_waypoints,
)
from .validation import LAYERS, step_sweep, validate_scene

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_VALIDATION = 0, 1, 2, 3

PROFILE_NAMES = ("sequential-4dof", "simultaneous-4dof")
WAYPOINT_FORMAT = 1


class InputError(Exception):
    """Bad user input; reported on stderr with exit code 1."""


# -- files ------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, schema: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path: Path) -> tuple[str, list[str], list[list[str]]]:
    """(schema, header, rows) of a CSV written by :func:`write_csv`."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema="):
            raise InputError(f"{path}: missing '# schema=' line")
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: no header row")
    return first[len("# schema=") :], rows[0], rows[1:]


def load_waypoints(text: str, reference=None) -> list[np.ndarray]:
    """Parse a waypoint file.

    Format (YAML, like scene files)::

        format: 1
        relative: true      # optional; offsets from the reference pose
        waypoints:
          - [x, y, z, gamma, beta, alpha]
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise InputError(f"waypoint file is not valid YAML{where}: {exc}") from exc
    if not isinstance(doc, dict) or "waypoints" not in doc:
        raise InputError("waypoint file needs a top-level 'waypoints' list")
    if doc.get("format", WAYPOINT_FORMAT) != WAYPOINT_FORMAT:
        raise InputError(f"unsupported waypoint format {doc.get('format')!r}")
    relative = bool(doc.get("relative", False))
    if relative and reference is None:
        raise InputError("relative waypoints need a reference pose")
    out = []
    for k, wp in enumerate(doc["waypoints"] or []):
        try:
            arr = np.array(wp, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"waypoint {k} is not numeric") from exc
        if arr.shape != (6,) or not np.all(np.isfinite(arr)):
            raise InputError(f"waypoint {k} must be 6 finite numbers (x, y, z, gamma, beta, alpha)")
        out.append(arr + np.asarray(reference, dtype=float) if relative else arr)
    return out


def shipped_profile_text(name: str) -> str:
    if name not in PROFILE_NAMES:
        raise InputError(f"unknown profile {name!r}; choose from {', '.join(PROFILE_NAMES)}")
    return resources.files("ccma").joinpath("profiles", f"{name}.yaml").read_text(encoding="utf-8")


def dump_waypoints(waypoints, relative=False, comment="") -> str:
    head = "".join(f"# {line}\n" for line in comment.splitlines())
    body = {"format": WAYPOINT_FORMAT, "relative": relative, "waypoints": [[float(v) for v in wp] for wp in waypoints]}
    return head + yaml.safe_dump(body, sort_keys=False, default_flow_style=None, width=200)


def _manifest(args, out: Path, extra=None) -> None:
    doc = {
        "command": args.command,
        "argv": args.argv,
        "scene": getattr(args, "scene", None),
        "out": str(out),
        "seed": getattr(args, "seed", None),
        "config": {k: v for k, v in sorted(vars(args).items()) if k not in ("argv", "func", "command")},
        "version": __version__,
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(spec):
    model = resolve_scene(spec)
    s0, u0 = initial_assembly(model)
    return model, s0, u0


def _fk_config(args) -> FkConfig:
    kw = {"hessian_mode": args.hessian}
    if getattr(args, "fk_grad_tol", None) is not None:
        kw["grad_tol"] = args.fk_grad_tol
    return FkConfig(**kw)


def _ik_config(args) -> IkConfig:
    kw = dict(lam=args.lam, trans_step=args.trans_step, rot_step=args.rot_step, fk=_fk_config(args))
    if args.grad_tol is not None:
        kw["grad_tol"] = args.grad_tol
    if args.max_iters is not None:
        kw["max_outer_iters"] = args.max_iters
    if getattr(args, "direct", False):
        kw["subdivide"] = False
    return IkConfig(**kw)


def _state_rows(model, s):
    for k, body in enumerate(model.bodies):
        yield [k, body.name, *s[6 * k : 6 * k + 6]]


# -- commands ---------------------------------------------------------------------


def cmd_solve_fk(args) -> int:
    model, s0, u0 = _load(args.scene)
    u = u0.copy()
    if args.controls is not None:
        vals = _floats(args.controls, "--controls")
        if len(vals) != model.n_u:
            raise InputError(f"--controls needs {model.n_u} values, got {len(vals)}")
        u = np.array(vals)
    for spec in args.offset or []:
        vals = _floats(spec, "--offset")
        if len(vals) not in (3, 4) or vals[0] != int(vals[0]) or not 0 <= vals[0] < model.n_m:
            raise InputError(f"--offset expects BASE,dx,dy[,dtheta] with BASE in 0..{model.n_m - 1}")
        k = int(vals[0])
        u[3 * k : 3 * k + len(vals) - 1] += vals[1:]
    cfg = _fk_config(args)
    if args.grad_tol is not None:
        cfg = FkConfig(grad_tol=args.grad_tol, hessian_mode=cfg.hessian_mode, max_iters=args.max_iters or cfg.max_iters)
    elif args.max_iters is not None:
        cfg = FkConfig(max_iters=args.max_iters, hessian_mode=cfg.hessian_mode)
    out = _out_dir(args)
    try:
        rep = solve_fk(model, s0, u, cfg)
    except SolverBreakdown as exc:
        rep = exc.report
        print(f"solver breakdown: {exc}", file=sys.stderr)
    write_csv(out / "state.csv", "ccma.state/1", ["body", "name", "gamma", "beta", "alpha", "x", "y", "z"], _state_rows(model, rep.s_hat))
    ee = ee_state(model, rep.s_hat)
    summary = {
        "converged": rep.converged,
        "assembled": rep.assembled,
        "energy": rep.energy,
        "grad_norm": rep.grad_norm,
        "iters": rep.iters,
        "wall_time": rep.wall_time,
        "end_effector": dict(zip(TASK_COORDS, map(float, ee))),
        "controls": [float(v) for v in u],
        "block_residuals": rep.block_residuals,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    _manifest(args, out)
    print(f"converged={rep.converged} assembled={rep.assembled} E={rep.energy:.3e} |G|={rep.grad_norm:.3e} iters={rep.iters}")
    print("end effector " + " ".join(f"{c}={v:.6f}" for c, v in zip(TASK_COORDS, ee)))
    if rep.converged and not rep.assembled:
        print("stationary point with residual energy: these controls do not assemble", file=sys.stderr)
    # a stationary point that does not assemble is a failed solve too
    return EXIT_OK if rep.ok else EXIT_NONCONVERGED


def _floats(text, flag):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc


def track_header(model):
    cols = ["step", "waypoint", "substep", "status", "iters"]
    cols += [f"target_{c}" for c in TASK_COORDS]
    cols += [f"ee_{c}" for c in TASK_COORDS]
    cols += [f"u{k}" for k in range(model.n_u)]
    for k in range(model.n_m):
        cols += [f"base{k}_x", f"base{k}_y", f"base{k}_yaw"]
    cols += ["task_error", "energy"]
    return cols


def track_rows(report):
    for i, r in enumerate(report.rows):
        yield [i, r.waypoint, r.substep, r.status, r.iters, *r.target, *r.achieved, *r.u, *np.ravel(r.bases), r.task_error, r.energy]


def read_track_csv(path, model) -> TrackReport:
    schema, header, rows = read_csv(Path(path))
    if schema != "ccma.track/1":
        raise InputError(f"{path}: expected schema ccma.track/1, got {schema}")
    if header != track_header(model):
        raise InputError(f"{path}: columns do not match the scene (wrong scene for this track?)")
    col = {name: i for i, name in enumerate(header)}
    out = []
    for row in rows:
        f = lambda names: np.array([float(row[col[n]]) for n in names])  # noqa: E731
        bases = f([f"base{k}_{c}" for k in range(model.n_m) for c in ("x", "y", "yaw")]).reshape(model.n_m, 3)
        out.append(
            TrackRow(
                waypoint=int(row[col["waypoint"]]),
                substep=int(row[col["substep"]]),
                target=f([f"target_{c}" for c in TASK_COORDS]),
                achieved=f([f"ee_{c}" for c in TASK_COORDS]),
                u=f([f"u{k}" for k in range(model.n_u)]),
                bases=bases,
                iters=int(row[col["iters"]]),
                wall_time=float("nan"),
                status=row[col["status"]],
                task_error=float(row[col["task_error"]]),
                energy=float(row[col["energy"]]),
            )
        )
    return TrackReport(out, tuple(model.task_mask))


def cmd_track(args) -> int:
    model, s0, u0 = _load(args.scene)
    reference = ee_state(model, s0)
    if (args.waypoints is None) == (args.profile is None):
        raise InputError("give exactly one of --waypoints or --profile")
    if args.waypoints is not None:
        try:
            text = Path(args.waypoints).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read waypoint file: {exc}") from exc
    else:
        text = shipped_profile_text(args.profile)
    targets = load_waypoints(text, reference)
    cfg = _ik_config(args)
    out = _out_dir(args)
    report = track_waypoints(model, s0, u0, targets, cfg)
    write_csv(out / "track.csv", "ccma.track/1", track_header(model), track_rows(report))
    # wall times live apart so track.csv stays bitwise reproducible
    write_csv(
        out / "track_timing.csv",
        "ccma.track-timing/1",
        ["step", "wall_time"],
        ([i, r.wall_time] for i, r in enumerate(report.rows)),
    )
    _manifest(args, out, {"waypoints_resolved": [[float(v) for v in t] for t in targets]})
    rmse = report.rmse()
    failed = [r for r in report.rows if r.status != "converged"]
    print(f"{len(report)} sub-steps over {len(targets)} waypoints, {len(failed)} failed")
    print("RMSE " + " ".join(f"{c}={v:.3e}" for c, v in zip(TASK_COORDS, rmse) if np.isfinite(v)))
    return EXIT_OK if not failed else EXIT_NONCONVERGED


def cmd_validate_grad(args) -> int:
    scenes = args.scene or list(CANONICAL_NAMES)
    layers = tuple(args.layers.split(",")) if args.layers else LAYERS
    out = _out_dir(args)
    rows = []
    failed = []
    for spec in scenes:
        model, s0, u0 = _load(spec)
        rep = validate_scene(
            model,
            s0,
            u0,
            trials=args.trials,
            h_local=args.h,
            h_pipeline=args.h_pipeline,
            seed=args.seed,
            layers=layers,
            corrupt=args.corrupt,
            name=spec,
        )
        for r in rep.layers:
            rows.append([spec, r.layer, r.max_rel_error, r.tolerance, "pass" if r.passed else "FAIL", "/".join(map(str, r.worst_index)), r.worst_trial])
            print(f"{spec:20s} {r.layer:10s} {r.max_rel_error:9.2e} (tol {r.tolerance:.0e}) {'pass' if r.passed else 'FAIL'}")
            if not r.passed:
                failed.append((spec, r))
        if args.sweep:
            for h, err in step_sweep(model, s0, u0, seed=args.seed):
                rows.append([spec, f"sweep_h={h:g}", err, float("nan"), "info", "", 0])
                print(f"{spec:20s} sweep h={h:.0e} rel.err {err:.2e}")
    write_csv(out / "validation.csv", "ccma.validation/1", ["scene", "layer", "max_rel_error", "tolerance", "result", "worst_index", "worst_trial"], rows)
    _manifest(args, out)
    for spec, r in failed:
        print(f"validation failed: scene {spec} layer {r.layer} rel.err {r.max_rel_error:.3e} worst index {r.worst_index}", file=sys.stderr)
    return EXIT_VALIDATION if failed else EXIT_OK


def bench_scene(model, s0, u0, reps, cfg=None):
    """Wall times (s) of one IK step to the combined perturbation target."""
    target = combined_perturbation(ee_state(model, s0), model.mask_array)
    times = []
    iters = []
    for _ in range(reps):
        t0 = time.perf_counter()
        res = solve_ik_step(model, s0, u0, target, cfg)
        times.append(time.perf_counter() - t0)
        iters.append(res.iters)
        if not res.converged:
            raise RuntimeError(f"bench step did not converge ({res.status})")
    return times, iters


def cmd_bench(args) -> int:
    scenes = args.scene or list(CANONICAL_NAMES)
    cfg = _ik_config(args)
    out = _out_dir(args)
    rows = []
    for spec in scenes:
        model, s0, u0 = _load(spec)
        bench_scene(model, s0, u0, 1, cfg)  # warm-up (JIT caches, allocator)
        try:
            times, iters = bench_scene(model, s0, u0, args.reps, cfg)
        except RuntimeError as exc:
            print(f"{spec}: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        ms = [1e3 * t for t in times]
        row = [spec, model.n_b, model.n_m, model.n_free, args.reps, statistics.fmean(ms), statistics.median(ms), min(ms), max(ms), statistics.median(iters)]
        rows.append(row)
        print(f"{spec:20s} n_b={model.n_b:2d} n_m={model.n_m} free={model.n_free:2d} median {row[6]:7.2f} ms  mean {row[5]:7.2f} ms")
    write_csv(
        out / "bench.csv",
        "ccma.bench/1",
        ["scene", "n_b", "n_m", "n_free", "reps", "mean_ms", "median_ms", "min_ms", "max_ms", "median_iters"],
        rows,
    )
    _manifest(args, out)
    return EXIT_OK


def cmd_execute(args) -> int:
    model, s0, u0 = _load(args.scene)
    track = read_track_csv(args.track, model)
    geometry = OmniBaseGeometry(wheel_radius=args.wheel_radius, mount_radius=args.mount_radius)
    gains = PiGains(kp=args.kp, ki=args.ki)
    out = _out_dir(args)
    seeds = [args.seed + k for k in range(args.seeds)]
    summary_rows = []
    ok = True
    for k, seed in enumerate(seeds):
        ex = simulate_execution(model, track, s0, u0, geometry, gains, dt=args.dt, settle_time=args.settle, noise_sigma=args.noise_sigma, seed=seed)
        # not_assembled is a physical outcome (noisy bases over-constrain the
        # linkage); only solver failures count against the run
        failures = sum(s not in ("ok", "not_assembled") for s in ex.status)
        ok &= failures == 0
        if failures or "not_assembled" in ex.status:
            print(f"seed {seed}: {ex.status.count('not_assembled')} least-squares samples, {failures} solver failures")
        rmse = ex.rmse()
        summary_rows.append([seed, ex.position_rmse(), ex.base_rmse(), *rmse])
        if k == 0:
            _write_execution(out, model, ex)
    header = ["seed", "ee_position_rmse", "base_position_rmse"] + [f"rmse_{c}" for c in TASK_COORDS]
    write_csv(out / "execution_summary.csv", "ccma.execution-summary/1", header, summary_rows)
    pos = [r[1] for r in summary_rows]
    mean = statistics.fmean(pos)
    std = statistics.stdev(pos) if len(pos) > 1 else 0.0
    _manifest(args, out, {"ee_position_rmse_mean": mean, "ee_position_rmse_std": std})
    print(f"end-effector position RMSE over {len(seeds)} seed(s): mean {1e3 * mean:.3f} mm, std {1e3 * std:.3f} mm")
    return EXIT_OK if ok else EXIT_NONCONVERGED


def _write_execution(out, model, ex):
    cols = ["sample", "time"]
    for k in range(model.n_m):
        cols += [f"cmd{k}_x", f"cmd{k}_y", f"cmd{k}_yaw", f"sim{k}_x", f"sim{k}_y", f"sim{k}_yaw"]
    cols += [f"ee_cmd_{c}" for c in TASK_COORDS] + [f"ee_sim_{c}" for c in TASK_COORDS] + ["status"]
    rows = []
    for i in range(len(ex.sample_times)):
        row = [i, ex.sample_times[i]]
        for k in range(model.n_m):
            row += [*ex.commanded_bases[i, k], *ex.simulated_bases[i, k]]
        row += [*ex.ee_commanded[i], *ex.ee_simulated[i], ex.status[i]]
        rows.append(row)
    write_csv(out / "execution.csv", "ccma.execution/1", cols, rows)
    wcols = ["step", "time"] + [f"wheel{k}_{w}" for k in range(model.n_m) for w in range(3)]
    wrows = ([j, (j + 1) * ex.dt, *ex.wheel_speeds[j].ravel()] for j in range(ex.wheel_speeds.shape[0]))
    write_csv(out / "wheel_speeds.csv", "ccma.wheels/1", wcols, wrows)


def cmd_export_scene(args) -> int:
    names = list(CANONICAL_NAMES) if args.scene == "all" else [args.scene]
    out = _out_dir(args)
    for spec in names:
        model = resolve_scene(spec)
        stem = spec if spec in CANONICAL_NAMES else Path(spec).stem
        path = out / f"{stem}.yaml"
        path.write_text(dump_scene(model), encoding="utf-8")
        print(path)
    _manifest(args, out)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        argv = list(doc["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"cannot read manifest: {exc}") from exc
    if args.out is not None:
        argv = _replace_out(argv, args.out)
    return main(argv)


def _replace_out(argv, out):
    res = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        if a.startswith("--out="):
            continue
        res.append(a)
    return res + ["--out", str(out)]


# -- parser -----------------------------------------------------------------------


def _positive(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _non_negative(text):
    v = float(text)
    if v < 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ccma", description="Constraint-based kinematics for collaborative mobile agents.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="ccma-out", help="output directory (default: ccma-out)")
    common.add_argument("--hessian", choices=["full", "gauss-newton"], default="full", help="energy Hessian used by the forward solver")
    common.add_argument("--seed", type=int, default=0)

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--grad-tol", type=_positive, default=None, help="gradient tolerance of the command's main solver")
    solver.add_argument("--max-iters", type=int, default=None, help="iteration cap of the command's main solver")

    ik = argparse.ArgumentParser(add_help=False)
    ik.add_argument("--lambda", dest="lam", type=float, default=0.1, help="residual-energy weight, 0 < lambda < 1")
    ik.add_argument("--trans-step", type=_positive, default=0.010, help="max translation per sub-step (m)")
    ik.add_argument("--rot-step", type=_positive, default=0.005, help="max rotation per angle per sub-step (rad)")
    ik.add_argument("--fk-grad-tol", type=_positive, default=None, help="forward-solve gradient tolerance inside IK")

    c = sub.add_parser("solve-fk", parents=[common, solver], help="forward kinematics for given controls")
    c.add_argument("--scene", required=True, help="canonical scene name or scene file")
    c.add_argument("--controls", help="full control vector, comma separated")
    c.add_argument("--offset", action="append", help="BASE,dx,dy[,dtheta] added to the reference controls (repeatable)")
    c.set_defaults(func=cmd_solve_fk)

    c = sub.add_parser("track", parents=[common, solver, ik], help="track end-effector waypoints")
    c.add_argument("--scene", required=True)
    c.add_argument("--waypoints", help="waypoint file")
    c.add_argument("--profile", choices=PROFILE_NAMES, help="shipped waypoint profile")
    c.add_argument("--direct", action="store_true", help="solve each waypoint in one step, no subdivision")
    c.set_defaults(func=cmd_track)

    c = sub.add_parser("validate-grad", parents=[common], help="finite-difference checks of all derivative layers")
    c.add_argument("--scene", action="append", help="scene(s) to check (default: all canonical)")
    c.add_argument("--trials", type=int, default=3)
    c.add_argument("--h", type=_positive, default=1e-5, help="step for local layers")
    c.add_argument("--h-pipeline", type=_positive, default=1e-6, help="step for full-pipeline layers")
    c.add_argument("--layers", help=f"comma-separated subset of {','.join(LAYERS)}")
    c.add_argument("--sweep", action="store_true", help="also report dE/ds error over h = 1e-4..1e-7")
    c.add_argument("--corrupt", choices=LAYERS, help=argparse.SUPPRESS)
    c.set_defaults(func=cmd_validate_grad)

    c = sub.add_parser("bench", parents=[common, solver, ik], help="time one combined 10 mm + 0.005 rad IK step")
    c.add_argument("--scene", action="append", help="scene(s) to time (default: all canonical)")
    c.add_argument("--reps", type=int, default=20)
    c.set_defaults(func=cmd_bench)

    c = sub.add_parser("execute", parents=[common], help="simulate PI-tracked bases following a track CSV")
    c.add_argument("--scene", required=True)
    c.add_argument("--track", required=True, help="track.csv written by 'ccma track'")
    c.add_argument("--noise-sigma", type=_non_negative, default=0.0, help="per-step base position disturbance (m)")
    c.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds starting at --seed")
    c.add_argument("--dt", type=_positive, default=0.01)
    c.add_argument("--settle", type=_positive, default=1.5, help="seconds each track row is held")
    c.add_argument("--kp", type=_non_negative, default=10.0)
    c.add_argument("--ki", type=_non_negative, default=25.0)
    c.add_argument("--wheel-radius", type=_positive, default=0.05)
    c.add_argument("--mount-radius", type=_positive, default=0.15)
    c.set_defaults(func=cmd_execute)

    c = sub.add_parser("export-scene", parents=[common], help="write scene files")
    c.add_argument("--scene", required=True, help="canonical name, scene file, or 'all'")
    c.set_defaults(func=cmd_export_scene)

    c = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    c.add_argument("manifest")
    c.add_argument("--out", default=None, help="write to this directory instead of the recorded one")
    c.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    args.argv = argv
    for name in ("reps", "trials", "seeds", "max_iters"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            print(f"error: --{name.replace('_', '-')} must be >= 1", file=sys.stderr)
            return EXIT_INPUT
    if hasattr(args, "lam") and not 0.0 < args.lam < 1.0:
        print("error: --lambda must lie strictly between 0 and 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except SceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
