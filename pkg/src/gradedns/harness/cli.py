"""Command line interface: ``gradedns {run,converge-time,converge-space,validate,export}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

from ..linsolve import SolverError
from ..stepper import InvariantError, StepDiagnostics, write_snapshot
from .config import ConfigError, dump_config, load_config
from .studies import convergence_space, convergence_time, run_experiment
from .validate import run_suite

log = logging.getLogger("gradedns")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("-c", "--config", help="flat key = value configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--alpha", help="grading exponent (same as --set alpha=...)")
    p.add_argument("--tau", help="stepsize or comma-separated stepsizes")
    p.add_argument("--mesh-n", help="mesh resolution or comma-separated resolutions")
    p.add_argument("--ref-tau", help="reference stepsize of a temporal study")
    p.add_argument("--out", help="output directory (same as --set out.dir=...)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradedns",
        description="2D Navier-Stokes with graded IMEX Lobatto IIIC time stepping.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("run", help="integrate one configuration to its final time")
    _add_common(p)
    p = sub.add_parser("converge-time", help="temporal convergence study")
    _add_common(p)
    p = sub.add_parser("converge-space", help="spatial convergence study on nested meshes")
    _add_common(p)
    p = sub.add_parser("export", help="run and write VTK snapshots")
    _add_common(p)
    p.add_argument("--times", help="comma-separated snapshot times (default: config snapshots)")
    p = sub.add_parser("validate", help="invariant suite on a tiny mesh")
    p.add_argument("--n", type=int, default=2, help="cells per side of the unit-square mesh")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args):
    overrides = []
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE", item)
        k, v = item.split("=", 1)
        overrides.append((k.strip(), v.strip()))
    for flag, key in (("alpha", "alpha"), ("tau", "tau"), ("mesh_n", "mesh.n"),
                      ("ref_tau", "ref.tau"), ("out", "out.dir")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append((key, value))
    if getattr(args, "times", None) is not None:
        overrides.append(("snapshots", args.times))
    return load_config(args.config, overrides)


def _out_dir(config) -> Path:
    out = Path(config.out_dir or "gradedns-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, config, extra: dict | None = None):
    text = f"# gradedns {command}\n" + dump_config(config)
    for k, v in (extra or {}).items():
        text += f"# {k} = {v}\n"
    (out / "manifest.txt").write_text(text)


def _write_history(path: Path, history: list[StepDiagnostics]):
    names = [f.name for f in fields(StepDiagnostics)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for d in history:
            w.writerow([repr(v) for v in asdict(d).values()])


def cmd_run(args) -> int:
    config = _config(args)
    out = _out_dir(config)
    res = run_experiment(config, snapshot_times=config.snapshots, snapshot_dir=out)
    _write_history(out / "history.csv", res.history)
    write_snapshot(res.ctx, res.velocity.coeffs, out / "final.vtk", res.velocity.time)
    _write_manifest(out, "run", config, {"steps": len(res.history),
                                         "final energy": repr(res.history[-1].energy)})
    print(f"{len(res.history)} steps to t={res.velocity.time!r}; "
          f"final energy {res.history[-1].energy:.6e}; output in {out}")
    return 0


def _study(args, fn, name) -> int:
    config = _config(args)
    out = _out_dir(config)
    table = fn(config)
    path = out / f"{name}.csv"
    table.to_csv(path)
    _write_manifest(out, args.command, config)
    print(table.to_csv(), end="")
    print(f"table written to {path}")
    return 0


def cmd_export(args) -> int:
    config = _config(args)
    if not config.snapshots:
        raise ConfigError("export needs snapshot times (--times or snapshots = ...)", "snapshots")
    out = _out_dir(config)
    run_experiment(config, snapshot_times=config.snapshots, snapshot_dir=out)
    _write_manifest(out, "export", config)
    files = sorted(p.name for p in out.glob("snapshot_*.vtk"))
    print(f"wrote {len(files)} snapshots to {out}: {' '.join(files)}")
    return 0


def cmd_validate(args) -> int:
    checks = run_suite(args.n, args.seed)
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if not c.ok]
    print("all invariants hold" if not failed else f"failed: {', '.join(failed)}")
    return 0 if not failed else 1


COMMANDS = {
    "run": cmd_run,
    "converge-time": lambda a: _study(a, convergence_time, "converge_time"),
    "converge-space": lambda a: _study(a, convergence_space, "converge_space"),
    "export": cmd_export,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        key = f" (key {exc.key!r})" if exc.key else ""
        print(f"gradedns: config error{key}: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (InvariantError, SolverError, ValueError, OSError) as exc:
        print(f"gradedns: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
