"""Command-line entry point: run a configured scenario and write snapshots.

    gradbgk run --config shock_tube.cfg [--output-dir out] [--threads 4]

Exit codes: 0 success, 2 configuration/validation error, 3 the run hit an
unphysical state.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .io import config_from_dict, parse_config, write_coeff_dump, write_manifest, write_snapshot
from .scenarios import build_scenario
from .solver import Solver
from .state import UnphysicalStateError

log = logging.getLogger("gradbgk")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradbgk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one configured scenario")
    run.add_argument("--config", required=True, help="path to the key = value config file")
    run.add_argument("--output-dir", default=None, help="override the config's output_dir")
    run.add_argument("--threads", type=int, default=None, help="override the thread count")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def run_from_config(cfg: dict) -> Path:
    """Execute one run; returns the output directory."""
    spec, run_cfg = config_from_dict(cfg)
    profile_kwargs = {}
    if spec.name == "shock_bubble":
        profile_kwargs["steady_tol"] = cfg.get("shock_steady_tol", 1e-6)
    mesh, field = build_scenario(spec, run_cfg.M, run_cfg.D, run_cfg.kn, **profile_kwargs)
    solver = Solver(mesh, run_cfg)
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    snaps = solver.run(field)
    rows = []
    for k, (t, snap) in enumerate(snaps):
        name = f"snapshot_{k:04d}.csv"
        write_snapshot(snap, out_dir / name)
        if cfg.get("dump_coeffs"):
            write_coeff_dump(snap, out_dir / f"coeffs_{k:04d}.csv")
        totals = snap.totals()
        rows.append({"time": t, "file": name, **totals})
        log.info("t=%.6g -> %s (mass %.12g)", t, name, totals["mass"])
    write_manifest(out_dir / "manifest.cfg", cfg, rows)
    return out_dir


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        cfg = parse_config(Path(args.config))
        if args.output_dir is not None:
            cfg["output_dir"] = args.output_dir
        if args.threads is not None:
            cfg["threads"] = args.threads
        run_from_config(cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnphysicalStateError as exc:
        print(f"error: run aborted on unphysical state: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
