"""Snapshot files, config parsing, and the run manifest.

Snapshots are plain CSV at full precision (floats printed with repr, so a
read-back reproduces the macro fields bitwise). Configs and manifests share
one line-oriented `key = value` format with `#` comments; manifest-only keys
are namespaced `snapshot_*` / `manifest_*` and skipped on re-parse, so a
manifest re-parses to the exact config that produced it.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .hermite import index_map
from .solver import Field, RunConfig
from .scenarios import SCENARIO_NAMES, ScenarioSpec

__all__ = [
    "write_macro_snapshot",
    "write_snapshot",
    "read_snapshot",
    "write_coeff_dump",
    "parse_config",
    "format_config",
    "config_from_dict",
    "write_manifest",
    "CONFIG_DEFAULTS",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_macro_snapshot(centers, rho, u, theta, q, path) -> None:
    """The snapshot schema on raw macro arrays: center coordinates, density,
    velocity, temperature, heat flux. Shared by the moment solver and the
    discrete-velocity reference so their outputs are directly comparable."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    u = np.atleast_2d(np.asarray(u, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    N, D = centers.shape[1], u.shape[1]
    cols = [f"x{ax+1}" for ax in range(N)]
    cols += ["rho"] + [f"u{d+1}" for d in range(D)] + ["theta"]
    cols += [f"q{d+1}" for d in range(D)]
    lines = [",".join(cols)]
    for i in range(len(centers)):
        row = [_fmt(c) for c in centers[i]]
        row.append(_fmt(rho[i]))
        row += [_fmt(u[i, d]) for d in range(D)]
        row.append(_fmt(theta[i]))
        row += [_fmt(q[i, d]) for d in range(D)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshot(field: Field, path) -> None:
    """One row per interior cell, in the shared macro schema."""
    rho, u, theta, q = field.macro_arrays()
    write_macro_snapshot(field.mesh.cell_centers(), rho, u, theta, q, path)


def read_snapshot(path) -> dict:
    """Arrays keyed by the snapshot's column names, plus 'x' (cells, N),
    'u' (cells, D) and 'q' (cells, D) conveniences."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    out = {name: data[:, k] for k, name in enumerate(header)}
    n_x = sum(1 for h in header if h.startswith("x"))
    n_u = sum(1 for h in header if h.startswith("u"))
    out["x"] = data[:, :n_x]
    out["u"] = np.stack([out[f"u{d+1}"] for d in range(n_u)], axis=1)
    out["q"] = np.stack([out[f"q{d+1}"] for d in range(n_u)], axis=1)
    return out


def write_coeff_dump(field: Field, path) -> None:
    """Raw per-cell rows: frame velocity, temperature, then coefficients in
    storage order."""
    D = field.D
    m = index_map(field.M, field.D)
    idx = field.mesh.interior_index()
    cols = [f"u{d+1}" for d in range(D)] + ["theta"]
    cols += ["c" + "".join(str(a) for a in m.alpha(off)) for off in range(len(m))]
    lines = [",".join(cols)]
    for i in idx:
        row = [_fmt(v) for v in field.u[i]] + [_fmt(field.theta[i])]
        row += [_fmt(v) for v in field.coef[i]]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


# key -> (type, default); None default means required / scenario-dependent
CONFIG_DEFAULTS = {
    "scenario": (str, None),
    "M": (int, None),
    "D": (int, 3),
    "N": (int, None),
    "nx": (int, None),
    "ny": (int, 0),
    "kn": (float, None),
    "cfl": (float, 0.8),
    "end_time": (float, None),
    "regularized": (bool, True),
    "reconstruction": (str, "van_leer"),
    "output_dir": (str, "out"),
    "snapshot_dt": (float, 0.0),
    "threads": (int, 1),
    "proj_substep_cap": (int, 32),
    "proj_substeps": (int, 2),
    "mach": (float, 2.0),
    "shock_shift_mode": (str, "consistent"),
    "cfl_nu_mode": (str, "relaxation_time"),
    "cfl_safety": (float, 1.0),
    "dump_coeffs": (bool, False),
    # shock-bubble only: steadiness threshold for the precomputed profile
    # (the captured shock's residual O(dx) drift floors the reachable rate)
    "shock_steady_tol": (float, 1e-6),
}

_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _parse_value(key: str, raw: str):
    typ, _ = CONFIG_DEFAULTS[key]
    raw = raw.strip()
    if typ is bool:
        if raw.lower() not in _BOOL_WORDS:
            raise ValueError(f"config key {key}: cannot read boolean from {raw!r}")
        return _BOOL_WORDS[raw.lower()]
    return typ(raw)


def parse_config(source) -> dict:
    """Read `key = value` lines from a path or literal text. Unknown keys
    are an error except the manifest's own namespaced entries."""
    p = Path(source)
    try:
        is_file = p.is_file()
    except (OSError, ValueError):
        is_file = False
    text = p.read_text() if is_file else str(source)
    cfg = {}
    for ln_no, raw_line in enumerate(text.split("\n"), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {ln_no}: expected 'key = value', got {raw_line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if re.match(r"snapshot_\d+_", key) or key.startswith("manifest_"):
            continue
        if key not in CONFIG_DEFAULTS:
            raise ValueError(f"config line {ln_no}: unknown key {key!r}")
        cfg[key] = _parse_value(key, raw)
    for key in ("scenario", "M", "kn", "end_time", "nx"):
        if key not in cfg:
            raise ValueError(f"config is missing required key {key!r}")
    if cfg["scenario"] not in SCENARIO_NAMES:
        raise ValueError(f"unknown scenario {cfg['scenario']!r}")
    for key, (_typ, default) in CONFIG_DEFAULTS.items():
        if key not in cfg and default is not None:
            cfg[key] = default
    spec_n = 2 if cfg["scenario"] in ("shock_bubble", "periodic_2d") else 1
    cfg.setdefault("N", spec_n)
    if cfg["N"] != spec_n:
        raise ValueError(
            f"scenario {cfg['scenario']} is {spec_n}-dimensional, config says N={cfg['N']}"
        )
    return cfg


def config_from_dict(cfg: dict) -> tuple:
    """(ScenarioSpec, RunConfig) from a parsed config mapping."""
    spec = ScenarioSpec(
        name=cfg["scenario"],
        nx=cfg["nx"],
        ny=cfg.get("ny", 0),
        mach=cfg.get("mach", 2.0),
        shock_shift_mode=cfg.get("shock_shift_mode", "consistent"),
    )
    run = RunConfig(
        M=cfg["M"],
        D=cfg["D"],
        N=cfg["N"],
        kn=cfg["kn"],
        cfl=cfg["cfl"],
        end_time=cfg["end_time"],
        regularized=cfg["regularized"],
        reconstruction=cfg["reconstruction"],
        proj_substeps=cfg["proj_substeps"],
        proj_substep_cap=cfg["proj_substep_cap"],
        snapshot_dt=cfg["snapshot_dt"],
        threads=cfg["threads"],
        cfl_nu_mode=cfg["cfl_nu_mode"],
        cfl_safety=cfg["cfl_safety"],
    )
    run.validate()
    return spec, run


def format_config(cfg: dict) -> str:
    lines = []
    for key in CONFIG_DEFAULTS:
        if key in cfg:
            v = cfg[key]
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def write_manifest(path, cfg: dict, snapshot_rows: list) -> None:
    """Config echo plus one conservation entry per snapshot."""
    parts = ["# run manifest: config echo, then per-snapshot conservation totals",
             format_config(cfg).rstrip("\n")]
    for k, row in enumerate(snapshot_rows):
        parts.append(f"snapshot_{k}_time = {_fmt(row['time'])}")
        parts.append(f"snapshot_{k}_file = {row['file']}")
        parts.append(f"snapshot_{k}_mass = {_fmt(row['mass'])}")
        mom = " ".join(_fmt(v) for v in row["momentum"])
        parts.append(f"snapshot_{k}_momentum = {mom}")
        parts.append(f"snapshot_{k}_energy = {_fmt(row['energy'])}")
    Path(path).write_text("\n".join(parts) + "\n")
