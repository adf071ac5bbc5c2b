"""Command-line front end.

    phasecrystal <subcommand> --config <file> [--out <dir>] [--threads N] [--overwrite]

The configuration is a JSON object whose ``cmd`` key (optional, but if
present it must agree with the subcommand) selects the computation. Every
other key is checked against the subcommand's schema; unknown keys are
rejected. ``--config preset:<name>`` loads one of the shipped presets.

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures. On failure every file written by the run is removed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from ._accel import backend_name, set_threads
from .errors import ConfigError, NumericFailure, ParseError, PhaseCrystalError, ValidationError
from .io import grid_rows, remove_quietly, sha256_file, write_csv, write_grid_json, write_json

SUBCOMMANDS = ("lattice", "bands", "butterfly", "chern", "eigq", "dissipate", "potential",
               "nbody", "crystal")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
PRESET_PREFIX = "preset:"

_REQUIRED = object()
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class Field:
    kind: str  # int | float | str | bool | range | res | list_int | points | dict | str_or_points
    default: Any = _REQUIRED
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple = ()
    nullable: bool = False


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _model_fields(k_required=True, with_diss=False):
    out = {
        "K": Field("float", _REQUIRED if k_required else 1.0, math.isfinite, "finite"),
        "q0": Field("int", 4, lambda v: v >= 3, ">= 3"),
        "lam": Field("float", 1.0, _pos, "> 0"),
    }
    if with_diss:
        out["kappa"] = Field("float", 0.0, _nonneg, ">= 0")
        out["n0"] = Field("float", 0.0, _nonneg, ">= 0")
    return out


_FLUX = {
    "p": Field("int", _REQUIRED, _pos, ">= 1"),
    "q": Field("int", _REQUIRED, _pos, ">= 1"),
    "K": Field("float", 1.0, lambda v: math.isfinite(v) and v != 0, "finite and nonzero"),
}

SCHEMAS: dict[str, dict[str, Field]] = {
    "lattice": {
        **_model_fields(),
        "x_range": Field("range", (-2 * TWO_PI, 2 * TWO_PI)),
        "p_range": Field("range", (-2 * TWO_PI, 2 * TWO_PI)),
        "resolution": Field("res", 201),
    },
    "bands": {
        **_FLUX,
        "n_kx": Field("int", 41, lambda v: v >= 2, ">= 2"),
        "n_kp": Field("int", 41, lambda v: v >= 2, ">= 2"),
    },
    "butterfly": {
        "q_max": Field("int", _REQUIRED, lambda v: 2 <= v <= 64, "in 2..64"),
        "K": _FLUX["K"],
        "n_k": Field("int", 8, lambda v: v >= 2, ">= 2"),
    },
    "chern": {
        **_FLUX,
        "n_grid": Field("int", 24, lambda v: v >= 12, ">= 12"),
    },
    "eigq": {
        **_FLUX,
        "band": Field("int", 1, _pos, ">= 1"),
        "kX": Field("float", 0.0, math.isfinite, "finite"),
        "kP": Field("float", 0.0, math.isfinite, "finite"),
        "x_range": Field("range", (-2 * TWO_PI, 2 * TWO_PI)),
        "p_range": Field("range", (-2 * TWO_PI, 2 * TWO_PI)),
        "resolution": Field("res", 161),
    },
    "dissipate": {
        **_model_fields(with_diss=True),
        "kicks": Field("int", _REQUIRED, _nonneg, ">= 0"),
        "initial": Field("str", "ground", choices=("ground", "coherent")),
        "X0": Field("float", 0.0, math.isfinite, "finite"),
        "P0": Field("float", 0.0, math.isfinite, "finite"),
        "L": Field("float", 25.6, _pos, "> 0"),
        "N": Field("int", 512, lambda v: v >= 16 and v % 2 == 0, "even and >= 16"),
        "order": Field("int", 8, lambda v: v in (2, 4, 6, 8), "one of 2, 4, 6, 8"),
        "j_max": Field("int", None, _pos, ">= 1", nullable=True),
        "energy_every": Field("int", 1, _pos, ">= 1"),
        "energy_method": Field("str", "spectral", choices=("spectral", "fd")),
        "snapshots": Field("list_int", ()),
        "save_char": Field("bool", False),
    },
    "potential": {
        "kind": Field("str", _REQUIRED, choices=("contact", "hardcore", "tabulated")),
        "eps": Field("float", 1.0, math.isfinite, "finite"),
        "a": Field("float", 0.1, _pos, "> 0"),
        "path": Field("str", None, nullable=True),
        "lam": Field("float", 1.0, _pos, "> 0"),
        "n_max": Field("int", 40, _nonneg, ">= 0"),
        "R_max": Field("float", 10.0, _pos, "> 0"),
        "n_R": Field("int", 101, lambda v: v >= 2, ">= 2"),
        "variant": Field("str", "exact", choices=("exact", "linear")),
    },
    "nbody": {
        **_model_fields(),
        "potential": Field("dict", _REQUIRED),
        "initial": Field("str_or_points", "three-body"),
        "periods": Field("int", 200, _nonneg, ">= 0"),
        "methods": Field("list_str", ("rwa", "poincare", "linear"),
                         choices=("rwa", "poincare", "linear")),
        "dt": Field("float", TWO_PI / 200.0, _pos, "> 0"),
        "rtol": Field("float", 1e-10, _pos, "> 0"),
        "atol": Field("float", 1e-12, _pos, "> 0"),
    },
    "crystal": {
        **_model_fields(),
        "potential": Field("dict", _REQUIRED),
        "atoms": Field("int", 7, lambda v: v >= 2, ">= 2"),
        "periods": Field("int", 400, _pos, ">= 1"),
        "dt": Field("float", TWO_PI / 200.0, _pos, "> 0"),
        "save_trajectory": Field("bool", True),
    },
}

POTENTIAL_SCHEMA = {
    "kind": Field("str", _REQUIRED, choices=("contact", "hardcore", "none")),
    "eps": Field("float", 0.0, math.isfinite, "finite"),
    "a": Field("float", 0.05, _pos, "> 0"),
    "sigma": Field("float", 0.1, _pos, "> 0"),
    "n": Field("int", 20, lambda v: v >= 4 and v % 2 == 0, "even and >= 4"),
}


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(name: str, f: Field, v):
    if v is None:
        if f.nullable:
            return None
        raise ValidationError(f"field '{name}' must not be null")
    bad = ValidationError(f"field '{name}' has the wrong type for {f.kind}: {v!r}")
    if f.kind == "int":
        if isinstance(v, bool) or not (isinstance(v, int) or (isinstance(v, float) and v.is_integer())):
            raise bad
        v = int(v)
    elif f.kind == "float":
        if not _is_num(v):
            raise bad
        v = float(v)
    elif f.kind == "str":
        if not isinstance(v, str):
            raise bad
    elif f.kind == "bool":
        if not isinstance(v, bool):
            raise bad
    elif f.kind == "range":
        if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(_is_num(x) for x in v)):
            raise bad
        v = (float(v[0]), float(v[1]))
        if not v[1] > v[0]:
            raise ValidationError(f"field '{name}' must be an increasing pair")
    elif f.kind == "res":
        if isinstance(v, int) and not isinstance(v, bool):
            v = (v, v)
        if not (isinstance(v, (list, tuple)) and len(v) == 2
                and all(isinstance(x, int) and not isinstance(x, bool) for x in v)):
            raise bad
        v = (int(v[0]), int(v[1]))
        if min(v) < 2:
            raise ValidationError(f"field '{name}' needs at least 2 points per axis")
    elif f.kind == "list_int":
        if not (isinstance(v, (list, tuple)) and all(isinstance(x, int) and not isinstance(x, bool)
                                                     for x in v)):
            raise bad
        v = tuple(int(x) for x in v)
    elif f.kind == "list_str":
        if not (isinstance(v, (list, tuple)) and all(isinstance(x, str) for x in v)):
            raise bad
        for x in v:
            if x not in f.choices:
                raise ValidationError(f"field '{name}': {x!r} not one of {list(f.choices)}")
        v = tuple(v)
    elif f.kind == "dict":
        if not isinstance(v, dict):
            raise bad
    elif f.kind == "str_or_points":
        if isinstance(v, str):
            if v != "three-body":
                raise ValidationError(f"field '{name}': unknown named configuration {v!r}")
        else:
            ok = isinstance(v, (list, tuple)) and len(v) >= 1 and all(
                isinstance(pt, (list, tuple)) and len(pt) == 2 and all(_is_num(c) for c in pt)
                for pt in v)
            if not ok:
                raise ValidationError(f"field '{name}' must be 'three-body' or a list of [X, P] pairs")
            v = tuple((float(a), float(b)) for a, b in v)
    if f.choices and f.kind == "str" and v not in f.choices:
        raise ValidationError(f"field '{name}' must be one of {list(f.choices)}, got {v!r}")
    if f.check is not None and v is not None and f.kind in ("int", "float"):
        if not f.check(v):
            raise ValidationError(f"field '{name}' must be {f.rule}, got {v!r}")
    return v


def _apply_schema(raw: dict, schema: dict[str, Field], where: str) -> dict:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(unknown)}; "
                              f"allowed: {', '.join(sorted(schema))}")
    out = {}
    for name, f in schema.items():
        if name in raw:
            out[name] = _coerce(name, f, raw[name])
        elif f.default is _REQUIRED:
            raise ValidationError(f"missing required key '{name}' in {where}")
        else:
            out[name] = f.default
    return out


# ---------------------------------------------------------------------------
# Config loading


@dataclass
class RunConfig:
    cmd: str
    params: dict
    out: Path
    overwrite: bool = False
    threads: int | None = None
    source: str = ""

    def echo(self) -> dict:
        d = {"cmd": self.cmd}
        d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()})
        return d


def preset_names() -> list[str]:
    root = resources.files("phasecrystal") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _read_config_text(spec: str) -> tuple[str, str]:
    if spec.startswith(PRESET_PREFIX):
        name = spec[len(PRESET_PREFIX):]
        res = resources.files("phasecrystal") / "presets" / f"{name}.json"
        if not res.is_file():
            raise ParseError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
        return res.read_text(), f"preset {name}"
    try:
        return Path(spec).read_text(), spec
    except OSError as exc:
        raise ParseError(f"cannot read config {spec}: {exc.strerror}") from None


def parse_config_text(text: str, source: str = "<config>", cmd: str | None = None) -> tuple[str, dict]:
    """Parse and validate a JSON config; returns (cmd, params with defaults)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{source}: top level must be a JSON object")
    raw = dict(raw)
    name = raw.pop("cmd", None)
    if name is None:
        name = cmd
    if name is None:
        raise ValidationError(f"{source}: missing 'cmd'")
    if name not in SCHEMAS:
        raise ValidationError(f"{source}: unknown cmd {name!r}; expected one of {', '.join(SUBCOMMANDS)}")
    if cmd is not None and name != cmd:
        raise ValidationError(f"{source}: config is for {name!r} but subcommand is {cmd!r}")
    params = _apply_schema(raw, SCHEMAS[name], f"{name} config")
    if "potential" in params:
        params["potential"] = _apply_schema(params["potential"], POTENTIAL_SCHEMA, "potential")
    _cross_validate(name, params)
    return name, params


def _cross_validate(cmd: str, p: dict) -> None:
    """Module preconditions that involve more than one field."""
    if "p" in p and "q" in p:
        if math.gcd(p["p"], p["q"]) != 1:
            raise ValidationError(f"flux p/q = {p['p']}/{p['q']} is not in lowest terms")
    if cmd == "eigq" and p["band"] > p["q"]:
        raise ValidationError(f"band must be <= q = {p['q']}")
    if cmd == "dissipate":
        if p["L"] / (p["N"] // 2) > 0.5:
            raise ValidationError("grid spacing 2L/N must be <= 0.5")
    if cmd == "potential":
        if p["kind"] == "tabulated" and not p["path"]:
            raise ValidationError("tabulated potential needs 'path'")
        if p["kind"] != "tabulated" and p["path"]:
            raise ValidationError("'path' is only valid for kind 'tabulated'")
    if cmd in ("nbody", "crystal"):
        if p["q0"] != 4:
            raise ValidationError("classical dynamics is implemented for q0 = 4")
        kind = p["potential"]["kind"]
        if cmd == "crystal" and kind == "none":
            raise ValidationError("crystal runs need a contact or hardcore potential")
        if kind == "contact" and not p["potential"]["eps"] >= 0:
            raise ValidationError("contact strength eps must be >= 0")


def parse_config(spec: str, cmd: str | None = None, out: str | None = None,
                 overwrite: bool = False, threads: int | None = None) -> RunConfig:
    text, source = _read_config_text(spec)
    name, params = parse_config_text(text, source, cmd)
    out_dir = Path(out) if out else Path("phasecrystal-out") / name
    return RunConfig(name, params, out_dir, overwrite, threads, source)


# ---------------------------------------------------------------------------
# Output bookkeeping


class OutputSet:
    """Tracks files written during one run so a failure can remove them."""

    def __init__(self, root: Path, overwrite: bool):
        self.root = root
        self.overwrite = overwrite
        self.files: list[Path] = []
        self.created_dir = False

    def open(self) -> None:
        if self.root.exists():
            if not self.root.is_dir():
                raise ValidationError(f"output path {self.root} exists and is not a directory")
            if any(self.root.iterdir()) and not self.overwrite:
                raise ValidationError(f"output directory {self.root} is not empty; pass --overwrite")
        else:
            self.root.mkdir(parents=True)
            self.created_dir = True

    def path(self, name: str) -> Path:
        p = self.root / name
        self.files.append(p)
        return p

    def csv(self, name, header, rows):
        return write_csv(self.path(name), header, rows)

    def json(self, name, obj):
        return write_json(self.path(name), obj)

    def grid_json(self, name, x, p, values, names=("X", "P")):
        return write_grid_json(self.path(name), x, p, values, names)

    def cleanup(self) -> None:
        for p in self.files:
            remove_quietly(p)
        remove_quietly(self.root / "manifest.json")
        if self.created_dir:
            try:
                self.root.rmdir()
            except OSError:
                pass


# ---------------------------------------------------------------------------
# Subcommand runners


def _model(p: dict):
    from .lattice import ModelParams

    return ModelParams(K=p["K"], q0=p.get("q0", 4), lam=p.get("lam", 1.0),
                       kappa=p.get("kappa", 0.0), n0=p.get("n0", 0.0))


def _run_lattice(p, out: OutputSet) -> dict:
    from .lattice import render_lattice

    X, P, vals = render_lattice(_model(p), p["x_range"], p["p_range"], p["resolution"])
    out.csv("lattice.csv", ("X", "P", "value"), grid_rows(X, P, vals))
    out.grid_json("lattice.json", X, P, vals)
    return {"min": float(vals.min()), "max": float(vals.max())}


def _flux(p):
    from .bands import RationalFlux

    return RationalFlux(p["p"], p["q"])


def _run_bands(p, out: OutputSet) -> dict:
    from .bands import band_surface

    spec = band_surface(_flux(p), p["K"], p["n_kx"], p["n_kp"])
    out.csv("bands.csv", ("kX", "kP", "b", "E"), spec.rows())
    e = spec.energies
    return {"bands": int(spec.n_bands),
            "band_min": e.min(axis=(1, 2)).tolist(), "band_max": e.max(axis=(1, 2)).tolist()}


def _run_butterfly(p, out: OutputSet) -> dict:
    from .bands import butterfly

    rows = butterfly(p["q_max"], p["K"], p["n_k"])
    out.csv("butterfly.csv", ("p", "q", "lambda_over_2pi", "band_index", "E_min", "E_max"), rows)
    return {"rows": len(rows)}


def _run_chern(p, out: OutputSet) -> dict:
    from .bands import chern_report

    rep = chern_report(_flux(p), p["K"], p["n_grid"])
    out.json("chern.json", rep)
    return {"band_chern": rep["band_chern"]}


def _run_eigq(p, out: OutputSet) -> dict:
    from .bands import eigenstate_q_function, zak_state

    (nx, npp) = p["resolution"]
    xs = np.linspace(*p["x_range"], nx)
    ps = np.linspace(*p["p_range"], npp)
    st = zak_state(_flux(p), (p["kX"], p["kP"]), p["band"], p["K"])
    Q = eigenstate_q_function(st, xs, ps)
    out.csv("eigq.csv", ("X", "P", "Q"), grid_rows(xs, ps, Q))
    out.grid_json("eigq.json", xs, ps, Q)
    i, j = np.unravel_index(int(np.argmax(Q)), Q.shape)
    return {"energy": st.energy, "argmax": [float(xs[i]), float(ps[j])], "Q_max": float(Q.max())}


def _run_dissipate(p, out: OutputSet) -> dict:
    from .dissipative import grid_checks, husimi_from_char, init_state, iter_evolve, mean_energy

    params = _model(p)
    g = init_state(p["initial"], L=p["L"], N=p["N"], lam=p["lam"], X0=p["X0"], P0=p["P0"])
    if any(k < 0 or k > p["kicks"] for k in p["snapshots"]):
        raise ValidationError("snapshot kicks must lie in 0..kicks")
    snaps = set(p["snapshots"]) | {p["kicks"]}

    def dump(n, grid):
        q = husimi_from_char(grid)
        out.csv(f"Q_kick{n}.csv", ("X", "P", "Q"), q.rows())
        if p["save_char"]:
            w = grid.w
            ax = grid.axis

            def rows():
                for i, s in enumerate(ax):
                    for j, k in enumerate(ax):
                        yield float(s), float(k), float(w[i, j].real), float(w[i, j].imag)
            out.csv(f"char_kick{n}.csv", ("s", "k", "Re(w)", "Im(w)"), rows())
        return float(q.norm)

    half, num = mean_energy(g, p["energy_method"])
    energies = [(0, half, num)]
    norms = {}
    if 0 in snaps:
        norms[0] = dump(0, g)
    worst = {"trace_error": 0.0, "hermiticity_error": 0.0, "boundary": 0.0}
    cur = g
    for n, cur, (half, num) in iter_evolve(g, params, p["kicks"], p["j_max"], p["energy_method"],
                                           p["order"]):
        if n % p["energy_every"] == 0 or n == p["kicks"]:
            energies.append((n, half, num))
        if n in snaps:
            norms[n] = dump(n, cur)
            chk = grid_checks(cur)
            for key in worst:
                worst[key] = max(worst[key], chk[key])
    out.csv("energy.csv", ("kick", "Eq5_energy", "number_energy"), energies)
    return {"final_energy": energies[-1][1], "final_number_energy": energies[-1][2],
            "q_norms": {str(k): v for k, v in norms.items()}, "grid_checks": worst}


def _run_potential(p, out: OutputSet) -> dict:
    from . import interaction as it

    lam = p["lam"]
    n_max = p["n_max"]
    Rs = np.linspace(0.0, p["R_max"], p["n_R"])
    kind = p["kind"]
    if kind == "contact":
        table = it.u_contact_table(p["eps"], lam, n_max)
        uc, ue = it.uc_ue_contact(p["eps"], lam, Rs)
    elif kind == "hardcore":
        table = it.u_hardcore_table(p["a"], lam, n_max, p["variant"])
        uc, ue = it.uc_hardcore(p["a"], lam, Rs, variant=p["variant"])
    else:
        real = it.read_tabulated_potential(p["path"])
        table = it.u_general(real, lam, n_max)
        pairs = [table.uc_ue(float(r)) for r in Rs]
        uc = np.array([a for a, _ in pairs])
        ue = np.array([b for _, b in pairs])
    radii = table.radii()
    out.csv("potential_levels.csv", ("N", "R_N", "U_N"),
            ((n, float(radii[n]), float(table.table[n])) for n in range(table.table.size)))
    out.csv("potential_coherent.csv", ("R", "U_c", "U_e"),
            ((float(r), float(a), float(b)) for r, a, b in zip(Rs, np.atleast_1d(uc), np.atleast_1d(ue))))
    return {"provenance": table.provenance, "U_0": float(table.table[0])}


def _classical_pots(pp: dict):
    from .classical import ClassicalPotentialSpec

    if pp["kind"] == "contact":
        lab = ClassicalPotentialSpec("contact-smoothed", eps=pp["eps"], sigma=pp["sigma"])
    elif pp["kind"] == "hardcore":
        lab = ClassicalPotentialSpec("hardcore-powerlaw", a=pp["a"], n=pp["n"])
    else:
        lab = ClassicalPotentialSpec("none")
    return lab, lab.averaged()


def _traj_rows(t, z, label):
    for k in range(z.shape[0]):
        stamp = t[k] if label == "t" else k
        for i in range(z.shape[1]):
            yield stamp, i, float(z[k, i].real), float(z[k, i].imag)


def _run_nbody(p, out: OutputSet) -> dict:
    from . import classical as cl

    params = _model(p)
    lab, rwa = _classical_pots(p["potential"])
    if p["initial"] == "three-body":
        st = cl.three_body_state()
    else:
        st = cl.ManyBodyState([a for a, _ in p["initial"]], [b for _, b in p["initial"]])
    T = TWO_PI * p["periods"]
    summary: dict[str, Any] = {"n_atoms": st.n_atoms}
    z_rwa = z_poi = None
    t = TWO_PI * np.arange(p["periods"] + 1)
    if "poincare" in p["methods"]:
        tp = cl.poincare_evolve(cl.ManyBodyState(st.q, st.p, "lab"), params, lab, p["periods"],
                                rtol=p["rtol"], atol=p["atol"])
        z_poi = tp.z
        out.csv("poincare.csv", ("period", "atom", "x", "p"), _traj_rows(tp.t, z_poi, "period"))
        summary["poincare_steps"] = tp.meta["steps"]
    if "rwa" in p["methods"]:
        tr = cl.rwa_evolve(st, params, rwa, T, dt=p["dt"])
        z_rwa = tr.z
        out.csv("rwa.csv", ("t", "atom", "X", "P"), _traj_rows(tr.t, z_rwa, "t"))
        e = cl.rwa_energy(z_rwa, params, rwa)
        summary["rwa_energy_drift"] = float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1e-300))
    if "linear" in p["methods"]:
        z_lin = cl.linear_solution(st.z, params, rwa, t)
        out.csv("linear.csv", ("t", "atom", "X", "P"), _traj_rows(t, z_lin, "t"))
        if z_rwa is not None:
            amp = 0.5 * np.abs(z_rwa - z_rwa[0]).max(axis=0)
            dev = np.abs(z_lin - z_rwa).max(axis=0)
            summary["linear_vs_rwa_relative"] = (dev / np.where(amp > 0, amp, np.inf)).tolist()
    if z_rwa is not None and z_poi is not None:
        diam = np.array([np.abs(z_poi[:, i, None] - z_poi[None, :, i]).max()
                         for i in range(z_poi.shape[1])])
        dev = np.abs(z_rwa - z_poi).max(axis=0)
        summary["rwa_vs_poincare_relative"] = (dev / np.where(diam > 0, diam, np.inf)).tolist()
    ref = z_rwa if z_rwa is not None else z_poi
    if ref is not None:
        summary["max_excursion"] = np.abs(ref - ref[0]).max(axis=0).tolist()
    out.json("summary.json", summary)
    return summary


def _run_crystal(p, out: OutputSet) -> dict:
    from . import classical as cl

    params = _model(p)
    _, rwa = _classical_pots(p["potential"])
    rep = cl.crystal_run(p["atoms"], params, rwa, p["periods"], dt=p["dt"])
    out.json("crystal.json", rep.to_dict())
    if p["save_trajectory"]:
        tr = cl.rwa_evolve(cl.chain_state(p["atoms"]), params, rwa, TWO_PI * p["periods"], dt=p["dt"])
        out.csv("crystal_trajectory.csv", ("t", "atom", "X", "P"), _traj_rows(tr.t, tr.z, "t"))
    return {"survived": rep.survived, "edge_amplitude": rep.edge_amplitude}


RUNNERS = {
    "lattice": _run_lattice,
    "bands": _run_bands,
    "butterfly": _run_butterfly,
    "chern": _run_chern,
    "eigq": _run_eigq,
    "dissipate": _run_dissipate,
    "potential": _run_potential,
    "nbody": _run_nbody,
    "crystal": _run_crystal,
}


def run(cfg: RunConfig) -> dict:
    """Execute one configured run and return its manifest.

    Files are removed again if anything fails, including the manifest.
    Module ``ValueError`` exceptions surface as :class:`ValidationError`.
    """
    set_threads(cfg.threads)
    out = OutputSet(cfg.out, cfg.overwrite)
    out.open()
    t0 = time.perf_counter()
    try:
        try:
            result = RUNNERS[cfg.cmd](cfg.params, out)
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        duration = time.perf_counter() - t0
        files = [{"file": f.name, "sha256": sha256_file(f), "bytes": f.stat().st_size}
                 for f in out.files]
        manifest = {
            "config": cfg.echo(),
            "source": cfg.source,
            "version": __version__,
            "backend": backend_name(),
            "threads": cfg.threads,
            "duration_s": duration,
            "result": result,
            "outputs": files,
        }
        write_json(cfg.out / "manifest.json", manifest)
        return manifest
    except BaseException:
        out.cleanup()
        raise


def verify_manifest(out_dir) -> bool:
    """True when every listed output exists with the recorded digest."""
    out_dir = Path(out_dir)
    man = json.loads((out_dir / "manifest.json").read_text())
    return all(sha256_file(out_dir / f["file"]) == f["sha256"] for f in man["outputs"])


# ---------------------------------------------------------------------------
# Entry point


def _threads_arg(value: str | None) -> int | None:
    if value is None or value == "":
        return None
    try:
        n = int(value)
    except ValueError:
        raise ValidationError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise ValidationError("thread count must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phasecrystal",
                                 description="Phase-space crystal simulations driven by JSON configs.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--list-presets", action="store_true", help="print shipped preset names and exit")
    sub = ap.add_subparsers(dest="cmd", metavar="subcommand")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} computation")
        sp.add_argument("--config", required=True,
                        help="JSON config file, or preset:<name> for a shipped preset")
        sp.add_argument("--out", help="output directory (default phasecrystal-out/<subcommand>)")
        sp.add_argument("--threads", help="worker cap (fallback: PHASECRYSTAL_THREADS)")
        sp.add_argument("--overwrite", action="store_true", help="allow writing into a non-empty directory")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    if args.list_presets:
        print("\n".join(preset_names()))
        return EXIT_OK
    if args.cmd is None:
        ap.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        threads = _threads_arg(args.threads if args.threads is not None
                               else os.environ.get("PHASECRYSTAL_THREADS"))
        cfg = parse_config(args.config, args.cmd, args.out, args.overwrite, threads)
        manifest = run(cfg)
    except ConfigError as exc:
        print(f"phasecrystal: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, PhaseCrystalError) as exc:
        print(f"phasecrystal: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        print(f"phasecrystal: error: FloatingPointError: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{cfg.cmd}: wrote {len(manifest['outputs'])} file(s) to {cfg.out} "
          f"in {manifest['duration_s']:.2f} s")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
