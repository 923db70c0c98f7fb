"""
Experiment configuration and drivers for the benchmark CLI.

Every driver returns a list of :class:`ResultRow`; :func:`write_csv` turns them
into the fixed-header CSV.
"""
from __future__ import annotations

import copy
import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .discretization import point_source, pressure_from_displacement
from .grid import Grid, StaggeredField
from .krylov import SolveConfig, solve_acoustic, solve_elastic, solve_standard
from .medium import (AttenuationConfig, load_raw_model, make_constant_model,
                     make_layered_model, make_linear_model,
                     model_from_velocities, poisson_ratio, velocities)
from .multigrid import CycleConfig

__all__ = ["CSV_HEADER", "ResultRow", "ConfigError", "load_config",
           "validate_config", "default_config", "build_grid", "build_model",
           "run_solve", "run_lambda_sweep", "run_acoustic_vs_elastic",
           "run_levels_study", "run_check_3d", "write_csv", "read_csv",
           "dump_wavefield", "read_wavefield", "omega_from_ppw", "EXPERIMENTS"]

log = logging.getLogger(__name__)

CSV_HEADER = "grid,omega,lambda,variant,iters,converged,setup_s,solve_s"


class ConfigError(ValueError):
    pass


@dataclass
class ResultRow:
    grid: tuple[int, ...]
    omega: float
    lam: float | None
    variant: str
    iters: int
    converged: bool
    setup_s: float
    solve_s: float

    def fields(self):
        return ["x".join(map(str, self.grid)), repr(float(self.omega)),
                "" if self.lam is None else repr(float(self.lam)), self.variant,
                str(self.iters), "true" if self.converged else "false",
                f"{self.setup_s:.3f}", f"{self.solve_s:.3f}"]


# -- configuration -----------------------------------------------------------

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_GRID = {
    "type": "object",
    "properties": {
        "dims": {"type": "array", "items": {"type": "integer", "minimum": 2},
                 "minItems": 2, "maxItems": 3},
        "spacing": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, _NUMS]},
    },
    "required": ["dims", "spacing"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": ["solve", "lambda-sweep", "acoustic-vs-elastic",
                                "levels-study", "check-3d"]},
        "description": {"type": "string"},
        "grids": {"type": "array", "items": _GRID, "minItems": 1},
        "model": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "linear", "layered", "raw"]},
                "rho": _NUM, "mu": _NUM, "lam": _NUM,
                "vs_top": _NUM, "vs_bottom": _NUM, "ratio": _NUM,
                "rho_top": _NUM, "rho_bottom": _NUM,
                "seed": {"type": "integer"}, "n_layers": {"type": "integer"},
                "files": {"type": "object",
                          "additionalProperties": {"type": "string"}},
                "value_kind": {"enum": ["float32", "float64"]},
                "vs_over_vp": _NUM,
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "omega": _NUMS,
        "omega_pi": _NUMS,
        "ppw": _NUMS,
        "lambdas": _NUMS,
        "formulation": {"enum": ["mixed", "standard", "acoustic"]},
        "solver": {
            "type": "object",
            "properties": {
                "shift": _NUM, "levels": {"type": "integer", "minimum": 1},
                "cycle": {"enum": ["V", "W"]},
                "pre": {"type": "integer"}, "post": {"type": "integer"},
                "damping": {"oneOf": [_NUM, _NUMS]},
                "jacobi_weight": _NUM, "acoustic_weight": _NUM,
                "restart": {"type": "integer"}, "tol": _NUM,
                "maxiter": {"type": "integer"},
                "precision": {"enum": ["half", "single", "double"]},
            },
            "additionalProperties": False,
        },
        "variants": {
            "type": "array",
            "items": {"type": "object",
                      "properties": {"levels": {"type": "integer"}, "shift": _NUM,
                                     "damping": {"oneOf": [_NUM, _NUMS]}},
                      "required": ["levels", "shift"],
                      "additionalProperties": False},
        },
        "attenuation": {
            "type": "object",
            "properties": {
                "abl_cells": {"type": "integer", "minimum": 0},
                "abl_amplitude": {"type": ["number", "null"]},
                "bulk_factor": {"type": "number", "minimum": 0},
                "sides": {"type": ["array", "null"], "items": {"type": "string"}},
            },
            "additionalProperties": False,
        },
        "wavefield": {"type": "boolean"},
        "source_component": {"type": "integer", "minimum": 0},
    },
    "required": ["grids", "model"],
    "additionalProperties": False,
}

_DEFAULTS = {
    "solve": {
        "description": "single mixed-formulation solve, constant model lambda=2 "
                       "(wavefield figure setup)",
        "grids": [{"dims": [128, 64], "spacing": 0.04}],
        "model": {"kind": "constant", "rho": 1.0, "mu": 1.0, "lam": 2.0},
        "omega_pi": [2.0], "formulation": "mixed", "wavefield": True,
    },
    "lambda-sweep": {
        "description": "standard vs mixed formulation; paper grid 800x260 halved "
                       "to 400x128 at the paper's physical extent (h=0.04)",
        "grids": [{"dims": [400, 128], "spacing": 0.04}],
        "model": {"kind": "constant", "rho": 1.0, "mu": 1.0},
        "lambdas": [1, 2, 4, 8, 16], "omega_pi": [2.0],
    },
    "acoustic-vs-elastic": {
        "description": "linear model, first row of the acoustic vs elastic table "
                       "(400x128, h=0.05)",
        "grids": [{"dims": [400, 128], "spacing": 0.05}],
        "model": {"kind": "linear"}, "ppw": [15, 10],
    },
    "levels-study": {
        "description": "Marmousi-like layered synthetic, paper grid 544x112 halved "
                       "to 272x56 on the same 17 x 3.5 km extent",
        "grids": [{"dims": [272, 56], "spacing": 0.0625}],
        "model": {"kind": "layered"}, "ppw": [10],
        "variants": [{"levels": 3, "shift": 0.2}, {"levels": 3, "shift": 0.4},
                     {"levels": 4, "shift": 0.4}],
    },
    "check-3d": {
        "description": "3D linear model smoke test, 4 levels, shift 0.4; one "
                       "refinement at fixed points per wavelength",
        "grids": [{"dims": [32, 32, 16], "spacing": 0.2}],
        "model": {"kind": "linear"}, "ppw": [10],
        "solver": {"shift": 0.4, "levels": 4},
        "attenuation": {"abl_cells": 4},
    },
}

EXPERIMENTS = tuple(_DEFAULTS)


def default_config(kind: str) -> dict:
    if kind not in _DEFAULTS:
        raise ConfigError(f"unknown experiment {kind!r}")
    cfg = copy.deepcopy(_DEFAULTS[kind])
    cfg["experiment"] = kind
    return cfg


def validate_config(cfg: dict, kind: str | None = None) -> dict:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/".join(map(str, err.absolute_path)) or "<root>"
        raise ConfigError(f"invalid config at {path}: {err.message}") from None
    if kind is not None:
        if cfg.get("experiment", kind) != kind:
            raise ConfigError(f"config is for {cfg['experiment']!r}, not {kind!r}")
        cfg = dict(cfg, experiment=kind)
    if sum(k in cfg for k in ("omega", "omega_pi", "ppw")) > 1:
        raise ConfigError("give only one of omega, omega_pi, ppw")
    return cfg


def load_config(path, kind=None) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    return validate_config(cfg, kind)


def build_grid(spec: dict) -> Grid:
    return Grid(spec["dims"], spec["spacing"])


def build_model(g: Grid, spec: dict, seed=0, base=None):
    kind = spec["kind"]
    if kind == "constant":
        return make_constant_model(g, spec.get("rho", 1.0), spec.get("mu", 1.0),
                                   spec.get("lam", 1.0))
    if kind == "linear":
        keys = ("vs_top", "vs_bottom", "ratio", "rho_top", "rho_bottom")
        return make_linear_model(g, **{k: spec[k] for k in keys if k in spec})
    if kind == "layered":
        kw = {"n_layers": spec["n_layers"]} if "n_layers" in spec else {}
        return make_layered_model(g, seed=spec.get("seed", seed), **kw)
    files = spec.get("files", {})
    base = Path(base or ".")
    vk = spec.get("value_kind", "float32")
    try:
        load = {k: load_raw_model(base / v, g.dims, vk) for k, v in files.items()}
    except (OSError, ValueError) as err:
        raise ConfigError(f"cannot read raw model: {err}") from None
    if {"rho", "mu", "lam"} <= load.keys():
        from .medium import MediumModel
        return MediumModel(g, load["rho"], load["mu"], load["lam"])
    if "vp" in load:
        vs = load.get("vs", spec.get("vs_over_vp", 0.5) * load["vp"])
        rho = load.get("rho", spec.get("rho", 2.0))
        return model_from_velocities(g, load["vp"], vs, rho)
    raise ConfigError("raw model needs files for (rho, mu, lam) or at least vp")


def omega_from_ppw(vs_min: float, ppw: float, h: float) -> float:
    """Angular frequency giving ``ppw`` points per (shear) wavelength."""
    return 2 * np.pi * vs_min / (ppw * h)


def _omegas(cfg, g: Grid, m) -> list[float]:
    if "omega" in cfg:
        return [float(w) for w in cfg["omega"]]
    if "omega_pi" in cfg:
        return [float(w) * np.pi for w in cfg["omega_pi"]]
    if "ppw" in cfg:
        vs = velocities(m)[1]
        vmin = vs[vs > 0].min() if np.any(vs > 0) else velocities(m)[0].min()
        return [omega_from_ppw(vmin, p, max(g.spacing)) for p in cfg["ppw"]]
    raise ConfigError("config needs omega, omega_pi or ppw")


def _solver(cfg, **over):
    s = dict(cfg.get("solver", {}))
    s.update(over)
    scfg = SolveConfig(restart=s.get("restart", 5), tol=s.get("tol", 1e-6),
                       maxiter=s.get("maxiter", 250), shift=s.get("shift", 0.2))
    return s, scfg


def _mixed_cycle(s, threads):
    damping = s.get("damping")
    return CycleConfig(levels=s.get("levels", 3), cycle=s.get("cycle", "W"),
                       pre=s.get("pre", 1), post=s.get("post", 1),
                       damping=tuple(damping) if isinstance(damping, list) else damping,
                       precision=s.get("precision", "single"), threads=threads)


def _jacobi_cycle(s, weight):
    return CycleConfig(levels=s.get("levels", 3), cycle=s.get("cycle", "W"),
                       pre=2, post=2, relaxation="jacobi", damping=weight)


def _attenuation(cfg) -> AttenuationConfig:
    a = dict(cfg.get("attenuation", {}))
    if a.get("sides") is not None:
        a["sides"] = tuple(a["sides"])
    return AttenuationConfig(**a)


def _row(g, omega, lam, variant, rep):
    return ResultRow(g.dims, omega, lam, variant, rep.iterations, rep.converged,
                     rep.setup_time, rep.solve_time)


# -- drivers -------------------------------------------------------------------

def run_solve(cfg, out_dir=None, threads=1, seed=0, base=None) -> list[ResultRow]:
    """Single solves (one per grid and frequency); optionally dumps wavefields."""
    rows = []
    att = _attenuation(cfg)
    form = cfg.get("formulation", "mixed")
    s, scfg = _solver(cfg)
    for gs in cfg["grids"]:
        g = build_grid(gs)
        m = build_model(g, cfg["model"], seed, base)
        for omega in _omegas(cfg, g, m):
            comp = cfg.get("source_component")
            q = None if comp is None else point_source(g, comp)
            if form == "mixed":
                fld, rep = solve_elastic(g, m, omega, scfg, _mixed_cycle(s, threads),
                                         rhs=q, attenuation=att)
                names = None
            elif form == "standard":
                u, rep = solve_standard(g, m, omega, scfg,
                                        _jacobi_cycle(s, s.get("jacobi_weight", 0.5)),
                                        rhs=q, attenuation=att)
                fld = StaggeredField(g, u, pressure_from_displacement(g, m, u))
                names = None
            else:
                vp = velocities(m)[0]
                p, rep = solve_acoustic(g, vp, m.rho, omega, scfg,
                                        _jacobi_cycle(s, s.get("acoustic_weight", 0.8)),
                                        attenuation=att)
                fld, names = p, ["p"]
            rows.append(_row(g, omega, None, form, rep))
            if out_dir is not None and cfg.get("wavefield", False):
                tag = f"{'x'.join(map(str, g.dims))}_w{omega:.4f}"
                dump_wavefield(fld, g, Path(out_dir) / f"wavefield_{tag}", omega,
                               model=m if names is None else None)
    return rows


def run_lambda_sweep(cfg, out_dir=None, threads=1, seed=0, base=None):
    """Standard (W(2,2) Jacobi) vs mixed (W(1,1) Vanka) counts over lambda and omega."""
    if cfg["model"]["kind"] != "constant":
        raise ConfigError("lambda-sweep needs a constant model")
    lams = cfg.get("lambdas", [1, 2, 4, 8, 16])
    att = _attenuation(cfg)
    s, scfg = _solver(cfg)
    rows = []
    for gs in cfg["grids"]:
        g = build_grid(gs)
        for lam in lams:
            spec = dict(cfg["model"], lam=lam)
            m = build_model(g, spec)
            sigma = float(poisson_ratio(m)[0])
            for omega in _omegas(cfg, g, m):
                _, rep = solve_standard(g, m, omega, scfg,
                                        _jacobi_cycle(s, s.get("jacobi_weight", 0.5)),
                                        attenuation=att)
                rows.append(_row(g, omega, lam, f"standard sigma={sigma:.2f}", rep))
                _, rep = solve_elastic(g, m, omega, scfg, _mixed_cycle(s, threads),
                                       attenuation=att)
                rows.append(_row(g, omega, lam, f"mixed sigma={sigma:.2f}", rep))
    return rows


def run_acoustic_vs_elastic(cfg, out_dir=None, threads=1, seed=0, base=None):
    """Acoustic (shear-velocity slowness) vs elastic counts at matched omega."""
    att = _attenuation(cfg)
    s, scfg = _solver(cfg)
    rows = []
    for gs in cfg["grids"]:
        g = build_grid(gs)
        m = build_model(g, cfg["model"], seed, base)
        vs = velocities(m)[1]
        omegas = _omegas(cfg, g, m)
        ppws = cfg.get("ppw", [None] * len(omegas))
        for ppw, omega in zip(ppws, omegas):
            tag = "" if ppw is None else f" ppw={ppw:g}"
            _, rep = solve_acoustic(g, vs, m.rho, omega, scfg,
                                    _jacobi_cycle(s, s.get("acoustic_weight", 0.8)),
                                    attenuation=att)
            rows.append(_row(g, omega, None, "acoustic" + tag, rep))
            _, rep = solve_elastic(g, m, omega, scfg, _mixed_cycle(s, threads),
                                   attenuation=att)
            rows.append(_row(g, omega, None, "elastic" + tag, rep))
    return rows


def run_levels_study(cfg, out_dir=None, threads=1, seed=0, base=None):
    """Mixed-formulation counts for several (levels, shift) variants."""
    variants = cfg.get("variants") or [{"levels": 3, "shift": 0.2},
                                       {"levels": 3, "shift": 0.4},
                                       {"levels": 4, "shift": 0.4}]
    att = _attenuation(cfg)
    rows = []
    for gs in cfg["grids"]:
        g = build_grid(gs)
        m = build_model(g, cfg["model"], seed, base)
        for omega in _omegas(cfg, g, m):
            for v in variants:
                over = {"levels": v["levels"], "shift": v["shift"]}
                if "damping" in v:
                    over["damping"] = v["damping"]
                s, scfg = _solver(cfg, **over)
                _, rep = solve_elastic(g, m, omega, scfg, _mixed_cycle(s, threads),
                                       attenuation=att)
                rows.append(_row(g, omega, None,
                                 f"L{v['levels']} shift={v['shift']:g}", rep))
    return rows


def run_check_3d(cfg, out_dir=None, threads=1, seed=0, base=None, refine=True):
    """3D smoke run; with ``refine`` also the 2x refined grid at the same ppw.

    The absorbing layer keeps its cell count under refinement.
    """
    att = _attenuation(cfg)
    s, scfg = _solver(cfg)
    rows = []
    grids = [build_grid(gs) for gs in cfg["grids"]]
    if refine and len(grids) == 1:
        g0 = grids[0]
        grids.append(Grid(tuple(2 * n for n in g0.dims),
                          tuple(h / 2 for h in g0.spacing)))
    for g in grids:
        if g.dim != 3:
            raise ConfigError("check-3d needs 3D grids")
        m = build_model(g, cfg["model"], seed, base)
        for omega in _omegas(cfg, g, m):
            _, rep = solve_elastic(g, m, omega, scfg, _mixed_cycle(s, threads),
                                   attenuation=att)
            rows.append(_row(g, omega, None, f"3d L{s.get('levels', 3)} "
                                             f"shift={scfg.shift:g}", rep))
    return rows


DRIVERS = {
    "solve": run_solve,
    "lambda-sweep": run_lambda_sweep,
    "acoustic-vs-elastic": run_acoustic_vs_elastic,
    "levels-study": run_levels_study,
    "check-3d": run_check_3d,
}


# -- output --------------------------------------------------------------------

def write_csv(rows, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        w = csv.writer(f, lineterminator="\n")
        for r in rows:
            w.writerow(r.fields())
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _faces_to_cells(g: Grid, comp: np.ndarray, d: int) -> np.ndarray:
    pad = [(0, 0)] * g.dim
    pad[d] = (1, 1)
    full = np.pad(comp, pad)  # boundary faces are zero
    lo = [slice(None)] * g.dim
    hi = [slice(None)] * g.dim
    lo[d] = slice(0, -1)
    hi[d] = slice(1, None)
    return 0.5 * (full[tuple(lo)] + full[tuple(hi)])


def dump_wavefield(field, g: Grid, path, omega, model=None):
    """Write each component as a raw little-endian complex grid plus a JSON sidecar.

    Displacement components are averaged from faces to cell centers so that
    every file holds ``dims`` complex values (interleaved re/im float64).
    ``field`` is a :class:`StaggeredField` (elastic) or a cell array (acoustic).
    When ``model`` is given the pressure written is
    ``D(lam + mu) grad_h^T u``.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    comps = {}
    if isinstance(field, StaggeredField):
        for d in range(g.dim):
            comps[f"u{d + 1}"] = _faces_to_cells(g, field.component(d), d)
        p = field.p if model is None else pressure_from_displacement(g, model, field.u)
        comps["p"] = np.asarray(p).reshape(g.dims)
    else:
        comps["p"] = np.asarray(field).reshape(g.dims)
    for name, arr in comps.items():
        np.ascontiguousarray(arr, dtype="<c16").tofile(path / f"{name}.bin")
    meta = {"dims": list(g.dims), "spacing": list(g.spacing),
            "components": list(comps), "omega": float(omega),
            "dtype": "complex128 little-endian, interleaved (re, im)",
            "order": "C (last axis fastest, last axis is depth)",
            "location": "cell centers"}
    (path / "meta.json").write_text(json.dumps(meta, indent=2))
    return path


def read_wavefield(path) -> tuple[dict, dict]:
    path = Path(path)
    meta = json.loads((path / "meta.json").read_text())
    comps = {name: np.fromfile(path / f"{name}.bin", dtype="<c16").reshape(meta["dims"])
             for name in meta["components"]}
    return comps, meta
