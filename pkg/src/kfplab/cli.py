"""Configuration-driven command line front end.

One YAML config file drives each subcommand; every config is validated
against a strict schema (unknown keys rejected) before any computation.
Exit codes: 0 success, 1 a checked invariant failed (its identifier is
printed), 2 config or usage error.  All randomness flows from a single
root seed through SeedSequence spawns, so artifacts are bit-identical for
identical config and seed on one platform.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .coefficients import CoefficientField
from .geometry import PhasePoint, QuasiMetricParams, quasi_distance_batch
from .grids import GridSpec
from .maximal import fs_check, hl_check, make_corpus
from .norms import MixedNormSpec
from .solver import (AnalyticSource, SolveConfig, SourceTerm, SpaceFactor,
                     TimeProfile, solve_duhamel)
from .verification import EstimateReport, random_source_corpus, solve_corpus
from .weights import ProductWeight, Weight1D, ap_constant_1d

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    """Anything wrong with the config or its use of the library."""


class CheckFailure(Exception):
    """A checked invariant failed; 'invariant' names it in the output."""

    def __init__(self, invariant: str, detail: str):
        super().__init__(detail)
        self.invariant = invariant


_SEED_MAX = 2 ** 64

_COMMON = {
    "seed": {"type": "integer", "minimum": 0, "exclusiveMaximum": _SEED_MAX},
    "out": {"type": "string"},
    "workers": {"type": "integer", "minimum": 1},
}

_GRID = {
    "type": "object",
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "n_t": {"type": "integer", "minimum": 1},
        "n_x": {"type": "integer", "minimum": 1},
        "n_v": {"type": "integer", "minimum": 1},
        "t_lo": {"type": "number"},
        "t_hi": {"type": "number"},
        "L_x": {"type": "number", "exclusiveMinimum": 0},
        "L_v": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["d", "n_t", "n_x", "n_v", "t_lo", "t_hi", "L_x", "L_v"],
    "additionalProperties": False,
}

_COEFF = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant_spd", "time_piecewise"]},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "value": {"type": "number"},
        "matrix": {"type": "array"},
        "breakpoints": {"type": "array", "items": {"type": "number"}},
        "values": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind", "delta"],
    "additionalProperties": False,
}

_PROFILE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["boxcar", "pulse"]},
        "start": {"type": "number"},
        "stop": {"type": "number"},
        "center": {"type": "number"},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "poly": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_NUMS = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_FACTOR = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["gaussian", "v_mode"]},
        "amplitude": {"type": "number"},
        "x_center": _NUMS, "x_sigma": {"type": "number", "exclusiveMinimum": 0},
        "x_freq": _NUMS, "x_phase": _NUMS,
        "v_center": _NUMS, "v_sigma": {"type": "number", "exclusiveMinimum": 0},
        "v_freq": _NUMS, "v_phase": _NUMS,
        "mode_freq": _NUMS, "mode_phase": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SOURCE = {
    "type": "object",
    "properties": {
        "terms": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"profile": _PROFILE, "factor": _FACTOR},
                "required": ["profile", "factor"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["terms"],
    "additionalProperties": False,
}

_WEIGHT1D = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["constant", "power", "step"]},
        "level": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number"},
        "center": {"type": "number"},
        "breaks": {"type": "array", "items": {"type": "number"}},
        "levels": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_NORM = {
    "type": "object",
    "properties": {
        "p": {"type": "number", "exclusiveMinimum": 1},
        "r": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1},
              "minItems": 1},
        "q": {"type": "number", "exclusiveMinimum": 1},
        "T": {"type": "number"},
        "weight": {
            "type": "object",
            "properties": {
                "t": _WEIGHT1D,
                "v": {"type": "array", "items": _WEIGHT1D, "minItems": 1},
                "K": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["t", "v"],
            "additionalProperties": False,
        },
    },
    "required": ["p", "r", "q"],
    "additionalProperties": False,
}

_SOLVER = {
    "type": "object",
    "properties": {
        "exponent_cut": {"type": "number", "exclusiveMinimum": 0},
        "quad_order": {"type": "integer", "minimum": 4},
        "h0": {"type": "number", "exclusiveMinimum": 0},
        "h_max": {"type": "number", "exclusiveMinimum": 0},
        "growth": {"type": "number", "exclusiveMinimum": 1},
    },
    "additionalProperties": False,
}

SCHEMAS = {
    "solve": {
        "type": "object",
        "properties": {
            **_COMMON,
            "grid": _GRID, "coefficients": _COEFF,
            "lam": {"type": "number", "minimum": 0},
            "source": _SOURCE, "solver": _SOLVER,
            "dump": {"type": "string"},
        },
        "required": ["grid", "coefficients", "lam", "source"],
        "additionalProperties": False,
    },
    "verify-estimate": {
        "type": "object",
        "properties": {
            **_COMMON,
            "grid": _GRID, "coefficients": _COEFF,
            "lam": {"type": "number", "minimum": 0},
            "norm": _NORM, "solver": _SOLVER,
            "corpus": {
                "type": "object",
                "properties": {
                    "n_cases": {"type": "integer", "minimum": 1},
                    "margin": {"type": "number", "exclusiveMinimum": 0},
                    "sigma_lo": {"type": "number", "exclusiveMinimum": 0},
                    "sigma_hi": {"type": "number", "exclusiveMinimum": 0},
                    "freq_max": {"type": "number", "minimum": 0},
                    "width_lo": {"type": "number", "exclusiveMinimum": 0},
                    "width_hi": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["n_cases"],
                "additionalProperties": False,
            },
            "cap": {"type": "number", "exclusiveMinimum": 0},
            "csv": {"type": "string"},
        },
        "required": ["grid", "coefficients", "lam", "norm", "corpus"],
        "additionalProperties": False,
    },
    "geometry-test": {
        "type": "object",
        "properties": {
            **_COMMON,
            "n_triples": {"type": "integer", "minimum": 1},
            "dims": {"type": "array", "items": {"type": "integer", "minimum": 1},
                     "minItems": 1},
            "c_lo": {"type": "number", "minimum": 1},
            "c_hi": {"type": "number", "minimum": 1},
            "box": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["n_triples"],
        "additionalProperties": False,
    },
    "weights-ap": {
        "type": "object",
        "properties": {
            **_COMMON,
            "p": {"type": "number", "exclusiveMinimum": 1},
            "alphas": {"type": "array", "items": {"type": "number"},
                       "minItems": 1},
            "csv": {"type": "string"},
        },
        "required": ["p", "alphas"],
        "additionalProperties": False,
    },
    "maximal-bench": {
        "type": "object",
        "properties": {
            **_COMMON,
            "grid": _GRID, "norm": _NORM,
            "c": {"type": "number", "minimum": 1},
            "corpus": {
                "type": "object",
                "properties": {
                    "n_fields": {"type": "integer", "minimum": 1},
                    "kind": {"enum": ["band_limited", "bump"]},
                },
                "required": ["n_fields"],
                "additionalProperties": False,
            },
            "csv": {"type": "string"},
        },
        "required": ["grid", "norm", "corpus"],
        "additionalProperties": False,
    },
    "vmo": {
        "type": "object",
        "properties": {
            **_COMMON,
            "coefficients": _COEFF,
            "radii": {"type": "array", "minItems": 1,
                      "items": {"type": "number", "exclusiveMinimum": 0}},
            "center": {
                "type": "object",
                "properties": {"t": {"type": "number"}, "x": _NUMS, "v": _NUMS},
                "required": ["t", "x", "v"],
                "additionalProperties": False,
            },
            "n_pairs": {"type": "integer", "minimum": 100},
            "n_slices": {"type": "integer", "minimum": 2},
            "n_probes": {"type": "integer", "minimum": 1},
            "expect_time_only": {"type": "boolean"},
            "csv": {"type": "string"},
        },
        "required": ["coefficients", "radii", "center"],
        "additionalProperties": False,
    },
    "report": {
        "type": "object",
        "properties": {
            **_COMMON,
            "inputs": {"type": "array", "items": {"type": "string"}},
            "summary": {"type": "string"},
        },
        "additionalProperties": False,
    },
}


def _load_config(command: str, path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if cfg is None:
        cfg = {}
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {exc.message}") from exc
    return cfg


def _build_grid(cfg: dict) -> GridSpec:
    try:
        return GridSpec(**cfg)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _build_coefficients(cfg: dict) -> CoefficientField:
    kind = cfg["kind"]
    try:
        if kind == "constant_spd":
            if "matrix" in cfg:
                matrix = np.asarray(cfg["matrix"], dtype=float)
                if matrix.ndim != 2:
                    raise ConfigError("matrix must be a list of rows")
                return CoefficientField(kind="constant_spd", d=matrix.shape[0],
                                        delta=cfg["delta"], matrix=matrix)
            if "value" not in cfg:
                raise ConfigError("constant_spd needs 'value' or 'matrix'")
            return CoefficientField(kind="constant_spd", d=1,
                                    delta=cfg["delta"],
                                    matrix=cfg["value"] * np.eye(1))
        if "values" not in cfg or "breakpoints" not in cfg:
            raise ConfigError("time_piecewise needs 'breakpoints' and 'values'")
        mats = tuple(val * np.eye(1) for val in cfg["values"])
        return CoefficientField(kind="time_piecewise", d=1, delta=cfg["delta"],
                                breakpoints=tuple(cfg["breakpoints"]),
                                matrices=mats)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"coefficients: {exc}") from exc


def _scale_coefficients(a: CoefficientField, d: int) -> CoefficientField:
    """Scalar configs build d=1 fields; promote to the grid dimension by
    multiplying the scalar onto the d-dimensional identity."""
    if a.d == d:
        return a
    if a.kind == "constant_spd" and a.matrix.shape == (1, 1):
        return CoefficientField(kind="constant_spd", d=d, delta=a.delta,
                                matrix=float(a.matrix[0, 0]) * np.eye(d))
    if a.kind == "time_piecewise" and all(m.shape == (1, 1) for m in a.matrices):
        return CoefficientField(
            kind="time_piecewise", d=d, delta=a.delta,
            breakpoints=a.breakpoints,
            matrices=tuple(float(m[0, 0]) * np.eye(d) for m in a.matrices))
    raise ConfigError(f"coefficient dimension {a.d} does not match grid {d}")


def _build_source(cfg: dict) -> AnalyticSource:
    try:
        terms = []
        for term in cfg["terms"]:
            prof = TimeProfile(**{k: (tuple(v) if isinstance(v, list) else v)
                                  for k, v in term["profile"].items()})
            fac = SpaceFactor(**{k: (tuple(v) if isinstance(v, list) else v)
                                 for k, v in term["factor"].items()})
            terms.append(SourceTerm(prof, fac))
        return AnalyticSource(tuple(terms))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"source: {exc}") from exc


def _build_weight1d(cfg: dict, class_p: float) -> Weight1D:
    kw = dict(cfg)
    kind = kw.pop("kind")
    if "breaks" in kw:
        kw["breaks"] = tuple(kw["breaks"])
    if "levels" in kw:
        kw["levels"] = tuple(kw["levels"])
    return Weight1D(kind=kind, p=class_p, **kw)


def _build_norm(cfg: dict, d: int) -> MixedNormSpec:
    try:
        r = tuple(cfg["r"])
        if len(r) != d:
            raise ConfigError(f"norm lists {len(r)} velocity exponents for "
                              f"dimension {d}")
        weight = None
        if "weight" in cfg:
            wcfg = cfg["weight"]
            if len(wcfg["v"]) != d:
                raise ConfigError("weight lists the wrong number of velocity "
                                  "factors")
            weight = ProductWeight(
                w0=_build_weight1d(wcfg["t"], cfg["q"]),
                wi=tuple(_build_weight1d(wc, ri)
                         for wc, ri in zip(wcfg["v"], r)),
                K=wcfg.get("K", math.inf))
        return MixedNormSpec(p=cfg["p"], r=r, q=cfg["q"], weight=weight,
                             T=cfg.get("T", math.inf))
    except ValueError as exc:
        raise ConfigError(f"norm: {exc}") from exc


def _build_solver_config(cfg: dict) -> SolveConfig | None:
    if "solver" not in cfg:
        return None
    try:
        return SolveConfig(**cfg["solver"])
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from exc


def _parallel_map(fn, items, workers: int) -> list:
    """Order-preserving map; a thread pool when workers exceed one, so the
    reduction and any CSV output stay deterministic."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_rows(path: Path, header: tuple, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(header))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in header})


def _cmd_solve(cfg: dict, out_dir: Path, seed: int, workers: int) -> None:
    spec = _build_grid(cfg["grid"])
    a = _scale_coefficients(_build_coefficients(cfg["coefficients"]), spec.d)
    src = _build_source(cfg["source"])
    try:
        u = solve_duhamel(a, cfg["lam"], src, spec, _build_solver_config(cfg))
    except ValueError as exc:
        raise ConfigError(f"solve: {exc}") from exc
    path = out_dir / cfg.get("dump", "solution.bin")
    u.dump(path)
    center = u.values[spec.n_t // 2]
    print(f"dump={path}")
    print(f"center_slice_max={np.max(np.abs(center)):.15e}")


def _cmd_verify_estimate(cfg: dict, out_dir: Path, seed: int,
                         workers: int) -> None:
    spec = _build_grid(cfg["grid"])
    a = _scale_coefficients(_build_coefficients(cfg["coefficients"]), spec.d)
    nspec = _build_norm(cfg["norm"], spec.d)
    ccfg = dict(cfg["corpus"])
    n_cases = ccfg.pop("n_cases")
    corpus = random_source_corpus(seed, n_cases, spec, **ccfg)
    solver_cfg = _build_solver_config(cfg)
    lam = cfg["lam"]

    def one(case):
        return solve_corpus([case], a, lam, spec, nspec, config=solver_cfg)

    try:
        parts = _parallel_map(one, list(corpus), workers)
    except ValueError as exc:
        raise ConfigError(f"verify-estimate: {exc}") from exc
    rows = [row for part in parts for row in part.rows]
    if not rows:
        raise CheckFailure("estimate_nonempty",
                           "every corpus case had a zero right side")
    report = EstimateReport(tuple(rows), metadata={"seed": seed})
    path = out_dir / cfg.get("csv", "estimate.csv")
    report.to_csv(path)
    print(f"csv={path}")
    print(f"cases={len(rows)}")
    print(f"max_ratio={report.max_ratio:.15e}")
    if "cap" in cfg and report.max_ratio > cfg["cap"]:
        raise CheckFailure("estimate_cap",
                           f"max ratio {report.max_ratio} exceeds cap "
                           f"{cfg['cap']}")


def _cmd_geometry_test(cfg: dict, out_dir: Path, seed: int,
                       workers: int) -> None:
    n = cfg["n_triples"]
    dims = cfg.get("dims", [1, 2, 3])
    c_lo = cfg.get("c_lo", 1.0)
    c_hi = cfg.get("c_hi", 10.0)
    box = cfg.get("box", 10.0)
    if c_hi < c_lo:
        raise ConfigError("c_hi must not fall below c_lo")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for d in dims:
        bad_sym = 0
        bad_tri = 0
        checked = 0
        while checked < n:
            m = min(50_000, n - checked)
            params = QuasiMetricParams(c=float(rng.uniform(c_lo, c_hi)))
            pts = [(rng.uniform(-box, box, m),
                    rng.uniform(-box, box, (m, d)),
                    rng.uniform(-box, box, (m, d))) for _ in range(3)]
            (t, x, v), (t0, x0, v0), (t1, x1, v1) = pts
            d_z_z0 = quasi_distance_batch(t, x, v, t0, x0, v0, params)
            d_z0_z = quasi_distance_batch(t0, x0, v0, t, x, v, params)
            d_z_z1 = quasi_distance_batch(t, x, v, t1, x1, v1, params)
            d_z1_z0 = quasi_distance_batch(t1, x1, v1, t0, x0, v0, params)
            bad_sym += int(np.sum(d_z_z0 > 2.0 * d_z0_z))
            bad_tri += int(np.sum(d_z_z0 > 2.0 * (d_z_z1 + d_z1_z0)))
            checked += m
        print(f"checked {checked} triples in d={d}: "
              f"quasi_symmetry violations={bad_sym}, "
              f"quasi_triangle violations={bad_tri}")
        if bad_sym:
            raise CheckFailure("quasi_symmetry", f"d={d}: {bad_sym} violations")
        if bad_tri:
            raise CheckFailure("quasi_triangle", f"d={d}: {bad_tri} violations")


def _cmd_weights_ap(cfg: dict, out_dir: Path, seed: int, workers: int) -> None:
    p = cfg["p"]
    rows = []
    for alpha in cfg["alphas"]:
        w = Weight1D(kind="power", p=p, alpha=alpha)
        constant = ap_constant_1d(w, p)
        rows.append({"alpha": alpha, "p": p, "constant": constant,
                     "finite": math.isfinite(constant)})
    path = out_dir / cfg.get("csv", "weights_ap.csv")
    _write_rows(path, ("alpha", "p", "constant", "finite"), rows)
    print(f"csv={path}")
    for row in rows:
        print(f"alpha={row['alpha']} constant={row['constant']}")
    for row in rows:
        in_class = -1.0 < row["alpha"] < p - 1.0
        if in_class is not row["finite"]:
            raise CheckFailure(
                "ap_power_class",
                f"alpha={row['alpha']} finite={row['finite']} but the class "
                f"window (-1, {p - 1}) says {in_class}")


def _cmd_maximal_bench(cfg: dict, out_dir: Path, seed: int,
                       workers: int) -> None:
    spec = _build_grid(cfg["grid"])
    nspec = _build_norm(cfg["norm"], spec.d)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    corpus = make_corpus(spec, cfg["corpus"]["n_fields"],
                         cfg["corpus"].get("kind", "band_limited"), rng)
    c = cfg.get("c", 1.0)
    rows = []
    for kind, check in (("hl", hl_check), ("fs", fs_check)):
        t0 = time.perf_counter()
        try:
            ratio = check(corpus, nspec, c=c)
        except ValueError as exc:
            raise ConfigError(f"maximal-bench: {exc}") from exc
        elapsed = time.perf_counter() - t0
        rows.append({"kind": kind, "ratio": ratio, "seconds": elapsed,
                     "corpus_size": len(corpus), "c": c})
        print(f"{kind}_ratio={ratio:.6e} seconds={elapsed:.3f}")
    path = out_dir / cfg.get("csv", "maximal.csv")
    _write_rows(path, ("kind", "ratio", "seconds", "corpus_size", "c"), rows)
    print(f"csv={path}")
    for row in rows:
        if not math.isfinite(row["ratio"]):
            raise CheckFailure("maximal_ratio_finite",
                               f"{row['kind']} ratio is {row['ratio']}")


def _cmd_vmo(cfg: dict, out_dir: Path, seed: int, workers: int) -> None:
    from .coefficients import osc_prime, osc_xv
    from .geometry import Cylinder
    a = _build_coefficients(cfg["coefficients"])
    center = PhasePoint(t=cfg["center"]["t"],
                        x=np.asarray(cfg["center"]["x"], dtype=float),
                        v=np.asarray(cfg["center"]["v"], dtype=float))
    a = _scale_coefficients(a, center.d)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_pairs = cfg.get("n_pairs", 4000)
    n_slices = cfg.get("n_slices", 16)
    n_probes = cfg.get("n_probes", 8)
    rows = []
    for r in cfg["radii"]:
        Q = Cylinder(center=center, r=r, R=r, side="past")
        osc, osc_err = osc_xv(a, Q, n_pairs=n_pairs, n_slices=n_slices,
                              rng=rng)
        probes = [PhasePoint(t=center.t - rng.uniform(0.0, r ** 2),
                             x=center.x + rng.uniform(-1.0, 1.0, center.d),
                             v=center.v + rng.uniform(-1.0, 1.0, center.d))
                  for _ in range(n_probes)]
        prime, prime_err = osc_prime(a, r, probes, n_pairs=n_pairs, rng=rng)
        rows.append({"r": r, "osc_xv": osc, "osc_xv_err": osc_err,
                     "osc_prime": prime, "osc_prime_err": prime_err})
        print(f"r={r} osc_xv={osc:.6e} osc_prime={prime:.6e}")
    path = out_dir / cfg.get("csv", "vmo.csv")
    _write_rows(path, ("r", "osc_xv", "osc_xv_err", "osc_prime",
                       "osc_prime_err"), rows)
    print(f"csv={path}")
    if cfg.get("expect_time_only", False):
        for row in rows:
            if row["osc_xv"] > 3.0 * row["osc_xv_err"] + 1e-12:
                raise CheckFailure(
                    "osc_time_only",
                    f"r={row['r']}: osc_xv={row['osc_xv']} exceeds 3 sigma "
                    f"of a time-only coefficient")


def _cmd_report(cfg: dict, out_dir: Path, seed: int, workers: int) -> None:
    names = cfg.get("inputs")
    if names:
        paths = [out_dir / name for name in names]
    else:
        paths = sorted(p for p in out_dir.glob("*.csv")
                       if p.name != cfg.get("summary", "summary.csv"))
    if not paths:
        raise ConfigError("no CSV inputs to merge")
    rows = []
    for path in paths:
        try:
            with open(path, newline="") as fh:
                data = list(csv.DictReader(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        ratios = [float(row["ratio"]) for row in data
                  if "ratio" in row and row["ratio"] not in ("", None)]
        rows.append({"file": path.name, "rows": len(data),
                     "max_ratio": max(ratios) if ratios else ""})
    path = out_dir / cfg.get("summary", "summary.csv")
    _write_rows(path, ("file", "rows", "max_ratio"), rows)
    print(f"summary={path}")
    for row in rows:
        print(f"{row['file']}: rows={row['rows']} max_ratio={row['max_ratio']}")


_RUNNERS = {
    "solve": _cmd_solve,
    "verify-estimate": _cmd_verify_estimate,
    "geometry-test": _cmd_geometry_test,
    "weights-ap": _cmd_weights_ap,
    "maximal-bench": _cmd_maximal_bench,
    "vmo": _cmd_vmo,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kfplab",
        description="Numerical laboratory for a model kinetic equation: "
                    "solve cases, verify estimate ratios, and benchmark the "
                    "geometric toolbox from YAML configs.")
    parser.add_argument("command", choices=sorted(_RUNNERS))
    parser.add_argument("--config", required=True, help="YAML config path")
    parser.add_argument("--out", default=None, help="output directory "
                        "(overrides the config; default '.')")
    parser.add_argument("--seed", type=int, default=None,
                        help="root seed (overrides the config; default 0)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel workers (default: available cores)")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate the config and print the plan only")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.command, args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not 0 <= seed < _SEED_MAX:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        workers = (args.workers if args.workers is not None
                   else cfg.get("workers", os.cpu_count() or 1))
        if workers < 1:
            raise ConfigError("workers must be at least one")
        out_dir = Path(args.out if args.out is not None else cfg.get("out", "."))
        out_dir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dry_run:
        print(f"plan: {args.command} config={args.config} out={out_dir} "
              f"seed={seed} workers={workers}")
        keys = ", ".join(sorted(k for k in cfg
                                if k not in ("seed", "out", "workers")))
        print(f"plan: validated sections: {keys or '<defaults>'}")
        return EXIT_OK

    try:
        _RUNNERS[args.command](cfg, out_dir, seed, workers)
    except CheckFailure as exc:
        print(f"FAIL {exc.invariant}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
