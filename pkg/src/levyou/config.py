"""Config parsing, validation and model building.

Configs are JSON documents with the blocks `model`, `chars`, `evolution`,
`integrand`, `initial`, `experiment` and optionally `scenario` and `output`.
Validation collects *all* schema violations (with JSON-pointer-style paths)
plus the semantic checks (dimension consistency, PSD covariance, positive
rates) before raising, so a bad config is diagnosed in one pass.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator

from .errors import ConfigError, ExpressionError, ModelError
from .evolution import (
    DiagonalHomogeneous,
    DiagonalTimeDependent,
    EvolutionSystem,
    GeneralMatrix,
    perturbed_system,
)
from .expressions import compile_expression, matrix_entries
from .levy import LevyCharacteristics, _psd_sqrt
from .ou import SEEProblem
from .spaces import SeminormFamily
from .stochint import IntegrandR

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_ENTRY = {"anyOf": [_NUM, {"type": "string"}]}
_EXPR_MAT = {"type": "array", "items": {"type": "array", "items": _ENTRY, "minItems": 1}, "minItems": 1}

_EVOLUTION_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {"variant": {"const": "diagonal"}, "eigenvalues": _VEC},
            "required": ["variant", "eigenvalues"],
            "additionalProperties": False,
        },
        {
            "properties": {"variant": {"const": "diagonal_t"}, "coefficient": {"type": "string"}},
            "required": ["variant", "coefficient"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "variant": {"const": "matrix"},
                "matrix": _EXPR_MAT,
                "substep": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["variant", "matrix", "substep"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "variant": {"const": "perturbed"},
                "base": {"$ref": "#/$defs/evolution"},
                "perturbation": _EXPR_MAT,
                "substep": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["variant", "base", "perturbation", "substep"],
            "additionalProperties": False,
        },
    ],
}

SCHEMA = {
    "$defs": {"evolution": _EVOLUTION_SCHEMA},
    "type": "object",
    "properties": {
        "model": {
            "type": "object",
            "properties": {
                "dimension": {"type": "integer", "minimum": 1},
                "seminorms": {
                    "type": "object",
                    "oneOf": [
                        {
                            "properties": {
                                "profile": {"const": "hermite"},
                                "d": {"type": "integer", "minimum": 1},
                                "levels": {"type": "integer", "minimum": 0},
                            },
                            "required": ["profile", "levels"],
                            "additionalProperties": False,
                        },
                        {
                            "properties": {"weights": _MAT},
                            "required": ["weights"],
                            "additionalProperties": False,
                        },
                    ],
                },
            },
            "required": ["dimension", "seminorms"],
            "additionalProperties": False,
        },
        "chars": {
            "type": "object",
            "properties": {
                "drift": _VEC,
                "covariance": _MAT,
                "atoms": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"rate": _NUM, "mark": _VEC},
                        "required": ["rate", "mark"],
                        "additionalProperties": False,
                    },
                },
                "rho_level": {"type": "integer", "minimum": 0},
                "small_jump_eps": {"type": ["number", "null"]},
            },
            "required": ["drift", "covariance", "atoms"],
            "additionalProperties": False,
        },
        "evolution": {"$ref": "#/$defs/evolution"},
        "integrand": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "time_varying", "mark_dependent"]},
                "matrix": _EXPR_MAT,
            },
            "required": ["kind", "matrix"],
            "additionalProperties": False,
        },
        "initial": {
            "type": "object",
            "oneOf": [
                {
                    "properties": {"kind": {"const": "point"}, "value": _VEC},
                    "required": ["kind", "value"],
                    "additionalProperties": False,
                },
                {
                    "properties": {"kind": {"const": "gaussian"}, "mean": _VEC, "covariance": _MAT},
                    "required": ["kind", "mean", "covariance"],
                    "additionalProperties": False,
                },
            ],
        },
        "experiment": {
            "type": "object",
            "properties": {
                "command": {"enum": ["simulate", "verify", "converge"]},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "grid_cells": {"type": "integer", "minimum": 1},
                "ensemble": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "probes": _MAT,
                "times": _VEC,
                "subpanels": {"type": "integer", "minimum": 1},
                "tolerances": {
                    "type": "object",
                    "properties": {
                        "exact": _NUM,
                        "se_sigma": _NUM,
                        "ratio_window": _NUM,
                        "quadrature": _NUM,
                    },
                    "additionalProperties": False,
                },
            },
            "required": ["horizon", "grid_cells", "ensemble", "seed"],
            "additionalProperties": False,
        },
        "scenario": {
            "type": "object",
            "oneOf": [
                {
                    "properties": {
                        "n_values": {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 1},
                            "minItems": 1,
                        },
                        "d_diag": _VEC,
                        "c_matrix": _MAT,
                        "delta_drift": _VEC,
                        "q_level": {"type": "integer", "minimum": 0},
                    },
                    "required": ["n_values", "d_diag", "c_matrix", "delta_drift", "q_level"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "n_values": {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 1},
                            "minItems": 1,
                        },
                        "q_level": {"type": "integer", "minimum": 0},
                        "eigenvalues": {"type": "array", "items": _ENTRY, "minItems": 1},
                        "drift": {"type": "array", "items": _ENTRY, "minItems": 1},
                        "b_matrix": _EXPR_MAT,
                    },
                    "required": ["n_values", "q_level"],
                    "additionalProperties": False,
                },
            ],
        },
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
            "additionalProperties": False,
        },
    },
    "required": ["model", "chars", "evolution", "integrand", "initial", "experiment"],
    "additionalProperties": False,
}

DEFAULT_TOLERANCES = {
    # exact-arithmetic identities
    "exact": 1e-10,
    # Monte Carlo identities, in standard errors
    "se_sigma": 3.0,
    # refinement-ratio acceptance window, relative
    "ratio_window": 0.2,
    # quadrature-limited identities
    "quadrature": 1e-6,
}


def config_hash(raw: dict) -> str:
    """Stable content hash of the canonicalized config document."""
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    """Validated config with all model objects built."""

    raw: dict
    hash: str
    dimension: int
    family: SeminormFamily
    chars: LevyCharacteristics
    system: EvolutionSystem
    integrand: IntegrandR
    initial: Any
    problem: SEEProblem
    horizon: float
    grid: np.ndarray
    ensemble: int
    seed: int
    subpanels: int
    probes: np.ndarray
    times: np.ndarray
    tolerances: dict
    command: str | None
    scenario_cfg: dict | None
    output_dir: str
    output_format: str


def _build_family(model: dict, issues: list[str]) -> SeminormFamily | None:
    dim = model["dimension"]
    sem = model["seminorms"]
    try:
        if "profile" in sem:
            return SeminormFamily.hermite(dim, sem["levels"], sem.get("d", 1))
        w = np.asarray(sem["weights"], dtype=float)
        if w.shape[1] != dim:
            issues.append(f"model.seminorms.weights: {w.shape[1]} columns, expected {dim}")
            return None
        return SeminormFamily(w)
    except ModelError as exc:
        issues.append(f"model.seminorms: {exc}")
        return None


def _build_chars(cfg: dict, family: SeminormFamily, dim: int, issues: list[str]):
    block = cfg["chars"]
    drift = np.asarray(block["drift"], dtype=float)
    cov = np.asarray(block["covariance"], dtype=float)
    if drift.size != dim:
        issues.append(f"chars.drift: length {drift.size}, expected {dim}")
    if cov.shape != (dim, dim):
        issues.append(f"chars.covariance: shape {cov.shape}, expected ({dim}, {dim})")
    rates, marks = [], []
    for i, atom in enumerate(block["atoms"]):
        if atom["rate"] <= 0:
            issues.append(f"chars.atoms[{i}].rate: must be > 0, got {atom['rate']}")
        mark = np.asarray(atom["mark"], dtype=float)
        if mark.size != dim:
            issues.append(f"chars.atoms[{i}].mark: length {mark.size}, expected {dim}")
        elif not mark.any():
            issues.append(f"chars.atoms[{i}].mark: must be nonzero")
        rates.append(atom["rate"])
        marks.append(mark)
    if issues:
        return None
    try:
        return LevyCharacteristics(
            drift=drift,
            covariance=cov,
            jump_rates=np.asarray(rates, dtype=float),
            jump_marks=np.stack(marks) if marks else np.empty((0, dim)),
            family=family,
            rho_level=block.get("rho_level", 0),
            small_jump_eps=block.get("small_jump_eps"),
        )
    except (ModelError, ValueError) as exc:
        issues.append(f"chars: {exc}")
        return None


def _build_system(block: dict, dim: int, issues: list[str], path: str = "evolution"):
    variant = block["variant"]
    try:
        if variant == "diagonal":
            eig = np.asarray(block["eigenvalues"], dtype=float)
            if eig.size != dim:
                issues.append(f"{path}.eigenvalues: length {eig.size}, expected {dim}")
                return None
            return DiagonalHomogeneous(eig)
        if variant == "diagonal_t":
            expr = compile_expression(block["coefficient"], ("t", "k"))
            ks = np.arange(dim, dtype=float)
            return DiagonalTimeDependent(lambda t: np.asarray(expr(t, ks), dtype=float) * np.ones(dim), dim)
        if variant == "matrix":
            fn = matrix_entries(block["matrix"], ("t",))
            if fn(0.0).shape != (dim, dim):
                issues.append(f"{path}.matrix: shape {fn(0.0).shape}, expected ({dim}, {dim})")
                return None
            return GeneralMatrix(lambda t: fn(t), dim, block["substep"])
        base = _build_system(block["base"], dim, issues, f"{path}.base")
        if base is None:
            return None
        dfn = matrix_entries(block["perturbation"], ("t",))
        if dfn(0.0).shape != (dim, dim):
            issues.append(f"{path}.perturbation: shape {dfn(0.0).shape}, expected ({dim}, {dim})")
            return None
        return perturbed_system(base, lambda t: dfn(t), block["substep"])
    except ExpressionError as exc:
        issues.append(f"{path}: {exc}")
        return None


def _build_integrand(block: dict, dim: int, issues: list[str]):
    kind = block["kind"]
    try:
        if kind == "constant":
            m = np.asarray(block["matrix"], dtype=float)
            if m.shape != (dim, dim):
                issues.append(f"integrand.matrix: shape {m.shape}, expected ({dim}, {dim})")
                return None
            return IntegrandR.constant(m)
        if kind == "time_varying":
            fn = matrix_entries(block["matrix"], ("t",))
            if fn(0.0).shape != (dim, dim):
                issues.append(f"integrand.matrix: wrong shape for dimension {dim}")
                return None
            return IntegrandR.time_varying(lambda t: fn(t), dim)
        fvars = ("t",) + tuple(f"f{j + 1}" for j in range(dim))
        fn = matrix_entries(block["matrix"], fvars)
        if fn(0.0, *np.zeros(dim)).shape != (dim, dim):
            issues.append(f"integrand.matrix: wrong shape for dimension {dim}")
            return None
        return IntegrandR.mark_dependent(lambda t, f: fn(t, *f), dim)
    except (ExpressionError, ValueError, TypeError) as exc:
        issues.append(f"integrand: {exc}")
        return None


def _build_initial(block: dict, dim: int, issues: list[str]):
    if block["kind"] == "point":
        value = np.asarray(block["value"], dtype=float)
        if value.size != dim:
            issues.append(f"initial.value: length {value.size}, expected {dim}")
            return None
        return value
    mean = np.asarray(block["mean"], dtype=float)
    cov = np.asarray(block["covariance"], dtype=float)
    if mean.size != dim or cov.shape != (dim, dim):
        issues.append("initial: mean/covariance dimensions inconsistent with the model")
        return None
    try:
        sqrt = _psd_sqrt(cov)
    except ModelError as exc:
        issues.append(f"initial.covariance: {exc}")
        return None
    return lambda rng: mean + sqrt @ rng.standard_normal(dim)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config, building every model object.

    Raises ConfigError carrying the complete list of diagnostics when the
    document is rejected.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"not valid JSON: {exc}"]) from exc

    validator = Draft202012Validator(SCHEMA)
    issues = []
    for err in sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path)):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        issues.append(f"{where}: {err.message}")
    if issues:
        raise ConfigError(issues)

    dim = raw["model"]["dimension"]
    family = _build_family(raw["model"], issues)
    chars = _build_chars(raw, family, dim, issues) if family is not None else None
    system = _build_system(raw["evolution"], dim, issues)
    integrand = _build_integrand(raw["integrand"], dim, issues)
    initial = _build_initial(raw["initial"], dim, issues)
    exp = raw["experiment"]
    if family is not None and raw["chars"].get("rho_level", 0) > family.max_level:
        issues.append("chars.rho_level: exceeds the family's maximum level")
    if issues:
        raise ConfigError(issues)

    horizon = float(exp["horizon"])
    grid = np.linspace(0.0, horizon, exp["grid_cells"] + 1)
    problem = SEEProblem(
        system=system,
        integrand=integrand,
        chars=chars,
        family=family,
        initial=initial if callable(initial) else initial,
        horizon=horizon,
        grid=grid,
    )
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(exp.get("tolerances", {}))
    probes = np.atleast_2d(np.asarray(exp.get("probes", [np.ones(dim).tolist()]), dtype=float))
    if probes.shape[1] != dim:
        raise ConfigError([f"experiment.probes: {probes.shape[1]} entries per probe, expected {dim}"])
    default_times = [horizon]
    times = np.asarray(exp.get("times", default_times), dtype=float)
    off_grid = [float(t) for t in times if np.min(np.abs(grid - t)) > 1e-12 * max(1.0, horizon)]
    if off_grid:
        raise ConfigError([f"experiment.times: {off_grid} not on the simulation grid"])
    times = grid[np.argmin(np.abs(grid[:, None] - times[None, :]), axis=0)]
    out = raw.get("output", {})
    return RunConfig(
        raw=raw,
        hash=config_hash(raw),
        dimension=dim,
        family=family,
        chars=chars,
        system=system,
        integrand=integrand,
        initial=initial,
        problem=problem,
        horizon=horizon,
        grid=grid,
        ensemble=exp["ensemble"],
        seed=exp["seed"],
        subpanels=exp.get("subpanels", 1),
        probes=probes,
        times=times,
        tolerances=tolerances,
        command=exp.get("command"),
        scenario_cfg=raw.get("scenario"),
        output_dir=out.get("dir", "out"),
        output_format=out.get("format", "csv"),
    )


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _entry_vector(entries, n: float) -> np.ndarray:
    out = []
    for e in entries:
        out.append(compile_expression(e, ("n",))(float(n)) if isinstance(e, str) else float(e))
    return np.asarray(out, dtype=float)


def build_scenario(cfg: RunConfig):
    """Sequence scenario from the config's `scenario` block.

    The structured form perturbs the base problem by `d_diag / n`,
    `c_matrix / n` and `delta_drift / n`; the expression form replaces
    eigenvalues / drift / coefficient-matrix entries with expressions in `n`,
    the limit problem (index 0) being the base config itself.
    """
    from .convergence import SequenceScenario, perturbation_scenario
    from .evolution import DiagonalHomogeneous

    sc = cfg.scenario_cfg
    if sc is None:
        raise ConfigError(["converge needs a `scenario` block in the config"])
    probes = cfg.probes[: cfg.times.size]
    if probes.shape[0] != cfg.times.size:
        raise ConfigError(["scenario needs one experiment probe per evaluation time"])
    if "d_diag" in sc:
        return perturbation_scenario(
            cfg.problem,
            np.asarray(sc["d_diag"], dtype=float),
            np.asarray(sc["c_matrix"], dtype=float),
            np.asarray(sc["delta_drift"], dtype=float),
            sc["n_values"],
            probes,
            cfg.times,
        )
    if not any(k in sc for k in ("eigenvalues", "drift", "b_matrix")):
        raise ConfigError(["scenario: expression form needs eigenvalues, drift or b_matrix"])
    if not isinstance(cfg.system, DiagonalHomogeneous) or not cfg.integrand.is_constant:
        raise ConfigError(["scenario needs a diagonal constant-coefficient base problem"])
    b_fn = matrix_entries(sc["b_matrix"], ("n",)) if "b_matrix" in sc else None
    problems = {0: cfg.problem}
    for n in sorted(set(int(v) for v in sc["n_values"])):
        eig = _entry_vector(sc["eigenvalues"], n) if "eigenvalues" in sc else cfg.system.a
        drift = _entry_vector(sc["drift"], n) if "drift" in sc else cfg.chars.drift
        bmat = b_fn(float(n)) if b_fn is not None else cfg.integrand.constant_matrix
        if eig.size != cfg.dimension or drift.size != cfg.dimension or bmat.shape != (
            cfg.dimension,
            cfg.dimension,
        ):
            raise ConfigError([f"scenario: index {n} blocks inconsistent with dimension {cfg.dimension}"])
        chars_n = LevyCharacteristics(
            drift=drift,
            covariance=cfg.chars.covariance,
            jump_rates=cfg.chars.jump_rates,
            jump_marks=cfg.chars.jump_marks,
            family=cfg.family,
            rho_level=cfg.chars.rho_level,
            small_jump_eps=cfg.chars.small_jump_eps,
        )
        problems[n] = SEEProblem(
            system=DiagonalHomogeneous(eig),
            integrand=IntegrandR.constant(bmat),
            chars=chars_n,
            family=cfg.family,
            initial=cfg.initial,
            horizon=cfg.horizon,
            grid=cfg.grid,
        )
    return SequenceScenario(problems, probes, cfg.times, cfg.family)
