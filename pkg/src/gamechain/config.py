"""YAML run configurations: parsing, validation, round-tripping and object building."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
import yaml

from .expr import ExpressionError, compile_matrix, compile_vector
from .model import (PAYOFF_CATALOG, DiffusionModel, InnovationLaw, LAW_PRESETS, MODEL_PRESETS,
                    PayoffPair, law_preset, martingale_drift, model_preset)


class ConfigError(ValueError):
    pass


_SECTIONS = ("model", "law", "payoff", "run")
_KEYS = {
    "model": {"preset", "dim", "sigma", "drift", "lip_bound", "x0"},
    "law": {"preset", "kind", "dim", "atoms", "probs", "norm_bound"},
    "payoff": {"preset", "strike", "penalty", "penalty_shape", "asset", "value", "sufficient"},
    "run": {"command", "N", "N_list", "reps", "seed", "node_cap", "recombine", "refine",
            "out", "studies", "probe_count", "probe_radius", "M", "delta", "cf_n",
            "w_samples", "budget", "node_dump", "sample_paths", "jobs"},
}
RUN_DEFAULTS = dict(
    command="price", N=8, N_list=[64, 256, 1024], reps=200, seed=0, node_cap=10 ** 6,
    recombine=False, refine=64, out="out", studies=["strong-error"], probe_count=1000,
    probe_radius=10.0, M=1.0, delta=0.1, cf_n=[16, 64, 256], w_samples=256, budget=20000,
    node_dump=False, sample_paths=8, jobs=1,
)
STUDIES = ("strong-error", "coarse-error", "cf", "exp-moment", "value-convergence")


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    law: dict = field(default_factory=dict)
    payoff: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {s: copy.deepcopy(getattr(self, s)) for s in _SECTIONS if getattr(self, s)}

    def to_text(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def resolved_run(self) -> dict:
        out = dict(RUN_DEFAULTS)
        out.update(self.run)
        return out


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"parse error{where}: {exc.problem or exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping of sections")
    for key in data:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section '{key}'")
    cfg = RunConfig()
    for sec in _SECTIONS:
        body = data.get(sec) or {}
        if not isinstance(body, dict):
            raise ConfigError(f"section '{sec}' must be a mapping")
        for k in body:
            if k not in _KEYS[sec]:
                raise ConfigError(f"unknown key '{sec}.{k}'")
        setattr(cfg, sec, body)
    _check_run(cfg.run)
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _need(sec: dict, secname: str, key: str):
    if key not in sec:
        raise ConfigError(f"missing key '{secname}.{key}'")
    return sec[key]


def _check_run(run: dict):
    ints = ("N", "reps", "seed", "node_cap", "refine", "probe_count", "w_samples", "budget",
            "sample_paths", "jobs")
    for k in ints:
        if k in run and (not isinstance(run[k], int) or isinstance(run[k], bool) or run[k] < 0):
            raise ConfigError(f"'run.{k}' must be a non-negative integer")
    for k in ("N_list", "cf_n"):
        if k in run and (not isinstance(run[k], list)
                         or not all(isinstance(v, int) and v >= 1 for v in run[k])):
            raise ConfigError(f"'run.{k}' must be a list of positive integers")
    if "studies" in run:
        bad = [s for s in run["studies"] if s not in STUDIES]
        if bad:
            raise ConfigError(f"'run.studies' has unknown entries {bad}; known {list(STUDIES)}")
    if "command" in run and run["command"] not in ("validate", "price", "study"):
        raise ConfigError("'run.command' must be validate, price or study")


# --------------------------------------------------------------------------- #
# Building objects
# --------------------------------------------------------------------------- #

def build_model(sec: dict) -> DiffusionModel:
    if "preset" in sec:
        extra = set(sec) - {"preset", "x0"}
        if extra:
            raise ConfigError(f"'model.preset' cannot be combined with {sorted(extra)}")
        if sec["preset"] not in MODEL_PRESETS:
            raise ConfigError(f"unknown 'model.preset' {sec['preset']!r}")
        m = model_preset(sec["preset"])
        if "x0" in sec:
            m = DiffusionModel(m.dim, m.sigma, m.drift, m.lip_bound, sec["x0"], m.name)
        return m
    dim = _need(sec, "model", "dim")
    if not isinstance(dim, int) or dim < 1:
        raise ConfigError("'model.dim' must be a positive integer")
    sigma_src = _need(sec, "model", "sigma")
    if isinstance(sigma_src, (str, int, float)) and dim == 1:
        sigma_src = [[sigma_src]]
    try:
        sigma = compile_matrix(sigma_src, dim)
        drift_src = sec.get("drift", ["0"] * dim)
        if drift_src == "martingale":
            drift = martingale_drift(sigma, dim)
        else:
            if isinstance(drift_src, (str, int, float)) and dim == 1:
                drift_src = [drift_src]
            drift = compile_vector(drift_src, dim)
    except ExpressionError as exc:
        raise ConfigError(f"model expression: {exc}") from None
    L = float(_need(sec, "model", "lip_bound"))
    x0 = sec.get("x0", [0.0] * dim)
    try:
        return DiffusionModel(dim, sigma, drift, L, x0, "inline")
    except ValueError as exc:
        raise ConfigError(f"'model.x0': {exc}") from None


def build_law(sec: dict) -> InnovationLaw:
    if "preset" in sec:
        if sec["preset"] not in LAW_PRESETS:
            raise ConfigError(f"unknown 'law.preset' {sec['preset']!r}")
        return law_preset(sec["preset"])
    kind = _need(sec, "law", "kind")
    if kind == "gaussian":
        return InnovationLaw.gaussian(int(_need(sec, "law", "dim")))
    if kind != "finite":
        raise ConfigError(f"'law.kind' must be finite or gaussian, got {kind!r}")
    atoms = np.array(_need(sec, "law", "atoms"), dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    probs = _need(sec, "law", "probs")
    try:
        return InnovationLaw(atoms.shape[1], "finite", atoms, probs,
                             float(sec.get("norm_bound", float("inf"))), "inline")
    except ValueError as exc:
        raise ConfigError(f"law: {exc}") from None


def build_payoff(sec: dict) -> PayoffPair:
    kind = _need(sec, "payoff", "preset")
    if kind not in PAYOFF_CATALOG:
        raise ConfigError(f"unknown 'payoff.preset' {kind!r}; known {sorted(PAYOFF_CATALOG)}")
    if kind == "constant":
        pair = PAYOFF_CATALOG[kind](float(_need(sec, "payoff", "value")))
    else:
        pair = PAYOFF_CATALOG[kind](float(sec.get("strike", 1.0)), float(sec.get("penalty", 0.0)),
                                    sec.get("penalty_shape", "constant"), int(sec.get("asset", 0)))
    if sec.get("sufficient", "auto") == "none":
        pair = PayoffPair(pair.lower, pair.upper, pair.reg_const, pair.name, None, pair.params)
    return pair
