"""Declarative experiment configuration: schema, validation, and builders.

A config is a single JSON document with a versioned ``schema`` field. All
numeric fields and referenced files are validated before any run starts, so
a bad config fails fast with ConfigError (CLI exit code 2).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dynamics import IntegratorConfig
from .equilibrium import SolverConfig
from .errors import ConfigError
from .graph import (
    Network,
    complete_graph,
    core_periphery,
    erdos_renyi,
    load_edge_list,
    stochastic_block_model,
)
from .models import AbelsonModel, ModifiedFjModel, NfjModel, NfjParams, TaylorModel, TaylorParams

SCHEMA_VERSION = 1

_GRAPH_KINDS = ("er", "sbm", "core", "complete", "edge_list")
_MODEL_KINDS = ("abelson", "taylor", "nfj", "modified_fj")
_VECTOR_KINDS = ("constant", "two_group", "file")
_X0_KINDS = ("constant", "convictions", "random", "file")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _num(d: dict, key: str, default=None, positive=False, nonnegative=False):
    v = d.get(key, default)
    _require(v is not None, f"missing numeric field '{key}'")
    _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"field '{key}' must be a number")
    if positive:
        _require(v > 0, f"field '{key}' must be positive")
    if nonnegative:
        _require(v >= 0, f"field '{key}' must be nonnegative")
    return v


@dataclass
class ExperimentConfig:
    """Parsed and validated experiment description."""

    graph: dict
    model: dict
    u: dict | None
    sigma: dict | None
    lam: dict | None
    x0: dict
    mode: str
    steps: int
    integrator: IntegratorConfig
    solver: SolverConfig
    split: int | None
    assign: str
    seed: int
    output_dir: str
    raw: dict = field(repr=False, default_factory=dict)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a config dict and return the typed ExperimentConfig."""
    _require(isinstance(data, dict), "config must be a JSON object")
    schema = data.get("schema", SCHEMA_VERSION)
    _require(schema == SCHEMA_VERSION, f"unsupported schema version {schema}")

    graph = data.get("graph")
    _require(isinstance(graph, dict), "missing 'graph' object")
    kind = graph.get("kind")
    _require(kind in _GRAPH_KINDS, f"graph.kind must be one of {_GRAPH_KINDS}")
    if kind == "er":
        _num(graph, "n", positive=True)
        p = _num(graph, "p", nonnegative=True)
        _require(p <= 1, "graph.p must lie in [0, 1]")
    elif kind == "sbm":
        sizes = graph.get("sizes")
        _require(isinstance(sizes, list) and sizes and all(isinstance(s, int) and s > 0 for s in sizes),
                 "graph.sizes must be a nonempty list of positive integers")
        for key in ("p_in", "p_out"):
            p = _num(graph, key, nonnegative=True)
            _require(p <= 1, f"graph.{key} must lie in [0, 1]")
    elif kind == "core":
        _require(int(_num(graph, "n", positive=True)) >= 2, "graph.n must be at least 2")
        p = _num(graph, "p", nonnegative=True)
        _require(p <= 1, "graph.p must lie in [0, 1]")
    elif kind == "complete":
        _require(int(_num(graph, "n", positive=True)) >= 2, "graph.n must be at least 2")
    elif kind == "edge_list":
        path = graph.get("path")
        _require(isinstance(path, str) and os.path.exists(path), f"edge list file not found: {path!r}")
        _require(graph.get("indexing", "zero") in ("zero", "one"), "graph.indexing must be zero|one")

    model = data.get("model")
    _require(isinstance(model, dict) and model.get("kind") in _MODEL_KINDS,
             f"model.kind must be one of {_MODEL_KINDS}")
    if model["kind"] == "nfj":
        _num(model, "p", default=1.0, positive=True)

    def check_vector(spec, name):
        if spec is None:
            return None
        _require(isinstance(spec, dict) and spec.get("kind") in _VECTOR_KINDS,
                 f"{name}.kind must be one of {_VECTOR_KINDS}")
        if spec["kind"] == "constant":
            _num(spec, "value")
        elif spec["kind"] == "two_group":
            _num(spec, "value")
            _num(spec, "other", default=1.0)
        else:
            path = spec.get("path")
            _require(isinstance(path, str) and os.path.exists(path), f"{name} file not found: {path!r}")
        return spec

    u = check_vector(data.get("u"), "u")
    sigma = check_vector(data.get("sigma"), "sigma")
    lam = check_vector(data.get("lambda"), "lambda")
    if model["kind"] in ("nfj", "modified_fj"):
        _require(u is not None and sigma is not None, f"model {model['kind']} needs 'u' and 'sigma'")
    if model["kind"] == "taylor":
        _require(u is not None and lam is not None, "model taylor needs 'u' and 'lambda'")

    x0 = data.get("x0", {"kind": "constant", "value": 1.0})
    _require(isinstance(x0, dict) and x0.get("kind") in _X0_KINDS, f"x0.kind must be one of {_X0_KINDS}")
    if x0["kind"] == "constant":
        _num(x0, "value", positive=True)
    elif x0["kind"] == "random":
        lo = _num(x0, "low", positive=True)
        hi = _num(x0, "high", positive=True)
        _require(hi >= lo, "x0.high must be >= x0.low")
    elif x0["kind"] == "file":
        _require(isinstance(x0.get("path"), str) and os.path.exists(x0["path"]),
                 f"x0 file not found: {x0.get('path')!r}")
    if x0["kind"] == "convictions":
        _require(u is not None, "x0.kind=convictions needs a 'u' spec")

    mode = data.get("mode", "ode")
    _require(mode in ("ode", "discrete"), "mode must be 'ode' or 'discrete'")
    steps = data.get("steps", 100)
    _require(isinstance(steps, int) and steps >= 0, "steps must be a nonnegative integer")

    integ = data.get("integrator", {})
    _require(isinstance(integ, dict), "'integrator' must be an object")
    try:
        integrator = IntegratorConfig(
            dt=_num(integ, "dt", default=0.01, positive=True),
            t_end=_num(integ, "t_end", default=100.0, positive=True),
            method=integ.get("method", "rk4_fixed"),
            stop_tol=_num(integ, "stop_tol", default=1e-10, positive=True),
            record_stride=int(_num(integ, "record_stride", default=1, positive=True)),
            box_tol=_num(integ, "box_tol", default=1e-9, nonnegative=True),
        )
    except ValueError as err:
        raise ConfigError(f"integrator: {err}") from None

    solv = data.get("solver", {})
    _require(isinstance(solv, dict), "'solver' must be an object")
    try:
        solver = SolverConfig(
            tol=_num(solv, "tol", default=1e-12, positive=True),
            max_iter=int(_num(solv, "max_iter", default=100, positive=True)),
            starts=int(_num(solv, "starts", default=100, positive=True)),
        )
    except ValueError as err:
        raise ConfigError(f"solver: {err}") from None

    groups = data.get("groups", {})
    _require(isinstance(groups, dict), "'groups' must be an object")
    split = groups.get("split")
    if split is not None:
        _require(isinstance(split, int) and split >= 0, "groups.split must be a nonnegative integer")
    assign = groups.get("assign", "block")
    _require(assign in ("block", "random"), "groups.assign must be block|random")

    seed = data.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")
    output_dir = data.get("output_dir", ".")
    _require(isinstance(output_dir, str), "output_dir must be a string")

    needs_groups = any(
        spec is not None and spec.get("kind") == "two_group" for spec in (u, sigma, lam)
    )
    if needs_groups:
        _require(split is not None, "two_group vectors need groups.split")

    return ExperimentConfig(
        graph=graph, model=model, u=u, sigma=sigma, lam=lam, x0=x0,
        mode=mode, steps=steps, integrator=integrator, solver=solver,
        split=split, assign=assign, seed=seed, output_dir=output_dir, raw=data,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    return parse_config(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Resolved config as a plain dict that parse_config() accepts again."""
    out: dict[str, Any] = {
        "schema": SCHEMA_VERSION,
        "graph": dict(cfg.graph),
        "model": dict(cfg.model),
        "x0": dict(cfg.x0),
        "mode": cfg.mode,
        "steps": cfg.steps,
        "integrator": {
            "dt": cfg.integrator.dt,
            "t_end": cfg.integrator.t_end,
            "method": cfg.integrator.method,
            "stop_tol": cfg.integrator.stop_tol,
            "record_stride": cfg.integrator.record_stride,
            "box_tol": cfg.integrator.box_tol,
        },
        "solver": {"tol": cfg.solver.tol, "max_iter": cfg.solver.max_iter, "starts": cfg.solver.starts},
        "groups": {"assign": cfg.assign, **({"split": cfg.split} if cfg.split is not None else {})},
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
    }
    for key, spec in (("u", cfg.u), ("sigma", cfg.sigma), ("lambda", cfg.lam)):
        if spec is not None:
            out[key] = dict(spec)
    return out


def build_network(cfg: ExperimentConfig) -> Network:
    g = cfg.graph
    kind = g["kind"]
    if kind == "er":
        return erdos_renyi(int(g["n"]), float(g["p"]), cfg.seed)
    if kind == "sbm":
        return stochastic_block_model(list(g["sizes"]), float(g["p_in"]), float(g["p_out"]), cfg.seed)
    if kind == "core":
        return core_periphery(int(g["n"]), float(g["p"]), cfg.seed)
    if kind == "complete":
        return complete_graph(int(g["n"]))
    return load_edge_list(g["path"], indexing=g.get("indexing", "zero"),
                          symmetrize=bool(g.get("symmetrize", True)))


def group_mask(cfg: ExperimentConfig, n: int) -> np.ndarray | None:
    """Boolean mask of group 1; block prefix or a seeded random subset."""
    if cfg.split is None:
        return None
    _require(cfg.split <= n, f"groups.split {cfg.split} exceeds node count {n}")
    mask = np.zeros(n, dtype=bool)
    if cfg.assign == "block":
        mask[: cfg.split] = True
    else:
        rng = np.random.default_rng(cfg.seed)
        mask[rng.permutation(n)[: cfg.split]] = True
    return mask


def resolve_vector(spec: dict, n: int, mask: np.ndarray | None, name: str) -> np.ndarray:
    kind = spec["kind"]
    if kind == "constant":
        return np.full(n, float(spec["value"]))
    if kind == "two_group":
        _require(mask is not None, f"{name}: two_group spec needs groups.split")
        return np.where(mask, float(spec["value"]), float(spec.get("other", 1.0)))
    values = np.loadtxt(spec["path"], dtype=float, ndmin=1)
    _require(values.size == n, f"{name} file has {values.size} entries, expected {n}")
    return values


def build_model(cfg: ExperimentConfig, n: int, mask: np.ndarray | None):
    """Instantiate the model object for a config; returns (model, params_echo)."""
    kind = cfg.model["kind"]
    if kind == "abelson":
        return AbelsonModel(), {"kind": "abelson"}
    if kind == "taylor":
        lam = resolve_vector(cfg.lam, n, mask, "lambda")
        u = resolve_vector(cfg.u, n, mask, "u")
        try:
            params = TaylorParams(lam=lam, u=u)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        echo = {"kind": "taylor", "lambda": lam.tolist(), "u": u.tolist()}
        return TaylorModel(params), echo
    u = resolve_vector(cfg.u, n, mask, "u")
    sigma = resolve_vector(cfg.sigma, n, mask, "sigma")
    if kind == "modified_fj":
        try:
            model = ModifiedFjModel(u=u, sigma=sigma)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        return model, {"kind": "modified_fj", "u": u.tolist(), "sigma": sigma.tolist()}
    p = float(cfg.model.get("p", 1.0))
    try:
        params = NfjParams(u=u, sigma=sigma, p=p)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    echo = {"kind": "nfj", "p": p, "u": u.tolist(), "sigma": sigma.tolist(),
            "pinned": params.pinned.tolist()}
    return NfjModel(params), echo


def build_x0(cfg: ExperimentConfig, model, n: int, mask: np.ndarray | None) -> np.ndarray:
    kind = cfg.x0["kind"]
    if kind == "constant":
        return np.full(n, float(cfg.x0["value"]))
    if kind == "random":
        rng = np.random.default_rng(cfg.seed + 1)  # decouple from graph sampling
        return rng.uniform(float(cfg.x0["low"]), float(cfg.x0["high"]), size=n)
    if kind == "file":
        values = np.loadtxt(cfg.x0["path"], dtype=float, ndmin=1)
        _require(values.size == n, f"x0 file has {values.size} entries, expected {n}")
        _require(bool(np.all(values > 0)), "x0 file entries must be strictly positive")
        return values
    # convictions: start every agent at its anchored target
    if isinstance(model, NfjModel):
        return model.params.u ** (1.0 / model.params.p)
    if isinstance(model, TaylorModel):
        u = np.asarray(model.params.u, dtype=float)
    else:
        u = np.asarray(model.u, dtype=float)
    _require(bool(np.all(u > 0)), "x0.kind=convictions needs strictly positive u")
    return u.copy()
