"""Experiment configuration: JSON ingestion and round-trippable dumps.

A configuration bundles the problem, the channel list, solver and
ensemble settings, and the analysis knobs. parse_config raises
ConfigError with a field-path message ("channels[2].rate: ...") so bad
files fail loudly; effective_dict emits the fully resolved form, which
re-parses to an identical configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .channels import ChannelSpec, PiecewiseConstant
from .jumpsde import PathConfig
from .quadratic import QuadraticProblem

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config",
           "effective_dict", "dump_config"]


class ConfigError(ValueError):
    """Configuration rejected; the message starts with the field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    problem: QuadraticProblem
    channels: tuple[ChannelSpec, ...]
    solver: PathConfig
    n_paths: int
    master_seed: int
    gamma: float | None = None
    beta_target: float | None = None
    rho: float | tuple[float, ...] | None = None
    initial_state: Any = "default"  # "default" or {"x0": [...], "z0": ...}
    label: str = "run"


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required field")
    return d[key]


def _parse_drift(raw, path: str):
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, dict):
        try:
            return PiecewiseConstant(breakpoints=tuple(raw["breakpoints"]),
                                     values=tuple(raw["values"]))
        except (KeyError, ValueError, TypeError) as err:
            raise ConfigError(f"{path}: invalid schedule ({err})") from err
    raise ConfigError(f"{path}: drift must be a number or a schedule object")


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level: expected an object")

    prob_d = _need(data, "problem", "")
    try:
        problem = QuadraticProblem(Q=np.array(_need(prob_d, "Q", "problem"), dtype=float),
                                   q=np.array(_need(prob_d, "q", "problem"), dtype=float),
                                   partition=tuple(_need(prob_d, "partition", "problem")))
    except ConfigError:
        raise
    except (ValueError, TypeError) as err:
        raise ConfigError(f"problem: {err}") from err

    chans = []
    raw_chans = data.get("channels", [])
    if not isinstance(raw_chans, list):
        raise ConfigError("channels: expected a list")
    for k, c in enumerate(raw_chans):
        p = f"channels[{k}]"
        try:
            edge = tuple(int(v) for v in _need(c, "edge", p))
            spec = ChannelSpec(edge=edge,
                               rate=float(_need(c, "rate", p)),
                               drift=_parse_drift(c.get("drift", 0.0), f"{p}.drift"),
                               drift_bound=(None if c.get("drift_bound") is None
                                            else float(c["drift_bound"])))
        except ConfigError:
            raise
        except (ValueError, TypeError) as err:
            raise ConfigError(f"{p}: {err}") from err
        chans.append(spec)

    sol = data.get("solver", {})
    try:
        solver = PathConfig(t0=float(sol.get("t0", 0.0)),
                            horizon=float(_need(sol, "T", "solver")),
                            step=float(sol.get("h", 0.01)),
                            seed=0,
                            jump_timing=sol.get("jump_timing", "exact"))
    except ConfigError:
        raise
    except (ValueError, TypeError) as err:
        raise ConfigError(f"solver: {err}") from err

    ens = data.get("ensemble", {})
    try:
        n_paths = int(ens.get("n_paths", 100))
        master_seed = int(ens.get("master_seed", 42))
        if n_paths < 1:
            raise ValueError("n_paths must be at least 1")
    except (ValueError, TypeError) as err:
        raise ConfigError(f"ensemble: {err}") from err

    ana = data.get("analysis", {})
    rho = ana.get("rho")
    if rho is not None:
        rho = float(rho) if isinstance(rho, (int, float)) else tuple(float(r) for r in rho)
    gamma = None if ana.get("gamma") is None else float(ana["gamma"])
    beta_target = None if ana.get("beta_target") is None else float(ana["beta_target"])

    init = data.get("initial_state", "default")
    if init != "default":
        if not isinstance(init, dict) or "x0" not in init:
            raise ConfigError('initial_state: expected "default" or an object with "x0"')
        x0 = list(map(float, init["x0"]))
        if len(x0) != problem.d:
            raise ConfigError(f"initial_state.x0: expected length {problem.d}, got {len(x0)}")
        z0 = init.get("z0", "synchronized")
        if z0 != "synchronized":
            z0 = [list(map(float, zc)) for zc in z0]
            if len(z0) != len(chans):
                raise ConfigError("initial_state.z0: need one vector per channel "
                                  "(canonical sender-major edge order)")
        init = {"x0": x0, "z0": z0}

    return ExperimentConfig(problem=problem, channels=tuple(chans), solver=solver,
                            n_paths=n_paths, master_seed=master_seed, gamma=gamma,
                            beta_target=beta_target, rho=rho, initial_state=init,
                            label=str(data.get("label", "run")))


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: not valid JSON ({err})") from err
    return parse_config(data)


def _drift_dict(drift):
    if isinstance(drift, PiecewiseConstant):
        return {"breakpoints": list(drift.breakpoints), "values": list(drift.values)}
    return drift


def effective_dict(cfg: ExperimentConfig) -> dict:
    """Fully resolved configuration; parse_config(effective_dict(c))
    reproduces c."""
    return {
        "label": cfg.label,
        "problem": {
            "Q": [list(row) for row in cfg.problem.Q],
            "q": list(cfg.problem.q),
            "partition": list(cfg.problem.partition),
        },
        "channels": [
            {"edge": list(s.edge), "rate": s.rate,
             "drift": _drift_dict(s.drift), "drift_bound": s.drift_bound}
            for s in cfg.channels
        ],
        "solver": {"t0": cfg.solver.t0, "T": cfg.solver.horizon,
                   "h": cfg.solver.step, "jump_timing": cfg.solver.jump_timing},
        "ensemble": {"n_paths": cfg.n_paths, "master_seed": cfg.master_seed},
        "analysis": {"gamma": cfg.gamma, "beta_target": cfg.beta_target,
                     "rho": (list(cfg.rho) if isinstance(cfg.rho, tuple) else cfg.rho)},
        "initial_state": cfg.initial_state,
    }


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(effective_dict(cfg), indent=2)
