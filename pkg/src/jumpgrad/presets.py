"""Bundled benchmark problem and the three ready-made experiments.

The benchmark is a three-agent partitioned quadratic (blocks 3, 2, 1)
whose Q is deliberately not diagonally dominant. Presets:

  experiment1 - ideal sample-and-hold channels (a = 0) at event rates
                10, 27 and 50; the certificate rate is about 26.56.
  experiment2 - leaky channels with a = 1 at event rates 26 and 51;
                with the documented weight rho = 1 the certificate rate
                is about 50.57.
  nominal     - the ideal gradient flow (single agent, no channels) as
                a deterministic baseline.
"""

from __future__ import annotations

import numpy as np

from .channels import ChannelSpec
from .config import ExperimentConfig
from .jumpsde import PathConfig
from .quadratic import QuadraticProblem, complete_topology

__all__ = ["DEFAULT_SEED", "PRESET_NAMES", "reference_problem",
           "reference_channels", "preset_configs"]

DEFAULT_SEED = 42
PRESET_NAMES = ("experiment1", "experiment2", "nominal")

_Q = [
    [4, 2, 1, 1, 0, 2],
    [2, 5, 2, 0, 2, 1],
    [1, 2, 6, 3, 1, 0],
    [1, 0, 3, 4, 2, 1],
    [0, 2, 1, 2, 5, 2],
    [2, 1, 0, 1, 2, 4],
]
_q = [-9, -15, -22, -12, -10, -5]


def reference_problem() -> QuadraticProblem:
    """The bundled 6-dimensional benchmark, partitioned (3, 2, 1)."""
    return QuadraticProblem(Q=np.array(_Q, dtype=float),
                            q=np.array(_q, dtype=float),
                            partition=(3, 2, 1))


def reference_channels(rate: float, drift: float = 0.0) -> list[ChannelSpec]:
    """A complete channel set with uniform rate and constant drift."""
    problem = reference_problem()
    return [ChannelSpec(edge=e, rate=rate, drift=drift)
            for e in complete_topology(problem.n).edges]


def _solver(T: float = 10.0) -> PathConfig:
    return PathConfig(t0=0.0, horizon=T, step=0.01)


def preset_configs(name: str, n_paths: int = 100,
                   master_seed: int = DEFAULT_SEED) -> list[ExperimentConfig]:
    """The run configurations of a named preset, one per event rate."""
    problem = reference_problem()
    if name == "experiment1":
        return [
            ExperimentConfig(problem=problem,
                             channels=tuple(reference_channels(rate)),
                             solver=_solver(), n_paths=n_paths,
                             master_seed=master_seed, label=f"rate{rate:g}")
            for rate in (10.0, 27.0, 50.0)
        ]
    if name == "experiment2":
        # rho = 1 is the uniform weight that reproduces the reference
        # certificate value for this drifted setup
        return [
            ExperimentConfig(problem=problem,
                             channels=tuple(reference_channels(rate, drift=1.0)),
                             solver=_solver(), n_paths=n_paths,
                             master_seed=master_seed, rho=1.0, label=f"rate{rate:g}")
            for rate in (26.0, 51.0)
        ]
    if name == "nominal":
        single = QuadraticProblem(Q=problem.Q, q=problem.q,
                                  partition=(problem.d,))
        return [ExperimentConfig(problem=single, channels=(), solver=_solver(),
                                 n_paths=1, master_seed=master_seed,
                                 label="nominal")]
    raise ValueError(f"unknown preset '{name}'; choose from {PRESET_NAMES}")
