"""Partitioned positive-definite quadratic objectives.

J(y) = 1/2 y^T Q y + q^T y with Q symmetric positive definite, cut into
agent blocks by a partition of the coordinates. Agent indices are 0-based
throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "IllConditionedError",
    "QuadraticProblem",
    "Topology",
    "complete_topology",
    "optimal_solution",
    "min_eigenvalue",
    "block",
    "block_vector",
    "objective",
    "gradient",
]

_SYM_RTOL = 1e-12


class IllConditionedError(ValueError):
    """Q is numerically singular (condition estimate above 1e12)."""


@dataclass(frozen=True)
class QuadraticProblem:
    Q: np.ndarray
    q: np.ndarray
    partition: tuple[int, ...]

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        q = np.array(self.q, dtype=float)
        part = tuple(int(p) for p in self.partition)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if q.shape != (Q.shape[0],):
            raise ValueError("q must be a vector matching Q")
        scale = np.abs(Q).max()
        if scale == 0 or np.abs(Q - Q.T).max() > _SYM_RTOL * scale:
            raise ValueError("Q must be symmetric (relative tolerance 1e-12)")
        if any(p <= 0 for p in part):
            raise ValueError("partition entries must be positive")
        if sum(part) != Q.shape[0]:
            raise ValueError("partition must sum to the dimension of Q")
        eigs = np.linalg.eigvalsh(Q)
        if eigs[0] <= 0:
            raise ValueError("Q must be positive definite")
        Q.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "partition", part)
        object.__setattr__(self, "_eigs", eigs)
        offsets = np.concatenate([[0], np.cumsum(part)]).astype(int)
        object.__setattr__(self, "_offsets", offsets)

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    @property
    def n(self) -> int:
        return len(self.partition)

    def offsets(self) -> np.ndarray:
        """Start offsets of the agent blocks, with a trailing sentinel d."""
        return self._offsets

    def agent_slice(self, i: int) -> slice:
        if not 0 <= i < self.n:
            raise IndexError(f"agent index {i} out of range [0, {self.n})")
        return slice(self._offsets[i], self._offsets[i + 1])

    def block(self, i: int, j: int) -> np.ndarray:
        """Sub-matrix Q_ij, shape (d_i, d_j)."""
        return self.Q[self.agent_slice(i), self.agent_slice(j)]

    def block_vector(self, i: int) -> np.ndarray:
        """Sub-vector q_i, length d_i."""
        return self.q[self.agent_slice(i)]


@dataclass(frozen=True)
class Topology:
    """Directed communication graph; an edge (j, i) sends from j to i."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if j == i:
                raise ValueError(f"self-loop ({j}, {i}) not allowed")
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise ValueError(f"edge ({j}, {i}) out of range for n = {self.n}")
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", edges)

    def is_complete(self) -> bool:
        return set(self.edges) == {(j, i) for j in range(self.n)
                                   for i in range(self.n) if i != j}


def complete_topology(n: int) -> Topology:
    """All ordered pairs (j, i), j != i, in sender-major order.

    This order is the canonical channel numbering used everywhere in the
    package (channel_id = position in this list).
    """
    return Topology(n=n, edges=tuple((j, i) for j in range(n)
                                     for i in range(n) if i != j))


def optimal_solution(problem: QuadraticProblem) -> np.ndarray:
    """Unique minimizer y* of J, i.e. the solution of Q y = -q."""
    eigs = problem._eigs
    if eigs[-1] / eigs[0] > 1e12:
        raise IllConditionedError(
            f"condition estimate {eigs[-1] / eigs[0]:.3g} exceeds 1e12")
    y = np.linalg.solve(problem.Q, -problem.q)
    resid = np.linalg.norm(problem.Q @ y + problem.q)
    if resid > 1e-9 * (1.0 + np.linalg.norm(problem.q)):
        raise IllConditionedError(f"solver residual {resid:.3g} too large")
    return y


def min_eigenvalue(problem: QuadraticProblem) -> float:
    """Smallest eigenvalue of Q (positive by the PD invariant)."""
    return float(problem._eigs[0])


def block(problem: QuadraticProblem, i: int, j: int) -> np.ndarray:
    return problem.block(i, j)


def block_vector(problem: QuadraticProblem, i: int) -> np.ndarray:
    return problem.block_vector(i)


def objective(problem: QuadraticProblem, y: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    return float(0.5 * y @ problem.Q @ y + problem.q @ y)


def gradient(problem: QuadraticProblem, y: np.ndarray) -> np.ndarray:
    return problem.Q @ np.asarray(y, dtype=float) + problem.q
