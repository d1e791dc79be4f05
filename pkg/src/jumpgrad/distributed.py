"""Coupled agent/channel dynamics for distributed gradient descent.

Each agent descends its block of the quadratic objective, but sees its
neighbors only through channel states that update at Poisson events:

    dx_i = -(Q_ii x_i + sum_{j != i} Q_ij z_(j,i) + q_i) dt

The module assembles this system (and its shifted error form, whose
state is (x - y*, z - y*_sender)) as flat-vector drift and jump maps
compatible with jumpsde.integrate_path. The flat layout is
[x | z_c for each channel c] with channels in sender-major edge order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import ChannelSpec, ChannelState, PiecewiseConstant, drift_value
from .quadratic import QuadraticProblem, complete_topology, optimal_solution

__all__ = [
    "NetworkState",
    "ErrorCoordinates",
    "SystemLayout",
    "AssembledSystem",
    "layout_for",
    "nominal_flow",
    "assemble_distributed_system",
    "assemble_error_system",
    "to_error_coordinates",
    "from_error_coordinates",
    "error_stack",
    "coords_from_stack",
    "default_initial_state",
    "synchronized_initial_state",
]

# reserved channel-slot for the initial-condition RNG stream; real
# channel ids are consecutive small integers so this cannot collide
_INIT_STREAM = 2**32 - 1


@dataclass
class NetworkState:
    """Structured view of the full system state at one instant."""

    agent_states: list[np.ndarray]
    channel_states: dict[tuple[int, int], ChannelState]

    def __post_init__(self):
        self.agent_states = [np.asarray(x, dtype=float) for x in self.agent_states]


@dataclass(frozen=True)
class ErrorCoordinates:
    """Optimizer-relative coordinates x~ = x - y*, z~ = z - y*_sender.

    The copy errors e_(j,i) = x~_j - z~_(j,i) are stored alongside and
    kept consistent with x~ and z~.
    """

    x_tilde: np.ndarray
    z_tilde: dict[tuple[int, int], np.ndarray]
    e: dict[tuple[int, int], np.ndarray]
    partition: tuple[int, ...]

    def __post_init__(self):
        offsets = np.concatenate([[0], np.cumsum(self.partition)]).astype(int)
        for (j, i), zt in self.z_tilde.items():
            xj = self.x_tilde[offsets[j]:offsets[j + 1]]
            if not np.allclose(self.e[(j, i)], xj - zt, rtol=0, atol=1e-9):
                raise ValueError(f"inconsistent copy error on edge ({j}, {i})")


@dataclass(frozen=True)
class SystemLayout:
    """Index bookkeeping for the flat [x | z_1 | z_2 | ...] vector."""

    partition: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        offsets = tuple(int(v) for v in np.concatenate([[0], np.cumsum(self.partition)]))
        d = offsets[-1]
        z_offsets = [d]
        for j, _ in self.edges:
            z_offsets.append(z_offsets[-1] + self.partition[j])
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_z_offsets", tuple(z_offsets))

    @property
    def d(self) -> int:
        return self._offsets[-1]

    @property
    def dim(self) -> int:
        return self._z_offsets[-1]

    def x_slice(self, i: int) -> slice:
        return slice(self._offsets[i], self._offsets[i + 1])

    def z_slice(self, c: int) -> slice:
        return slice(self._z_offsets[c], self._z_offsets[c + 1])


def layout_for(problem: QuadraticProblem,
               specs: Sequence[ChannelSpec]) -> tuple[SystemLayout, list[ChannelSpec]]:
    """Canonical layout and the specs reordered to match it.

    Requires a complete communication graph: exactly one spec per ordered
    pair of distinct agents.
    """
    topo = complete_topology(problem.n)
    by_edge = {}
    for s in specs:
        if s.edge in by_edge:
            raise ValueError(f"duplicate channel for edge {s.edge}")
        j, i = s.edge
        if not (0 <= j < problem.n and 0 <= i < problem.n):
            raise ValueError(f"edge {s.edge} out of range for n = {problem.n}")
        by_edge[s.edge] = s
    if set(by_edge) != set(topo.edges):
        missing = sorted(set(topo.edges) - set(by_edge))
        raise ValueError(f"incomplete communication graph; missing edges {missing}")
    ordered = [by_edge[e] for e in topo.edges]
    return SystemLayout(partition=problem.partition, edges=topo.edges), ordered


@dataclass(frozen=True)
class AssembledSystem:
    """Drift, per-channel jump increments, and rates, over the flat state.

    kind is "original" (state [x | z]) or "error" (state [x~ | z~]).
    Iterating yields (drift, jump_maps) for positional unpacking.
    """

    drift: Callable[[float, np.ndarray], np.ndarray]
    jump_maps: tuple[Callable[[np.ndarray], np.ndarray], ...]
    rates: tuple[float, ...]
    layout: SystemLayout
    specs: tuple[ChannelSpec, ...]
    y_star: np.ndarray
    kind: str

    def __iter__(self):
        return iter((self.drift, self.jump_maps))

    def lyapunov(self, u: np.ndarray) -> float:
        """V = ||x - y*||^2 + sum_c ||x_j - z_c||^2 on the flat state.

        The copy error x~_j - z~_c equals x_j - z_c in both coordinate
        systems, so the same expression serves original and error kinds
        (the error kind carries y* = 0).
        """
        lay = self.layout
        shift = self.y_star if self.kind == "original" else 0.0
        xt = u[:lay.d] - shift
        v = float(xt @ xt)
        for c, (j, _) in enumerate(lay.edges):
            ec = u[lay.x_slice(j)] - u[lay.z_slice(c)]
            v += float(ec @ ec)
        return v


def nominal_flow(problem: QuadraticProblem) -> Callable[[float, np.ndarray], np.ndarray]:
    """Ideal gradient flow dy = -(Q y + q) dt (instant communication)."""
    Q, q = problem.Q, problem.q

    def drift(t: float, y: np.ndarray) -> np.ndarray:
        return -(Q @ y + q)

    return drift


def _agent_drift_matrix(problem: QuadraticProblem, layout: SystemLayout) -> np.ndarray:
    """Matrix A with agent drift = A @ u - q: diagonal blocks of Q act on
    the agent's own state, off-diagonal blocks act on channel values."""
    A = np.zeros((layout.d, layout.dim))
    for i in range(problem.n):
        rows = layout.x_slice(i)
        A[rows, layout.x_slice(i)] = -problem.block(i, i)
    for c, (j, i) in enumerate(layout.edges):
        A[layout.x_slice(i), layout.z_slice(c)] = -problem.block(i, j)
    return A


def _make_drift(problem: QuadraticProblem, layout: SystemLayout,
                ordered: list[ChannelSpec], x_const: np.ndarray,
                z_forcing: list[np.ndarray] | None) -> Callable:
    A = _agent_drift_matrix(problem, layout)
    d = layout.d
    z_slices = [layout.z_slice(c) for c in range(len(ordered))]
    all_const = all(not isinstance(s.drift, PiecewiseConstant) for s in ordered)
    if all_const:
        coef = np.zeros(layout.dim - d)
        for c, s in enumerate(ordered):
            sl = z_slices[c]
            coef[sl.start - d:sl.stop - d] = s.drift

        def drift(t: float, u: np.ndarray) -> np.ndarray:
            out = np.empty_like(u)
            out[:d] = A @ u + x_const
            out[d:] = coef * u[d:]
            if z_forcing is not None:
                for c, s in enumerate(ordered):
                    out[z_slices[c]] += s.drift * z_forcing[c]
            return out
    else:
        def drift(t: float, u: np.ndarray) -> np.ndarray:
            out = np.empty_like(u)
            out[:d] = A @ u + x_const
            for c, s in enumerate(ordered):
                a = drift_value(s, t)
                out[z_slices[c]] = a * u[z_slices[c]]
                if z_forcing is not None:
                    out[z_slices[c]] += a * z_forcing[c]
            return out
    return drift


def _make_jumps(layout: SystemLayout) -> tuple[Callable, ...]:
    maps = []
    for c, (j, _) in enumerate(layout.edges):
        xsl, zsl = layout.x_slice(j), layout.z_slice(c)

        def g(u: np.ndarray, xsl=xsl, zsl=zsl) -> np.ndarray:
            inc = np.zeros_like(u)
            inc[zsl] = u[xsl] - u[zsl]
            return inc

        maps.append(g)
    return tuple(maps)


def assemble_distributed_system(problem: QuadraticProblem,
                                channel_specs: Sequence[ChannelSpec]) -> AssembledSystem:
    """Flat-state dynamics of the jump-coupled descent (original coordinates).

    An event on channel (j, i) resets only z_(j,i), to the sender's
    current value. Rejects incomplete communication graphs.
    """
    layout, ordered = layout_for(problem, channel_specs)
    drift = _make_drift(problem, layout, ordered, -problem.q, None)
    return AssembledSystem(
        drift=drift,
        jump_maps=_make_jumps(layout),
        rates=tuple(s.rate for s in ordered),
        layout=layout,
        specs=tuple(ordered),
        y_star=optimal_solution(problem),
        kind="original",
    )


def assemble_error_system(problem: QuadraticProblem,
                          channel_specs: Sequence[ChannelSpec],
                          y_star: np.ndarray) -> AssembledSystem:
    """Same dynamics in optimizer-relative coordinates (x~, z~).

    The channel drift gains the constant forcing a(t) y*_sender; the
    agent drift loses its affine term because Q y* + q = 0.
    """
    layout, ordered = layout_for(problem, channel_specs)
    y_star = np.asarray(y_star, dtype=float)
    forcing = [y_star[layout.x_slice(j)] for (j, _) in layout.edges]
    drift = _make_drift(problem, layout, ordered, np.zeros(layout.d), forcing)
    return AssembledSystem(
        drift=drift,
        jump_maps=_make_jumps(layout),
        rates=tuple(s.rate for s in ordered),
        layout=layout,
        specs=tuple(ordered),
        y_star=y_star,
        kind="error",
    )


def to_error_coordinates(state: NetworkState, y_star: np.ndarray) -> ErrorCoordinates:
    """Shift a structured state by the optimizer (block sizes are taken
    from the agent states themselves)."""
    partition = tuple(len(x) for x in state.agent_states)
    offsets = np.concatenate([[0], np.cumsum(partition)]).astype(int)
    y_star = np.asarray(y_star, dtype=float)
    x = np.concatenate(state.agent_states)
    x_tilde = x - y_star
    z_tilde, e = {}, {}
    for (j, i), zc in state.channel_states.items():
        ysj = y_star[offsets[j]:offsets[j + 1]]
        z_tilde[(j, i)] = zc.value - ysj
        e[(j, i)] = x_tilde[offsets[j]:offsets[j + 1]] - z_tilde[(j, i)]
    return ErrorCoordinates(x_tilde=x_tilde, z_tilde=z_tilde, e=e, partition=partition)


def from_error_coordinates(err: ErrorCoordinates, y_star: np.ndarray) -> NetworkState:
    """Inverse of to_error_coordinates."""
    offsets = np.concatenate([[0], np.cumsum(err.partition)]).astype(int)
    y_star = np.asarray(y_star, dtype=float)
    x = err.x_tilde + y_star
    agents = [x[offsets[i]:offsets[i + 1]] for i in range(len(err.partition))]
    chans = {}
    for (j, i), zt in err.z_tilde.items():
        chans[(j, i)] = ChannelState(value=zt + y_star[offsets[j]:offsets[j + 1]])
    return NetworkState(agent_states=agents, channel_states=chans)


def error_stack(err: ErrorCoordinates,
                edges: Sequence[tuple[int, int]] | None = None) -> np.ndarray:
    """Stacked vector s = (x~, e) in canonical edge order."""
    if edges is None:
        n = len(err.partition)
        edges = complete_topology(n).edges
    return np.concatenate([err.x_tilde] + [err.e[e] for e in edges])


def coords_from_stack(problem: QuadraticProblem, s: np.ndarray) -> ErrorCoordinates:
    """ErrorCoordinates matching a stacked s = (x~, e); z~ = x~_sender - e."""
    edges = complete_topology(problem.n).edges
    off = problem.offsets()
    x_tilde = np.asarray(s[:problem.d], dtype=float)
    e, z_tilde = {}, {}
    pos = problem.d
    for (j, i) in edges:
        dj = problem.partition[j]
        e[(j, i)] = np.asarray(s[pos:pos + dj], dtype=float)
        z_tilde[(j, i)] = x_tilde[off[j]:off[j + 1]] - e[(j, i)]
        pos += dj
    if pos != len(s):
        raise ValueError(f"stacked vector has length {len(s)}, expected {pos}")
    return ErrorCoordinates(x_tilde=x_tilde, z_tilde=z_tilde, e=e,
                            partition=problem.partition)


def synchronized_initial_state(system: AssembledSystem, x0: np.ndarray) -> np.ndarray:
    """Flat initial state with every channel preloaded with its sender's
    value (zero copy error)."""
    lay = system.layout
    u0 = np.empty(lay.dim)
    u0[:lay.d] = x0
    for c, (j, _) in enumerate(lay.edges):
        u0[lay.z_slice(c)] = u0[lay.x_slice(j)]
    return u0


def default_initial_state(system: AssembledSystem, seed: int) -> np.ndarray:
    """Seeded default start: x on the sphere V(0) = 3/2 around the
    optimizer, channels synchronized.

    With zero copy errors, V(0) = ||x(0) - y*||^2, so the radius is
    sqrt(3/2). The direction is drawn from a dedicated substream of the
    seed, independent of all channel event streams.
    """
    lay = system.layout
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=(0, _INIT_STREAM))
    rng = np.random.default_rng(ss)
    direction = rng.standard_normal(lay.d)
    direction /= np.linalg.norm(direction)
    center = system.y_star if system.kind == "original" else np.zeros(lay.d)
    x0 = center + np.sqrt(1.5) * direction
    return synchronized_initial_state(system, x0)
