"""Lyapunov analysis and sufficient communication-rate certificates.

For the squared-norm Lyapunov function V(s) = ||x~||^2 + sum ||e||^2 the
generator of the jump-coupled descent expands into quadratic terms plus
one bilinear term in the optimizer; Young's inequality on that term
yields

    LV(s, t) <= -s^T M(t) s + gamma'

with M(t) = [[2Q, M21(t)^T], [M21(t), Lambda + R(t)]]. Requiring M(t) to
stay positive (semi)definite for all t gives sufficient event rates. The
e-block coupling of R is available in two structures:

  * "exact"    - the symmetrization actually produced by the generator
                 expansion; with it the inequality above holds with the
                 gap identically equal to the Young slack.
  * "reported" - couples channel pairs that share a receiver; this is
                 the structure the bundled reference certificates use
                 (see theorem_rates).

Rate certificates come in three flavors per threshold: the reference
convention (reported coupling with the Schur term formed against Q),
the exact convention (exact coupling against 2Q), and a conservative
closed-form norm bound. The reference convention is the package default
for reported lambda_s values; all three appear on the certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import ChannelSpec, drift_value
from .distributed import ErrorCoordinates, SystemLayout, layout_for
from .quadratic import QuadraticProblem, min_eigenvalue, optimal_solution

__all__ = [
    "LyapunovParams",
    "MAssembly",
    "RateCertificate",
    "BoundReport",
    "lyapunov_V",
    "generator_terms",
    "generator_LV",
    "assemble_M",
    "gamma_prime_value",
    "choose_rho",
    "schur_rate_lambda_s",
    "schur_rate_lambda_d",
    "theorem_rates",
    "certified_beta",
    "verify_lemma1_bound",
]


@dataclass(frozen=True)
class LyapunovParams:
    """Sandwich and decay constants c1 ||s||^2 <= V <= c2 ||s||^2,
    LV <= -c3 V + gamma'. For the squared-norm V here, c1 = c2 = 1."""

    c3: float
    gamma_prime: float = 0.0
    c1: float = 1.0
    c2: float = 1.0
    alpha: float = field(init=False)
    beta: float = field(init=False)
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0 or self.c3 <= 0:
            raise ValueError("c1, c2, c3 must be positive")
        if self.c1 > self.c2:
            raise ValueError("need c1 <= c2")
        if self.gamma_prime < 0:
            raise ValueError("gamma_prime must be nonnegative")
        object.__setattr__(self, "alpha", self.c2 / self.c1)
        object.__setattr__(self, "beta", self.c3 / self.c2)
        object.__setattr__(self, "gamma", self.gamma_prime / self.c3)


def lyapunov_V(s) -> float:
    """V = ||x~||^2 + sum_(j,i) ||e_(j,i)||^2 (equivalently ||s||^2 on the
    stacked vector)."""
    if isinstance(s, ErrorCoordinates):
        v = float(s.x_tilde @ s.x_tilde)
        for e in s.e.values():
            v += float(e @ e)
        return v
    s = np.asarray(s, dtype=float)
    return float(s @ s)


def _ordered(problem: QuadraticProblem,
             channel_specs: Sequence[ChannelSpec]) -> tuple[SystemLayout, list[ChannelSpec]]:
    return layout_for(problem, channel_specs)


def generator_terms(problem: QuadraticProblem,
                    channel_specs: Sequence[ChannelSpec],
                    s: ErrorCoordinates, t: float,
                    y_star: np.ndarray) -> dict[str, float]:
    """The seven summands of the exact generator expansion of V.

    LV = W1 + 2 W2 + W3 + 2 W4 + 2 W5 + W6 + W7. W7 is the exact bilinear
    optimizer term, not its Young bound.
    """
    layout, ordered = _ordered(problem, channel_specs)
    off = problem.offsets()
    xt = np.asarray(s.x_tilde, dtype=float)
    y_star = np.asarray(y_star, dtype=float)
    Qx = problem.Q @ xt

    W1 = -2.0 * float(xt @ Qx)
    W2 = W3 = W4 = W5 = W6 = W7 = 0.0
    for spec in ordered:
        j, i = spec.edge
        e_ji = s.e[(j, i)]
        a = drift_value(spec, t)
        W2 += float(e_ji @ (problem.block(j, i) @ xt[off[i]:off[i + 1]]))
        for k in range(problem.n):
            if k == j:
                continue
            W3 += 2.0 * float(e_ji @ (problem.block(j, k) @ s.e[(k, j)]))
        W4 -= float(e_ji @ Qx[off[j]:off[j + 1]])
        W5 -= a * float(e_ji @ xt[off[j]:off[j + 1]])
        W6 += (2.0 * a - spec.rate) * float(e_ji @ e_ji)
        W7 -= 2.0 * a * float(e_ji @ y_star[off[j]:off[j + 1]])
    return {"W1": W1, "W2": W2, "W3": W3, "W4": W4, "W5": W5, "W6": W6, "W7": W7}


def generator_LV(problem: QuadraticProblem,
                 channel_specs: Sequence[ChannelSpec],
                 s: ErrorCoordinates, t: float,
                 y_star: np.ndarray) -> float:
    """Exact expected instantaneous rate of change of V at (s, t):
    directional derivative along the drift plus rate-weighted jump
    differences (each event on (j, i) wipes out ||e_(j,i)||^2)."""
    w = generator_terms(problem, channel_specs, s, t, y_star)
    return (w["W1"] + 2.0 * w["W2"] + w["W3"] + 2.0 * w["W4"]
            + 2.0 * w["W5"] + w["W6"] + w["W7"])


def _rho_per_sender(rho, n: int) -> tuple[float, ...]:
    if np.isscalar(rho):
        if rho <= 0:
            raise ValueError("rho must be positive")
        return (float(rho),) * n
    rho = tuple(float(r) for r in rho)
    if len(rho) != n or any(r <= 0 for r in rho):
        raise ValueError("need one positive rho per sender")
    return rho


@dataclass(frozen=True)
class MAssembly:
    """Blocks of the generator-bound matrix M(t), materialized at one t.

    Rows/columns of the e-block are indexed by channels in canonical
    sender-major edge order, with block sizes equal to the sender
    dimensions. coupling records which R structure was used.
    """

    M11: np.ndarray
    M21: np.ndarray
    Lambda: np.ndarray
    R: np.ndarray
    rho: tuple[float, ...]
    t: float
    coupling: str

    def full(self) -> np.ndarray:
        return np.block([[self.M11, self.M21.T],
                         [self.M21, self.Lambda + self.R]])


def _edge_block_offsets(layout: SystemLayout) -> list[int]:
    offs = [0]
    for j, _ in layout.edges:
        offs.append(offs[-1] + layout.partition[j])
    return offs


def _build_M21(problem: QuadraticProblem, layout: SystemLayout,
               a_vals: Sequence[float]) -> np.ndarray:
    off = problem.offsets()
    eoff = _edge_block_offsets(layout)
    M21 = np.zeros((eoff[-1], problem.d))
    for r, (j, i) in enumerate(layout.edges):
        for k in range(problem.n):
            B = problem.block(j, k).copy()
            if k == i:
                B -= problem.block(j, i)
            if k == j:
                B += a_vals[r] * np.eye(problem.partition[j])
            M21[eoff[r]:eoff[r + 1], off[k]:off[k + 1]] = B
    return M21


def _build_R(problem: QuadraticProblem, layout: SystemLayout,
             a_vals: Sequence[float], rho: tuple[float, ...],
             coupling: str, diag_override: Sequence[float] | None = None) -> np.ndarray:
    if coupling not in ("exact", "reported"):
        raise ValueError("coupling must be 'exact' or 'reported'")
    eoff = _edge_block_offsets(layout)
    R = np.zeros((eoff[-1], eoff[-1]))
    for r, (j, i) in enumerate(layout.edges):
        if diag_override is not None:
            dval = diag_override[r]
        else:
            a = a_vals[r]
            dval = -2.0 * a - rho[j] * a * a
        R[eoff[r]:eoff[r + 1], eoff[r]:eoff[r + 1]] = dval * np.eye(layout.partition[j])
        for c, (p, q) in enumerate(layout.edges):
            if c == r:
                continue
            if coupling == "reported":
                w = 2.0 if (i == q and j != p) else 0.0
            else:
                w = float(q == j) + float(i == p)
            if w:
                R[eoff[r]:eoff[r + 1], eoff[c]:eoff[c + 1]] = -w * problem.block(j, p)
    return R


def assemble_M(problem: QuadraticProblem,
               channel_specs: Sequence[ChannelSpec],
               rho, t: float, coupling: str = "exact") -> MAssembly:
    """M(t) = [[2Q, M21^T], [M21, Lambda + R]] at time t.

    M21 blocks are Q_jk - [k = i] Q_ji + [k = j] a_(j,i)(t) I; R's
    diagonal blocks are (-2 a - rho_j a^2) I and its coupling structure
    is selected by `coupling` (module docstring).
    """
    layout, ordered = _ordered(problem, channel_specs)
    rho_t = _rho_per_sender(rho, problem.n)
    a_vals = [drift_value(spec, t) for spec in ordered]
    M21 = _build_M21(problem, layout, a_vals)
    R = _build_R(problem, layout, a_vals, rho_t, coupling)
    eoff = _edge_block_offsets(layout)
    Lam = np.zeros((eoff[-1], eoff[-1]))
    for r, spec in enumerate(ordered):
        Lam[eoff[r]:eoff[r + 1], eoff[r]:eoff[r + 1]] = spec.rate * np.eye(
            layout.partition[spec.edge[0]])
    return MAssembly(M11=2.0 * problem.Q, M21=M21, Lambda=Lam, R=R,
                     rho=rho_t, t=float(t), coupling=coupling)


def gamma_prime_value(problem: QuadraticProblem,
                      channel_specs: Sequence[ChannelSpec],
                      y_star: np.ndarray, rho) -> float:
    """Constant offset gamma' aggregating the Young remainders.

    Only channels with a nonzero drift bound contribute: when a channel
    never drifts its optimizer term vanishes identically and no bound is
    taken, so an all-undriven system has gamma' = 0 exactly.
    """
    _, ordered = _ordered(problem, channel_specs)
    rho_t = _rho_per_sender(rho, problem.n) if not (
        np.isscalar(rho) and math.isinf(rho)) else (math.inf,) * problem.n
    off = problem.offsets()
    y_star = np.asarray(y_star, dtype=float)
    gp = 0.0
    for spec in ordered:
        if spec.drift_bound == 0.0:
            continue
        j = spec.edge[0]
        ysj = y_star[off[j]:off[j + 1]]
        gp += float(ysj @ ysj) / rho_t[j]
    return gp


def choose_rho(y_star: np.ndarray, c3: float, gamma: float, n: int) -> tuple[float, float]:
    """Minimal uniform Young weight meeting an ultimate-bound budget.

    Returns (rho, gamma') with rho = (n-1) ||y*||^2 / (c3 gamma), the
    smallest uniform weight for which gamma' = (n-1) ||y*||^2 / rho stays
    within c3 * gamma. A zero optimizer needs no weight: (inf, 0).
    """
    if c3 <= 0 or gamma <= 0:
        raise ValueError("c3 and gamma must be positive")
    y_star = np.asarray(y_star, dtype=float)
    ynorm2 = float(y_star @ y_star)
    if ynorm2 == 0.0:
        return math.inf, 0.0
    rho = (n - 1) * ynorm2 / (c3 * gamma)
    gamma_prime = (n - 1) * ynorm2 / rho
    return rho, gamma_prime


def _check_sym(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square")
    if A.size and np.abs(A - A.T).max() > 1e-10 * max(1.0, np.abs(A).max()):
        raise ValueError(f"{name} must be symmetric")
    return A


def schur_rate_lambda_s(M11: np.ndarray, M12: np.ndarray, R: np.ndarray) -> float:
    """Positive-definiteness threshold for [[M11, M12], [M12^T, L + R]].

    Returns lambda_s = -lambda_min(R - K) with K = M12^T M11^{-1} M12:
    any diagonal L with all entries above lambda_s makes the assembled
    matrix positive definite (Schur complement argument).
    """
    M11 = _check_sym(M11, "M11")
    R = _check_sym(R, "R")
    if np.linalg.eigvalsh(M11)[0] <= 0:
        raise ValueError("M11 must be positive definite")
    M12 = np.asarray(M12, dtype=float)
    if M12.shape != (M11.shape[0], R.shape[0]):
        raise ValueError("M12 must have shape (dim M11, dim R)")
    if R.size == 0:
        return 0.0
    K = M12.T @ np.linalg.solve(M11, M12)
    return float(-np.linalg.eigvalsh(R - K)[0])


def schur_rate_lambda_d(M11: np.ndarray, M12: np.ndarray, R: np.ndarray,
                        mu: float) -> float:
    """Threshold for [[M11, M12], [M12^T, L + R]] - mu I >= 0.

    Returns lambda_d = mu - lambda_min(R - K~) with
    K~ = M12^T (M11 - mu I)^{-1} M12; diagonal entries of L at or above
    lambda_d push the smallest eigenvalue of the assembled matrix to mu.
    Requires 0 < mu < lambda_min(M11).
    """
    M11 = _check_sym(M11, "M11")
    R = _check_sym(R, "R")
    lmin = np.linalg.eigvalsh(M11)[0] if M11.size else 0.0
    if not 0 < mu < lmin:
        raise ValueError(f"mu must lie in (0, lambda_min(M11)) = (0, {lmin:.6g})")
    M12 = np.asarray(M12, dtype=float)
    if R.size == 0:
        return float(mu)
    shifted = M11 - mu * np.eye(M11.shape[0])
    K = M12.T @ np.linalg.solve(shifted, M12)
    return float(mu - np.linalg.eigvalsh(R - K)[0])


@dataclass(frozen=True)
class RateCertificate:
    """Sufficient constant communication rates and their ingredients.

    lambda_s / lambda_d follow the reference convention (module
    docstring); the exact and norm-bound variants of both thresholds are
    carried alongside. R_const is the worst-case constant R in the
    reported structure. rho is the per-sender Young weight actually used
    (inf when no channel drifts) and gamma_prime the resulting offset.
    """

    lambda_s: float
    K_bound: float
    a_max: float
    R_const: np.ndarray
    rho: tuple[float, ...]
    gamma_prime: float
    lambda_min_Q: float
    lambda_s_exact: float
    lambda_s_normbound: float
    lambda_d: float | None = None
    K_bound_beta: float | None = None
    beta_target: float | None = None
    lambda_d_exact: float | None = None
    lambda_d_normbound: float | None = None

    def __post_init__(self):
        if self.beta_target is not None:
            if not 0 < self.beta_target < 2.0 * self.lambda_min_Q:
                raise ValueError("beta_target must lie in (0, 2 lambda_min(Q))")
        if self.lambda_d is not None and self.lambda_d < self.lambda_s - 1e-9:
            raise ValueError("lambda_d must dominate lambda_s")

    def as_dict(self) -> dict:
        out = {
            "lambda_s": self.lambda_s,
            "lambda_s_exact": self.lambda_s_exact,
            "lambda_s_normbound": self.lambda_s_normbound,
            "k_bound": self.K_bound,
            "a_max": self.a_max,
            "rho": self.rho[0] if len(set(self.rho)) <= 1 and self.rho else self.rho,
            "gamma_prime": self.gamma_prime,
            "lambda_min_Q": self.lambda_min_Q,
        }
        if self.beta_target is not None:
            out.update({
                "beta_target": self.beta_target,
                "lambda_d": self.lambda_d,
                "lambda_d_exact": self.lambda_d_exact,
                "lambda_d_normbound": self.lambda_d_normbound,
                "k_bound_beta": self.K_bound_beta,
            })
        return out


def _worst_case_pieces(problem: QuadraticProblem, layout: SystemLayout,
                       ordered: list[ChannelSpec], rho: tuple[float, ...]):
    """Constant worst-case M21 and R diagonals over |a(t)| <= a_ji.

    The diagonal entry -2a - rho a^2 is a downward parabola in a, so its
    minimum over [-a_ji, a_ji] sits at an endpoint; M21 is evaluated at
    the +a_ji endpoint (driftless channels contribute zero either way).
    """
    a_ends = [s.drift_bound for s in ordered]
    M21c = _build_M21(problem, layout, [0.0] * len(ordered))
    M21a = _build_M21(problem, layout, a_ends)
    diag = []
    for r, s in enumerate(ordered):
        ab = s.drift_bound
        if ab == 0.0:
            diag.append(0.0)
            continue
        rj = rho[s.edge[0]]
        diag.append(min(-2.0 * ab - rj * ab * ab, 2.0 * ab - rj * ab * ab))
    return M21c, M21a, diag


def theorem_rates(problem: QuadraticProblem,
                  channel_specs: Sequence[ChannelSpec],
                  rho=None, beta: float | None = None,
                  gamma: float | None = None,
                  c3: float | None = None) -> RateCertificate:
    """Sufficient constant communication rates for the assembled system.

    The headline lambda_s (and lambda_d when a decay target beta is
    given) uses the reference convention: reported R coupling and the
    Schur term K = M21 Q^{-1} M21^T, with M21 and R evaluated at the
    worst-case constant drift a = a_ji. The exact-convention thresholds
    (exact coupling, K against 2Q, the positive-definiteness fact for
    the assembled M) and the closed-form norm bounds
    (K_bound = (||M21_c|| + a_max)^2 ||(2Q)^{-1}||) are computed
    alongside and carried on the certificate.

    rho defaults to the minimal uniform weight for the budget gamma
    (0.01 * 3/2 when not given) at c3 (beta when given, else
    lambda_min(Q)); it is irrelevant and set to inf when no channel
    drifts.
    """
    layout, ordered = _ordered(problem, channel_specs)
    lmin = min_eigenvalue(problem)
    y_star = optimal_solution(problem)
    a_max = max((s.drift_bound for s in ordered), default=0.0)
    drifted = a_max > 0.0

    if beta is not None and not 0 < beta < 2.0 * lmin:
        raise ValueError(f"beta must lie in (0, {2.0 * lmin:.6g})")

    if rho is None:
        if not drifted:
            rho_t = (math.inf,) * problem.n
        else:
            g = gamma if gamma is not None else 0.01 * 1.5
            c3_eff = c3 if c3 is not None else (beta if beta is not None else lmin)
            r, _ = choose_rho(y_star, c3_eff, g, problem.n)
            rho_t = (r,) * problem.n
    else:
        rho_t = _rho_per_sender(rho, problem.n)

    gamma_prime = gamma_prime_value(problem, channel_specs, y_star,
                                    rho_t if drifted else math.inf)

    if not layout.edges:
        # single agent: no channels, nothing to certify
        return RateCertificate(
            lambda_s=0.0, K_bound=0.0, a_max=0.0,
            R_const=np.zeros((0, 0)), rho=rho_t, gamma_prime=0.0,
            lambda_min_Q=lmin, lambda_s_exact=0.0, lambda_s_normbound=0.0,
            beta_target=beta,
            lambda_d=beta if beta is not None else None,
            lambda_d_exact=beta if beta is not None else None,
            lambda_d_normbound=beta if beta is not None else None,
            K_bound_beta=0.0 if beta is not None else None)

    safe_rho = tuple(1.0 if math.isinf(r) else r for r in rho_t)
    M21c, M21a, diag = _worst_case_pieces(problem, layout, ordered, safe_rho)
    a_zero = [0.0] * len(ordered)
    R_rep = _build_R(problem, layout, a_zero, safe_rho, "reported", diag_override=diag)
    R_exa = _build_R(problem, layout, a_zero, safe_rho, "exact", diag_override=diag)

    lambda_s = schur_rate_lambda_s(problem.Q, M21a.T, R_rep)
    lambda_s_exact = schur_rate_lambda_s(2.0 * problem.Q, M21a.T, R_exa)
    norm_M21c = float(np.linalg.norm(M21c, 2))
    K_bound = (norm_M21c + a_max) ** 2 / (2.0 * lmin)
    lambda_s_normbound = float(K_bound - np.linalg.eigvalsh(R_rep)[0])

    lambda_d = K_bound_beta = lambda_d_exact = lambda_d_normbound = None
    if beta is not None:
        half = problem.Q - 0.5 * beta * np.eye(problem.d)
        Kt = M21a @ np.linalg.solve(half, M21a.T)
        lambda_d = float(beta - np.linalg.eigvalsh(R_rep - Kt)[0])
        lambda_d_exact = schur_rate_lambda_d(2.0 * problem.Q, M21a.T, R_exa, beta)
        K_bound_beta = (norm_M21c + a_max) ** 2 / (2.0 * lmin - beta)
        lambda_d_normbound = float(beta + K_bound_beta - np.linalg.eigvalsh(R_rep)[0])

    return RateCertificate(
        lambda_s=lambda_s, K_bound=K_bound, a_max=a_max, R_const=R_rep,
        rho=rho_t, gamma_prime=gamma_prime, lambda_min_Q=lmin,
        lambda_s_exact=lambda_s_exact, lambda_s_normbound=lambda_s_normbound,
        lambda_d=lambda_d, K_bound_beta=K_bound_beta, beta_target=beta,
        lambda_d_exact=lambda_d_exact, lambda_d_normbound=lambda_d_normbound)


def certified_beta(problem: QuadraticProblem,
                   channel_specs: Sequence[ChannelSpec],
                   rho, rate: float, tol: float = 1e-8) -> float | None:
    """Largest decay target beta whose lambda_d stays within `rate`.

    lambda_d is strictly increasing in beta, so a bisection over
    (0, 2 lambda_min(Q)) suffices. None when even lambda_s exceeds rate.
    """
    base = theorem_rates(problem, channel_specs, rho=rho)
    if base.lambda_s > rate:
        return None
    rho_fixed = base.rho  # keep the same ingredients across the bisection
    lo, hi = 0.0, 2.0 * base.lambda_min_Q
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        cert = theorem_rates(problem, channel_specs, rho=rho_fixed, beta=mid)
        if cert.lambda_d <= rate:
            lo = mid
        else:
            hi = mid
    return lo if lo > 0 else None


@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking an ensemble against the decay-plus-offset bound."""

    ok: bool
    first_violation_time: float | None
    max_excess: float


def verify_lemma1_bound(stats, params: LyapunovParams, s0,
                        slack_sems: float = 3.0) -> BoundReport:
    """Check mean V against alpha ||s0||^2 e^{-beta (t - t0)} + gamma.

    `stats` must expose grid, mean and (optionally) sem arrays; the bound
    is relaxed by slack_sems standard errors of the ensemble mean at each
    grid point. s0 may be the stacked initial error vector or the scalar
    value ||s0||^2.
    """
    v0 = float(s0) if np.isscalar(s0) else float(np.asarray(s0) @ np.asarray(s0))
    grid = np.asarray(stats.grid, dtype=float)
    mean = np.asarray(stats.mean, dtype=float)
    sem = getattr(stats, "sem", None)
    slack = slack_sems * np.asarray(sem, dtype=float) if sem is not None else 0.0
    bound = params.alpha * v0 * np.exp(-params.beta * (grid - grid[0])) + params.gamma
    excess = mean - (bound + slack)
    bad = np.nonzero(excess > 0)[0]
    if bad.size:
        return BoundReport(ok=False, first_violation_time=float(grid[bad[0]]),
                           max_excess=float(excess.max()))
    return BoundReport(ok=True, first_violation_time=None,
                       max_excess=float(excess.max()))
