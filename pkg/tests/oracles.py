"""Independent reference implementations used to cross-check the library.

Everything in this module is deliberately written from first principles
(no calls into jumpgrad, no numpy.linalg for the core algorithms) so that
agreement between the package and these routines is meaningful.
"""

import math

import numpy as np


def solve_linear_gauss(A, b):
    """Solve A x = b by Gaussian elimination with partial pivoting.

    Plain O(n^3) textbook elimination. Raises ValueError on a zero pivot.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError("shape mismatch")
    aug = np.hstack([A, b[:, None]])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[pivot, col]) < 1e-14:
            raise ValueError("singular matrix")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        for row in range(col + 1, n):
            factor = aug[row, col] / aug[col, col]
            aug[row, col:] -= factor * aug[col, col:]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (aug[row, n] - aug[row, row + 1:n] @ x[row + 1:]) / aug[row, row]
    return x


def jacobi_eigenvalues(A, tol=1e-14, max_sweeps=100):
    """All eigenvalues of a symmetric matrix via the cyclic Jacobi method.

    Repeatedly zeroes each off-diagonal entry with a Givens rotation until
    the off-diagonal mass falls below tol. Returns eigenvalues sorted
    ascending.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A[0, :].copy()
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += A[p, q] * A[p, q]
        if math.sqrt(2.0 * off) < tol * max(1.0, np.max(np.abs(np.diag(A)))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                # rotation angle that annihilates A[p, q]
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
    return np.sort(np.diag(A))


def jacobi_min_eigenvalue(A, tol=1e-14):
    return float(jacobi_eigenvalues(A, tol=tol)[0])


def direct_generator(drift, jump_maps, rates, V, u, t, h=1e-6):
    """Evaluate the infinitesimal generator of a jump-diffusion-free PDMP.

    drift(t, u) gives the continuous vector field, jump_maps[c](u) the
    state increment applied at an event of channel c, rates[c] its Poisson
    intensity, and V the test function. The flow part is a central
    difference of V along the drift direction; the jump part is the exact
    rate-weighted sum of V(u + g_c(u)) - V(u).
    """
    u = np.asarray(u, dtype=float)
    f = np.asarray(drift(t, u), dtype=float)
    flow = (V(u + h * f) - V(u - h * f)) / (2.0 * h)
    jump = 0.0
    for g, lam in zip(jump_maps, rates):
        jump += lam * (V(u + g(u)) - V(u))
    return flow + jump


def quadratic_value(Q, q, y):
    """0.5 y'Qy + q'y, summed explicitly."""
    Q = np.asarray(Q, dtype=float)
    q = np.asarray(q, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    n = len(y)
    for i in range(n):
        total += q[i] * y[i]
        for j in range(n):
            total += 0.5 * y[i] * Q[i, j] * y[j]
    return total
