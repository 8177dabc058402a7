"""Small dense kernels for the B x B and m x m matrices the proxies produce."""

from __future__ import annotations

import math

import numpy as np


def jacobi_eigenvalues(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {a.shape}")
    if n > 64:
        raise ValueError(f"jacobi_eigenvalues is meant for n <= 64, got {n}")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                g = 100.0 * abs(apq)
                if abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    # below the diagonal's precision: drop it
                    a[p, q] = a[q, p] = 0.0
                    continue
                h = a[q, q] - a[p, p]
                if abs(h) + g == abs(h):
                    t = apq / h  # theta would overflow; t ~ 1/(2 theta)
                else:
                    theta = h / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi sweeps did not converge")
    return np.sort(np.diag(a))


def lu_logabsdet(a: np.ndarray, rel_pivot_tol: float = 1e-12) -> tuple[float, bool]:
    """``log|det A|`` via LU with partial pivoting.

    Returns ``(logabsdet, singular)``; ``singular`` is True when a pivot is
    negligible relative to the largest entry or ``|det|`` underflows 1e-300.
    """
    u = np.array(a, dtype=np.float64)
    n = u.shape[0]
    if u.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {u.shape}")
    big = np.abs(u).max(initial=0.0)
    if big == 0.0:
        return -math.inf, True
    logdet = 0.0
    for k in range(n):
        piv = k + int(np.argmax(np.abs(u[k:, k])))
        if piv != k:
            u[[k, piv]] = u[[piv, k]]
        pivot = u[k, k]
        if abs(pivot) <= rel_pivot_tol * big:
            return -math.inf, True
        logdet += math.log(abs(pivot))
        if k + 1 < n:
            factors = u[k + 1:, k] / pivot
            u[k + 1:, k:] -= np.outer(factors, u[k, k:])
    return logdet, logdet < math.log(1e-300)
