"""Support enumeration for small bimatrix games."""

from __future__ import annotations

import itertools

import numpy as np

TOL = 1e-9


def _indifferent_mix(M, rows, cols):
    """Mix over ``cols`` making every row in ``rows`` of ``M`` earn the same value.

    Returns (mix over all columns, common value) or None.
    """
    r, c = len(rows), len(cols)
    sub = M[np.ix_(rows, cols)]
    # unknowns: q_cols (c) and v; equations: sub @ q - v = 0 (r), sum q = 1
    lhs = np.zeros((r + 1, c + 1))
    lhs[:r, :c] = sub
    lhs[:r, c] = -1.0
    lhs[r, :c] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if np.max(np.abs(lhs @ sol - rhs)) > 1e-7:
        return None
    q = np.zeros(M.shape[1])
    q[list(cols)] = sol[:c]
    if np.any(q < -1e-10):
        return None
    q = np.clip(q, 0.0, None)
    total = q.sum()
    if total <= 0:
        return None
    return q / total


def is_equilibrium(A, B, p, q, tol: float = TOL) -> bool:
    """Neither player gains more than ``tol`` by a unilateral deviation."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    row_vals = A @ q
    col_vals = p @ B
    return (row_vals.max() - p @ row_vals <= tol) and (col_vals.max() - col_vals @ q <= tol)


def deviation_gain(A, B, p, q) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    row_vals = A @ q
    col_vals = p @ B
    return float(max(row_vals.max() - p @ row_vals, col_vals.max() - col_vals @ q))


def support_enumeration(A, B) -> list[tuple[np.ndarray, np.ndarray]]:
    """All equilibria found by enumerating support pairs (row strategy, column strategy).

    Degenerate games can have continua of equilibria; one representative per
    support pair is returned in that case.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    m, n = A.shape
    found: list[tuple[np.ndarray, np.ndarray]] = []
    for size_r in range(1, m + 1):
        for size_c in range(1, n + 1):
            for rows in itertools.combinations(range(m), size_r):
                for cols in itertools.combinations(range(n), size_c):
                    q = _indifferent_mix(A, rows, cols)
                    if q is None:
                        continue
                    p = _indifferent_mix(B.T, cols, rows)
                    if p is None:
                        continue
                    # supports must be exactly the chosen ones
                    if np.any(p[list(rows)] <= 1e-12) or np.any(q[list(cols)] <= 1e-12):
                        continue
                    if not is_equilibrium(A, B, p, q):
                        continue
                    if any(np.allclose(p, p2, atol=1e-9) and np.allclose(q, q2, atol=1e-9)
                           for p2, q2 in found):
                        continue
                    found.append((p, q))
    return found


def pure_equilibria(A, B) -> list[tuple[int, int]]:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    out = []
    col_best = A.max(axis=0)
    row_best = B.max(axis=1)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if A[i, j] >= col_best[j] - TOL and B[i, j] >= row_best[i] - TOL:
                out.append((i, j))
    return out
