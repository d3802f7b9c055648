"""Independent reference implementations used to cross-check the package.

Everything here works on dense arrays and straight-line formulas, with no
shared code paths into techinfer: the weighted least-squares oracle builds
the full m-by-n weight grid, the ranking oracle sorts a dense score table,
and gradients come from central finite differences.
"""

from __future__ import annotations

import math

import numpy as np


def dense_weights(A_dense: np.ndarray, c: float) -> np.ndarray:
    return np.where(A_dense == 1.0, 1.0, c)


def dense_wmf_objective(
    U: np.ndarray, V: np.ndarray, A_dense: np.ndarray, c: float, reg: float
) -> float:
    W = dense_weights(A_dense, c)
    R = A_dense - U @ V.T
    return float(np.sum(W * R**2) + reg * (np.sum(U**2) + np.sum(V**2)))


def dense_wmf_half_sweep(
    A_dense: np.ndarray, other: np.ndarray, c: float, reg: float, axis: int
) -> np.ndarray:
    """Exact weighted ridge solves for one factor, row by row, using the
    explicit weight grid.  axis=0 solves entity rows, axis=1 item rows."""
    W = dense_weights(A_dense, c)
    targets = A_dense if axis == 0 else A_dense.T
    weights = W if axis == 0 else W.T
    d = other.shape[1]
    out = np.empty((targets.shape[0], d))
    for i in range(targets.shape[0]):
        M = (other.T * weights[i]) @ other + reg * np.eye(d)
        b = (other.T * weights[i]) @ targets[i]
        out[i] = np.linalg.solve(M, b)
    return out


def dense_wmf_als(
    A_dense: np.ndarray,
    U0: np.ndarray,
    V0: np.ndarray,
    c: float,
    reg: float,
    epochs: int,
) -> tuple[np.ndarray, np.ndarray]:
    U, V = U0.copy(), V0.copy()
    for _ in range(epochs):
        U = dense_wmf_half_sweep(A_dense, V, c, reg, axis=0)
        V = dense_wmf_half_sweep(A_dense, U, c, reg, axis=1)
    return U, V


def dense_normal_residuals(
    A_dense: np.ndarray, solved: np.ndarray, other: np.ndarray, c: float, reg: float, axis: int
) -> np.ndarray:
    """Per-row norm of (M x - b) for the weighted normal equations."""
    W = dense_weights(A_dense, c)
    targets = A_dense if axis == 0 else A_dense.T
    weights = W if axis == 0 else W.T
    d = other.shape[1]
    res = np.empty(targets.shape[0])
    for i in range(targets.shape[0]):
        M = (other.T * weights[i]) @ other + reg * np.eye(d)
        b = (other.T * weights[i]) @ targets[i]
        res[i] = np.linalg.norm(M @ solved[i] - b)
    return res


def dense_fold_in(
    V: np.ndarray, observed: set[int], c: float, reg: float
) -> np.ndarray:
    """Single-row weighted ridge against V with the explicit weight vector."""
    n, d = V.shape
    w = np.array([1.0 if j in observed else c for j in range(n)])
    t = np.array([1.0 if j in observed else 0.0 for j in range(n)])
    M = (V.T * w) @ V + reg * np.eye(d)
    b = (V.T * w) @ t
    return np.linalg.solve(M, b)


def brute_force_ranking(
    scores: np.ndarray, exclude: set[int]
) -> list[int]:
    """Full sort on (score descending, index ascending), skipping exclusions."""
    pairs = [(-float(s), j) for j, s in enumerate(scores) if j not in exclude]
    pairs.sort()
    return [j for _, j in pairs]


def brute_force_recall(ranking: list[int], relevant: set[int], k: int) -> float:
    return sum(1 for j in ranking[:k] if j in relevant) / len(relevant)


def brute_force_ndcg(ranking: list[int], relevant: set[int], k: int) -> float:
    dcg = 0.0
    for pos, j in enumerate(ranking[:k], start=1):
        if j in relevant:
            dcg += 1.0 / math.log2(pos + 1)
    ideal = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(k, len(relevant)) + 1))
    return dcg / ideal


def central_difference_gradient(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function, coordinate by coordinate."""
    g = np.empty_like(x, dtype=np.float64)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp.flat[i] += step
        xm.flat[i] -= step
        g.flat[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def bpr_triple_value(
    u: np.ndarray, vj: np.ndarray, vk: np.ndarray, reg: float
) -> float:
    """ln sigma(<u, vj - vk>) - reg * (|u|^2 + |vj|^2 + |vk|^2)."""
    xhat = float(u @ (vj - vk))
    return float(
        -np.logaddexp(0.0, -xhat)
        - reg * (np.sum(u**2) + np.sum(vj**2) + np.sum(vk**2))
    )


def random_binary_matrix(
    rng: np.random.Generator, m: int, n: int, density: float, ensure_rows: bool = True
) -> np.ndarray:
    """Dense 0/1 matrix; optionally guarantees one observation per row."""
    A = (rng.random((m, n)) < density).astype(np.float64)
    if ensure_rows:
        for i in range(m):
            if A[i].sum() == 0:
                A[i, int(rng.integers(n))] = 1.0
    return A
