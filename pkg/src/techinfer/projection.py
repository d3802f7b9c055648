"""2D embedding maps: exact t-SNE plus flat-kernel mean-shift clustering.

The t-SNE here is the exact O(m^2) formulation, no tree approximation:
per-point bandwidths are calibrated by bisection until the conditional
distribution's perplexity (2^entropy) hits the target, affinities are
symmetrized, and the 2D layout descends the KL divergence with plain
gradient steps plus momentum (no adaptive gains).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, PerplexityInfeasibleError

_BISECTION_MAX_ITERS = 200
_MEAN_SHIFT_TOL = 1e-6
_MEAN_SHIFT_MAX_ITERS = 300


@dataclass(frozen=True)
class ProjectionConfig:
    perplexity: float = 30.0
    distance: str = "cosine"
    iterations: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    learning_rate: float = 200.0
    seed: int = 0

    def validate(self) -> None:
        if self.perplexity <= 0.0:
            raise ValueError("perplexity must be positive")
        if self.distance not in ("cosine", "euclidean"):
            raise ValueError("distance must be 'cosine' or 'euclidean'")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.early_exaggeration <= 0.0:
            raise ValueError("early_exaggeration must be positive")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")


@dataclass
class EmbeddingProjection:
    coords: np.ndarray
    cluster_labels: np.ndarray
    mode_centers: np.ndarray


def pairwise_distances(X: np.ndarray, distance: str) -> np.ndarray:
    """Distance matrix feeding the affinity kernel.

    euclidean uses squared distances (the kernel's conventional input);
    cosine uses 1 - cosine similarity, with zero-norm rows treated as
    dissimilar to everything.
    """
    X = np.asarray(X, dtype=np.float64)
    if distance == "euclidean":
        sq = np.sum(X**2, axis=1)
        D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
        np.maximum(D, 0.0, out=D)
    elif distance == "cosine":
        norms = np.linalg.norm(X, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        Xn = X / safe[:, None]
        sim = Xn @ Xn.T
        sim[norms == 0.0, :] = 0.0
        sim[:, norms == 0.0] = 0.0
        D = 1.0 - sim
        np.maximum(D, 0.0, out=D)
    else:
        raise ValueError(f"unknown distance {distance!r}")
    np.fill_diagonal(D, 0.0)
    return D


def _calibrated_row(d_row: np.ndarray, perplexity: float, tol: float) -> np.ndarray:
    """Bisection on the kernel precision beta until 2^H(p) hits the target.

    When the row cannot reach the target (all neighbors equidistant, say)
    the last bracket midpoint's distribution is returned.
    """
    beta, beta_lo, beta_hi = 1.0, 0.0, np.inf
    p = np.empty_like(d_row)
    for _ in range(_BISECTION_MAX_ITERS):
        logits = -d_row * beta
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        nz = p > 0.0
        entropy_bits = float(-np.sum(p[nz] * np.log2(p[nz])))
        perp = 2.0**entropy_bits
        if abs(perp - perplexity) <= tol:
            break
        if perp > perplexity:
            beta_lo = beta
            beta = beta * 2.0 if np.isinf(beta_hi) else (beta_lo + beta_hi) / 2.0
        else:
            beta_hi = beta
            beta = (beta_lo + beta_hi) / 2.0
    return p


def conditional_affinities(
    D: np.ndarray, perplexity: float, tol: float = 1e-4
) -> np.ndarray:
    """Row-stochastic conditional affinities with per-row calibrated bandwidth."""
    m = D.shape[0]
    P = np.zeros((m, m))
    idx = np.arange(m)
    for i in range(m):
        others = idx != i
        P[i, others] = _calibrated_row(D[i, others], perplexity, tol)
    return P


def joint_affinities(P_cond: np.ndarray) -> np.ndarray:
    """Symmetrize: p_ij = (p_j|i + p_i|j) / (2m); the result sums to 1."""
    m = P_cond.shape[0]
    return (P_cond + P_cond.T) / (2.0 * m)


def _kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0.0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], 1e-300))))


def tsne(
    X: np.ndarray, cfg: ProjectionConfig, return_kl_history: bool = False
) -> np.ndarray | tuple[np.ndarray, list[float]]:
    """Project rows of X to 2D coordinates.

    Early exaggeration multiplies P for the first ``exaggeration_iters``
    iterations; momentum is 0.5 during that phase and 0.8 after.  The KL
    history (against the true, unexaggerated P) is returned on request.
    """
    cfg.validate()
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[0]
    if m < 4:
        raise EmptyInputError("t-SNE needs at least 4 points")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite input")
    if cfg.perplexity >= (m - 1) / 3.0:
        raise PerplexityInfeasibleError(
            f"perplexity {cfg.perplexity} infeasible for {m} points "
            f"(needs perplexity < {(m - 1) / 3.0:.2f})"
        )

    D = pairwise_distances(X, cfg.distance)
    P = joint_affinities(conditional_affinities(D, cfg.perplexity))

    rng = np.random.default_rng(cfg.seed)
    Y = rng.normal(0.0, 1e-4, size=(m, 2))
    velocity = np.zeros_like(Y)
    kl_history: list[float] = []

    for it in range(cfg.iterations):
        exaggerating = it < cfg.exaggeration_iters
        P_used = P * cfg.early_exaggeration if exaggerating else P

        sq = np.sum(Y**2, axis=1)
        num = 1.0 / (1.0 + sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T))
        np.fill_diagonal(num, 0.0)
        Q = num / num.sum()

        W = (P_used - Q) * num
        grad = 4.0 * (W.sum(axis=1)[:, None] * Y - W @ Y)

        momentum = 0.5 if exaggerating else 0.8
        velocity = momentum * velocity - cfg.learning_rate * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)

        if return_kl_history:
            sq = np.sum(Y**2, axis=1)
            num = 1.0 / (1.0 + sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T))
            np.fill_diagonal(num, 0.0)
            kl_history.append(_kl_divergence(P, num / num.sum()))

    if return_kl_history:
        return Y, kl_history
    return Y


def mean_shift(points: np.ndarray, bandwidth: float) -> tuple[np.ndarray, np.ndarray]:
    """Flat-kernel mean shift over 2D points.

    Every point iterates to the mean of its neighbors within ``bandwidth``
    until the shift drops below 1e-6 (or 300 iterations).  Converged modes
    closer than the bandwidth merge into the higher-support mode, and each
    point is labeled by its nearest surviving mode.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise EmptyInputError("mean shift needs at least one point")
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")

    m = points.shape[0]
    converged = np.empty_like(points)
    support = np.empty(m, dtype=np.intp)
    for i in range(m):
        x = points[i]
        neighbors = 1
        for _ in range(_MEAN_SHIFT_MAX_ITERS):
            dist = np.linalg.norm(points - x, axis=1)
            within = dist <= bandwidth
            neighbors = int(within.sum())
            x_new = points[within].mean(axis=0)
            shift = float(np.linalg.norm(x_new - x))
            x = x_new
            if shift < _MEAN_SHIFT_TOL:
                break
        converged[i] = x
        support[i] = neighbors

    # Higher-support candidates claim their bandwidth neighborhood first.
    order = sorted(range(m), key=lambda i: (-support[i], i))
    kept: list[np.ndarray] = []
    for i in order:
        if all(np.linalg.norm(converged[i] - c) >= bandwidth for c in kept):
            kept.append(converged[i])
    centers = np.array(kept)
    labels = np.argmin(
        np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2), axis=1
    ).astype(np.intp)
    return labels, centers


def project(
    X: np.ndarray, cfg: ProjectionConfig, bandwidth: float = 10.0
) -> EmbeddingProjection:
    """t-SNE the embeddings, then cluster the 2D coordinates."""
    coords = tsne(X, cfg)
    labels, centers = mean_shift(coords, bandwidth)
    return EmbeddingProjection(coords=coords, cluster_labels=labels, mode_centers=centers)


def export_projection(proj: EmbeddingProjection, entity_catalog: Sequence[str]) -> bytes:
    """CSV export `report_id,x,y,cluster`; coordinates keep full precision."""
    out = io.StringIO()
    out.write("report_id,x,y,cluster\n")
    for rid, (x, y), label in zip(entity_catalog, proj.coords, proj.cluster_labels):
        out.write(f"{rid},{float(x)!r},{float(y)!r},{int(label)}\n")
    return out.getvalue().encode("utf-8")
