"""Weighted matrix factorization trained by alternating least squares.

Observed cells carry weight 1 and target 1; unobserved cells carry weight
``negative_weight`` (written ``c`` below) and target 0.  The objective is

    J = sum_obs (1 - <U_i, V_j>)^2
        + c * sum_unobs <U_i, V_j>^2
        + reg * (||U||_F^2 + ||V||_F^2)

Each half-sweep solves every row of one factor exactly against the frozen
opposite factor.  The per-row normal matrix decomposes as

    c * (V^T V) + (1 - c) * sum_{j in obs(i)} V_j V_j^T + reg * I

so a sweep never touches the dense m-by-n grid: the shared Gram matrix
V^T V is computed once and only observed columns are visited per row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dataset import SparseBinaryMatrix
from .errors import EmptyInputError, SingularSystemError
from .model import FactorModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WmfHyperparams:
    """ALS training configuration.

    One epoch is one entity-factor sweep followed by one item-factor sweep.
    Defaults are the tuned values for the technique-inference task.
    """

    embedding_dim: int = 4
    negative_weight: float = 0.001
    regularization: float = 1e-5
    epochs: int = 25
    init_scale: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")
        if not 0.0 <= self.negative_weight < 1.0:
            raise ValueError("negative_weight must be in [0, 1)")
        if self.regularization < 0.0:
            raise ValueError("regularization must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.init_scale <= 0.0:
            raise ValueError("init_scale must be positive")


def init_factors(
    m: int, n: int, d: int, init_scale: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian init, std init_scale/sqrt(d); U drawn first, then V."""
    rng = np.random.default_rng(seed)
    std = init_scale / np.sqrt(d)
    U = rng.normal(0.0, std, size=(m, d))
    V = rng.normal(0.0, std, size=(n, d))
    return U, V


def _solve_rows(
    rows: Sequence[np.ndarray], other: np.ndarray, c: float, reg: float
) -> np.ndarray:
    """Solve every row's weighted ridge problem against the frozen factor.

    rows[i] lists the observed columns of row i.  Raises
    :class:`SingularSystemError` when a normal-equation system is singular,
    which only happens with reg=0 and a degenerate frozen factor.
    """
    d = other.shape[1]
    gram = other.T @ other
    base = c * gram + reg * np.eye(d)
    out = np.empty((len(rows), d))
    for i, cols in enumerate(rows):
        if len(cols):
            observed = other[cols]
            system = base + (1.0 - c) * (observed.T @ observed)
            rhs = observed.sum(axis=0)
        else:
            system = base
            rhs = np.zeros(d)
        try:
            out[i] = np.linalg.solve(system, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                f"singular normal-equation system for row {i}; "
                "a positive regularization remedies this"
            ) from exc
    return out


def solve_entity_factor(A: SparseBinaryMatrix, V: np.ndarray, h: WmfHyperparams) -> np.ndarray:
    """One exact U half-sweep with V frozen."""
    return _solve_rows(A.rows, V, h.negative_weight, h.regularization)


def solve_item_factor(A: SparseBinaryMatrix, U: np.ndarray, h: WmfHyperparams) -> np.ndarray:
    """One exact V half-sweep with U frozen."""
    return _solve_rows(A.item_rows(), U, h.negative_weight, h.regularization)


def _objective_arrays(
    U: np.ndarray, V: np.ndarray, A: SparseBinaryMatrix, c: float, reg: float
) -> float:
    # sum over all cells of <U_i,V_j>^2 equals <U^T U, V^T V>_F (Gram identity),
    # so only observed cells need explicit scores.
    total_sq = float(np.sum((U.T @ U) * (V.T @ V)))
    obs_fit = 0.0
    obs_sq = 0.0
    for i, cols in enumerate(A.rows):
        if not len(cols):
            continue
        scores = V[cols] @ U[i]
        obs_fit += float(np.sum((1.0 - scores) ** 2))
        obs_sq += float(np.sum(scores**2))
    penalty = reg * (float(np.sum(U**2)) + float(np.sum(V**2)))
    return obs_fit + c * (total_sq - obs_sq) + penalty


def wmf_objective(model: FactorModel, A: SparseBinaryMatrix, h: WmfHyperparams) -> float:
    """Evaluate J for a model without materializing the dense matrix."""
    if model.m != A.m or model.n != A.n:
        raise ValueError(
            f"model is {model.m}x{model.n} but matrix is {A.m}x{A.n}"
        )
    return _objective_arrays(model.U, model.V, A, h.negative_weight, h.regularization)


def placeholder_catalogs(m: int, n: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Synthetic catalogs for matrices trained outside a dataset context."""
    return tuple(f"row{i}" for i in range(m)), tuple(f"col{j}" for j in range(n))


def train_wmf(
    A: SparseBinaryMatrix,
    h: WmfHyperparams,
    entity_catalog: Sequence[str] | None = None,
    item_catalog: Sequence[str] | None = None,
) -> FactorModel:
    """Run ALS for ``h.epochs`` sweeps and return the factor model.

    The objective is recorded after every epoch in
    ``model.objective_history`` and is non-increasing across epochs.
    Deterministic: a fixed (matrix, hyperparams) pair reproduces U and V
    bit for bit on one platform.
    """
    h.validate()
    if A.nnz == 0:
        raise EmptyInputError("empty interaction matrix")
    if h.embedding_dim >= min(A.m, A.n):
        logger.warning(
            "embedding_dim %d is not below min(m, n)=%d; the factorization "
            "is not rank-reducing",
            h.embedding_dim,
            min(A.m, A.n),
        )
    U, V = init_factors(A.m, A.n, h.embedding_dim, h.init_scale, h.seed)
    history: list[float] = []
    for _ in range(h.epochs):
        U = solve_entity_factor(A, V, h)
        V = solve_item_factor(A, U, h)
        history.append(_objective_arrays(U, V, A, h.negative_weight, h.regularization))
    if entity_catalog is None or item_catalog is None:
        entity_catalog, item_catalog = placeholder_catalogs(A.m, A.n)
    model = FactorModel(
        U=U,
        V=V,
        entity_catalog=tuple(entity_catalog),
        item_catalog=tuple(item_catalog),
        trained_by="wmf",
        similarity="dot",
        objective_history=history,
    )
    model.validate()
    return model


def fold_in(
    V: np.ndarray, observed: Iterable[int], c: float, reg: float
) -> np.ndarray:
    """Embed a new entity from its observed item set against frozen V.

    Solves the same single-row weighted ridge problem the U half-sweep
    uses: one exact solve, no iteration.  An empty observed set with
    positive regularization yields the zero vector.
    """
    if V.shape[0] == 0:
        raise EmptyInputError("empty item catalog")
    cols = np.asarray(sorted(set(int(j) for j in observed)), dtype=np.intp)
    if len(cols) and (cols[0] < 0 or cols[-1] >= V.shape[0]):
        raise ValueError("observed item index out of range")
    return _solve_rows([cols], V, c, reg)[0]


def fold_in_entity(
    model: FactorModel, observed: Iterable[int], h: WmfHyperparams
) -> np.ndarray:
    """Fold a new observed-item set into ``model``'s item space.

    This is the WMF inference path; the same ridge solve doubles as a
    fold-in heuristic for models trained other ways.
    """
    return fold_in(model.V, observed, h.negative_weight, h.regularization)
