"""Pairwise ranking factorization trained by stochastic triple sampling.

Training draws (entity, positive item, negative item) triples and pushes
the positive score above the negative one: with
xhat = <U_i, V_j - V_k> and s = 1 / (1 + exp(xhat)), one update moves

    U_i += lr * (s * (V_j - V_k) - reg * U_i)
    V_j += lr * (s * U_i       - reg * V_j)
    V_k += lr * (-s * U_i      - reg * V_k)

all from their pre-step values.  Batch size is 1: every observed pair is
expected to be visited once per epoch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import SparseBinaryMatrix
from .errors import NoTriplesError
from .model import FactorModel
from .wmf import init_factors, placeholder_catalogs

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BprHyperparams:
    """SGD training configuration; defaults are the tuned values."""

    embedding_dim: int = 16
    learning_rate: float = 0.02
    regularization: float = 0.01
    epochs: int = 100
    init_scale: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.regularization < 0.0:
            raise ValueError("regularization must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.init_scale <= 0.0:
            raise ValueError("init_scale must be positive")


def log_sigmoid(x: float) -> float:
    """ln sigma(x), stable for large |x|."""
    return float(-np.logaddexp(0.0, -x))


def _sigmoid_neg(x: float) -> float:
    """sigma(-x) = 1 / (1 + exp(x)), stable for large |x|."""
    return float(np.exp(-np.logaddexp(0.0, x)))


def _eligible_entities(A: SparseBinaryMatrix) -> list[int]:
    """Entities that can produce a triple: at least one observed item and at
    least one unobserved item.  Others are skipped with a diagnostic."""
    eligible = [i for i in range(A.m) if 0 < len(A.rows[i]) < A.n]
    skipped = A.m - len(eligible)
    if skipped:
        logger.info("%d entit(ies) yield no triples and are skipped", skipped)
    if not eligible:
        raise NoTriplesError("no entity has both an observed and an unobserved item")
    return eligible


def sample_triple(
    A: SparseBinaryMatrix,
    eligible: Sequence[int],
    row_sets: Sequence[set[int]],
    rng: np.random.Generator,
) -> tuple[int, int, int]:
    """Draw one training triple: entity uniform over ``eligible``, positive
    uniform over its row, negative by rejection against the row."""
    i = int(eligible[int(rng.integers(len(eligible)))])
    row = A.rows[i]
    j = int(row[int(rng.integers(len(row)))])
    while True:
        k = int(rng.integers(A.n))
        if k not in row_sets[i]:
            return i, j, k


def triple_gradient(
    u: np.ndarray, vj: np.ndarray, vk: np.ndarray, reg: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradient of ln sigma(<u, vj - vk>) - reg*(|u|^2 + |vj|^2 + |vk|^2)
    with respect to (u, vj, vk)."""
    s = _sigmoid_neg(float(u @ (vj - vk)))
    gu = s * (vj - vk) - 2.0 * reg * u
    gj = s * u - 2.0 * reg * vj
    gk = -s * u - 2.0 * reg * vk
    return gu, gj, gk


def train_bpr(
    A: SparseBinaryMatrix,
    h: BprHyperparams,
    entity_catalog: Sequence[str] | None = None,
    item_catalog: Sequence[str] | None = None,
) -> FactorModel:
    """Run ``h.epochs * A.nnz`` single-triple updates and return the model.

    Initialization matches the WMF scheme so the two trainers are
    comparable under one seed.  Updates are strictly sequential; the
    sampling stream makes the result deterministic under the seed.
    """
    h.validate()
    eligible = _eligible_entities(A)
    row_sets = A.row_sets()
    U, V = init_factors(A.m, A.n, h.embedding_dim, h.init_scale, h.seed)
    rng = np.random.default_rng(h.seed)
    lr = h.learning_rate
    reg = h.regularization
    for _ in range(h.epochs):
        for _ in range(A.nnz):
            i, j, k = sample_triple(A, eligible, row_sets, rng)
            u, vj, vk = U[i].copy(), V[j].copy(), V[k].copy()
            s = _sigmoid_neg(float(u @ (vj - vk)))
            U[i] = u + lr * (s * (vj - vk) - reg * u)
            V[j] = vj + lr * (s * u - reg * vj)
            V[k] = vk + lr * (-s * u - reg * vk)
    if entity_catalog is None or item_catalog is None:
        entity_catalog, item_catalog = placeholder_catalogs(A.m, A.n)
    model = FactorModel(
        U=U,
        V=V,
        entity_catalog=tuple(entity_catalog),
        item_catalog=tuple(item_catalog),
        trained_by="bpr",
        similarity="dot",
    )
    model.validate()
    return model


def bpr_mean_objective(
    model: FactorModel,
    A: SparseBinaryMatrix,
    reg: float,
    sample_count: int,
    seed: int,
) -> float:
    """Monte-Carlo mean of ln sigma(x(i,j) - x(i,k)) over uniform triples,
    minus reg * (|U|^2 + |V|^2).  Convergence tracking only.

    Triples are uniform over the full triple set: entities are drawn in
    proportion to how many triples they contribute, then (positive,
    negative) uniformly within the entity.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    counts = np.array([len(r) * (A.n - len(r)) for r in A.rows], dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise NoTriplesError("no valid triples in the matrix")
    row_sets = A.row_sets()
    rng = np.random.default_rng(seed)
    entities = rng.choice(A.m, size=sample_count, p=counts / total)
    acc = 0.0
    for i in entities:
        i = int(i)
        row = A.rows[i]
        j = int(row[int(rng.integers(len(row)))])
        while True:
            k = int(rng.integers(A.n))
            if k not in row_sets[i]:
                break
        xhat = float(model.U[i] @ (model.V[j] - model.V[k]))
        acc += log_sigmoid(xhat)
    penalty = reg * (float(np.sum(model.U**2)) + float(np.sum(model.V**2)))
    return acc / sample_count - penalty
