"""Popularity baseline: rank items by training-set frequency."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .dataset import SparseBinaryMatrix
from .errors import EmptyInputError
from .model import FactorModel
from .wmf import placeholder_catalogs


def train_top_techniques(
    A: SparseBinaryMatrix,
    entity_catalog: Sequence[str] | None = None,
    item_catalog: Sequence[str] | None = None,
) -> FactorModel:
    """Count, per item, how many entities observed it.

    The result is a d=1 factor model with all-ones entity rows and the
    frequency in each item row, so dot-product ranking reproduces the
    frequency ranking for every entity alike (ties resolve to the lower
    item index, as everywhere else).
    """
    if A.nnz == 0:
        raise EmptyInputError("empty interaction matrix")
    counts = np.zeros(A.n, dtype=np.float64)
    for row in A.rows:
        counts[row] += 1.0
    if entity_catalog is None or item_catalog is None:
        entity_catalog, item_catalog = placeholder_catalogs(A.m, A.n)
    model = FactorModel(
        U=np.ones((A.m, 1)),
        V=counts.reshape(A.n, 1),
        entity_catalog=tuple(entity_catalog),
        item_catalog=tuple(item_catalog),
        trained_by="popularity",
        similarity="dot",
    )
    model.validate()
    return model
