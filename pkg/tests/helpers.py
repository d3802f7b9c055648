"""Shared fixtures-in-plain-functions for the test suite."""

from __future__ import annotations

import numpy as np

from techinfer.dataset import InteractionDataset, SparseBinaryMatrix


def technique_ids(n: int) -> list[str]:
    return [f"T{1000 + j:04d}" for j in range(n)]


def report_ids(m: int) -> list[str]:
    return [f"r{i:03d}" for i in range(m)]


def matrix_from_dense(A_dense: np.ndarray) -> SparseBinaryMatrix:
    m, n = A_dense.shape
    rows = tuple(
        np.asarray(np.flatnonzero(A_dense[i] == 1.0), dtype=np.intp) for i in range(m)
    )
    return SparseBinaryMatrix(m=m, n=n, rows=rows)


def dense_from_matrix(A: SparseBinaryMatrix) -> np.ndarray:
    dense = np.zeros((A.m, A.n))
    for i, cols in enumerate(A.rows):
        dense[i, cols] = 1.0
    return dense


def dataset_from_dense(A_dense: np.ndarray) -> InteractionDataset:
    m, n = A_dense.shape
    reports = report_ids(m)
    techniques = technique_ids(n)
    pairs = [
        (reports[i], techniques[j])
        for i in range(m)
        for j in range(n)
        if A_dense[i, j] == 1.0
    ]
    return InteractionDataset.from_pairs(pairs)


def planted_block_dataset(
    seed: int,
    m: int = 200,
    n: int = 50,
    per_entity: int = 8,
    noise_frac: float = 0.05,
) -> InteractionDataset:
    """Two orthogonal block factors: the first half of the entities draws
    items from the first half of the catalog, the second half from the
    second, plus a slice of uniformly misplaced noise observations."""
    rng = np.random.default_rng(seed)
    reports = report_ids(m)
    techniques = technique_ids(n)
    half_m, half_n = m // 2, n // 2
    pairs: set[tuple[str, str]] = set()
    for i in range(m):
        block = range(half_n) if i < half_m else range(half_n, n)
        chosen = rng.choice(list(block), size=per_entity, replace=False)
        for j in chosen:
            pairs.add((reports[i], techniques[int(j)]))
    n_noise = int(round(noise_frac * len(pairs)))
    while n_noise > 0:
        i = int(rng.integers(m))
        off_block = range(half_n, n) if i < half_m else range(half_n)
        j = int(rng.choice(list(off_block)))
        pair = (reports[i], techniques[j])
        if pair not in pairs:
            pairs.add(pair)
            n_noise -= 1
    return InteractionDataset.from_pairs(sorted(pairs))
