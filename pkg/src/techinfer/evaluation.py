"""Ranking, recall@K / NDCG@K, grid search, and repeated-run averaging.

Per-entity protocol: rank every item the entity did not see in training,
score the ranking against that entity's withheld items, and average the
metrics over entities that have at least one withheld item.
"""

from __future__ import annotations

import io
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .baseline import train_top_techniques
from .bpr import BprHyperparams, train_bpr
from .dataset import SparseBinaryMatrix, SplitDataset, to_matrix
from .errors import NoEvaluableEntitiesError, TechInferError
from .model import FactorModel
from .wmf import WmfHyperparams, train_wmf

logger = logging.getLogger(__name__)

# Grids mirror the published hyperparameter sweeps for each trainer.
DEFAULT_BPR_GRID: dict[str, list] = {
    "embedding_dim": [4, 8, 16, 32],
    "learning_rate": [0.00001, 0.00005, 0.0001, 0.001, 0.005, 0.01, 0.02, 0.05],
    "regularization": [0.0, 0.0001, 0.001, 0.01],
}
DEFAULT_WMF_GRID: dict[str, list] = {
    "embedding_dim": [4, 8, 16, 32],
    "negative_weight": [0.0001, 0.001, 0.005, 0.01, 0.05, 0.1, 0.3, 0.5, 0.7],
    "regularization": [0.0, 0.00001, 0.0001, 0.001, 0.01],
}


@dataclass(frozen=True)
class RankedPredictions:
    """Items in score order; the rank of position p is p + 1."""

    items: tuple[int, ...]
    scores: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        for p, (item, score) in enumerate(zip(self.items, self.scores)):
            yield item, score, p + 1


def score_items(model: FactorModel, entity_embedding: np.ndarray, similarity: str) -> np.ndarray:
    """Score every item for one entity embedding.

    Dot: <u, V_j>.  Cosine: the dot normalized by both norms; a zero norm on
    either side scores 0.
    """
    u = np.asarray(entity_embedding, dtype=np.float64)
    if u.shape != (model.d,):
        raise ValueError(f"embedding length {u.shape} does not match d={model.d}")
    raw = model.V @ u
    if similarity == "dot":
        return raw
    if similarity == "cosine":
        u_norm = float(np.linalg.norm(u))
        v_norms = np.linalg.norm(model.V, axis=1)
        denom = u_norm * v_norms
        return np.where(denom > 0.0, np.divide(raw, denom, where=denom > 0.0), 0.0)
    raise ValueError(f"unknown similarity {similarity!r}")


def rank_items(
    model: FactorModel,
    entity_embedding: np.ndarray,
    exclude: Iterable[int] = (),
    similarity: str = "dot",
) -> RankedPredictions:
    """Rank all items by score, descending, skipping ``exclude``.

    Ties break toward the lower item index so rankings are reproducible.
    """
    scores = score_items(model, entity_embedding, similarity)
    excluded = set(int(j) for j in exclude)
    candidates = np.array([j for j in range(model.n) if j not in excluded], dtype=np.intp)
    # lexsort uses the last key as primary: score descending, then index.
    order = np.lexsort((candidates, -scores[candidates]))
    ranked = candidates[order]
    return RankedPredictions(
        items=tuple(int(j) for j in ranked),
        scores=tuple(float(scores[j]) for j in ranked),
    )


def recall_at_k(ranked: RankedPredictions, test_items: set[int], k: int) -> float:
    """Fraction of the withheld items appearing in the top k."""
    if not test_items:
        raise ValueError("test_items must be nonempty; skip such entities")
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for item in ranked.items[:k] if item in test_items)
    return hits / len(test_items)


def ndcg_at_k(ranked: RankedPredictions, test_items: set[int], k: int) -> float:
    """Position-discounted hit gain over the best achievable ranking."""
    if not test_items:
        raise ValueError("test_items must be nonempty; skip such entities")
    if k < 1:
        raise ValueError("k must be >= 1")
    dcg = sum(
        1.0 / math.log2(pos + 1)
        for pos, item in enumerate(ranked.items[:k], start=1)
        if item in test_items
    )
    ideal = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(k, len(test_items)) + 1))
    return dcg / ideal


@dataclass
class RankingMetrics:
    """Averaged recall and NDCG per cutoff, over the evaluated entities."""

    recall: dict[int, float]
    ndcg: dict[int, float]
    entities_evaluated: int
    per_run: list["RankingMetrics"] = field(default_factory=list, repr=False)


def _observations_by_entity(observations: Iterable[tuple[int, int]], m: int) -> list[set[int]]:
    per_entity: list[set[int]] = [set() for _ in range(m)]
    for e, i in observations:
        per_entity[e].add(i)
    return per_entity


def evaluate(
    model: FactorModel,
    split: SplitDataset,
    target: str = "test",
    ks: Sequence[int] = (10, 20, 50),
) -> RankingMetrics:
    """Score the model on the validation or test partition.

    For each entity with a nonempty withheld set, items from that entity's
    training history are excluded from the candidate ranking; both metrics
    are averaged over the evaluated entities only.
    """
    if target not in ("validation", "test"):
        raise ValueError("target must be 'validation' or 'test'")
    part = split.validation if target == "validation" else split.test
    m = len(part.entities)
    train_by_entity = _observations_by_entity(split.train.observations, m)
    target_by_entity = _observations_by_entity(part.observations, m)

    recall_acc = {k: 0.0 for k in ks}
    ndcg_acc = {k: 0.0 for k in ks}
    evaluated = 0
    for e in range(m):
        withheld = target_by_entity[e]
        if not withheld:
            continue
        ranked = rank_items(
            model, model.U[e], exclude=train_by_entity[e], similarity=model.similarity
        )
        for k in ks:
            recall_acc[k] += recall_at_k(ranked, withheld, k)
            ndcg_acc[k] += ndcg_at_k(ranked, withheld, k)
        evaluated += 1
    if evaluated == 0:
        raise NoEvaluableEntitiesError(f"no entity has observations in {target}")
    return RankingMetrics(
        recall={k: recall_acc[k] / evaluated for k in ks},
        ndcg={k: ndcg_acc[k] / evaluated for k in ks},
        entities_evaluated=evaluated,
    )


def train_model(
    kind: str,
    A: SparseBinaryMatrix,
    hyperparams: WmfHyperparams | BprHyperparams | None,
    entity_catalog: Sequence[str] | None = None,
    item_catalog: Sequence[str] | None = None,
) -> FactorModel:
    """Dispatch to the trainer for ``kind``; popularity ignores hyperparams."""
    if kind == "wmf":
        return train_wmf(A, hyperparams or WmfHyperparams(), entity_catalog, item_catalog)
    if kind == "bpr":
        return train_bpr(A, hyperparams or BprHyperparams(), entity_catalog, item_catalog)
    if kind == "popularity":
        return train_top_techniques(A, entity_catalog, item_catalog)
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class GridSearchRecord:
    hyperparams: WmfHyperparams | BprHyperparams
    similarity: str
    recall_at_20: float | None
    ndcg_at_20: float | None
    error: str | None = None


@dataclass
class GridSearchResult:
    records: list[GridSearchRecord]
    best: int

    @property
    def best_record(self) -> GridSearchRecord:
        return self.records[self.best]


def _grid_combinations(kind: str, grid: Mapping[str, Sequence]) -> list[dict]:
    keys = list(grid)
    combos = []
    for values in itertools.product(*(grid[k] for k in keys)):
        combos.append(dict(zip(keys, values)))
    return combos


def grid_search(
    split: SplitDataset,
    model_kind: str,
    grid: Mapping[str, Sequence] | None = None,
    similarities: Sequence[str] = ("dot", "cosine"),
    seed: int = 0,
    epochs: int | None = None,
) -> GridSearchResult:
    """Train every grid combination and score recall@20 / NDCG@20 on the
    validation partition under each similarity.

    The best record maximizes validation recall@20; ties prefer a smaller
    embedding dimension, then a smaller regularization.  Training failures
    are recorded per combination rather than aborting the sweep.
    """
    if model_kind not in ("wmf", "bpr"):
        raise ValueError("grid search supports the wmf and bpr trainers")
    if grid is None:
        grid = DEFAULT_WMF_GRID if model_kind == "wmf" else DEFAULT_BPR_GRID
    combos = _grid_combinations(model_kind, grid)
    if not combos:
        raise ValueError("empty grid")

    A = to_matrix(split.train)
    params_cls = WmfHyperparams if model_kind == "wmf" else BprHyperparams
    records: list[GridSearchRecord] = []
    for combo in combos:
        kwargs = dict(combo)
        if epochs is not None:
            kwargs["epochs"] = epochs
        h = params_cls(seed=seed, **kwargs)
        try:
            model = train_model(model_kind, A, h)
        except TechInferError as exc:
            logger.warning("grid combination %s failed: %s", combo, exc)
            for sim in similarities:
                records.append(GridSearchRecord(h, sim, None, None, error=str(exc)))
            continue
        for sim in similarities:
            model.similarity = sim
            metrics = evaluate(model, split, target="validation", ks=(20,))
            records.append(
                GridSearchRecord(h, sim, metrics.recall[20], metrics.ndcg[20])
            )
        model.similarity = "dot"

    best = -1
    for idx, rec in enumerate(records):
        if rec.error is not None:
            continue
        if best < 0:
            best = idx
            continue
        cur = records[best]
        if rec.recall_at_20 > cur.recall_at_20:
            best = idx
        elif rec.recall_at_20 == cur.recall_at_20:
            key = (rec.hyperparams.embedding_dim, rec.hyperparams.regularization)
            cur_key = (cur.hyperparams.embedding_dim, cur.hyperparams.regularization)
            if key < cur_key:
                best = idx
    if best < 0:
        raise NoEvaluableEntitiesError("every grid combination failed to train")
    return GridSearchResult(records=records, best=best)


def grid_results_csv(result: GridSearchResult, model_kind: str) -> bytes:
    """Export the sweep as `model,d,lr_or_c,lambda,similarity,recall@20,ndcg@20`."""
    out = io.StringIO()
    out.write("model,d,lr_or_c,lambda,similarity,recall@20,ndcg@20\n")
    for rec in result.records:
        h = rec.hyperparams
        rate_or_weight = (
            h.learning_rate if isinstance(h, BprHyperparams) else h.negative_weight
        )
        recall = "" if rec.recall_at_20 is None else repr(rec.recall_at_20)
        ndcg = "" if rec.ndcg_at_20 is None else repr(rec.ndcg_at_20)
        out.write(
            f"{model_kind},{h.embedding_dim},{rate_or_weight!r},"
            f"{h.regularization!r},{rec.similarity},{recall},{ndcg}\n"
        )
    return out.getvalue().encode("utf-8")


def repeated_eval(
    split: SplitDataset,
    model_kind: str,
    hyperparams: WmfHyperparams | BprHyperparams | None,
    runs: int,
    base_seed: int,
    target: str = "test",
    ks: Sequence[int] = (10, 20, 50),
) -> RankingMetrics:
    """Average metrics over ``runs`` trainings seeded base_seed..base_seed+runs-1.

    Per-run metrics stay attached for dispersion reporting.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    A = to_matrix(split.train)
    per_run: list[RankingMetrics] = []
    for r in range(runs):
        h = hyperparams
        if h is not None:
            h = replace(h, seed=base_seed + r)
        elif model_kind == "wmf":
            h = WmfHyperparams(seed=base_seed + r)
        elif model_kind == "bpr":
            h = BprHyperparams(seed=base_seed + r)
        model = train_model(model_kind, A, h)
        per_run.append(evaluate(model, split, target=target, ks=ks))
    mean = RankingMetrics(
        recall={k: sum(m.recall[k] for m in per_run) / runs for k in ks},
        ndcg={k: sum(m.ndcg[k] for m in per_run) / runs for k in ks},
        entities_evaluated=per_run[0].entities_evaluated,
        per_run=per_run,
    )
    return mean
