"""Implicit-feedback technique inference toolkit.

Trains weighted matrix factorization (ALS) and pairwise-ranking (BPR)
models on report-technique observations, evaluates them with top-K
ranking metrics, projects report embeddings to 2D cluster maps, and
serves ranked technique inferences over a CLI and HTTP API.
"""

from .baseline import train_top_techniques
from .bpr import BprHyperparams, bpr_mean_objective, train_bpr
from .dataset import (
    InteractionDataset,
    SparseBinaryMatrix,
    SplitDataset,
    load_dataset,
    partition_sizes,
    split,
    to_matrix,
    write_csv,
)
from .errors import TechInferError
from .evaluation import (
    GridSearchResult,
    RankedPredictions,
    RankingMetrics,
    evaluate,
    grid_search,
    ndcg_at_k,
    rank_items,
    recall_at_k,
    repeated_eval,
)
from .model import FactorModel, load_model, save_model
from .projection import (
    EmbeddingProjection,
    ProjectionConfig,
    export_projection,
    mean_shift,
    project,
    tsne,
)
from .serve import (
    PredictRequest,
    PredictResponse,
    export_csv,
    export_navigator_layer,
    predict,
    serve_http,
)
from .wmf import WmfHyperparams, fold_in_entity, train_wmf, wmf_objective

__version__ = "0.1.0"

__all__ = [
    "BprHyperparams",
    "EmbeddingProjection",
    "FactorModel",
    "GridSearchResult",
    "InteractionDataset",
    "PredictRequest",
    "PredictResponse",
    "ProjectionConfig",
    "RankedPredictions",
    "RankingMetrics",
    "SparseBinaryMatrix",
    "SplitDataset",
    "TechInferError",
    "WmfHyperparams",
    "bpr_mean_objective",
    "evaluate",
    "export_csv",
    "export_navigator_layer",
    "export_projection",
    "fold_in_entity",
    "grid_search",
    "load_dataset",
    "load_model",
    "mean_shift",
    "ndcg_at_k",
    "partition_sizes",
    "predict",
    "project",
    "rank_items",
    "recall_at_k",
    "repeated_eval",
    "save_model",
    "serve_http",
    "split",
    "to_matrix",
    "train_bpr",
    "train_top_techniques",
    "train_wmf",
    "tsne",
    "wmf_objective",
    "write_csv",
]
