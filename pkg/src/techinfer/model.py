"""Shared factor-model container and its JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError

TRAINED_BY = ("wmf", "bpr", "popularity")
SIMILARITIES = ("dot", "cosine")

FORMAT_VERSION = 1


@dataclass
class FactorModel:
    """Learned entity and item embeddings plus id catalogs.

    ``U`` is (m, d) over entities, ``V`` is (n, d) over items.  Popularity
    models use d=1 with all-ones ``U`` and per-item frequency in ``V``.
    ``objective_history`` records the training objective per epoch when the
    trainer provides one; it is not serialized.
    """

    U: np.ndarray
    V: np.ndarray
    entity_catalog: tuple[str, ...]
    item_catalog: tuple[str, ...]
    trained_by: str
    similarity: str = "dot"
    objective_history: list[float] = field(default_factory=list, repr=False, compare=False)

    @property
    def d(self) -> int:
        return int(self.U.shape[1])

    @property
    def m(self) -> int:
        return int(self.U.shape[0])

    @property
    def n(self) -> int:
        return int(self.V.shape[0])

    def validate(self) -> None:
        if self.trained_by not in TRAINED_BY:
            raise ModelFormatError(f"unknown trained_by {self.trained_by!r}")
        if self.similarity not in SIMILARITIES:
            raise ModelFormatError(f"unknown similarity {self.similarity!r}")
        if self.U.ndim != 2 or self.V.ndim != 2 or self.U.shape[1] != self.V.shape[1]:
            raise ModelFormatError("U and V must be 2-d with a common embedding dim")
        if self.U.shape[0] != len(self.entity_catalog):
            raise ModelFormatError("U row count does not match entity catalog")
        if self.V.shape[0] != len(self.item_catalog):
            raise ModelFormatError("V row count does not match item catalog")
        if not (np.all(np.isfinite(self.U)) and np.all(np.isfinite(self.V))):
            raise ModelFormatError("non-finite embedding entries")


def save_model(model: FactorModel) -> bytes:
    """Serialize to versioned JSON; float lists round-trip at full precision."""
    model.validate()
    doc = {
        "format_version": FORMAT_VERSION,
        "trained_by": model.trained_by,
        "d": model.d,
        "similarity": model.similarity,
        "entities": list(model.entity_catalog),
        "items": list(model.item_catalog),
        "U": [[float(x) for x in row] for row in model.U],
        "V": [[float(x) for x in row] for row in model.V],
    }
    return json.dumps(doc).encode("utf-8")


def load_model(data: bytes) -> FactorModel:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"invalid model file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("invalid model file: expected a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    try:
        model = FactorModel(
            U=np.asarray(doc["U"], dtype=np.float64).reshape(len(doc["entities"]), int(doc["d"])),
            V=np.asarray(doc["V"], dtype=np.float64).reshape(len(doc["items"]), int(doc["d"])),
            entity_catalog=tuple(str(x) for x in doc["entities"]),
            item_catalog=tuple(str(x) for x in doc["items"]),
            trained_by=str(doc["trained_by"]),
            similarity=str(doc.get("similarity", "dot")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model file: {exc}") from exc
    model.validate()
    return model
