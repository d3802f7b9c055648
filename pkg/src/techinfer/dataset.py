"""Interaction data ingestion, sparse matrix construction, and splitting.

The unit of data is a (report, technique) observation pair.  Catalogs are
built in first-appearance order so indices are stable for a given source
file, and train/validation/test partitions always share the catalogs of
the dataset they were split from.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterable

import numpy as np

from .errors import (
    EmptyInputError,
    InfeasibleSplitError,
    InvalidTechniqueIdError,
    MalformedRecordError,
)

logger = logging.getLogger(__name__)

# ATT&CK parent or sub-technique id, e.g. T1059 or T1059.001.
TECHNIQUE_ID_RE = re.compile(r"^T\d{4}(\.\d{3})?$")

CSV_HEADER = ("report_id", "technique_id")


def validate_technique_id(technique_id: str) -> str:
    if not isinstance(technique_id, str) or not TECHNIQUE_ID_RE.match(technique_id):
        raise InvalidTechniqueIdError(
            f"invalid technique id {technique_id!r}: expected T#### or T####.###"
        )
    return technique_id


@dataclass(frozen=True)
class InteractionDataset:
    """Observed (report, technique) pairs with index catalogs.

    ``observations`` holds (entity_index, item_index) pairs referring into
    ``entities`` and ``items``.  A freshly ingested dataset has every entity
    and item in at least one observation; split partitions relax that rule
    but keep the full catalogs so indices stay comparable.
    """

    entities: tuple[str, ...]
    items: tuple[str, ...]
    observations: frozenset[tuple[int, int]]

    @property
    def m(self) -> int:
        return len(self.entities)

    @property
    def n(self) -> int:
        return len(self.items)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "InteractionDataset":
        """Build a dataset from (report_id, technique_id) pairs.

        Catalog order is first appearance.  Duplicate pairs collapse to one;
        the collapsed count is reported on the module logger.
        """
        entities: list[str] = []
        items: list[str] = []
        entity_index: dict[str, int] = {}
        item_index: dict[str, int] = {}
        observations: set[tuple[int, int]] = set()
        duplicates = 0
        for report_id, technique_id in pairs:
            validate_technique_id(technique_id)
            if not report_id:
                raise MalformedRecordError("empty report id")
            e = entity_index.get(report_id)
            if e is None:
                e = len(entities)
                entity_index[report_id] = e
                entities.append(report_id)
            i = item_index.get(technique_id)
            if i is None:
                i = len(items)
                item_index[technique_id] = i
                items.append(technique_id)
            if (e, i) in observations:
                duplicates += 1
            else:
                observations.add((e, i))
        if not observations:
            raise EmptyInputError("no observations in input")
        if duplicates:
            logger.info("collapsed %d duplicate observation pair(s)", duplicates)
        return cls(tuple(entities), tuple(items), frozenset(observations))

    def entity_index(self) -> dict[str, int]:
        return {rid: e for e, rid in enumerate(self.entities)}

    def item_index(self) -> dict[str, int]:
        return {tid: i for i, tid in enumerate(self.items)}


def _iter_csv_records(text: io.TextIOBase) -> Iterable[tuple[str, str]]:
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("empty input") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise MalformedRecordError(
            f"line 1: expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
        )
    saw_record = False
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise MalformedRecordError(f"line {lineno}: expected 2 fields, got {len(row)}")
        saw_record = True
        yield row[0].strip(), row[1].strip()
    if not saw_record:
        raise EmptyInputError("no records after header")


def _iter_jsonl_records(text: io.TextIOBase) -> Iterable[tuple[str, str]]:
    saw_record = False
    for lineno, line in enumerate(text, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "report_id" not in obj or "technique_id" not in obj:
            raise MalformedRecordError(
                f"line {lineno}: expected object with report_id and technique_id"
            )
        saw_record = True
        yield str(obj["report_id"]), str(obj["technique_id"])
    if not saw_record:
        raise EmptyInputError("empty input")


def load_dataset(source: bytes | BinaryIO, format: str = "csv") -> InteractionDataset:
    """Parse a CSV or JSONL byte stream into an :class:`InteractionDataset`.

    CSV input must carry the header ``report_id,technique_id``; both LF and
    CRLF line endings are accepted.  JSONL input holds one
    ``{"report_id": ..., "technique_id": ...}`` object per line.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="")
    if format == "csv":
        records = _iter_csv_records(text)
    elif format == "jsonl":
        records = _iter_jsonl_records(text)
    else:
        raise ValueError(f"unknown format {format!r}")
    try:
        return InteractionDataset.from_pairs(records)
    finally:
        text.detach()


def write_csv(ds: InteractionDataset) -> bytes:
    """Serialize observations back to the canonical CSV form.

    Rows are emitted in (entity_index, item_index) order so output is
    deterministic; reloading reproduces identical catalogs and observations.
    """
    out = io.StringIO()
    out.write(",".join(CSV_HEADER) + "\n")
    for e, i in sorted(ds.observations):
        out.write(f"{ds.entities[e]},{ds.items[i]}\n")
    return out.getvalue().encode("utf-8")


@dataclass(frozen=True)
class SparseBinaryMatrix:
    """Binary interaction matrix stored as per-row sorted item indices."""

    m: int
    n: int
    rows: tuple[np.ndarray, ...]

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def row_sets(self) -> list[set[int]]:
        return [set(int(j) for j in r) for r in self.rows]

    def item_rows(self) -> tuple[np.ndarray, ...]:
        """Transpose view: for each item, the sorted entity indices observing it."""
        cols: list[list[int]] = [[] for _ in range(self.n)]
        for e, r in enumerate(self.rows):
            for j in r:
                cols[int(j)].append(e)
        return tuple(np.asarray(c, dtype=np.intp) for c in cols)


def to_matrix(ds: InteractionDataset) -> SparseBinaryMatrix:
    """Materialize the dataset as a sparse binary matrix with sorted rows."""
    per_row: list[list[int]] = [[] for _ in range(ds.m)]
    for e, i in ds.observations:
        per_row[e].append(i)
    rows = tuple(np.asarray(sorted(r), dtype=np.intp) for r in per_row)
    return SparseBinaryMatrix(m=ds.m, n=ds.n, rows=rows)


def partition_sizes(n_obs: int, test_frac: float, val_frac: float) -> tuple[int, int, int]:
    """Exact partition sizes: round-half-up test share, then validation share
    of what remains, train takes the rest."""
    n_test = int(math.floor(test_frac * n_obs + 0.5))
    n_val = int(math.floor(val_frac * (n_obs - n_test) + 0.5))
    return n_test, n_val, n_obs - n_test - n_val


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/validation/test partitions sharing one catalog pair."""

    train: InteractionDataset
    validation: InteractionDataset
    test: InteractionDataset
    seed: int


def split(
    ds: InteractionDataset, test_frac: float, val_frac: float, seed: int
) -> SplitDataset:
    """Partition observations uniformly at random under ``seed``.

    Sizes follow :func:`partition_sizes` exactly.  A withheld draw that would
    strip an entity of its last training observation is repaired by swapping
    it with a randomly chosen training observation whose entity can spare one;
    the repair is deterministic under the seed.
    """
    if not 0.0 < test_frac < 1.0:
        raise ValueError("test_frac must be in (0, 1)")
    if not 0.0 <= val_frac < 1.0:
        raise ValueError("val_frac must be in [0, 1)")

    obs = sorted(ds.observations)
    n_obs = len(obs)
    n_test, n_val, n_train = partition_sizes(n_obs, test_frac, val_frac)
    if n_train < ds.m:
        raise InfeasibleSplitError(
            f"train partition of size {n_train} cannot keep one observation "
            f"for each of {ds.m} entities"
        )

    rng = np.random.default_rng(seed)
    order = rng.permutation(n_obs)
    withheld = [int(k) for k in order[: n_test + n_val]]
    train_ids = set(int(k) for k in order[n_test + n_val :])

    train_count: dict[int, int] = {e: 0 for e in range(ds.m)}
    for k in train_ids:
        train_count[obs[k][0]] += 1

    for slot, k in enumerate(withheld):
        entity = obs[k][0]
        if train_count[entity] > 0:
            continue
        # Swap the offending draw back into train; some other entity with a
        # spare training observation gives one up to keep sizes exact.
        eligible = sorted(j for j in train_ids if train_count[obs[j][0]] >= 2)
        if not eligible:
            raise InfeasibleSplitError("no eligible training observation to swap")
        partner = eligible[int(rng.integers(len(eligible)))]
        train_ids.remove(partner)
        train_ids.add(k)
        withheld[slot] = partner
        train_count[entity] += 1
        train_count[obs[partner][0]] -= 1

    def subset(indices: Iterable[int]) -> InteractionDataset:
        return InteractionDataset(
            entities=ds.entities,
            items=ds.items,
            observations=frozenset(obs[k] for k in indices),
        )

    return SplitDataset(
        train=subset(train_ids),
        validation=subset(withheld[n_test:]),
        test=subset(withheld[:n_test]),
        seed=seed,
    )


def split_to_json(sd: SplitDataset) -> bytes:
    """Persist a split with its shared catalogs (plain CSV per partition
    would lose entities and items absent from that partition)."""
    doc = {
        "format_version": 1,
        "seed": sd.seed,
        "entities": list(sd.train.entities),
        "items": list(sd.train.items),
        "train": sorted([e, i] for e, i in sd.train.observations),
        "validation": sorted([e, i] for e, i in sd.validation.observations),
        "test": sorted([e, i] for e, i in sd.test.observations),
    }
    return json.dumps(doc).encode("utf-8")


def split_from_json(data: bytes) -> SplitDataset:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedRecordError(f"invalid split file: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise MalformedRecordError("invalid split file: unknown format_version")
    entities = tuple(str(x) for x in doc["entities"])
    items = tuple(str(x) for x in doc["items"])

    def part(key: str) -> InteractionDataset:
        pairs = frozenset((int(e), int(i)) for e, i in doc[key])
        for e, i in pairs:
            if not (0 <= e < len(entities) and 0 <= i < len(items)):
                raise MalformedRecordError(f"observation out of bounds in {key}")
        return InteractionDataset(entities, items, pairs)

    return SplitDataset(
        train=part("train"),
        validation=part("validation"),
        test=part("test"),
        seed=int(doc["seed"]),
    )
