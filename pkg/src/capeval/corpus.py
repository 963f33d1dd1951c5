"""Dataset model and loaders for the human-judgment caption benchmarks.

All datasets are normalized into a single JSONL schema (one record per line):

rating record::

    {"instance_id": str, "image_id": str, "candidate": str,
     "references": [str, ...], "rating": number|null,
     "split": "train"|"val"|"test"|"unsplit"}

pair record::

    {"pair_id": str, "image_id": str, "candidate_a": str, "candidate_b": str,
     "references": [str, ...], "preferred": "A"|"B"|null,
     "category": "HC"|"HI"|"HM"|"MM"|"REF",
     "votes_a": int|null, "votes_b": int|null}
"""

from __future__ import annotations

import json
import logging
import re
import unicodedata
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

logger = logging.getLogger(__name__)

__all__ = [
    "CaptionInstance",
    "PairInstance",
    "Dataset",
    "DatasetName",
    "CorrelationKind",
    "DatasetError",
    "load_dataset",
    "save_dataset",
    "apply_overlap_policy",
    "aggregate_cf_ratings",
    "select_composite_records",
    "filter_reformulations",
]


class DatasetError(ValueError):
    """Raised on malformed or inconsistent dataset files."""


class DatasetName(str, Enum):
    FLICKR8K_EXPERT = "Flickr8kExpert"
    FLICKR8K_CF = "Flickr8kCF"
    COMPOSITE = "Composite"
    THUMB = "THumB"
    POLARIS = "Polaris"
    PASCAL50S = "Pascal50S"
    REFORMULATIONS = "Reformulations"
    CUSTOM = "Custom"


class CorrelationKind(str, Enum):
    TAU_B = "TauB"
    TAU_C = "TauC"
    PEARSON = "Pearson"
    PAIRWISE_ONLY = "PairwiseOnly"


_SPLITS = {"train", "val", "test", "unsplit"}
_CATEGORIES = {"HC", "HI", "HM", "MM", "REF"}
_PASCAL_CATEGORIES = {"HC", "HI", "HM", "MM"}


@dataclass(frozen=True)
class CaptionInstance:
    instance_id: str
    image_id: str
    candidate: str
    references: tuple[str, ...]
    rating: float | None = None
    split: str = "unsplit"


@dataclass(frozen=True)
class PairInstance:
    pair_id: str
    image_id: str
    candidate_a: str
    candidate_b: str
    references: tuple[str, ...]
    preferred: str | None = None  # "A" or "B"
    category: str = "REF"
    votes_a: int | None = None
    votes_b: int | None = None


# (rating_range, correlation_kind, is_pair_dataset) per built-in dataset
_DATASET_SPECS: dict[DatasetName, tuple[tuple[float, float] | None, CorrelationKind, bool]] = {
    DatasetName.FLICKR8K_EXPERT: ((1.0, 4.0), CorrelationKind.TAU_C, False),
    DatasetName.FLICKR8K_CF: ((0.0, 1.0), CorrelationKind.TAU_B, False),
    DatasetName.COMPOSITE: ((1.0, 5.0), CorrelationKind.TAU_C, False),
    DatasetName.THUMB: ((0.0, 5.0), CorrelationKind.PEARSON, False),
    DatasetName.POLARIS: ((0.0, 1.0), CorrelationKind.TAU_C, False),
    DatasetName.PASCAL50S: (None, CorrelationKind.PAIRWISE_ONLY, True),
    DatasetName.REFORMULATIONS: (None, CorrelationKind.PAIRWISE_ONLY, True),
    DatasetName.CUSTOM: (None, CorrelationKind.TAU_C, False),
}


@dataclass(frozen=True)
class Dataset:
    name: DatasetName
    instances: tuple[CaptionInstance, ...] = ()
    pairs: tuple[PairInstance, ...] = ()
    rating_range: tuple[float, float] | None = None
    correlation_kind: CorrelationKind = CorrelationKind.TAU_C

    def __post_init__(self):
        if self.instances and self.pairs:
            raise DatasetError("a dataset holds instances or pairs, not both")

    @property
    def is_pair_dataset(self) -> bool:
        return bool(self.pairs)


def _norm_text(text: str) -> str:
    """Surface-identity key: NFC normalization plus whitespace collapsing."""
    return re.sub(r"\s+", " ", unicodedata.normalize("NFC", text)).strip()


def _parse_rating_record(rec: dict, lineno: int, rating_range) -> CaptionInstance:
    try:
        rating = rec.get("rating")
        if rating is not None:
            rating = float(rating)
        split = rec.get("split", "unsplit")
        inst = CaptionInstance(
            instance_id=str(rec["instance_id"]),
            image_id=str(rec["image_id"]),
            candidate=str(rec["candidate"]),
            references=tuple(str(r) for r in rec.get("references", [])),
            rating=rating,
            split=split,
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"line {lineno}: malformed rating record: {exc}") from exc
    if inst.split not in _SPLITS:
        raise DatasetError(f"line {lineno}: unknown split {inst.split!r}")
    if rating is not None and rating_range is not None:
        lo, hi = rating_range
        if not lo <= rating <= hi:
            raise DatasetError(
                f"line {lineno}: rating {rating} outside declared range [{lo}, {hi}]"
            )
    return inst


def _parse_pair_record(rec: dict, lineno: int, name: DatasetName) -> PairInstance:
    try:
        pair = PairInstance(
            pair_id=str(rec["pair_id"]),
            image_id=str(rec["image_id"]),
            candidate_a=str(rec["candidate_a"]),
            candidate_b=str(rec["candidate_b"]),
            references=tuple(str(r) for r in rec.get("references", [])),
            preferred=rec.get("preferred"),
            category=rec.get("category", "REF"),
            votes_a=rec.get("votes_a"),
            votes_b=rec.get("votes_b"),
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"line {lineno}: malformed pair record: {exc}") from exc
    if pair.preferred not in (None, "A", "B"):
        raise DatasetError(f"line {lineno}: preferred must be 'A', 'B' or null")
    if pair.category not in _CATEGORIES:
        raise DatasetError(f"line {lineno}: unknown category {pair.category!r}")
    if name == DatasetName.PASCAL50S and pair.category not in _PASCAL_CATEGORIES:
        raise DatasetError(f"line {lineno}: Pascal50S category must be HC/HI/HM/MM")
    if name == DatasetName.REFORMULATIONS and pair.category != "REF":
        raise DatasetError(f"line {lineno}: Reformulations pairs must use category REF")
    return pair


def load_dataset(path: str | Path, name: DatasetName | str = DatasetName.CUSTOM) -> Dataset:
    """Parse a normalized JSONL file into a :class:`Dataset`.

    The overlap policy is NOT applied here; call :func:`apply_overlap_policy`
    afterwards. ``rating_range`` and ``correlation_kind`` are set from the
    dataset name.
    """
    name = DatasetName(name)
    rating_range, kind, is_pairs = _DATASET_SPECS[name]
    path = Path(path)

    instances: list[CaptionInstance] = []
    pairs: list[PairInstance] = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON: {exc}") from exc
            if is_pairs:
                pair = _parse_pair_record(rec, lineno, name)
                if pair.pair_id in seen_ids:
                    raise DatasetError(f"line {lineno}: duplicate pair_id {pair.pair_id!r}")
                seen_ids.add(pair.pair_id)
                pairs.append(pair)
            else:
                inst = _parse_rating_record(rec, lineno, rating_range)
                if inst.instance_id in seen_ids:
                    raise DatasetError(
                        f"line {lineno}: duplicate instance_id {inst.instance_id!r}"
                    )
                seen_ids.add(inst.instance_id)
                instances.append(inst)

    if not instances and not pairs:
        raise DatasetError(f"{path}: no records")
    return Dataset(
        name=name,
        instances=tuple(instances),
        pairs=tuple(pairs),
        rating_range=rating_range,
        correlation_kind=kind,
    )


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset back to the normalized JSONL schema."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in dataset.instances:
            fh.write(json.dumps({
                "instance_id": inst.instance_id,
                "image_id": inst.image_id,
                "candidate": inst.candidate,
                "references": list(inst.references),
                "rating": inst.rating,
                "split": inst.split,
            }, ensure_ascii=False) + "\n")
        for pair in dataset.pairs:
            fh.write(json.dumps({
                "pair_id": pair.pair_id,
                "image_id": pair.image_id,
                "candidate_a": pair.candidate_a,
                "candidate_b": pair.candidate_b,
                "references": list(pair.references),
                "preferred": pair.preferred,
                "category": pair.category,
                "votes_a": pair.votes_a,
                "votes_b": pair.votes_b,
            }, ensure_ascii=False) + "\n")


# Datasets where a sentence appearing as both candidate and reference is
# removed from the candidate side vs. the reference side.
_CANDIDATE_SIDE = {DatasetName.FLICKR8K_EXPERT}
_REFERENCE_SIDE = {DatasetName.FLICKR8K_CF, DatasetName.COMPOSITE, DatasetName.THUMB}


def apply_overlap_policy(dataset: Dataset) -> Dataset:
    """Resolve candidate/reference sentence overlap per dataset convention.

    Flickr8k-Expert drops instances whose candidate appears among the image's
    references. Flickr8k-CF, Composite and THumB instead drop such sentences
    from the reference lists. Matching is surface identity (NFC + whitespace
    collapsing) within an image. Instances left with zero references are
    dropped with a warning. Idempotent.
    """
    if dataset.is_pair_dataset:
        return dataset
    if dataset.name not in _CANDIDATE_SIDE | _REFERENCE_SIDE:
        return dataset

    cand_by_image: dict[str, set[str]] = {}
    refs_by_image: dict[str, set[str]] = {}
    for inst in dataset.instances:
        cand_by_image.setdefault(inst.image_id, set()).add(_norm_text(inst.candidate))
        refs_by_image.setdefault(inst.image_id, set()).update(
            _norm_text(r) for r in inst.references
        )

    out: list[CaptionInstance] = []
    dropped_overlap = 0
    dropped_empty = 0
    for inst in dataset.instances:
        if dataset.name in _CANDIDATE_SIDE:
            if _norm_text(inst.candidate) in refs_by_image[inst.image_id]:
                dropped_overlap += 1
                continue
            out.append(inst)
        else:
            cands = cand_by_image[inst.image_id]
            kept_refs = tuple(r for r in inst.references if _norm_text(r) not in cands)
            if inst.references and not kept_refs:
                dropped_empty += 1
                continue
            if len(kept_refs) != len(inst.references):
                inst = replace(inst, references=kept_refs)
            out.append(inst)

    if dropped_overlap:
        logger.info("overlap policy removed %d candidate instance(s)", dropped_overlap)
    if dropped_empty:
        logger.warning(
            "overlap policy left %d instance(s) with no references; dropped", dropped_empty
        )
    return replace(dataset, instances=tuple(out))


def aggregate_cf_ratings(labels: Iterable[int]) -> float:
    """Fraction of positive binary worker labels."""
    labels = list(labels)
    if not labels:
        raise DatasetError("no worker labels to aggregate")
    if any(l not in (0, 1) for l in labels):
        raise DatasetError("worker labels must be binary (0/1)")
    return sum(labels) / len(labels)


def select_composite_records(
    raw: dict[str, list[dict]], split: str = "unsplit"
) -> list[CaptionInstance]:
    """Normalize raw Composite-style records.

    ``raw`` maps image id to a list of 3 or 4 candidate dicts, each with keys
    ``candidate``, ``references``, ``correctness`` and ``thoroughness``. The
    fourth candidate, where present, is discarded; the rating is the
    correctness score.
    """
    out: list[CaptionInstance] = []
    for image_id, cands in raw.items():
        if not 3 <= len(cands) <= 4:
            raise DatasetError(
                f"image {image_id!r}: expected 3 or 4 candidates, got {len(cands)}"
            )
        for i, cand in enumerate(cands[:3]):
            out.append(CaptionInstance(
                instance_id=f"{image_id}#{i}",
                image_id=image_id,
                candidate=str(cand["candidate"]),
                references=tuple(str(r) for r in cand.get("references", [])),
                rating=float(cand["correctness"]),
                split=split,
            ))
    return out


def filter_reformulations(pairs: Iterable[PairInstance]) -> list[PairInstance]:
    """Drop pairs whose two texts are identical after whitespace normalization."""
    pairs = list(pairs)
    kept = [p for p in pairs if _norm_text(p.candidate_a) != _norm_text(p.candidate_b)]
    removed = len(pairs) - len(kept)
    if removed:
        logger.info("filtered %d identical reformulation pair(s)", removed)
    return kept
