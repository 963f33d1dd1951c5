"""Score matrices, external score ingestion, persistence and the metric registry."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "ScoreMatrix",
    "MetricDescriptor",
    "ScoreError",
    "ingest_external",
    "join",
    "registry",
    "lookup_metric",
]


class ScoreError(ValueError):
    """Raised on malformed or inconsistent score files."""


@dataclass(frozen=True)
class MetricDescriptor:
    name: str
    taxonomy_category: str
    provider: str  # "native" | "external"
    declared_range: tuple[float, float] | None = None


_REGISTRY: tuple[MetricDescriptor, ...] = (
    MetricDescriptor("BLEU1", "Lexical similarity", "native", (0.0, 1.0)),
    MetricDescriptor("BLEU2", "Lexical similarity", "native", (0.0, 1.0)),
    MetricDescriptor("BLEU3", "Lexical similarity", "native", (0.0, 1.0)),
    MetricDescriptor("BLEU4", "Lexical similarity", "native", (0.0, 1.0)),
    MetricDescriptor("ROUGE", "Lexical similarity", "native", (0.0, 1.0)),
    MetricDescriptor("METEOR", "Lexical similarity", "native", (0.0, 1.0)),
    MetricDescriptor("CIDEr", "Lexical similarity", "native", (0.0, 10.0)),
    MetricDescriptor("SPICE", "Phrase semantic similarity", "external", (0.0, 1.0)),
    MetricDescriptor("Exact NO", "Lexical similarity", "external", (0.0, 1.0)),
    MetricDescriptor("Exact VO", "Lexical similarity", "external", (0.0, 1.0)),
    MetricDescriptor("Fuzzy NO", "Phrase semantic similarity", "external", None),
    MetricDescriptor("Fuzzy VO", "Phrase semantic similarity", "external", None),
    MetricDescriptor("CLIPScore", "Image similarity", "external", (0.0, 2.5)),
    MetricDescriptor("RefCLIPScore", "Multiple source similarity", "external", (0.0, 2.5)),
    MetricDescriptor("PACScore", "Image similarity", "external", (0.0, 2.5)),
    MetricDescriptor("RefPACScore", "Multiple source similarity", "external", (0.0, 2.5)),
    MetricDescriptor("BLIP2Score", "Image similarity", "external", (-1.0, 1.0)),
    MetricDescriptor("CLIPImageScore", "Image similarity", "external", (-1.0, 1.0)),
    MetricDescriptor("MPNetScore", "Sentence semantic similarity", "external", (-1.0, 1.0)),
    MetricDescriptor("Polos", "Human rating prediction", "external", (0.0, 1.0)),
)

_BY_NAME = {d.name: d for d in _REGISTRY}


def registry() -> list[MetricDescriptor]:
    """The built-in metric registry; list order is the canonical metric order."""
    return list(_REGISTRY)


def lookup_metric(name: str) -> MetricDescriptor | None:
    return _BY_NAME.get(name)


def registry_rank(name: str) -> int:
    """Position in the canonical order; unknown metrics sort after known ones."""
    for i, d in enumerate(_REGISTRY):
        if d.name == name:
            return i
    return len(_REGISTRY)


class ScoreMatrix:
    """Dense instances x metrics table; cells may be missing until finalized."""

    def __init__(self, instance_ids: Sequence[str], metric_names: Sequence[str],
                 values: np.ndarray):
        instance_ids = list(instance_ids)
        metric_names = list(metric_names)
        if len(set(instance_ids)) != len(instance_ids):
            raise ScoreError("duplicate instance ids")
        if len(set(metric_names)) != len(metric_names):
            raise ScoreError("duplicate metric names")
        values = np.asarray(values, dtype=float)
        if values.shape != (len(instance_ids), len(metric_names)):
            raise ScoreError(
                f"value table shape {values.shape} does not match "
                f"{len(instance_ids)} instances x {len(metric_names)} metrics"
            )
        self.instance_ids = instance_ids
        self.metric_names = metric_names
        self.values = values
        self._row_index = {iid: i for i, iid in enumerate(instance_ids)}
        self._col_index = {m: j for j, m in enumerate(metric_names)}

    @classmethod
    def empty(cls, instance_ids: Sequence[str], metric_names: Sequence[str]) -> "ScoreMatrix":
        values = np.full((len(instance_ids), len(metric_names)), np.nan)
        return cls(instance_ids, metric_names, values)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def set(self, row: int, col: int, value: float) -> None:
        self.values[row, col] = value

    def get(self, instance_id: str, metric: str) -> float:
        return float(self.values[self._row_index[instance_id], self._col_index[metric]])

    def column(self, metric: str) -> np.ndarray:
        return self.values[:, self._col_index[metric]].copy()

    def row(self, instance_id: str) -> dict[str, float]:
        vals = self.values[self._row_index[instance_id]]
        return {m: float(v) for m, v in zip(self.metric_names, vals)}

    def missing_cells(self) -> list[tuple[str, str]]:
        rows, cols = np.nonzero(np.isnan(self.values))
        return [(self.instance_ids[r], self.metric_names[c]) for r, c in zip(rows, cols)]

    def finalize(self) -> "ScoreMatrix":
        missing = self.missing_cells()
        if missing:
            preview = ", ".join(f"{i}/{m}" for i, m in missing[:10])
            raise ScoreError(f"{len(missing)} missing cell(s): {preview}")
        return self

    def select_instances(self, instance_ids: Sequence[str]) -> "ScoreMatrix":
        idx = [self._row_index[i] for i in instance_ids]
        return ScoreMatrix(list(instance_ids), self.metric_names, self.values[idx])

    def save(self, path: str | Path) -> None:
        """Write the wide CSV form; 17 significant digits for exact round-trip."""
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["instance_id", *self.metric_names])
            for i, iid in enumerate(self.instance_ids):
                writer.writerow(
                    [iid] + ["" if math.isnan(v) else format(v, ".17g")
                             for v in self.values[i]]
                )


def ingest_external(path: str | Path, allow_unknown: bool = False) -> ScoreMatrix:
    """Read a score file (wide or long CSV) into a ScoreMatrix.

    Wide form: header ``instance_id,<metric1>,...``. Long form: header
    ``instance_id,metric,score``. Metric names must be in the registry unless
    ``allow_unknown``; values are checked against declared ranges (a warning is
    emitted when a metric declares no range).
    """
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        # provenance header comments are permitted before the CSV header
        rows = [r for r in csv.reader(
            line for line in fh if not line.startswith("#")
        ) if r]
    if not rows:
        raise ScoreError(f"{path}: empty score file")
    header = rows[0]
    if header[:1] != ["instance_id"]:
        raise ScoreError(f"{path}: first column must be instance_id")

    if header == ["instance_id", "metric", "score"]:
        triples = [(r[0], r[1], r[2]) for r in rows[1:]]
        metric_names = sorted({m for _, m, _ in triples}, key=registry_rank)
    else:
        metric_names = header[1:]
        triples = []
        for r in rows[1:]:
            if len(r) != len(header):
                raise ScoreError(f"{path}: row for {r[0]!r} has {len(r)} fields")
            triples.extend((r[0], m, v) for m, v in zip(metric_names, r[1:]))

    for m in metric_names:
        desc = lookup_metric(m)
        if desc is None:
            if not allow_unknown:
                raise ScoreError(f"{path}: unknown metric column {m!r}")
            logger.warning("unknown metric column %r accepted without range check", m)
        elif desc.declared_range is None:
            logger.warning("metric %r declares no range; values not range-checked", m)

    instance_ids: list[str] = []
    seen_rows: set[str] = set()
    for iid, _, _ in triples:
        if iid not in seen_rows:
            seen_rows.add(iid)
            instance_ids.append(iid)

    matrix = ScoreMatrix.empty(instance_ids, metric_names)
    filled: set[tuple[str, str]] = set()
    for iid, m, raw in triples:
        if (iid, m) in filled:
            raise ScoreError(f"{path}: duplicate cell ({iid!r}, {m!r})")
        filled.add((iid, m))
        try:
            value = float(raw)
        except ValueError as exc:
            raise ScoreError(f"{path}: non-numeric value {raw!r} at ({iid!r}, {m!r})") from exc
        desc = lookup_metric(m)
        if desc is not None and desc.declared_range is not None:
            lo, hi = desc.declared_range
            if not lo <= value <= hi:
                raise ScoreError(
                    f"{path}: value {value} for {m!r} at {iid!r} outside "
                    f"declared range [{lo}, {hi}]"
                )
        matrix.set(matrix._row_index[iid], matrix._col_index[m], value)
    return matrix.finalize()


def join(matrices: Sequence[ScoreMatrix]) -> ScoreMatrix:
    """Concatenate columns over the intersection of instance sets.

    Metric name sets must be pairwise disjoint. Instances dropped from each
    input are logged.
    """
    if not matrices:
        raise ScoreError("nothing to join")
    names: list[str] = []
    for m in matrices:
        overlap = set(names) & set(m.metric_names)
        if overlap:
            raise ScoreError(f"metric name collision in join: {sorted(overlap)}")
        names.extend(m.metric_names)

    common = [iid for iid in matrices[0].instance_ids
              if all(iid in m._row_index for m in matrices)]
    if not common:
        raise ScoreError("instance id intersection is empty")
    for k, m in enumerate(matrices):
        dropped = len(m.instance_ids) - len(common)
        if dropped:
            logger.info("join dropped %d instance(s) from input %d", dropped, k)

    blocks = [m.select_instances(common).values for m in matrices]
    return ScoreMatrix(common, names, np.hstack(blocks))


def load(path: str | Path, allow_unknown: bool = False) -> ScoreMatrix:
    """Alias for :func:`ingest_external` (both CSV layouts accepted)."""
    return ingest_external(path, allow_unknown=allow_unknown)
