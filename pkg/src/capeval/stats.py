"""Correlation coefficients and pairwise-preference protocols.

Kendall coefficients use merge-sort based O(n log n) concordance counting with
tie-group corrections. All randomness (Pascal50S tie-breaking and reference
subsampling) flows from explicit integer seeds through numpy's PCG64
generator, so runs are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .corpus import Dataset, PairInstance

__all__ = [
    "CorrelationReport",
    "PairwiseReport",
    "StatsError",
    "pearson",
    "kendall_tau_b",
    "kendall_tau_c",
    "correlate",
    "resolve_pascal_pairs",
    "pairwise_accuracy",
    "pascal50s_run",
]

PASCAL_CATEGORIES = ("HC", "HI", "HM", "MM")


class StatsError(ValueError):
    """Raised on degenerate inputs (zero variance, all ties, ...)."""


@dataclass(frozen=True)
class CorrelationReport:
    dataset: str
    metric: str
    kind: str  # TauB | TauC | Pearson
    value: float
    n: int


@dataclass(frozen=True)
class PairwiseReport:
    dataset: str
    metric: str
    # category -> (mean accuracy in [0, 1], population std over runs)
    per_category_accuracy: dict[str, tuple[float, float]]
    overall_mean: float
    seeds: tuple[int, ...] = ()
    tie_credit: float = 0.5


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise StatsError("pearson requires two equal-length vectors of length >= 2")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise StatsError("zero variance in input vector")
    return float(xc @ yc) / denom


def _count_inversions(seq: np.ndarray) -> int:
    """Number of strict inversions (i < j with seq[i] > seq[j]), merge sort."""
    seq = list(seq)
    total = 0

    def sort(a: list) -> list:
        nonlocal total
        if len(a) <= 1:
            return a
        mid = len(a) // 2
        left, right = sort(a[:mid]), sort(a[mid:])
        merged = []
        i = j = 0
        while i < len(left) and j < len(right):
            if right[j] < left[i]:
                total += len(left) - i
                merged.append(right[j])
                j += 1
            else:
                merged.append(left[i])
                i += 1
        merged.extend(left[i:])
        merged.extend(right[j:])
        return merged

    sort(seq)
    return total


def _tie_sum(values: np.ndarray) -> int:
    _, counts = np.unique(values, return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def _concordance_counts(x: np.ndarray, y: np.ndarray) -> tuple[int, int]:
    """(C - D, C + D context) via sort + inversion counting.

    Returns (concordant, discordant) pair counts.
    """
    n = len(x)
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]

    n0 = n * (n - 1) // 2
    n1 = _tie_sum(x)
    n2 = _tie_sum(y)
    # joint tie pairs: identical (x, y)
    xy = np.rec.fromarrays([xs, ys])
    _, joint_counts = np.unique(xy, return_counts=True)
    n3 = int(np.sum(joint_counts * (joint_counts - 1) // 2))

    # After sorting by (x, y), pairs tied in x contribute no inversions (y is
    # ascending within an x-group) and pairs tied in y contribute none
    # (inversions are strict), so inversions == discordant pairs.
    discordant = _count_inversions(ys)
    concordant = n0 - n1 - n2 + n3 - discordant
    return concordant, discordant


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise StatsError("tau-b requires two equal-length vectors of length >= 2")
    n = len(x)
    n0 = n * (n - 1) // 2
    n1, n2 = _tie_sum(x), _tie_sum(y)
    if n1 == n0 or n2 == n0:
        raise StatsError("all values tied in one vector")
    c, d = _concordance_counts(x, y)
    return (c - d) / math.sqrt((n0 - n1) * (n0 - n2))


def kendall_tau_c(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise StatsError("tau-c requires two equal-length vectors of length >= 2")
    m = min(len(np.unique(x)), len(np.unique(y)))
    if m < 2:
        raise StatsError("fewer than 2 distinct values in one vector")
    n = len(x)
    c, d = _concordance_counts(x, y)
    return 2.0 * m * (c - d) / (n * n * (m - 1))


_KIND_FUNCS: dict[str, Callable] = {
    "TauB": kendall_tau_b,
    "TauC": kendall_tau_c,
    "Pearson": pearson,
}


def correlate(matrix, ratings: Mapping[str, float], kind: str,
              dataset_name: str = "Custom"):
    """One CorrelationReport per metric column against the human ratings.

    ``ratings`` maps instance id to rating and must cover the matrix rows.
    Degenerate columns are isolated: their error is recorded and returned in
    the second element instead of aborting the whole run.
    """
    kind = str(kind.value if hasattr(kind, "value") else kind)
    if kind not in _KIND_FUNCS:
        raise StatsError(f"unsupported correlation kind {kind!r}")
    matrix.finalize()
    missing = [iid for iid in matrix.instance_ids if iid not in ratings]
    if missing:
        raise StatsError(
            f"{len(missing)} instance(s) missing ratings: {missing[:10]}"
        )
    y = np.array([ratings[iid] for iid in matrix.instance_ids], dtype=float)
    func = _KIND_FUNCS[kind]
    reports: list[CorrelationReport] = []
    errors: dict[str, str] = {}
    for name in matrix.metric_names:
        col = matrix.column(name)
        try:
            value = func(col, y)
        except StatsError as exc:
            errors[name] = str(exc)
            continue
        reports.append(CorrelationReport(
            dataset=dataset_name, metric=name, kind=kind, value=value, n=len(y)
        ))
    return reports, errors


def resolve_pascal_pairs(
    pairs: Sequence[PairInstance],
    seed: int,
    num_references: int = 5,
) -> list[PairInstance]:
    """Resolve majority votes (random tie-break) and subsample references.

    Deterministic for a fixed seed: one PCG64 stream drives both the
    tie-breaking and the per-pair reference subsets, consumed in pair order.
    """
    rng = np.random.default_rng(seed)
    out: list[PairInstance] = []
    for pair in pairs:
        if pair.votes_a is None or pair.votes_b is None:
            raise StatsError(f"pair {pair.pair_id!r} missing vote counts")
        if pair.votes_a + pair.votes_b <= 0:
            raise StatsError(f"pair {pair.pair_id!r} has no votes")
        if pair.votes_a > pair.votes_b:
            preferred = "A"
        elif pair.votes_b > pair.votes_a:
            preferred = "B"
        else:
            preferred = "A" if rng.integers(0, 2) == 0 else "B"
        refs = pair.references
        if len(refs) > num_references:
            idx = sorted(rng.choice(len(refs), size=num_references, replace=False))
            refs = tuple(refs[i] for i in idx)
        out.append(PairInstance(
            pair_id=pair.pair_id,
            image_id=pair.image_id,
            candidate_a=pair.candidate_a,
            candidate_b=pair.candidate_b,
            references=refs,
            preferred=preferred,
            category=pair.category,
            votes_a=pair.votes_a,
            votes_b=pair.votes_b,
        ))
    return out


def pairwise_accuracy(
    pairs: Sequence[PairInstance],
    scores_a: Sequence[float],
    scores_b: Sequence[float],
    tie_credit: float = 0.5,
) -> float:
    """Fraction of pairs where the preferred side scores strictly higher.

    Exact score ties earn ``tie_credit`` (default 0.5, which makes the value
    invariant to arbitrary tie resolution).
    """
    if not len(pairs) == len(scores_a) == len(scores_b):
        raise StatsError("pairs and score vectors must be aligned")
    total = 0.0
    for pair, sa, sb in zip(pairs, scores_a, scores_b):
        if pair.preferred not in ("A", "B"):
            raise StatsError(f"pair {pair.pair_id!r} has unresolved preference")
        hi, lo = (sa, sb) if pair.preferred == "A" else (sb, sa)
        if hi > lo:
            total += 1.0
        elif hi == lo:
            total += tie_credit
    return total / len(pairs) if pairs else 0.0


PairScorer = Callable[[str, Sequence[str]], float]


def pascal50s_run(
    dataset: Dataset,
    scorer: PairScorer | None,
    base_seed: int = 0,
    instances: int = 5,
    metric_name: str = "metric",
    precomputed: Mapping[str, tuple[float, float]] | None = None,
    tie_credit: float = 0.5,
) -> PairwiseReport:
    """Pairwise-accuracy protocol over seeded tie-break/reference instances.

    Runs ``instances`` protocol instances with seeds base_seed .. base_seed +
    instances - 1. ``scorer(candidate, sampled_references)`` scores each side;
    alternatively ``precomputed`` maps pair_id to fixed (score_a, score_b)
    values for metrics that do not depend on the sampled references. Reports
    per-category mean and population std, plus the mean over categories.
    """
    if scorer is None and precomputed is None:
        raise StatsError("either a scorer or precomputed scores are required")
    if not dataset.pairs:
        raise StatsError("pascal50s_run requires a pair dataset")

    per_cat_runs: dict[str, list[float]] = {c: [] for c in PASCAL_CATEGORIES}
    overall_runs: list[float] = []
    seeds = tuple(base_seed + i for i in range(instances))
    for seed in seeds:
        resolved = resolve_pascal_pairs(dataset.pairs, seed)
        if precomputed is not None:
            scores_a = [precomputed[p.pair_id][0] for p in resolved]
            scores_b = [precomputed[p.pair_id][1] for p in resolved]
        else:
            scores_a = [scorer(p.candidate_a, p.references) for p in resolved]
            scores_b = [scorer(p.candidate_b, p.references) for p in resolved]

        cat_values = []
        for cat in PASCAL_CATEGORIES:
            idx = [k for k, p in enumerate(resolved) if p.category == cat]
            if not idx:
                continue
            acc = pairwise_accuracy(
                [resolved[k] for k in idx],
                [scores_a[k] for k in idx],
                [scores_b[k] for k in idx],
                tie_credit=tie_credit,
            )
            per_cat_runs[cat].append(acc)
            cat_values.append(acc)
        overall_runs.append(float(np.mean(cat_values)))

    per_category = {
        cat: (float(np.mean(vals)), float(np.std(vals)))  # population std
        for cat, vals in per_cat_runs.items() if vals
    }
    return PairwiseReport(
        dataset=dataset.name.value,
        metric=metric_name,
        per_category_accuracy=per_category,
        overall_mean=float(np.mean(overall_runs)),
        seeds=seeds,
        tie_credit=tie_credit,
    )
