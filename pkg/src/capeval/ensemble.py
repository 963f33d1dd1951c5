"""Metric ensembling: forward feature selection over score columns and
cross-validated linear-regression scoring.

Selection greedily adds the metric whose inclusion maximizes the mean k-fold
R-squared of an ordinary-least-squares fit, stopping when the best candidate
improves the score by less than epsilon. Folds are contiguous and unshuffled,
matching the default of the common feature-selection implementations so that
results reproduce across languages.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .scores import ScoreMatrix, registry_rank

logger = logging.getLogger(__name__)

__all__ = [
    "EnsembleConfig",
    "EnsembleModel",
    "RankDeficiencyError",
    "ols_fit",
    "cv_r2",
    "forward_select",
    "fit_ensemble",
    "score_ensemble",
    "dominant_ensemble",
    "load_model",
    "save_model",
    "published_model",
    "DOMINANT_METRICS",
]

DOMINANT_METRICS = ("BLEU4", "METEOR", "ROUGE", "CIDEr", "SPICE")


class RankDeficiencyError(ValueError):
    def __init__(self, columns: Sequence[str] | Sequence[int]):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; offending columns: {self.columns}")


@dataclass(frozen=True)
class EnsembleConfig:
    epsilon: float = 0.0001
    folds: int = 5
    max_features: int | None = None
    deterministic_folds: bool = True  # contiguous, unshuffled
    standardize: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")


@dataclass(frozen=True)
class EnsembleModel:
    selected_metrics: tuple[str, ...]
    weights: tuple[float, ...]
    intercept: float
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.selected_metrics) != len(self.weights):
            raise ValueError("one weight per selected metric")


def ols_fit(X: np.ndarray, y: np.ndarray,
            column_names: Sequence[str] | None = None) -> tuple[np.ndarray, float]:
    """Least-squares fit of y = X w + b via pivoted QR (no normal equations).

    Returns (weights, intercept). Raises :class:`RankDeficiencyError` naming
    the offending columns when the intercept-augmented design matrix is rank
    deficient.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != len(y):
        raise ValueError("X must be n x p and y length n")
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more rows than features, got {n} x {p}")

    design = np.hstack([X, np.ones((n, 1))])
    _, R, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag.max() * max(design.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < p + 1:
        bad = sorted(piv[rank:])
        if column_names is not None:
            bad = [column_names[j] if j < p else "<intercept>" for j in bad]
        raise RankDeficiencyError(bad)

    coef, *_ = scipy.linalg.lstsq(design, y, lapack_driver="gelsy")
    return coef[:p], float(coef[p])


def _fold_slices(n: int, folds: int) -> list[slice]:
    """Contiguous unshuffled folds; the first n % folds folds get one extra row."""
    sizes = [n // folds + (1 if i < n % folds else 0) for i in range(folds)]
    out, start = [], 0
    for s in sizes:
        out.append(slice(start, start + s))
        start += s
    return out


def cv_r2(X: np.ndarray, y: np.ndarray, folds: int = 5) -> float:
    """Mean held-out R-squared over deterministic contiguous k-folds.

    Folds whose held-out targets have zero variance are skipped with a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if folds < 2 or folds > n:
        raise ValueError(f"folds must be in [2, {n}], got {folds}")
    scores = []
    for k, sl in enumerate(_fold_slices(n, folds)):
        mask = np.ones(n, dtype=bool)
        mask[sl] = False
        w, b = ols_fit(X[mask], y[mask])
        y_true = y[sl]
        ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
        if ss_tot == 0.0:
            logger.warning("fold %d has zero target variance; skipped", k)
            continue
        resid = y_true - (X[sl] @ w + b)
        scores.append(1.0 - float(resid @ resid) / ss_tot)
    if not scores:
        raise ValueError("no fold had target variance; R2 undefined")
    return float(np.mean(scores))


def forward_select(
    matrix: ScoreMatrix | None,
    y: np.ndarray,
    config: EnsembleConfig = EnsembleConfig(),
    X: np.ndarray | None = None,
    candidate_names: Sequence[str] | None = None,
) -> list[str]:
    """Greedy forward selection of metric columns by cross-validated R-squared.

    Accepts either a finalized ScoreMatrix or a raw (X, candidate_names) pair.
    Candidates are evaluated in registry order, which also breaks score ties
    deterministically. Stops when the best candidate improves the current
    score by less than epsilon or ``max_features`` is reached; the first
    feature is always admitted (the initial score is minus infinity).
    """
    if matrix is not None:
        matrix.finalize()
        X = matrix.values
        candidate_names = matrix.metric_names
    if X is None or candidate_names is None:
        raise ValueError("either a matrix or (X, candidate_names) is required")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[1] == 0:
        raise ValueError("at least one candidate metric is required")
    if config.standardize:
        std = X.std(axis=0)
        std[std == 0.0] = 1.0
        X = (X - X.mean(axis=0)) / std

    order = sorted(range(len(candidate_names)),
                   key=lambda j: (registry_rank(candidate_names[j]), j))
    selected: list[int] = []
    current = -np.inf
    limit = config.max_features or len(candidate_names)
    while len(selected) < limit and len(selected) < len(candidate_names):
        best_j, best_score = None, -np.inf
        for j in order:
            if j in selected:
                continue
            cols = selected + [j]
            try:
                score = cv_r2(X[:, cols], y, config.folds)
            except RankDeficiencyError:
                # a candidate collinear with the current set (e.g. a duplicate
                # column) can never improve the fit; skip it
                continue
            if score > best_score:
                best_j, best_score = j, score
        if best_score - current < config.epsilon:
            break
        selected.append(best_j)
        current = best_score
    return [candidate_names[j] for j in selected]


def _check_provenance(meta: Mapping | None, allow_nontrain: bool) -> None:
    split = (meta or {}).get("split")
    if split is not None and split != "train" and not allow_nontrain:
        raise ValueError(
            f"refusing to fit on split {split!r}; pass allow_nontrain to override"
        )


def fit_ensemble(
    matrix: ScoreMatrix,
    ratings: Mapping[str, float],
    config: EnsembleConfig = EnsembleConfig(),
    training_meta: Mapping | None = None,
    allow_nontrain: bool = False,
) -> EnsembleModel:
    """Forward-select metrics, then OLS-fit their weights on the full split."""
    _check_provenance(training_meta, allow_nontrain)
    matrix.finalize()
    y = np.array([ratings[iid] for iid in matrix.instance_ids], dtype=float)
    selected = forward_select(matrix, y, config)
    if not selected:
        raise ValueError("forward selection admitted no metrics")
    cols = np.column_stack([matrix.column(m) for m in selected])
    weights, intercept = ols_fit(cols, y, column_names=selected)
    meta = dict(training_meta or {})
    meta.update({
        "n_train": len(y),
        "config": {
            "epsilon": config.epsilon,
            "folds": config.folds,
            "max_features": config.max_features,
            "standardize": config.standardize,
        },
        "selection": "forward",
    })
    return EnsembleModel(tuple(selected), tuple(float(w) for w in weights),
                         intercept, meta)


def dominant_ensemble(
    matrix: ScoreMatrix,
    ratings: Mapping[str, float],
    bleu_order: int = 4,
    training_meta: Mapping | None = None,
    allow_nontrain: bool = False,
) -> EnsembleModel:
    """OLS over the five dominant metrics, no feature selection.

    ``bleu_order`` picks which BLEU column stands in for "BLEU" (the paper's
    baseline is ambiguous on the order; 4 is the common convention).
    """
    _check_provenance(training_meta, allow_nontrain)
    metrics = [f"BLEU{bleu_order}" if m == "BLEU4" else m for m in DOMINANT_METRICS]
    missing = [m for m in metrics if m not in matrix.metric_names]
    if missing:
        raise ValueError(f"dominant ensemble requires columns {metrics}; missing {missing}")
    matrix.finalize()
    y = np.array([ratings[iid] for iid in matrix.instance_ids], dtype=float)
    cols = np.column_stack([matrix.column(m) for m in metrics])
    weights, intercept = ols_fit(cols, y, column_names=metrics)
    meta = dict(training_meta or {})
    meta.update({"n_train": len(y), "selection": "dominant", "bleu_order": bleu_order})
    return EnsembleModel(tuple(metrics), tuple(float(w) for w in weights),
                         intercept, meta)


def score_ensemble(model: EnsembleModel, row: Mapping[str, float]) -> float:
    """intercept + sum of weight * metric value."""
    missing = [m for m in model.selected_metrics if m not in row]
    if missing:
        raise KeyError(f"row missing metric(s) {missing}")
    return model.intercept + sum(
        w * row[m] for m, w in zip(model.selected_metrics, model.weights)
    )


def save_model(model: EnsembleModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps({
        "metrics": list(model.selected_metrics),
        "weights": list(model.weights),
        "intercept": model.intercept,
        "meta": model.training_meta,
    }, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> EnsembleModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return EnsembleModel(
        tuple(data["metrics"]),
        tuple(float(w) for w in data["weights"]),
        float(data.get("intercept", 0.0)),
        dict(data.get("meta", {})),
    )


def published_model() -> EnsembleModel:
    """The shipped pre-baked ensemble (published coefficients, intercept
    unknown and recorded as 0; all downstream evaluations are
    intercept-invariant)."""
    ref = resources.files("capeval") / "assets" / "published_ensemble.json"
    data = json.loads(ref.read_text(encoding="utf-8"))
    return EnsembleModel(
        tuple(data["metrics"]),
        tuple(float(w) for w in data["weights"]),
        float(data.get("intercept", 0.0)),
        dict(data.get("meta", {})),
    )
