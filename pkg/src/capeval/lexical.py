"""Reference-based lexical caption metrics: BLEU-1..4, ROUGE-L, CIDEr-D, METEOR.

All functions take pre-tokenized input (see :mod:`capeval.textnorm`). Scoring
behavior follows the de-facto COCO caption evaluation conventions: per-sentence
BLEU with tiny-count smoothing, ROUGE-L combining the max precision and max
recall over references, and the CIDEr-D variant with clipped TF-IDF counts and
a Gaussian length penalty. METEOR is computed from its published formula
(exact + stem stages; synonym stage only when a synonym table is supplied).
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Callable, Sequence

from .textnorm import ngrams, stem, tokenize

logger = logging.getLogger(__name__)

__all__ = [
    "bleu_n",
    "rouge_l",
    "build_df",
    "cider_d",
    "DocFreqStats",
    "meteor",
    "load_synonym_table",
    "score_dataset",
    "NATIVE_METRICS",
]

TokenSeq = Sequence[str]

# Smoothing constants for sentence-level BLEU: a zero n-gram match still yields
# a near-zero (not exactly zero) precision so the geometric mean is defined.
_BLEU_TINY = 1e-15
_BLEU_SMALL = 1e-9


def _check_refs(references: Sequence[TokenSeq]) -> None:
    if not references or all(len(r) == 0 for r in references):
        raise ValueError("at least one non-empty reference is required")


def bleu_n(candidate: TokenSeq, references: Sequence[TokenSeq], n: int) -> float:
    """Sentence-level BLEU-n with brevity penalty, n in 1..4."""
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be in 1..4, got {n}")
    _check_refs(references)
    c = len(candidate)
    if c == 0:
        return 0.0

    # Effective reference length: closest to the candidate, shorter on ties.
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]

    bleu = 1.0
    for k in range(1, n + 1):
        cand_counts = ngrams(candidate, k)
        max_ref = Counter()
        for ref in references:
            for gram, cnt in ngrams(ref, k).items():
                if cnt > max_ref[gram]:
                    max_ref[gram] = cnt
        correct = sum(min(cnt, max_ref[g]) for g, cnt in cand_counts.items())
        guess = max(0, c - k + 1)
        bleu *= (correct + _BLEU_TINY) / (guess + _BLEU_SMALL)
    bleu **= 1.0 / n

    if c < r:
        bleu *= math.exp(1.0 - r / c)
    return bleu


def _lcs_len(a: TokenSeq, b: TokenSeq) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq, references: Sequence[TokenSeq], beta: float = 1.2) -> float:
    """ROUGE-L F-score combining max precision and max recall over references."""
    _check_refs(references)
    if len(candidate) == 0:
        return 0.0
    precs, recs = [], []
    for ref in references:
        if len(ref) == 0:
            continue
        lcs = _lcs_len(candidate, ref)
        precs.append(lcs / len(candidate))
        recs.append(lcs / len(ref))
    p, r = max(precs), max(recs)
    if p == 0.0 or r == 0.0:
        return 0.0
    return ((1 + beta**2) * p * r) / (r + beta**2 * p)


@dataclass(frozen=True)
class DocFreqStats:
    """Corpus n-gram document frequencies for CIDEr's TF-IDF weighting."""

    max_n: int
    df: dict[tuple[str, ...], int]
    num_docs: int


def build_df(
    reference_sets: Sequence[Sequence[TokenSeq]],
    max_n: int = 4,
    stem_tokens: bool = False,
) -> DocFreqStats:
    """Document frequency of each n-gram over per-instance reference sets.

    ``df[g]`` counts the reference sets in which ``g`` occurs in at least one
    reference.
    """
    if not reference_sets:
        raise ValueError("empty corpus")
    df: dict[tuple[str, ...], int] = defaultdict(int)
    for refs in reference_sets:
        present: set[tuple[str, ...]] = set()
        for ref in refs:
            toks = [stem(t) for t in ref] if stem_tokens else list(ref)
            for k in range(1, max_n + 1):
                present.update(ngrams(toks, k))
        for gram in present:
            df[gram] += 1
    return DocFreqStats(max_n=max_n, df=dict(df), num_docs=len(reference_sets))


def _tfidf_vec(counts: Counter, stats: DocFreqStats, log_num: float):
    vecs = [defaultdict(float) for _ in range(stats.max_n)]
    norms = [0.0] * stats.max_n
    for gram, tf in counts.items():
        idf = log_num - math.log(max(1.0, stats.df.get(gram, 0)))
        k = len(gram) - 1
        vecs[k][gram] = tf * idf
        norms[k] += (tf * idf) ** 2
    return vecs, [math.sqrt(x) for x in norms]


def cider_d(
    candidate: TokenSeq,
    references: Sequence[TokenSeq],
    stats: DocFreqStats,
    sigma: float = 6.0,
    stem_tokens: bool = False,
) -> float:
    """CIDEr-D: clipped TF-IDF cosine per n-gram order with a Gaussian length
    penalty, averaged over orders and references, scaled by 10."""
    _check_refs(references)
    if stats is None:
        raise ValueError("document frequency stats are required")
    if stem_tokens:
        candidate = [stem(t) for t in candidate]
        references = [[stem(t) for t in ref] for ref in references]

    log_num = math.log(float(stats.num_docs)) if stats.num_docs > 1 else 0.0

    def counts_all(tokens: TokenSeq) -> Counter:
        counts = Counter()
        for k in range(1, stats.max_n + 1):
            counts.update(ngrams(tokens, k))
        return counts

    cand_vecs, cand_norms = _tfidf_vec(counts_all(candidate), stats, log_num)
    total = [0.0] * stats.max_n
    for ref in references:
        ref_vecs, ref_norms = _tfidf_vec(counts_all(ref), stats, log_num)
        delta = float(len(candidate) - len(ref))
        penalty = math.exp(-(delta**2) / (2 * sigma**2))
        for k in range(stats.max_n):
            val = sum(
                min(w, ref_vecs[k][g]) * ref_vecs[k][g]
                for g, w in cand_vecs[k].items()
                if g in ref_vecs[k]
            )
            if cand_norms[k] != 0.0 and ref_norms[k] != 0.0:
                val /= cand_norms[k] * ref_norms[k]
            total[k] += val * penalty
    score = sum(total) / stats.max_n / len(references) * 10.0
    return score


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------


def load_synonym_table(path) -> dict[str, int]:
    """Read a synonym table: one space-separated synonym set per line.

    Returns a token -> synset-id map usable as ``synonyms=`` in :func:`meteor`.
    """
    table: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for idx, line in enumerate(fh):
            for token in line.split():
                table.setdefault(token, idx)
    return table


def _stage_quotas(cand: list[str], ref: list[str], key: Callable[[str], str],
                  cand_free: list[bool], ref_free: list[bool]) -> dict[str, int]:
    ck = Counter(key(cand[i]) for i in range(len(cand)) if cand_free[i])
    rk = Counter(key(ref[j]) for j in range(len(ref)) if ref_free[j])
    return {w: min(c, rk[w]) for w, c in ck.items() if rk[w] > 0}


def _align(cand: list[str], ref: list[str], synonyms: dict[str, int] | None,
           node_budget: int = 200_000) -> tuple[int, int]:
    """Staged one-to-one unigram alignment.

    Stage order: exact match, stem match, synonym match (if a table is given).
    Each stage matches the maximum number of still-unmatched tokens; among
    alignments achieving those counts, the number of chunks is minimized by
    branch-and-bound (falling back to in-order pairing past ``node_budget``).
    Returns (match count, chunk count).
    """
    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)

    stages: list[Callable[[str], str]] = [lambda w: w, stem]
    if synonyms is not None:
        stages.append(lambda w: f"syn:{synonyms.get(w, 'w:' + w)}")

    # Per stage: match quotas per key; candidate and reference tokens are
    # reserved for a stage in left-to-right order (counts per key are what
    # determine maximality, so in-order reservation is canonical).
    quotas: list[dict[str, int]] = []
    cand_stage = [-1] * len(cand)
    ref_stage = [-1] * len(ref)
    cand_keys: list[list[str]] = []
    ref_keys: list[list[str]] = []
    for s, key in enumerate(stages):
        q = _stage_quotas(cand, ref, key, cand_free, ref_free)
        quotas.append(q)
        cand_keys.append([key(w) for w in cand])
        ref_keys.append([key(w) for w in ref])
        taken = dict(q)
        for i in range(len(cand)):
            if cand_free[i] and taken.get(cand_keys[s][i], 0) > 0:
                taken[cand_keys[s][i]] -= 1
                cand_free[i] = False
                cand_stage[i] = s
        taken = dict(q)
        for j in range(len(ref)):
            if ref_free[j] and taken.get(ref_keys[s][j], 0) > 0:
                taken[ref_keys[s][j]] -= 1
                ref_free[j] = False
                ref_stage[j] = s

    m = sum(sum(q.values()) for q in quotas)
    if m == 0:
        return 0, 0

    matched_positions = [i for i in range(len(cand)) if cand_stage[i] >= 0]

    # Greedy in-order pairing as the initial bound: continue the current chunk
    # when possible, otherwise take the leftmost eligible reference token.
    greedy_used = [False] * len(ref)
    greedy_chunks = 0
    prev_i = prev_j = -2
    for i in matched_positions:
        s = cand_stage[i]
        key = cand_keys[s][i]
        eligible = [
            j for j in range(len(ref))
            if not greedy_used[j] and ref_stage[j] == s and ref_keys[s][j] == key
        ]
        if i == prev_i + 1 and prev_j + 1 in eligible:
            j = prev_j + 1
        else:
            j = eligible[0]
            greedy_chunks += 1
        greedy_used[j] = True
        prev_i, prev_j = i, j

    ref_used = [False] * len(ref)
    best = [greedy_chunks]
    nodes = [0]

    # Candidate positions are processed left to right, so pairs come out
    # sorted by candidate position and the chunk count is incremental.
    def rec(idx: int, chunks: int, prev_i: int, prev_j: int) -> None:
        if chunks >= best[0]:
            return
        if idx == len(matched_positions):
            best[0] = chunks
            return
        i = matched_positions[idx]
        s = cand_stage[i]
        key = cand_keys[s][i]
        for j in range(len(ref)):
            if ref_used[j] or ref_stage[j] != s or ref_keys[s][j] != key:
                continue
            nodes[0] += 1
            if nodes[0] > node_budget:
                return
            ref_used[j] = True
            extra = 0 if (i == prev_i + 1 and j == prev_j + 1) else 1
            rec(idx + 1, chunks + extra, i, j)
            ref_used[j] = False

    rec(0, 0, -2, -2)
    return m, best[0]


def meteor(
    candidate: TokenSeq,
    references: Sequence[TokenSeq],
    alpha: float = 0.9,
    gamma: float = 0.5,
    theta: float = 3.0,
    synonyms: dict[str, int] | None = None,
) -> float:
    """METEOR with exact and stem match stages (synonym stage optional).

    Per reference: unigram precision/recall from the staged alignment,
    F_mean = P*R / (alpha*P + (1-alpha)*R), fragmentation penalty
    gamma * (chunks/m)^theta; score is the max over references.
    """
    _check_refs(references)
    if len(candidate) == 0:
        return 0.0
    cand = list(candidate)
    best = 0.0
    for ref in references:
        if len(ref) == 0:
            continue
        m, chunks = _align(cand, list(ref), synonyms)
        if m == 0:
            continue
        p = m / len(cand)
        r = m / len(ref)
        f_mean = p * r / (alpha * p + (1 - alpha) * r)
        penalty = gamma * (chunks / m) ** theta
        best = max(best, f_mean * (1 - penalty))
    return best


# ---------------------------------------------------------------------------
# Dataset-level scoring
# ---------------------------------------------------------------------------

NATIVE_METRICS = ("BLEU1", "BLEU2", "BLEU3", "BLEU4", "ROUGE", "CIDEr", "METEOR")


def score_dataset(dataset, metrics: Sequence[str], synonyms: dict[str, int] | None = None):
    """Score every instance of a rating dataset with the named native metrics.

    Returns a :class:`capeval.scores.ScoreMatrix` with one column per metric.
    Instances with no references are reported and their cells left missing.
    """
    from .scores import ScoreMatrix  # local import to avoid a cycle

    unknown = [m for m in metrics if m not in NATIVE_METRICS]
    if unknown:
        raise ValueError(
            f"unknown native metric(s) {unknown}; valid names: {list(NATIVE_METRICS)}"
        )

    tokenized = [
        (tokenize(inst.candidate), [tokenize(r) for r in inst.references])
        for inst in dataset.instances
    ]
    stats = None
    if "CIDEr" in metrics:
        ref_sets = [refs for _, refs in tokenized if refs]
        stats = build_df(ref_sets) if ref_sets else None

    matrix = ScoreMatrix.empty(
        [inst.instance_id for inst in dataset.instances], list(metrics)
    )
    skipped = 0
    for row, (inst, (cand, refs)) in enumerate(zip(dataset.instances, tokenized)):
        if not refs or all(len(r) == 0 for r in refs):
            skipped += 1
            continue
        for col, name in enumerate(metrics):
            if name.startswith("BLEU"):
                value = bleu_n(cand, refs, int(name[4]))
            elif name == "ROUGE":
                value = rouge_l(cand, refs)
            elif name == "CIDEr":
                value = cider_d(cand, refs, stats)
            else:
                value = meteor(cand, refs, synonyms=synonyms)
            matrix.set(row, col, value)
    if skipped:
        logger.warning("%d instance(s) had no references; rows left missing", skipped)
    return matrix
