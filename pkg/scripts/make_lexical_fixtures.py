#!/usr/bin/env python3
"""Regenerate the frozen lexical-metric fixtures.

Builds a deterministic 50-instance caption corpus (MSCOCO-style sentences,
5 references each) and freezes per-instance expected scores:

* BLEU-1..4, ROUGE-L, CIDEr-D: computed by the coco-caption reference
  scorers. Pass the path to a module containing the reference ``Bleu``,
  ``Rouge`` and ``Cider`` classes via ``--reference-module`` (e.g. a checkout
  of github.com/tylin/coco-caption or the pycocoevalcap package sources).
* METEOR: computed by the exhaustive oracle below (full enumeration of staged
  alignments, no pruning), independent of the package implementation.

Usage:
    python3 scripts/make_lexical_fixtures.py --reference-module PATH
"""

from __future__ import annotations

import argparse
import importlib.util
import itertools
import json
import random
import sys
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from capeval.textnorm import stem, tokenize  # noqa: E402

FIXTURE_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

NOUNS = ["man", "woman", "dog", "cat", "boy", "girl", "horse", "bus", "bench",
         "kitchen", "beach", "ball", "street", "bike", "pizza", "table",
         "umbrella", "train", "surfer", "child"]
VERBS = ["rides", "walks", "holds", "watches", "throws", "eats", "sits on",
         "runs past", "jumps over", "stands near", "plays with", "looks at"]
ADJS = ["young", "old", "small", "large", "happy", "brown", "white", "busy",
        "quiet", "colorful"]
PLACES = ["in the park", "on the beach", "near the station", "at the market",
          "on a sunny day", "in the city", "by the river", "under a tree",
          "on the sidewalk", "next to a fence"]


def make_sentence(rng: random.Random) -> str:
    a1, a2 = rng.choice(ADJS), rng.choice(ADJS)
    n1, n2 = rng.sample(NOUNS, 2)
    v = rng.choice(VERBS)
    p = rng.choice(PLACES)
    forms = [
        f"A {a1} {n1} {v} a {n2} {p}.",
        f"The {a1} {n1} {v} the {a2} {n2} {p}.",
        f"A {n1} {v} a {a2} {n2}.",
        f"A {a1} {n1} and a {n2} {p}.",
    ]
    return rng.choice(forms)


def perturb(sentence: str, rng: random.Random) -> str:
    words = sentence.rstrip(".").split()
    op = rng.random()
    if op < 0.3 and len(words) > 4:
        del words[rng.randrange(len(words))]
    elif op < 0.6:
        words[rng.randrange(len(words))] = rng.choice(NOUNS + ADJS)
    elif op < 0.8 and len(words) > 5:
        i, j = rng.sample(range(len(words)), 2)
        words[i], words[j] = words[j], words[i]
    else:
        words.append(rng.choice(PLACES).split()[-1])
    return " ".join(words) + "."


def build_corpus(seed: int = 20240613, n: int = 50):
    rng = random.Random(seed)
    corpus = []
    for i in range(n):
        refs = [make_sentence(rng) for _ in range(5)]
        if i % 10 == 0:
            cand = refs[0]  # identical to a reference
        elif i % 10 == 1:
            cand = "Zebras gallop across empty violet dunes."  # zero overlap
        else:
            cand = perturb(rng.choice(refs), rng)
            for _ in range(rng.randrange(3)):
                cand = perturb(cand, rng)
        corpus.append({
            "instance_id": f"fx{i:03d}",
            "image_id": f"img{i:03d}",
            "candidate": cand,
            "references": refs,
            "rating": None,
            "split": "unsplit",
        })
    return corpus


# ---------------------------------------------------------------------------
# Exhaustive METEOR oracle (independent of capeval.lexical)
# ---------------------------------------------------------------------------

def meteor_oracle(cand: list[str], refs: list[list[str]],
                  alpha=0.9, gamma=0.5, theta=3.0) -> float:
    if not cand:
        return 0.0
    best = 0.0
    for ref in refs:
        if not ref:
            continue
        m, chunks = _oracle_align(cand, ref)
        if m == 0:
            continue
        p, r = m / len(cand), m / len(ref)
        f = p * r / (alpha * p + (1 - alpha) * r)
        best = max(best, f * (1 - gamma * (chunks / m) ** theta))
    return best


def _oracle_align(cand: list[str], ref: list[str]) -> tuple[int, int]:
    # staged quotas with in-order reservation (exact, then stem)
    stages = [lambda w: w, stem]
    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)
    cand_stage = [-1] * len(cand)
    ref_stage = [-1] * len(ref)
    keys = []
    for s, key in enumerate(stages):
        ck = Counter(key(w) for w, f in zip(cand, cand_free) if f)
        rk = Counter(key(w) for w, f in zip(ref, ref_free) if f)
        quota = {w: min(c, rk[w]) for w, c in ck.items() if rk[w] > 0}
        keys.append([key(w) for w in cand])
        taken = dict(quota)
        for i, w in enumerate(cand):
            if cand_free[i] and taken.get(key(w), 0) > 0:
                taken[key(w)] -= 1
                cand_free[i] = False
                cand_stage[i] = s
        taken = dict(quota)
        for j, w in enumerate(ref):
            if ref_free[j] and taken.get(key(w), 0) > 0:
                taken[key(w)] -= 1
                ref_free[j] = False
                ref_stage[j] = s

    matched = [i for i in range(len(cand)) if cand_stage[i] >= 0]
    m = len(matched)
    if m == 0:
        return 0, 0

    # enumerate every complete one-to-one assignment, keep min chunk count
    options = []
    for i in matched:
        s = cand_stage[i]
        key = stages[s]
        options.append([j for j in range(len(ref))
                        if ref_stage[j] == s and key(ref[j]) == key(cand[i])])

    best_chunks = m
    for combo in itertools.product(*options):
        if len(set(combo)) != m:
            continue
        chunks = 0
        prev_i = prev_j = -2
        for i, j in zip(matched, combo):
            if not (i == prev_i + 1 and j == prev_j + 1):
                chunks += 1
            prev_i, prev_j = i, j
        best_chunks = min(best_chunks, chunks)
    return m, best_chunks


def load_reference_module(path: str):
    spec = importlib.util.spec_from_file_location("cocoref", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--reference-module", required=True,
                    help="path to a coco-caption module with Bleu/Rouge/Cider")
    args = ap.parse_args()

    corpus = build_corpus()
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    with (FIXTURE_DIR / "lexical_corpus.jsonl").open("w") as fh:
        for rec in corpus:
            fh.write(json.dumps(rec) + "\n")

    # feed the reference scorers pre-tokenized (space-joined) sentences so the
    # comparison isolates metric computation from tokenization
    gts, res = {}, {}
    for rec in corpus:
        iid = rec["instance_id"]
        gts[iid] = [" ".join(tokenize(r)) for r in rec["references"]]
        res[iid] = [" ".join(tokenize(rec["candidate"]))]

    ref = load_reference_module(args.reference_module)
    _, bleu_scores = ref.Bleu(4).compute_score(gts, res)
    _, rouge_scores = ref.Rouge().compute_score(gts, res)
    _, cider_scores = ref.Cider().compute_score(gts, res)

    expected = {}
    for k, rec in enumerate(corpus):
        iid = rec["instance_id"]
        cand = tokenize(rec["candidate"])
        refs = [tokenize(r) for r in rec["references"]]
        expected[iid] = {
            "BLEU1": bleu_scores[0][k],
            "BLEU2": bleu_scores[1][k],
            "BLEU3": bleu_scores[2][k],
            "BLEU4": bleu_scores[3][k],
            "ROUGE": float(rouge_scores[k]),
            "CIDEr": float(cider_scores[k]),
            "METEOR": meteor_oracle(cand, refs),
        }

    (FIXTURE_DIR / "lexical_expected.json").write_text(
        json.dumps(expected, indent=2) + "\n"
    )
    print(f"wrote {len(corpus)} instances and expected scores to {FIXTURE_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
