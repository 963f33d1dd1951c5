"""Shared text normalization: tokenization, Porter stemming, n-gram extraction.

All native metrics run on the output of :func:`tokenize`, so every metric sees
the exact same token stream.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Sequence

__all__ = ["tokenize", "stem", "ngrams"]

# ASCII punctuation stripped by the tokenizer. Apostrophes and hyphens are kept
# only between word characters (e.g. "state-of-the-art", "don't").
_HARD_PUNCT = re.compile(r"[!\"#$%&()*+,./:;<=>?@\[\\\]^_`{|}~]")
_LOOSE_APOS_HYPHEN = re.compile(r"(?<![0-9a-z])['\-]|['\-](?![0-9a-z])")


def tokenize(text: str) -> list[str]:
    """Lowercase, strip punctuation and split on whitespace.

    Intra-word apostrophes and hyphens survive; everything else in the ASCII
    punctuation set is removed. Empty input yields an empty list.
    """
    s = text.lower()
    s = _HARD_PUNCT.sub(" ", s)
    # Drop apostrophes/hyphens that are not between word characters. Runs like
    # "--" need repeated passes since each removal can expose another.
    prev = None
    while prev != s:
        prev = s
        s = _LOOSE_APOS_HYPHEN.sub(" ", s)
    return s.split()


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    """All contiguous n-token windows of ``tokens`` with multiplicity.

    Returns an empty Counter when the sequence is shorter than ``n``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# ---------------------------------------------------------------------------
# Porter stemmer (the classic 1980 algorithm, steps 1a-5b).
# ---------------------------------------------------------------------------

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem_: str) -> int:
    """Number of VC sequences in [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem_)):
        if _is_consonant(stem_, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _has_vowel(stem_: str) -> bool:
    return any(not _is_consonant(stem_, i) for i in range(len(stem_)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    """*o condition: ends consonant-vowel-consonant, final not w, x or y."""
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _replace_suffix(word: str, suffix: str, repl: str, min_measure: int) -> str | None:
    if not word.endswith(suffix):
        return None
    stem_ = word[: len(word) - len(suffix)]
    if _measure(stem_) > min_measure:
        return stem_ + repl
    return word  # suffix matched but condition failed: rule consumed, no change


def _apply_rule_list(word: str, rules: list[tuple[str, str]], min_measure: int) -> str:
    for suffix, repl in rules:
        out = _replace_suffix(word, suffix, repl, min_measure)
        if out is not None:
            return out
    return word


_STEP2_RULES = [
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
]

_STEP3_RULES = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_STEP4_SUFFIXES = [
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
]


def stem(token: str) -> str:
    """Porter-stem a lowercase token. Words of length <= 2 are unchanged."""
    word = token
    if len(word) <= 2:
        return word

    # Step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # Step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        cleanup = False
        if word.endswith("ed") and _has_vowel(word[:-2]):
            word = word[:-2]
            cleanup = True
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            word = word[:-3]
            cleanup = True
        if cleanup:
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _ends_double_consonant(word) and not word.endswith(("l", "s", "z")):
                word = word[:-1]
            elif _measure(word) == 1 and _ends_cvc(word):
                word += "e"

    # Step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # Steps 2 and 3 (m > 0)
    word = _apply_rule_list(word, _STEP2_RULES, 0)
    word = _apply_rule_list(word, _STEP3_RULES, 0)

    # Step 4 (m > 1; "ion" additionally needs a preceding s or t)
    for suffix in _STEP4_SUFFIXES:
        if word.endswith(suffix):
            stem_ = word[: len(word) - len(suffix)]
            if _measure(stem_) > 1:
                if suffix == "ion" and not stem_.endswith(("s", "t")):
                    break
                word = stem_
            break

    # Step 5a
    if word.endswith("e"):
        stem_ = word[:-1]
        m = _measure(stem_)
        if m > 1 or (m == 1 and not _ends_cvc(stem_)):
            word = stem_

    # Step 5b
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        word = word[:-1]

    return word
