"""Non-learned splitting-word finder driven by embedding dot products.

Every vocabulary token gets an affinity to each sentence (max dot product with
the sentence's in-vocabulary words), a softmax turns the affinities into a
distribution over sentences, and the token is scored by its lowest
cross-entropy against the six "two sentences vs. the other two" targets. The
token with the lowest score is the predicted splitting word.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .corpus import SentenceSet, tokenize
from .embeddings import SPECIALS, EmbeddingTable

AGGREGATES = ("max", "sum", "mean")
TIE_ATOL = 1e-9


@dataclass
class SplitDistribution:
    token: int
    probs: np.ndarray
    best_pair: tuple[int, int]  # 0-based sentence indices
    score: float


def _sentence_word_ids(sentence_set: SentenceSet, table: EmbeddingTable) -> list[list[int]]:
    # OOV words are skipped rather than mapped to <unk>
    return [[table.lookup(w) for w in tokenize(s) if w in table] for s in sentence_set.sentences]


def affinities(token_ids, sentence_set: SentenceSet, table: EmbeddingTable,
               aggregate: str = "max") -> np.ndarray:
    """(K, N) token-to-sentence affinities for the K ``token_ids``."""
    if aggregate not in AGGREGATES:
        raise ValueError(f"aggregate must be one of {AGGREGATES}")
    vecs = table.vectors.astype(np.float64)
    tokens = vecs[np.asarray(token_ids)]
    word_ids = _sentence_word_ids(sentence_set, table)
    out = np.full((len(tokens), len(word_ids)), -np.inf)
    for i, ids in enumerate(word_ids):
        if not ids:
            continue
        dots = tokens @ vecs[ids].T
        out[:, i] = getattr(dots, aggregate)(axis=1)
    if not any(word_ids):
        out[:] = 0.0
    return out


def _log_softmax(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=-1, keepdims=True)
    shifted = a - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _pair_scores(log_p: np.ndarray):
    pairs = list(combinations(range(log_p.shape[-1]), 2))
    scores = np.stack([-0.5 * (log_p[..., i] + log_p[..., j]) for i, j in pairs], axis=-1)
    return pairs, scores


def split_distribution(token: int, sentence_set: SentenceSet, table: EmbeddingTable,
                       aggregate: str = "max") -> SplitDistribution:
    log_p = _log_softmax(affinities([token], sentence_set, table, aggregate))[0]
    pairs, scores = _pair_scores(log_p)
    k = int(np.argmin(scores))
    return SplitDistribution(token, np.exp(log_p), pairs[k], float(scores[k]))


def split_scores(sentence_set: SentenceSet, table: EmbeddingTable, aggregate: str = "max"):
    """``(token_ids, scores)`` for every non-special vocabulary token."""
    token_ids = np.arange(len(SPECIALS), len(table))
    log_p = _log_softmax(affinities(token_ids, sentence_set, table, aggregate))
    _, scores = _pair_scores(log_p)
    return token_ids, scores.min(axis=-1)


def best_splitter(sentence_set: SentenceSet, table: EmbeddingTable, aggregate: str = "max") -> int:
    """Token id with the lowest split score; near-ties go to the smallest token string."""
    token_ids, scores = split_scores(sentence_set, table, aggregate)
    best = scores.min()
    tied = token_ids[np.isclose(scores, best, rtol=0.0, atol=TIE_ATOL) | (scores == best)]
    return int(min(tied, key=table.token_at))


def evaluate_baseline(sets: Sequence[SentenceSet], table: EmbeddingTable, aggregate: str = "max") -> float:
    """Fraction of sets whose best splitter is one of their annotated splitting words."""
    sets = list(sets)
    if not sets:
        raise ValueError("no sets to evaluate")
    if any(not s.splitting_words for s in sets):
        raise ValueError("every evaluated set needs at least one splitting word")
    hits = 0
    for s in sets:
        hits += table.token_at(best_splitter(s, table, aggregate)) in s.splitting_words
    return hits / len(sets)
