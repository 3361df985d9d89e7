"""Templated paired-sentence generator for desk-scale corpora.

Sentences fill four slots of ``the <adjective> <subject> <verb> the <object> .``
and every generated pair differs in a fixed number of slots. Pairs that
differ in few slots share most of their words; pairs that differ in all four
share only the function words.
"""
from __future__ import annotations

import numpy as np

ADJECTIVES = ("small", "large", "white", "black", "young", "old",
              "happy", "angry", "tired", "quick", "brown", "quiet")
SUBJECTS = ("dog", "cat", "man", "woman", "boy", "girl",
            "horse", "bird", "child", "player", "farmer", "chef")
VERBS = ("chases", "holds", "watches", "kicks", "carries", "finds",
         "throws", "paints", "drops", "cleans", "pushes", "eats")
OBJECTS = ("ball", "stick", "box", "hat", "bottle", "book",
           "apple", "rope", "chair", "kite", "basket", "bucket")
SLOTS = (ADJECTIVES, SUBJECTS, VERBS, OBJECTS)
FUNCTION_WORDS = ("the", ".")
# every slot changes, so neighbouring sentences share only function words
DEFAULT_CHANGES = 4
# typical per-component spread of 100-d GloVe vectors
VECTOR_STD = 0.4


def render(slots: tuple[int, ...]) -> str:
    adj, subj, verb, obj = (SLOTS[k][v] for k, v in enumerate(slots))
    return f"the {adj} {subj} {verb} the {obj} ."


def synthetic_pairs(num_pairs: int, seed: int, num_roots: int | None = None,
                    changes: int = DEFAULT_CHANGES) -> list[tuple[str, str]]:
    """Grow a pair graph by repeated mutation of existing sentences.

    Each record pairs a uniformly chosen existing sentence with a copy in
    which ``changes`` distinct slots take different values; the copy joins
    the pool.
    """
    rng = np.random.default_rng(seed)
    if num_roots is None:
        num_roots = max(1, num_pairs // 50)
    pool = [tuple(int(rng.integers(len(s))) for s in SLOTS) for _ in range(num_roots)]
    known = set(pool)
    pairs = []
    for _ in range(num_pairs):
        src = pool[int(rng.integers(len(pool)))]
        dst = list(src)
        for slot in rng.choice(len(SLOTS), size=changes, replace=False):
            value = int(rng.integers(len(SLOTS[slot]) - 1))
            dst[slot] = value + (value >= src[slot])
        dst = tuple(int(v) for v in dst)
        if dst not in known:
            known.add(dst)
            pool.append(dst)
        pairs.append((render(src), render(dst)))
    return pairs


def content_words() -> list[str]:
    return [w for slot in SLOTS for w in slot]


def vocabulary(num_distractors: int = 400) -> list[str]:
    """Corpus words followed by distractor pseudo-words, as an ordered word list."""
    words = list(FUNCTION_WORDS) + content_words()
    return words + [f"w{i:04d}" for i in range(num_distractors)]


def synthetic_vectors(dim: int, seed: int, num_distractors: int = 400, std: float = VECTOR_STD):
    """``(words, vectors)`` with i.i.d. N(0, std^2) components.

    The recurrent encoders only separate tokens when inputs are this large;
    at unit vector norm their final states barely depend on the words.
    """
    words = vocabulary(num_distractors)
    rng = np.random.default_rng(seed)
    return words, rng.normal(0.0, std, size=(len(words), dim)).astype(np.float32)
