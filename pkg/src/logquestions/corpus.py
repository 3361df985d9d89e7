"""Game corpora: pair graphs, 4-sentence sets, splitting words and splits."""
from __future__ import annotations

import csv
import json
import logging
import os
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AllDegenerate, DataError, DeadEnd, EmptyInput, InsufficientGraph

logger = logging.getLogger(__name__)

SET_SIZE = 4
WALK_ATTEMPTS = 64
PARTITIONS = ("train_sw", "dev_sw", "test_sw", "train_nosw", "dev_nosw", "test_nosw")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split punctuation off as tokens."""
    return _TOKEN_RE.findall(text.lower())


def normalize(text: str) -> str:
    return " ".join(tokenize(text))


@dataclass
class PairGraph:
    """Undirected "has been paired with" graph over normalized passages."""

    nodes: list[str]
    adjacency: list[list[int]]

    @property
    def num_edges(self) -> int:
        return sum(len(nbrs) for nbrs in self.adjacency) // 2

    def neighbors(self, passage: str) -> list[str]:
        i = self.nodes.index(passage)
        return [self.nodes[j] for j in self.adjacency[i]]

    def has_edge(self, a: str, b: str) -> bool:
        return b in self.neighbors(a)


@dataclass
class SentenceSet:
    id: str
    sentences: list[str]
    splitting_words: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"id": self.id, "sentences": list(self.sentences),
                "splitting_words": list(self.splitting_words)}

    @classmethod
    def from_json(cls, obj: dict) -> "SentenceSet":
        return cls(obj["id"], list(obj["sentences"]), list(obj["splitting_words"]))


def ingest_pairs(pair_records: Iterable[tuple[str, str]]) -> PairGraph:
    """Build the pair graph; duplicate pairings collapse to one edge."""
    index: dict[str, int] = {}
    nodes: list[str] = []
    edges: set[tuple[int, int]] = set()
    n_records = 0

    def node(text):
        if text not in index:
            index[text] = len(nodes)
            nodes.append(text)
        return index[text]

    for a, b in pair_records:
        n_records += 1
        a, b = normalize(a), normalize(b)
        if not a or not b:
            raise DataError(f"record {n_records}: empty passage after normalization")
        if a == b:
            continue
        i, j = node(a), node(b)
        edges.add((min(i, j), max(i, j)))
    if n_records == 0:
        raise EmptyInput("no pair records")
    if not edges:
        raise AllDegenerate("every record is a self-pair after normalization")
    adjacency: list[list[int]] = [[] for _ in nodes]
    for i, j in sorted(edges):
        adjacency[i].append(j)
        adjacency[j].append(i)
    return PairGraph(nodes, adjacency)


def read_pairs_tsv(path) -> list[tuple[str, str]]:
    """Two-column tab-separated UTF-8 pair file."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{line_no}: expected 2 columns, got {len(row)}")
            records.append((row[0], row[1]))
    return records


def write_pairs_tsv(path, records: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in records:
            fh.write(f"{a}\t{b}\n")


def sample_sentence_set(graph: PairGraph, seed: int, attempts: int = WALK_ATTEMPTS) -> SentenceSet:
    """Random walk a-b-c-d over distinct passages, each step along an edge.

    Each attempt picks a uniform start and then uniform unvisited neighbours;
    a walk that cannot be extended counts as a failed attempt.
    """
    if len(graph.nodes) < SET_SIZE:
        raise DeadEnd(f"graph has only {len(graph.nodes)} passages")
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        walk = [int(rng.integers(len(graph.nodes)))]
        while len(walk) < SET_SIZE:
            options = [j for j in graph.adjacency[walk[-1]] if j not in walk]
            if not options:
                break
            walk.append(options[int(rng.integers(len(options)))])
        if len(walk) == SET_SIZE:
            return SentenceSet(id=f"seed{seed}", sentences=[graph.nodes[i] for i in walk])
    raise DeadEnd(f"no simple {SET_SIZE}-walk found in {attempts} attempts")


def membership_counts(sentences: Sequence[str]) -> Counter:
    """Number of sentences each token type appears in (presence, not frequency)."""
    counts: Counter = Counter()
    for s in sentences:
        counts.update(set(tokenize(s)))
    return counts


def find_splitting_words(sentence_set: SentenceSet, vocab=None) -> list[str]:
    """Tokens present in exactly half of the sentences, sorted.

    ``vocab`` is anything supporting ``in`` (an EmbeddingTable, a set); None
    means an open vocabulary.
    """
    half = len(sentence_set.sentences) // 2
    counts = membership_counts(sentence_set.sentences)
    return sorted(t for t, c in counts.items() if c == half and (vocab is None or t in vocab))


@dataclass
class CorpusSplits:
    partitions: dict[str, list[str]]

    def __getitem__(self, name: str) -> list[str]:
        return self.partitions[name]

    def to_json(self) -> dict:
        return {name: list(self.partitions[name]) for name in PARTITIONS}


def derive_seed(*parts: int) -> int:
    """Stable per-item seed from a root seed and indices."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def split_counts(n: int) -> tuple[int, int, int]:
    dev = int(np.floor(0.1 * n + 0.5))
    test = dev
    return n - dev - test, dev, test


def _split(ids: list[str], rng: np.random.Generator) -> tuple[list[str], list[str], list[str]]:
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train, n_dev, _ = split_counts(len(ids))
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]


def build_corpus(graph: PairGraph, num_sets: int, vocab, seed: int,
                 attempts: int = WALK_ATTEMPTS) -> tuple[list[SentenceSet], CorpusSplits]:
    """Sample ``num_sets`` unique sets, annotate splitting words, and split.

    Only in-vocabulary splitting words are recorded, so a set lands in the
    without-SW subset exactly when it has no in-vocabulary splitting word.
    """
    if num_sets < 10:
        raise ValueError("num_sets must be >= 10")
    sets: list[SentenceSet] = []
    seen: set[tuple[str, ...]] = set()
    for i in range(num_sets):
        for j in range(attempts):
            try:
                candidate = sample_sentence_set(graph, derive_seed(seed, i, j))
            except DeadEnd:
                continue
            key = tuple(sorted(candidate.sentences))
            if key not in seen:
                break
        else:
            raise InsufficientGraph(f"could not produce set {i} of {num_sets} unique sets")
        seen.add(key)
        candidate.id = f"set{i:06d}"
        candidate.splitting_words = find_splitting_words(candidate, vocab)
        sets.append(candidate)

    rng = np.random.default_rng(derive_seed(seed, num_sets, 2**31 - 1))
    with_sw = [s.id for s in sets if s.splitting_words]
    without_sw = [s.id for s in sets if not s.splitting_words]
    parts = {}
    for suffix, ids in (("sw", with_sw), ("nosw", without_sw)):
        train, dev, test = _split(ids, rng)
        parts[f"train_{suffix}"], parts[f"dev_{suffix}"], parts[f"test_{suffix}"] = train, dev, test
    return sets, CorpusSplits(parts)


CORPUS_FILE = "corpus.jsonl"
SPLITS_FILE = "splits.json"


def write_corpus(out_dir, sets: Sequence[SentenceSet], splits: CorpusSplits) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, CORPUS_FILE), "w", encoding="utf-8", newline="\n") as fh:
        for s in sets:
            fh.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")
    with open(os.path.join(out_dir, SPLITS_FILE), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(splits.to_json(), fh, indent=1)
        fh.write("\n")


def read_corpus(data_dir) -> tuple[dict[str, SentenceSet], CorpusSplits]:
    """Load a corpus directory; returns sets keyed by id plus the splits."""
    sets = {}
    with open(os.path.join(data_dir, CORPUS_FILE), encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                s = SentenceSet.from_json(json.loads(line))
                sets[s.id] = s
    with open(os.path.join(data_dir, SPLITS_FILE), encoding="utf-8") as fh:
        raw = json.load(fh)
    missing = [p for p in PARTITIONS if p not in raw]
    if missing:
        raise DataError(f"splits file lacks partitions {missing}")
    return sets, CorpusSplits({p: list(raw[p]) for p in PARTITIONS})


def check_splits(sets: Sequence[SentenceSet], splits: CorpusSplits) -> None:
    """Raise DataError unless the partitions are disjoint, exhaustive and SW-consistent."""
    by_id = {s.id: s for s in sets}
    seen: set[str] = set()
    for name in PARTITIONS:
        ids = set(splits[name])
        if ids & seen:
            raise DataError(f"partition {name} overlaps another partition")
        seen |= ids
        want_sw = name.endswith("_sw")
        if any(bool(by_id[i].splitting_words) != want_sw for i in ids):
            raise DataError(f"partition {name} holds a set of the wrong SW kind")
    if seen != set(by_id):
        raise DataError("partitions do not cover the corpus")


__all__ = [
    "PARTITIONS", "PairGraph", "SentenceSet", "CorpusSplits", "tokenize", "normalize",
    "ingest_pairs", "read_pairs_tsv", "write_pairs_tsv", "sample_sentence_set",
    "find_splitting_words", "build_corpus", "write_corpus", "read_corpus", "check_splits",
    "membership_counts", "derive_seed", "split_counts",
]
