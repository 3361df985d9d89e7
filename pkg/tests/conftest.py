import numpy as np
import pytest
import torch

from logquestions import corpus, embeddings, synthetic

torch.set_num_threads(1)


def brute_force_splitting_words(sentences, vocab=None):
    """Independent oracle: count sentence membership per token type by scanning."""
    toks = [s.lower().split() for s in sentences]
    inventory = sorted({t for ts in toks for t in ts})
    out = []
    for t in inventory:
        count = 0
        for ts in toks:
            if t in ts:
                count += 1
        if count * 2 == len(sentences) and (vocab is None or t in vocab):
            out.append(t)
    return out


@pytest.fixture(scope="session")
def synth_table():
    words, vectors = synthetic.synthetic_vectors(16, seed=0, num_distractors=30)
    return embeddings.from_vectors(words, vectors)


@pytest.fixture(scope="session")
def synth_corpus(synth_table):
    graph = corpus.ingest_pairs(synthetic.synthetic_pairs(600, seed=1))
    sets, splits = corpus.build_corpus(graph, 120, synth_table, seed=2)
    return sets, splits


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed after the run regardless of capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
