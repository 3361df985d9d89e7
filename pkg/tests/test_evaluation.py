import numpy as np
import pytest
import torch

from logquestions import checkpoint as ckpt
from logquestions import evaluation
from logquestions.corpus import SentenceSet
from logquestions.engine import GameConfig, build_agents, play_episode
from logquestions.errors import DigestMismatch

CFG = GameConfig(hidden=8)

DOG_SETS = [
    SentenceSet(f"d{k}", [f"the {a} dog eats the ball .", f"the {b} dog holds the box .",
                          f"the {a} cat eats the ball .", f"the {b} cat holds the kite ."], ["dog", "cat"])
    for k, (a, b) in enumerate([("small", "large"), ("white", "black"), ("young", "old")])
]


@pytest.fixture(scope="module")
def agents(synth_table):
    return build_agents(synth_table, CFG, seed=3)


@pytest.fixture(scope="module")
def sample_sets(synth_corpus):
    sets, splits = synth_corpus
    by_id = {s.id: s for s in sets}
    return [by_id[i] for i in splits["train_sw"]]


def _forced_token(qbot, table, token):
    with torch.no_grad():
        qbot.out.weight.zero_()
        qbot.out.bias.fill_(-10.0)
        qbot.out.bias[table.lookup(token)] = 10.0


def test_episode_count_is_four_per_set(agents, synth_corpus, synth_table):
    qb, ab = agents
    report = evaluation.evaluate_game_accuracy(qb, ab, synth_corpus[0][:100], synth_table, CFG)
    assert report.episodes == 400
    assert 0.0 <= report.game_acc <= 1.0


@pytest.mark.parametrize("token, expected", [("dog", 1.0), ("chair", 0.0)])
def test_sw_prediction_trivial_agents(synth_table, token, expected):
    qb, ab = build_agents(synth_table, CFG, seed=0)
    _forced_token(qb, synth_table, token)
    assert evaluation.evaluate_sw_prediction(qb, ab, DOG_SETS, synth_table, CFG) == expected


def test_sw_prediction_not_available(synth_table, sample_sets):
    cfg5 = GameConfig(hidden=8, ql=5)
    qb, ab = build_agents(synth_table, cfg5, seed=0)
    assert evaluation.evaluate_sw_prediction(qb, ab, sample_sets[:5], synth_table, cfg5) == evaluation.NA
    qb, ab = build_agents(synth_table, CFG, seed=0)
    nosw = [SentenceSet(s.id, s.sentences, []) for s in sample_sets[:5]]
    report = evaluation.evaluate_game_accuracy(qb, ab, nosw, synth_table, CFG)
    assert report.sw_pred == evaluation.NA


def test_metrics_match_dumped_transcripts(agents, sample_sets, synth_table, tmp_path):
    qb, ab = agents
    sets = sample_sets[:30]
    report = evaluation.evaluate_game_accuracy(qb, ab, sets, synth_table, CFG)
    evaluation.dump_transcripts(qb, ab, sets, synth_table, CFG, limit=len(sets), path=tmp_path / "t.jsonl")
    back = evaluation.read_transcripts(tmp_path / "t.jsonl")
    assert len(back) == report.episodes
    assert sum(t.correct for t in back) / len(back) == report.game_acc
    assert all(t.correct == (t.guess == t.target) for t in back)
    assert evaluation.sw_prediction(back, sets, CFG) == report.sw_pred


def test_dump_limit_and_replay(agents, sample_sets, synth_table, tmp_path):
    qb, ab = agents
    out = evaluation.dump_transcripts(qb, ab, sample_sets, synth_table, CFG, limit=1, path=tmp_path / "d.jsonl")
    assert [t.target for t in out] == [0, 1, 2, 3]
    assert len({t.set_id for t in out}) == 1
    for t in evaluation.read_transcripts(tmp_path / "d.jsonl"):
        replay, _, _ = play_episode(qb, ab, sample_sets[0], t.target, CFG, synth_table, seed=t.seed)
        assert replay.guess == t.guess and replay.questions == t.questions
    with pytest.raises(ValueError):
        evaluation.dump_transcripts(qb, ab, sample_sets, synth_table, CFG, limit=0, path=tmp_path / "x")


def test_evaluation_leaves_parameters_untouched(agents, sample_sets, synth_table):
    qb, ab = agents
    before = ckpt.parameter_digest(qb, ab)
    evaluation.evaluate_game_accuracy(qb, ab, sample_sets[:20], synth_table, CFG)
    assert ckpt.parameter_digest(qb, ab) == before


def test_digest_mismatch(agents, sample_sets, synth_table):
    qb, ab = agents
    with pytest.raises(DigestMismatch):
        evaluation.evaluate_game_accuracy(qb, ab, sample_sets[:2], synth_table, CFG, expected_digest="0" * 64)


@pytest.mark.parametrize("text, bit", [("y", 1), ("Y", 1), ("yes", 1), (" n ", 0), ("no", 0)])
def test_parse_answer(text, bit):
    assert evaluation.parse_answer(text) == bit


def test_parse_answer_rejects_other_input():
    with pytest.raises(evaluation.InvalidInput):
        evaluation.parse_answer("maybe")


def test_interactive_play_matches_automated_episode(agents, sample_sets, synth_table):
    qb, ab = agents
    s = sample_sets[1]
    for target in range(4):
        auto, _, _ = play_episode(qb, ab, s, target, CFG, synth_table)
        replies = iter(["what?"] + ["y" if r else "n" for r in auto.responses] + ["9", str(target + 1)])
        shown = []
        human = evaluation.interactive_play(qb, s, synth_table, CFG, ask=lambda _: next(replies),
                                            show=shown.append)
        assert human.guess == auto.guess and human.questions == auto.questions
        assert human.responses == auto.responses and human.human
        assert human.target == target and human.correct == auto.correct
        assert "Please answer y or n." in shown
        assert type(human).from_json(human.to_json()) == human
