import torch

from logquestions.abot import straight_through_bit
from logquestions.corpus import SentenceSet
from logquestions.engine import GameConfig, build_agents, make_batch


def _setup(table, seed=0):
    qb, ab = build_agents(table, GameConfig(hidden=8), seed)
    s = SentenceSet("x", ["the dog eats the ball .", "the cat holds the book .",
                          "the boy finds the kite .", "the old man finds the kite ."])
    return qb, ab, make_batch([s], table, 4)


def test_encode_answer(synth_table):
    qb, ab, batch = _setup(synth_table)
    ids, lens = batch.target_sentences(torch.tensor([1]))
    with torch.no_grad():
        e = ab.encode_answer(ids, lens)
        assert e.shape == (1, 16)
        assert torch.equal(e, ab.encode_answer(ids, lens))
        q_side = qb.encode_sentences(batch.ids, batch.lengths)[0, 1]
    assert not torch.allclose(e[0], q_side)


def test_agents_share_no_storage(synth_table):
    qb, ab, _ = _setup(synth_table)
    q_ptrs = {p.data_ptr() for p in qb.parameters()}
    assert not q_ptrs & {p.data_ptr() for p in ab.parameters()}


def test_single_token_question_encoding(synth_table):
    _, ab, _ = _setup(synth_table)
    tok = synth_table.lookup("dog")
    rows = torch.nn.functional.one_hot(torch.tensor([[tok]]), len(synth_table)).float()
    with torch.no_grad():
        q = ab.encode_question(rows)
        _, (h_n, _) = ab.question_encoder(ab.embedding[tok].view(1, 1, -1))
    assert q.shape == (1, 16)
    torch.testing.assert_close(q[0], torch.cat([h_n[0, 0], h_n[1, 0]]))


def test_question_gradient_reaches_soft_rows(synth_table):
    _, ab, batch = _setup(synth_table)
    rows = torch.softmax(torch.randn(1, 2, len(synth_table)), -1).requires_grad_()
    ids, lens = batch.target_sentences(torch.tensor([0]))
    ab.confidence(ab.encode_answer(ids, lens), ab.encode_question(rows)).sum().backward()
    assert rows.grad.abs().sum() > 0


def test_zero_responder_says_yes(synth_table):
    _, ab, batch = _setup(synth_table)
    with torch.no_grad():
        for p in list(ab.layer1.parameters()) + list(ab.layer2.parameters()):
            p.zero_()
    ids, lens = batch.target_sentences(torch.tensor([2]))
    rows = torch.nn.functional.one_hot(torch.tensor([[5]]), len(synth_table)).float()
    resp = ab.respond(ab.encode_answer(ids, lens), ab.encode_question(rows))
    assert resp.confidence.item() == 0.5
    assert resp.bit.item() == 1.0


def test_bits_are_binary_and_match_threshold(synth_table):
    _, ab, batch = _setup(synth_table, seed=5)
    ids, lens = batch.target_sentences(torch.tensor([0, 1, 2, 3]).repeat(8)[:1])
    e = ab.encode_answer(ids.expand(32, -1), lens.expand(32))
    rows = torch.softmax(3 * torch.randn(32, 1, len(synth_table)), -1)
    resp = ab.respond(e, ab.encode_question(rows))
    assert set(resp.bit.tolist()) <= {0.0, 1.0}
    assert torch.equal(resp.bit == 1, resp.confidence >= 0.5)


def test_straight_through_gradient_is_identity():
    conf = torch.tensor([0.2, 0.5, 0.9], requires_grad=True)
    bit = straight_through_bit(conf)
    assert bit.tolist() == [0.0, 1.0, 1.0]
    bit.backward(torch.tensor([1.0, 2.0, 3.0]))
    assert conf.grad.tolist() == [1.0, 2.0, 3.0]


def test_sampled_bits_are_binary():
    conf = torch.full((1000,), 0.3)
    bits = straight_through_bit(conf, sample=True, generator=torch.Generator().manual_seed(0))
    assert set(bits.tolist()) <= {0.0, 1.0}
    assert 0.25 < bits.mean().item() < 0.35
