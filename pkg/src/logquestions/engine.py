"""Episodes, training signals and the optimization loop."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from . import checkpoint as ckpt
from .abot import ABot
from .corpus import SentenceSet, derive_seed, tokenize
from .embeddings import PAD, SOS, EmbeddingTable
from .errors import ConfigMismatch, DataError, NonFiniteLoss
from .qbot import QBot, Question, gate_sentences, guess, memory_read

logger = logging.getLogger(__name__)

REGIMES = ("game", "sw_game", "game_sw")
PROB_FLOOR = 1e-12


@dataclass
class GameConfig:
    n: int = 4
    ql: int = 1
    gamma: float = 1.0
    temperature: float = 1.0
    hard_channel: bool = True
    hidden: int = 64

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.ql < 1:
            raise ValueError("question length must be >= 1")
        if self.temperature <= 0 or self.gamma < 0:
            raise ValueError("temperature must be > 0 and gamma >= 0")

    @property
    def rounds(self) -> int:
        return self.n.bit_length() - 1


@dataclass
class TrainConfig:
    loss_regime: str = "game"
    alpha: float = 0.7
    pretrain_steps: int = 0
    # larger steps reach a peak sooner and then collapse to a constant answer
    lr: float = 1e-4
    clip: float = 5.0
    batch_size: int = 32
    epochs: int = 150
    patience: int = 40
    seed: int = 0
    sample_responses: bool = False
    pretrain_batch_size: int = 64
    # membership pretraining stays on a plateau at small step sizes
    pretrain_lr: float = 1e-2

    def __post_init__(self):
        if self.loss_regime not in REGIMES:
            raise ValueError(f"loss_regime must be one of {REGIMES}")
        if not 0.5 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0.5, 1]")


def build_agents(table: EmbeddingTable, cfg: GameConfig, seed: int) -> tuple[QBot, ABot]:
    """Fresh agents; both copy the table's vectors into private matrices."""
    torch.manual_seed(seed)
    qbot = QBot(table.vectors, cfg.hidden, sos_id=table.lookup(SOS))
    abot = ABot(table.vectors, cfg.hidden)
    return qbot, abot


# ---------------------------------------------------------------- batching

@dataclass
class SetBatch:
    ids: torch.Tensor  # (B, N, T)
    lengths: torch.Tensor  # (B, N)
    sets: list[SentenceSet]
    sw_ids: list[list[int]]

    def target_sentences(self, targets: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        rows = torch.arange(len(self.sets))
        return self.ids[rows, targets], self.lengths[rows, targets]


def make_batch(sets: Sequence[SentenceSet], table: EmbeddingTable, n: int) -> SetBatch:
    encoded = []
    for s in sets:
        if len(s.sentences) != n:
            raise ConfigMismatch(f"set {s.id} has {len(s.sentences)} sentences, game expects {n}")
        encoded.append([table.encode(tokenize(sent)) or [table.lookup(PAD)] for sent in s.sentences])
    t = max(len(x) for sent_ids in encoded for x in sent_ids)
    ids = torch.full((len(sets), n, t), table.lookup(PAD), dtype=torch.long)
    lengths = torch.zeros((len(sets), n), dtype=torch.long)
    for b, sent_ids in enumerate(encoded):
        for i, x in enumerate(sent_ids):
            ids[b, i, :len(x)] = torch.tensor(x)
            lengths[b, i] = len(x)
    sw_ids = [[table.lookup(w) for w in s.splitting_words if w in table] for s in sets]
    return SetBatch(ids, lengths, list(sets), sw_ids)


# ---------------------------------------------------------------- episodes

Responder = Callable[[int, Question], torch.Tensor]


def abot_responder(abot: ABot, target_ids, target_lengths, sample: bool = False,
                   generator=None) -> Responder:
    """Bind the A-Bot to the target sentences only; returns bits per round."""
    e_a = abot.encode_answer(target_ids, target_lengths)

    def respond(round_idx: int, question: Question) -> torch.Tensor:
        return abot.respond(e_a, abot.encode_question(question.soft), sample, generator).bit

    return respond


@dataclass
class Rollout:
    p_final: torch.Tensor  # (B, N)
    round1_dist: torch.Tensor  # (B, V) softmax of the first decoder step, round 1
    round1_logits: torch.Tensor  # (B, V)
    question_ids: list[torch.Tensor] = field(default_factory=list)  # per round, (B, L)
    bits: list[torch.Tensor] = field(default_factory=list)  # per round, (B,)
    attention: list[torch.Tensor] = field(default_factory=list)  # per round, (B, N)

    @property
    def guesses(self) -> torch.Tensor:
        return guess(self.p_final.detach())


def rollout(qbot: QBot, batch: SetBatch, cfg: GameConfig, respond: Responder,
            generator=None, noise: bool = True) -> Rollout:
    """Play ``cfg.rounds`` question/answer rounds, then read memory once more.

    Per round: memory read, query, response, combiner adjustment, gating,
    hidden-state update. The final read's attention is the guess distribution.
    """
    memory = qbot.encode_sentences(batch.ids, batch.lengths)
    h = qbot.initial_state(len(batch.sets))
    out = None
    for t in range(cfg.rounds):
        work = memory_read(h, memory)
        question = qbot.produce_query(work.c_o, cfg.ql, cfg.temperature, cfg.hard_channel,
                                      generator, noise)
        if out is None:
            first = question.logits[:, 0]
            out = Rollout(None, torch.softmax(first, -1), first)
        r = respond(t, question)
        c_a = qbot.adjust_combined(work.c_o, r)
        memory = gate_sentences(memory, work.p, r, cfg.gamma)
        h = qbot.update_hidden(h, c_a)
        out.question_ids.append(question.hard_ids)
        out.bits.append(r)
        out.attention.append(work.p)
    out.p_final = memory_read(h, memory).p
    return out


@dataclass
class GameTranscript:
    set_id: str
    target: int  # 0-based
    questions: list[list[int]]
    question_tokens: list[list[str]]
    responses: list[int]
    attention: list[list[float]]
    p_final: list[float]
    guess: int  # 0-based
    correct: bool
    sentences: list[str] = field(default_factory=list)
    seed: int | None = None
    human: bool = False

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "GameTranscript":
        return cls(**obj)


def transcripts_from(roll: Rollout, batch: SetBatch, targets: torch.Tensor,
                     table: EmbeddingTable, seed=None, human=False) -> list[GameTranscript]:
    guesses = roll.guesses
    out = []
    for b, s in enumerate(batch.sets):
        qs = [roll.question_ids[t][b].tolist() for t in range(len(roll.question_ids))]
        g, tgt = int(guesses[b]), int(targets[b])
        out.append(GameTranscript(
            set_id=s.id, target=tgt, questions=qs,
            question_tokens=[table.decode(q) for q in qs],
            responses=[int(round(float(r[b]))) for r in roll.bits],
            attention=[a[b].tolist() for a in roll.attention],
            p_final=roll.p_final[b].tolist(), guess=g, correct=g == tgt,
            sentences=list(s.sentences), seed=seed, human=human))
    return out


def play_episode(qbot: QBot, abot: ABot, sentence_set: SentenceSet, target: int,
                 cfg: GameConfig, table: EmbeddingTable, seed: int | None = None):
    """One game instance (0-based ``target``).

    With ``seed=None`` decoding is deterministic argmax; otherwise Gumbel
    noise is drawn from a generator seeded with ``seed``.
    Returns ``(transcript, p_final, round1_dist)``.
    """
    if not 0 <= target < cfg.n:
        raise ValueError(f"target must be in [0, {cfg.n})")
    batch = make_batch([sentence_set], table, cfg.n)
    targets = torch.tensor([target])
    generator = None if seed is None else torch.Generator().manual_seed(seed)
    with torch.no_grad():
        respond = abot_responder(abot, *batch.target_sentences(targets))
        roll = rollout(qbot, batch, cfg, respond, generator, noise=seed is not None)
    transcript = transcripts_from(roll, batch, targets, table, seed)[0]
    return transcript, roll.p_final[0], roll.round1_dist[0]


# ---------------------------------------------------------------- losses

def game_loss(p_final: torch.Tensor, target) -> torch.Tensor:
    """Mean of -log p_final[target]; probabilities are floored at 1e-12."""
    p_final = p_final.reshape(-1, p_final.shape[-1])
    target = torch.as_tensor(target).reshape(-1)
    picked = p_final[torch.arange(p_final.shape[0]), target]
    if bool((picked < PROB_FLOOR).any()):
        logger.debug("game_loss: clamping %d probabilities", int((picked < PROB_FLOOR).sum()))
    return -torch.log(picked.clamp_min(PROB_FLOOR)).mean()


def sw_loss(round1_dist: torch.Tensor, sws: Sequence[Sequence[int]]) -> torch.Tensor:
    """Cross-entropy against the uniform distribution over each set's SWs.

    ``round1_dist`` is (B, V) (or (V,) with a single id list). Sets without
    SWs are excluded from the mean; if none has SWs the loss is 0.
    """
    if round1_dist.dim() == 1:
        round1_dist, sws = round1_dist.unsqueeze(0), [sws]
    terms = []
    for b, ids in enumerate(sws):
        if len(ids):
            p = round1_dist[b, list(ids)].clamp_min(PROB_FLOOR)
            terms.append(-torch.log(p).mean())
    if not terms:
        return round1_dist.sum() * 0.0
    return torch.stack(terms).mean()


def combined_loss(regime: str, alpha: float, l_game, l_sw):
    if regime == "game":
        return l_game
    if regime == "sw_game":
        return alpha * l_sw + (1 - alpha) * l_game
    if regime == "game_sw":
        return alpha * l_game + (1 - alpha) * l_sw
    raise ValueError(f"unknown loss regime {regime!r}")


def regime_from_flag(flag: str) -> str:
    """CLI spelling (``sw,game``) to regime name (``sw_game``)."""
    regime = flag.replace(",", "_")
    if regime not in REGIMES:
        raise ValueError(f"unknown loss {flag!r}")
    return regime


def _rollout_loss(qbot, abot, batch, targets, gcfg, tcfg, generator):
    target_ids, target_len = batch.target_sentences(targets)
    respond = abot_responder(abot, target_ids, target_len, tcfg.sample_responses, generator)
    roll = rollout(qbot, batch, gcfg, respond, generator, noise=True)
    l_game = game_loss(roll.p_final, targets)
    if tcfg.loss_regime == "game" or gcfg.ql != 1:
        l_sw = torch.zeros(())
        total = l_game
    else:
        l_sw = torch.log_softmax(roll.round1_logits, -1)
        l_sw = _sw_from_log(l_sw, batch.sw_ids)
        total = combined_loss(tcfg.loss_regime, tcfg.alpha, l_game, l_sw)
    return total, l_game, l_sw, roll


def train_step(qbot: QBot, abot: ABot, optimizer, batch: SetBatch, targets: torch.Tensor,
               gcfg: GameConfig, tcfg: TrainConfig, generator) -> float:
    """Roll out, back-propagate the regime's loss, clip, and update; returns the loss."""
    total, _, _, _ = _rollout_loss(qbot, abot, batch, targets, gcfg, tcfg, generator)
    if not torch.isfinite(total):
        raise NonFiniteLoss(f"non-finite loss {float(total.detach())}")
    optimizer.zero_grad()
    total.backward()
    params = [p for group in optimizer.param_groups for p in group["params"]]
    torch.nn.utils.clip_grad_norm_(params, tcfg.clip)
    optimizer.step()
    return float(total.detach())


def _sw_from_log(log_dist, sws):
    terms = [-log_dist[b, ids].mean() for b, ids in enumerate(sws) if ids]
    return torch.stack(terms).mean() if terms else log_dist.sum() * 0.0


# ---------------------------------------------------------------- A-Bot pretraining

def pretrain_abot_step(abot: ABot, optimizer, sentences: torch.Tensor, lengths: torch.Tensor,
                       tokens: torch.Tensor, labels: torch.Tensor) -> float:
    """One optimizer step of membership prediction on single-token questions.

    sentences (B, T), lengths (B,), tokens (B,), labels (B,) with
    1 = token occurs in the sentence. Returns the binary cross-entropy.
    """
    vocab = abot.embedding.shape[0]
    rows = torch.nn.functional.one_hot(tokens, vocab).float().unsqueeze(1)
    conf = abot.confidence(abot.encode_answer(sentences, lengths), abot.encode_question(rows))
    loss = torch.nn.functional.binary_cross_entropy(conf, labels.float())
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def membership_examples(batch: SetBatch, rng: np.random.Generator):
    """Pick one sentence per set and a token from the set with a 50/50 label.

    Negatives come from the other sentences of the same set when possible.
    """
    b = len(batch.sets)
    which = torch.as_tensor(rng.integers(batch.ids.shape[1], size=b))
    sent, lens = batch.target_sentences(which)
    tokens, labels = [], []
    for i in range(b):
        present = set(sent[i, :lens[i]].tolist())
        everything = set(batch.ids[i][batch.ids[i] != 0].tolist())
        absent = sorted(everything - present)
        positive = rng.random() < 0.5 or not absent
        pool = sorted(present) if positive else absent
        tokens.append(pool[int(rng.integers(len(pool)))])
        labels.append(1 if positive else 0)
    return sent, lens, torch.tensor(tokens), torch.tensor(labels)


def pretrain_abot(abot: ABot, sets: Sequence[SentenceSet], table: EmbeddingTable,
                  cfg: GameConfig, steps: int, seed: int, lr: float = 1e-3,
                  batch_size: int = 64) -> list[float]:
    optimizer = torch.optim.Adam(abot.parameters(), lr=lr)
    rng = np.random.default_rng(derive_seed(seed, 3))
    losses = []
    for _ in range(steps):
        chosen = rng.choice(len(sets), size=min(batch_size, len(sets)), replace=False)
        batch = make_batch([sets[i] for i in chosen], table, cfg.n)
        losses.append(pretrain_abot_step(abot, optimizer, *membership_examples(batch, rng)))
    return losses


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    qbot: QBot
    abot: ABot
    step_losses: list[float]
    metrics: list[dict]
    best_dev_acc: float
    best_epoch: int


def _dump_bad_batch(out_dir, step, batch, targets):
    if not out_dir:
        return
    path = os.path.join(out_dir, f"nonfinite_step{step}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"step": step, "sets": [s.to_json() for s in batch.sets],
                   "targets": targets.tolist()}, fh, indent=1)


def train(train_sets: Sequence[SentenceSet], dev_sets: Sequence[SentenceSet],
          table: EmbeddingTable, gcfg: GameConfig, tcfg: TrainConfig,
          out_dir=None, resume=None, max_epochs: int | None = None) -> TrainResult:
    """Train both agents end to end.

    Each step draws a batch of training sets with one random target each and
    rolls out with straight-through hard channels. After every epoch the dev
    split is evaluated; training stops after ``patience`` epochs without a
    dev accuracy improvement and the best parameters are restored.

    ``resume`` is a checkpoint path written by an earlier call; batch order
    and noise depend only on (seed, epoch, step), so resumed runs continue
    the original stream.
    """
    from .evaluation import evaluate_game_accuracy

    if not train_sets:
        raise DataError("empty training partition")
    qbot, abot = build_agents(table, gcfg, tcfg.seed)
    if tcfg.pretrain_steps and resume is None:
        pretrain_abot(abot, train_sets, table, gcfg, tcfg.pretrain_steps, tcfg.seed,
                      tcfg.pretrain_lr, tcfg.pretrain_batch_size)
    params = list(qbot.parameters()) + list(abot.parameters())
    optimizer = torch.optim.Adam(params, lr=tcfg.lr)

    start_epoch, step = 0, 0
    best = {"acc": -1.0, "epoch": -1, "state": None}
    stale = 0
    metrics: list[dict] = []
    if resume is not None:
        state = ckpt.load(resume)
        ckpt.apply(state, qbot, abot)
        optim_path = ckpt.optimizer_path(resume)
        if os.path.exists(optim_path):
            optimizer.load_state_dict(torch.load(optim_path))
        extra = state.meta.get("progress", {})
        start_epoch, step = extra.get("epoch", -1) + 1, extra.get("step", 0)
        best["acc"], best["epoch"] = extra.get("best_acc", -1.0), extra.get("best_epoch", -1)
        stale = extra.get("stale", 0)
        best_path = os.path.join(os.path.dirname(resume), "best.npz")
        if os.path.exists(best_path):
            best["state"] = ckpt.load(best_path)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    metric_log = os.path.join(out_dir, "metrics.jsonl") if out_dir else None
    loss_log = os.path.join(out_dir, "losses.jsonl") if out_dir else None
    step_losses: list[float] = []
    n_batches = math.ceil(len(train_sets) / tcfg.batch_size)
    last_epoch = tcfg.epochs if max_epochs is None else min(tcfg.epochs, max_epochs)

    for epoch in range(start_epoch, last_epoch):
        order = np.random.default_rng(derive_seed(tcfg.seed, 1, epoch)).permutation(len(train_sets))
        qbot.train()
        abot.train()
        epoch_losses = []
        for k in range(n_batches):
            idx = order[k * tcfg.batch_size:(k + 1) * tcfg.batch_size]
            batch = make_batch([train_sets[i] for i in idx], table, gcfg.n)
            gen = torch.Generator().manual_seed(derive_seed(tcfg.seed, 2, step))
            targets = torch.randint(gcfg.n, (len(idx),), generator=gen)
            try:
                loss = train_step(qbot, abot, optimizer, batch, targets, gcfg, tcfg, gen)
            except NonFiniteLoss:
                _dump_bad_batch(out_dir, step, batch, targets)
                raise
            step += 1
            step_losses.append(loss)
            epoch_losses.append(loss)

        qbot.eval()
        abot.eval()
        report = evaluate_game_accuracy(qbot, abot, dev_sets, table, gcfg, split="dev",
                                        loss_regime=tcfg.loss_regime, alpha=tcfg.alpha)
        record = {"step": step, "split": "dev", "game_acc": report.game_acc,
                  "sw_pred": report.sw_pred, "loss": report.loss,
                  "train_loss": float(np.mean(epoch_losses))}
        metrics.append(record)
        logger.info("epoch %d step %d dev acc %.4f sw %s", epoch, step, report.game_acc, report.sw_pred)
        if metric_log:
            with open(metric_log, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")
            with open(loss_log, "a", encoding="utf-8") as fh:
                first = step - len(epoch_losses)
                for k, value in enumerate(epoch_losses):
                    fh.write(json.dumps({"step": first + k, "loss": value}) + "\n")

        if report.game_acc > best["acc"]:
            best = {"acc": report.game_acc, "epoch": epoch, "state": None}
            stale = 0
            best["state"] = ckpt.capture(qbot, abot, table, gcfg, tcfg)
            if out_dir:
                ckpt.save(os.path.join(out_dir, "best.npz"), best["state"])
        else:
            stale += 1
        if out_dir:
            path = os.path.join(out_dir, f"epoch{epoch:03d}.npz")
            progress = {"epoch": epoch, "step": step, "best_acc": best["acc"],
                        "best_epoch": best["epoch"], "stale": stale}
            ckpt.save(path, ckpt.capture(qbot, abot, table, gcfg, tcfg, progress=progress))
            torch.save(optimizer.state_dict(), ckpt.optimizer_path(path))
        if stale >= tcfg.patience:
            break

    if best["state"] is not None:
        ckpt.apply(best["state"], qbot, abot)
    qbot.eval()
    abot.eval()
    return TrainResult(qbot, abot, step_losses, metrics, best["acc"], best["epoch"])
