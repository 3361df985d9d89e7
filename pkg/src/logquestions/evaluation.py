"""Game accuracy, SW prediction, transcript dumps and the human-answerer mode."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import torch

from .corpus import SentenceSet
from .embeddings import EmbeddingTable
from .engine import (GameConfig, GameTranscript, abot_responder, combined_loss, game_loss,
                     make_batch, rollout, sw_loss, transcripts_from)
from .errors import DigestMismatch, GameError

NA = "n/a"
EVAL_BATCH = 256


@dataclass
class MetricsReport:
    split: str
    game_acc: float
    sw_pred: float | str
    episodes: int
    config_digest: str
    loss: float | None = None

    def to_json(self) -> dict:
        return asdict(self)


def config_digest(cfg: GameConfig) -> str:
    return hashlib.sha256(json.dumps(asdict(cfg), sort_keys=True).encode()).hexdigest()[:16]


def check_digest(expected: str | None, actual: str) -> None:
    if expected is not None and expected != actual:
        raise DigestMismatch(f"vocabulary digest {actual[:12]} does not match {expected[:12]}")


def _expand(sets: Sequence[SentenceSet], n: int):
    """Every set once per target: (sets, targets) with targets cycling 0..n-1."""
    return [s for s in sets for _ in range(n)], [t for _ in sets for t in range(n)]


def play_all(qbot, abot, sets: Sequence[SentenceSet], table: EmbeddingTable,
             cfg: GameConfig) -> tuple[list[GameTranscript], dict]:
    """Deterministic episodes for every (set, target); also returns loss pieces."""
    all_sets, all_targets = _expand(sets, cfg.n)
    transcripts: list[GameTranscript] = []
    game_terms, sw_terms = [], []
    with torch.no_grad():
        for start in range(0, len(all_sets), EVAL_BATCH):
            chunk = all_sets[start:start + EVAL_BATCH]
            batch = make_batch(chunk, table, cfg.n)
            targets = torch.tensor(all_targets[start:start + EVAL_BATCH])
            respond = abot_responder(abot, *batch.target_sentences(targets))
            roll = rollout(qbot, batch, cfg, respond, noise=False)
            transcripts.extend(transcripts_from(roll, batch, targets, table))
            game_terms.append(game_loss(roll.p_final, targets) * len(chunk))
            if any(batch.sw_ids):
                n_sw = sum(1 for ids in batch.sw_ids if ids)
                sw_terms.append((sw_loss(roll.round1_dist, batch.sw_ids) * n_sw, n_sw))
    pieces = {
        "game_loss": float(sum(game_terms)) / max(len(all_sets), 1),
        "sw_loss": (float(sum(t for t, _ in sw_terms)) / sum(n for _, n in sw_terms)) if sw_terms else None,
    }
    return transcripts, pieces


def sw_prediction(transcripts: Sequence[GameTranscript], sets: Sequence[SentenceSet],
                  cfg: GameConfig) -> float | str:
    """Share of episodes whose first round-1 token is an SW of its set.

    ``n/a`` when questions are longer than one token or no set has an SW.
    """
    if cfg.ql != 1:
        return NA
    by_id = {s.id: s for s in sets}
    eligible = [t for t in transcripts if by_id[t.set_id].splitting_words]
    if not eligible:
        return NA
    hits = sum(t.question_tokens[0][0] in by_id[t.set_id].splitting_words for t in eligible)
    return hits / len(eligible)


def evaluate_game_accuracy(qbot, abot, sets: Sequence[SentenceSet], table: EmbeddingTable,
                           cfg: GameConfig, split: str = "test", expected_digest: str | None = None,
                           loss_regime: str = "game", alpha: float = 0.7) -> MetricsReport:
    """Play each set once per target with hard argmax questions and thresholded answers."""
    check_digest(expected_digest, table.digest())
    transcripts, pieces = play_all(qbot, abot, sets, table, cfg)
    return report_from(transcripts, sets, cfg, split, pieces, loss_regime, alpha)


def report_from(transcripts, sets, cfg, split, pieces=None, loss_regime="game", alpha=0.7) -> MetricsReport:
    correct = sum(t.correct for t in transcripts)
    loss = None
    if pieces is not None:
        l_sw = pieces["sw_loss"]
        if loss_regime == "game" or l_sw is None or cfg.ql != 1:
            loss = pieces["game_loss"]
        else:
            loss = float(combined_loss(loss_regime, alpha, pieces["game_loss"], l_sw))
    return MetricsReport(split=split, game_acc=correct / len(transcripts) if transcripts else 0.0,
                         sw_pred=sw_prediction(transcripts, sets, cfg), episodes=len(transcripts),
                         config_digest=config_digest(cfg), loss=loss)


def evaluate_sw_prediction(qbot, abot, sets, table, cfg) -> float | str:
    if cfg.ql != 1:
        return NA
    transcripts, _ = play_all(qbot, abot, sets, table, cfg)
    return sw_prediction(transcripts, sets, cfg)


def write_transcripts(path, transcripts: Sequence[GameTranscript]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in transcripts:
            fh.write(json.dumps(t.to_json(), ensure_ascii=False) + "\n")


def read_transcripts(path) -> list[GameTranscript]:
    with open(path, encoding="utf-8") as fh:
        return [GameTranscript.from_json(json.loads(line)) for line in fh if line.strip()]


def dump_transcripts(qbot, abot, sets, table, cfg, limit: int, path) -> list[GameTranscript]:
    """Write the first ``limit`` sets' episodes, one block of N per set."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    transcripts, _ = play_all(qbot, abot, list(sets)[:limit], table, cfg)
    write_transcripts(path, transcripts)
    return transcripts


# ---------------------------------------------------------------- interactive play

class InvalidInput(GameError):
    pass


ANSWERS = {"y": 1, "yes": 1, "n": 0, "no": 0}


def parse_answer(text: str) -> int:
    key = text.strip().lower()
    if key not in ANSWERS:
        raise InvalidInput(f"expected y or n, got {text!r}")
    return ANSWERS[key]


def interactive_play(qbot, sentence_set: SentenceSet, table: EmbeddingTable, cfg: GameConfig,
                     ask: Callable[[str], str] | None = None,
                     show: Callable[[str], None] | None = None) -> GameTranscript:
    """Let a human answer the Q-Bot's questions about a secretly chosen sentence.

    ``ask``/``show`` default to the console; anything but y/n is re-prompted.
    The returned transcript has ``target=-1`` (unknown) until the human
    confirms the sentence at the end.
    """
    # resolved per call so a replaced builtins.input is honoured
    ask = ask or input
    show = show or print
    show("Pick one of these sentences and keep it secret:")
    for i, s in enumerate(sentence_set.sentences, 1):
        show(f"  {i}. {s}")
    batch = make_batch([sentence_set], table, cfg.n)

    def respond(round_idx, question):
        words = " ".join(table.decode(question.hard_ids[0].tolist()))
        while True:
            try:
                bit = parse_answer(ask(f"Round {round_idx + 1}: {words}? [y/n] "))
                break
            except InvalidInput:
                show("Please answer y or n.")
        return torch.tensor([float(bit)])

    with torch.no_grad():
        roll = rollout(qbot, batch, cfg, respond, noise=False)
    g = int(roll.guesses[0])
    show(f"I guess sentence {g + 1}: {sentence_set.sentences[g]}")
    target = -1
    while True:
        reply = ask(f"Which sentence did you pick? [1-{cfg.n}] ").strip()
        if reply.isdigit() and 1 <= int(reply) <= cfg.n:
            target = int(reply) - 1
            break
        show(f"Please enter a number from 1 to {cfg.n}.")
    t = transcripts_from(roll, batch, torch.tensor([target]), table, human=True)[0]
    show("Correct!" if t.correct else "Wrong guess.")
    return t
