"""The answerer: sees only the target sentence and the incoming question."""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .qbot import encode_bidirectional


@dataclass
class Response:
    bit: torch.Tensor  # (B,) hard 0/1 forward value, straight-through backward
    confidence: torch.Tensor  # (B,) sigmoid output


def straight_through_bit(confidence: torch.Tensor, sample: bool = False, generator=None) -> torch.Tensor:
    """Hard bit forward, identity gradient onto ``confidence`` backward.

    Deterministic thresholding at 0.5 unless ``sample`` draws Bernoulli bits.
    """
    if sample:
        u = torch.rand(confidence.shape, generator=generator, dtype=confidence.dtype)
        hard = (u < confidence).to(confidence.dtype)
    else:
        hard = (confidence >= 0.5).to(confidence.dtype)
    return confidence + (hard - confidence).detach()


class ABot(nn.Module):
    def __init__(self, embeddings, hidden: int, responder_hidden: int | None = None):
        super().__init__()
        emb = torch.as_tensor(embeddings, dtype=torch.float32).clone()
        dim = emb.shape[1]
        responder_hidden = responder_hidden or 2 * hidden
        self.embedding = nn.Parameter(emb)
        self.answer_encoder = nn.LSTM(dim, hidden, batch_first=True, bidirectional=True)
        self.question_encoder = nn.LSTM(dim, hidden, batch_first=True, bidirectional=True)
        self.layer1 = nn.Linear(4 * hidden, responder_hidden)
        self.layer2 = nn.Linear(responder_hidden, 1)

    def encode_answer(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """ids: (B, T) padded target sentences -> (B, 2H)."""
        return encode_bidirectional(self.answer_encoder, self.embedding[ids], lengths)

    def encode_question(self, rows: torch.Tensor) -> torch.Tensor:
        """rows: (B, L, V) soft or one-hot question rows -> (B, 2H)."""
        b, length, _ = rows.shape
        inputs = rows @ self.embedding
        lengths = torch.full((b,), length, dtype=torch.long)
        return encode_bidirectional(self.question_encoder, inputs, lengths)

    def confidence(self, e_a: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        z = self.layer2(torch.tanh(self.layer1(torch.cat([e_a, q], dim=-1))))
        return torch.sigmoid(z.squeeze(-1))

    def respond(self, e_a, q, sample: bool = False, generator=None) -> Response:
        conf = self.confidence(e_a, q)
        return Response(straight_through_bit(conf, sample, generator), conf)
