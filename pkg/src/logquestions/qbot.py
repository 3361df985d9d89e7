"""The questioner.

The round-level operations are plain functions of tensors so they can be
gradient-checked in double precision; :class:`QBot` owns the weights and
wires them together.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils.rnn import pack_padded_sequence

from .errors import DegenerateGate

EPS = 1e-20


@dataclass
class RoundWork:
    c_o: torch.Tensor  # (B, 2H) attention-weighted memory
    p: torch.Tensor  # (B, N) attention, doubles as the guess distribution


@dataclass
class Question:
    soft: torch.Tensor  # (B, L, V) relaxed (or straight-through one-hot) rows
    hard_ids: torch.Tensor  # (B, L)
    logits: torch.Tensor  # (B, L, V) pre-noise decoder logits


def memory_read(h: torch.Tensor, memory: torch.Tensor) -> RoundWork:
    """One-hop attention of the game state over sentence memories.

    h: (B, 2H), memory: (B, N, 2H).
    """
    scores = torch.einsum("bd,bnd->bn", h, memory)
    p = torch.softmax(scores, dim=-1)
    c_o = torch.einsum("bn,bnd->bd", p, memory)
    return RoundWork(c_o, p)


def adjust_combined(c_o: torch.Tensor, r: torch.Tensor, w_a: torch.Tensor) -> torch.Tensor:
    """c_a = r*c_o + (1-r)*tanh(W_a c_o); r is (B, 1) or (B,)."""
    r = r.reshape(-1, 1)
    return r * c_o + (1 - r) * torch.tanh(c_o @ w_a.T)


def gate_sentences(memory: torch.Tensor, p: torch.Tensor, r: torch.Tensor, gamma: float) -> torch.Tensor:
    """Rescale each memory row by its renormalized response weight plus gamma.

    Both branches are renormalized; for r=1 that is the identity on p.
    """
    r = r.reshape(-1, 1)
    raw = r * p + (1 - r) * (1 - p)
    total = raw.sum(dim=-1, keepdim=True)
    if bool((total == 0).any()):
        raise DegenerateGate("response weights sum to zero")
    w = raw / total
    return memory * (w + gamma).unsqueeze(-1)


def update_hidden(h: torch.Tensor, c_a: torch.Tensor, w_h: torch.Tensor,
                  w_c: torch.Tensor, b_h: torch.Tensor) -> torch.Tensor:
    return torch.tanh(h @ w_h.T + c_a @ w_c.T + b_h)


def guess(p: torch.Tensor) -> torch.Tensor:
    """Argmax over the last axis, 0-based; ties go to the lowest index."""
    # torch.argmax does not document its tie order, so resolve ties explicitly
    is_max = p == p.max(dim=-1, keepdim=True).values
    idx = torch.arange(p.shape[-1], device=p.device).expand_as(p)
    return torch.where(is_max, idx, p.shape[-1]).min(dim=-1).values


def sample_gumbel(shape, generator=None, dtype=torch.float32) -> torch.Tensor:
    u = torch.rand(shape, generator=generator, dtype=dtype)
    return -torch.log(-torch.log(u + EPS) + EPS)


def gumbel_softmax(logits: torch.Tensor, temperature: float = 1.0, hard: bool = True,
                   generator: torch.Generator | None = None, noise: bool = True):
    """Relaxed categorical sample over the last axis.

    Returns ``(rows, ids)``. With ``hard`` the forward value is the one-hot of
    the argmax while gradients flow through the relaxed rows. ``noise=False``
    gives deterministic decoding.
    """
    y = logits
    if noise:
        y = y + sample_gumbel(logits.shape, generator, logits.dtype)
    soft = torch.softmax(y / temperature, dim=-1)
    ids = soft.argmax(dim=-1)
    if not hard:
        return soft, ids
    one_hot = F.one_hot(ids, logits.shape[-1]).to(soft.dtype)
    return one_hot - soft.detach() + soft, ids


def encode_bidirectional(lstm: nn.LSTM, inputs: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Final forward state concatenated with final backward state, (B, 2H)."""
    packed = pack_padded_sequence(inputs, lengths.cpu(), batch_first=True, enforce_sorted=False)
    _, (h_n, _) = lstm(packed)
    return torch.cat([h_n[0], h_n[1]], dim=-1)


class QBot(nn.Module):
    """Sentence encoder, memory, query producer, and the answer-folding maps.

    ``embeddings`` is a (V, D) array copied into a private, trainable matrix.
    """

    def __init__(self, embeddings, hidden: int, sos_id: int, decoder_hidden: int | None = None):
        super().__init__()
        emb = torch.as_tensor(embeddings, dtype=torch.float32).clone()
        vocab_size, dim = emb.shape
        width = 2 * hidden
        decoder_hidden = decoder_hidden or width
        self.sos_id = sos_id
        self.embedding = nn.Parameter(emb)
        self.encoder = nn.LSTM(dim, hidden, batch_first=True, bidirectional=True)
        self.w_d = nn.Linear(width, decoder_hidden, bias=False)
        self.decoder = nn.LSTMCell(dim, decoder_hidden)
        self.out = nn.Linear(decoder_hidden, vocab_size)
        self.w_a = nn.Parameter(torch.empty(width, width))
        self.w_h = nn.Parameter(torch.empty(width, width))
        self.w_c = nn.Parameter(torch.empty(width, width))
        self.b_h = nn.Parameter(torch.zeros(width))
        self.h0 = nn.Parameter(torch.zeros(width))
        bound = width ** -0.5
        for w in (self.w_a, self.w_h, self.w_c):
            nn.init.uniform_(w, -bound, bound)

    @property
    def width(self) -> int:
        return self.h0.shape[0]

    def encode_sentences(self, ids: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """ids: (B, N, T) padded token ids, lengths: (B, N) -> memory (B, N, 2H)."""
        b, n, t = ids.shape
        flat = encode_bidirectional(self.encoder, self.embedding[ids.reshape(b * n, t)],
                                    lengths.reshape(b * n))
        return flat.reshape(b, n, -1)

    def initial_state(self, batch: int) -> torch.Tensor:
        return self.h0.unsqueeze(0).expand(batch, -1)

    def produce_query(self, c_o: torch.Tensor, length: int, temperature: float = 1.0,
                      hard: bool = True, generator=None, noise: bool = True) -> Question:
        """Decode ``length`` tokens starting from tanh(W_d c_o).

        Each step after the first is fed the previous row times the embedding
        matrix, so the channel stays differentiable.
        """
        b = c_o.shape[0]
        h = torch.tanh(self.w_d(c_o))
        c = torch.zeros_like(h)
        x = self.embedding[self.sos_id].unsqueeze(0).expand(b, -1)
        rows, ids, logits = [], [], []
        for _ in range(length):
            h, c = self.decoder(x, (h, c))
            step_logits = self.out(h)
            row, step_ids = gumbel_softmax(step_logits, temperature, hard, generator, noise)
            rows.append(row)
            ids.append(step_ids)
            logits.append(step_logits)
            x = row @ self.embedding
        return Question(torch.stack(rows, 1), torch.stack(ids, 1), torch.stack(logits, 1))

    def adjust_combined(self, c_o, r):
        return adjust_combined(c_o, r, self.w_a)

    def update_hidden(self, h, c_a):
        return update_hidden(h, c_a, self.w_h, self.w_c, self.b_h)
