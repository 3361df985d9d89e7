"""Checkpoint container.

A checkpoint is an ``.npz`` archive (a zip of ``.npy`` files). Every
parameter is stored under ``qbot/<name>`` or ``abot/<name>`` as a row-major
float32 array; ``__meta__`` holds a JSON document with the game config, the
train config, the vocabulary token list and its SHA-256 digest, and optional
training progress. Loading with ``allow_pickle=False`` is sufficient.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .embeddings import EmbeddingTable, vocabulary_digest
from .errors import DataError, DigestMismatch

FORMAT = "logquestions-checkpoint/1"


@dataclass
class State:
    arrays: dict  # name -> float32 ndarray
    meta: dict

    @property
    def digest(self) -> str:
        return self.meta["vocab_digest"]


def capture(qbot, abot, table: EmbeddingTable, gcfg, tcfg=None, progress=None, extra=None) -> State:
    arrays = {}
    for prefix, module in (("qbot", qbot), ("abot", abot)):
        for name, tensor in module.state_dict().items():
            arrays[f"{prefix}/{name}"] = tensor.detach().cpu().numpy().astype(np.float32, copy=True)
    meta = {
        "format": FORMAT,
        "game_config": asdict(gcfg),
        "train_config": asdict(tcfg) if tcfg is not None else None,
        "vocab_digest": table.digest(),
        "vocab": list(table.tokens),
        "progress": progress or {},
    }
    if extra:
        meta.update(extra)
    return State(arrays, meta)


def save(path, state: State) -> None:
    payload = dict(state.arrays)
    payload["__meta__"] = np.array(json.dumps(state.meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load(path) -> State:
    with np.load(path, allow_pickle=False) as archive:
        if "__meta__" not in archive.files:
            raise DataError(f"{path}: not a checkpoint (no __meta__)")
        meta = json.loads(str(archive["__meta__"]))
        arrays = {k: archive[k] for k in archive.files if k != "__meta__"}
    if meta.get("format") != FORMAT:
        raise DataError(f"{path}: unknown checkpoint format {meta.get('format')!r}")
    if vocabulary_digest(meta["vocab"]) != meta["vocab_digest"]:
        raise DigestMismatch(f"{path}: vocabulary does not match its digest")
    return State(arrays, meta)


def apply(state: State, qbot, abot) -> None:
    for prefix, module in (("qbot", qbot), ("abot", abot)):
        sd = {k[len(prefix) + 1:]: torch.from_numpy(v.copy())
              for k, v in state.arrays.items() if k.startswith(prefix + "/")}
        module.load_state_dict(sd)


def restore(state: State):
    """Rebuild ``(qbot, abot, table, game_config, train_config)`` from a checkpoint.

    The returned table carries the checkpoint vocabulary with the Q-Bot's
    (fine-tuned) embedding rows as vectors.
    """
    from .engine import GameConfig, TrainConfig, build_agents

    gcfg = GameConfig(**state.meta["game_config"])
    tcfg = TrainConfig(**state.meta["train_config"]) if state.meta.get("train_config") else None
    vectors = state.arrays["qbot/embedding"]
    table = EmbeddingTable(tuple(state.meta["vocab"]), vectors)
    qbot, abot = build_agents(table, gcfg, seed=0)
    apply(state, qbot, abot)
    qbot.eval()
    abot.eval()
    return qbot, abot, table, gcfg, tcfg


def parameter_digest(*modules) -> str:
    """SHA-256 over all parameter bytes, for side-effect checks."""
    h = hashlib.sha256()
    for module in modules:
        for name, tensor in module.state_dict().items():
            h.update(name.encode())
            h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def optimizer_path(path) -> str:
    path = str(path)
    return (path[:-4] if path.endswith(".npz") else path) + ".optim.pt"
