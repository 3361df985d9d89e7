"""Command-line entry point: ``logq <subcommand>`` or ``python -m logquestions``.

Exit codes: 0 success, 1 usage error, 2 data or digest error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import checkpoint as ckpt
from . import synthetic
from .baseline import AGGREGATES, evaluate_baseline
from .corpus import (build_corpus, ingest_pairs, read_corpus, read_pairs_tsv, tokenize,
                     write_corpus, write_pairs_tsv)
from .embeddings import DEFAULT_LIMIT, load_embeddings, random_table, save_embeddings
from .engine import GameConfig, TrainConfig, regime_from_flag, train
from .errors import DataError, GameError, NumericError
from .evaluation import check_digest, dump_transcripts, evaluate_game_accuracy, interactive_play

logger = logging.getLogger("logquestions")

META_FILE = "meta.json"
SPLIT_ALIASES = {"dev": "dev_sw", "test_sw": "test_sw", "test_nosw": "test_nosw"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _read_meta(data_dir) -> dict:
    path = os.path.join(data_dir, META_FILE)
    if not os.path.exists(path):
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _partition(data_dir, name):
    sets, splits = read_corpus(data_dir)
    return [sets[i] for i in splits[name]]


def cmd_build_corpus(args):
    records = []
    for path in args.pairs or []:
        records.extend(read_pairs_tsv(path))
    os.makedirs(args.out, exist_ok=True)
    vocab = None
    if args.synthetic:
        pairs = synthetic.synthetic_pairs(args.synthetic, args.seed, changes=args.changes)
        write_pairs_tsv(os.path.join(args.out, "pairs.tsv"), pairs)
        records.extend(pairs)
        words, vectors = synthetic.synthetic_vectors(args.dim, args.seed)
        vec_path = os.path.join(args.out, "vectors.txt")
        save_embeddings(vec_path, words, vectors)
        vocab = load_embeddings(vec_path, args.vocab_limit)
    if args.embeddings:
        vocab = load_embeddings(args.embeddings, args.vocab_limit)
    if not records:
        raise UsageError("give --pairs FILE and/or --synthetic K")
    graph = ingest_pairs(records)
    sets, splits = build_corpus(graph, args.num_sets, vocab, args.seed)
    write_corpus(args.out, sets, splits)
    meta = {"num_sets": args.num_sets, "seed": args.seed,
            "vocab_digest": vocab.digest() if vocab is not None else None,
            "counts": {k: len(v) for k, v in splits.partitions.items()}}
    with open(os.path.join(args.out, META_FILE), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(json.dumps(meta["counts"]))


def cmd_train(args):
    table = load_embeddings(args.embeddings, args.vocab_limit)
    check_digest(_read_meta(args.data).get("vocab_digest"), table.digest())
    sets, splits = read_corpus(args.data)
    gcfg = GameConfig(ql=args.ql, hidden=args.hidden, gamma=args.gamma)
    tcfg = TrainConfig(loss_regime=regime_from_flag(args.loss), alpha=args.alpha,
                       pretrain_steps=args.pretrain_abot, seed=args.seed, epochs=args.epochs,
                       patience=args.patience, lr=args.lr)
    result = train([sets[i] for i in splits["train_sw"]], [sets[i] for i in splits["dev_sw"]],
                   table, gcfg, tcfg, out_dir=args.out)
    final = os.path.join(args.out, "final.npz")
    state = ckpt.capture(result.qbot, result.abot, table, gcfg, tcfg,
                         extra={"data_dir": os.path.abspath(args.data)})
    ckpt.save(final, state)
    print(json.dumps({"checkpoint": final, "best_dev_acc": result.best_dev_acc,
                      "best_epoch": result.best_epoch}))


def _load_checkpoint(path):
    state = ckpt.load(path)
    return state, ckpt.restore(state)


def cmd_eval(args):
    state, (qbot, abot, table, gcfg, _) = _load_checkpoint(args.checkpoint)
    expected = _read_meta(args.data).get("vocab_digest")
    sets = _partition(args.data, SPLIT_ALIASES[args.split])
    report = evaluate_game_accuracy(qbot, abot, sets, table, gcfg, split=args.split,
                                    expected_digest=expected)
    print(json.dumps(report.to_json()))


def cmd_baseline(args):
    sets = _partition(args.data, args.split)
    if args.embeddings:
        table = load_embeddings(args.embeddings, args.vocab_limit)
    else:
        words = sorted({w for s in sets for sent in s.sentences for w in tokenize(sent)})
        table = random_table(words, args.random_embeddings, args.seed)
    acc = evaluate_baseline(sets, table, args.aggregate)
    print(json.dumps({"split": args.split, "sets": len(sets), "sw_accuracy": acc}))


def cmd_play(args):
    state, (qbot, _, table, gcfg, _) = _load_checkpoint(args.checkpoint)
    data_dir = args.data or state.meta.get("data_dir")
    if not data_dir:
        raise DataError("checkpoint records no corpus directory; pass --data")
    sets, splits = read_corpus(data_dir)
    if args.set_id:
        if args.set_id not in sets:
            raise DataError(f"unknown set id {args.set_id!r}")
        chosen = sets[args.set_id]
    else:
        import random
        pool = splits["test_sw"] or list(sets)
        chosen = sets[random.Random(args.seed).choice(pool)]
    transcript = interactive_play(qbot, chosen, table, gcfg)
    if args.log:
        with open(args.log, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(transcript.to_json()) + "\n")


def cmd_dump(args):
    _, (qbot, abot, table, gcfg, _) = _load_checkpoint(args.checkpoint)
    check_digest(_read_meta(args.data).get("vocab_digest"), table.digest())
    sets = _partition(args.data, SPLIT_ALIASES[args.split])
    transcripts = dump_transcripts(qbot, abot, sets, table, gcfg, args.limit, args.out)
    print(json.dumps({"out": args.out, "transcripts": len(transcripts)}))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="logq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-corpus", help="sample 4-sentence sets from pair files")
    p.add_argument("--pairs", action="append", metavar="FILE", help="two-column TSV; repeatable")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--num-sets", type=int, required=True, metavar="K")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--synthetic", type=int, metavar="K", help="also generate K templated pairs")
    p.add_argument("--embeddings", metavar="FILE", help="vocabulary restricting splitting words")
    p.add_argument("--vocab-limit", type=int, default=DEFAULT_LIMIT)
    p.add_argument("--dim", type=int, default=100, help="synthetic vector dimension")
    p.add_argument("--changes", type=int, default=synthetic.DEFAULT_CHANGES,
                   help="slots changed per synthetic pair")
    p.set_defaults(func=cmd_build_corpus)

    p = sub.add_parser("train", help="train both agents")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--embeddings", required=True, metavar="FILE")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--ql", type=int, choices=(1, 5, 10), required=True)
    p.add_argument("--loss", choices=("game", "sw,game", "game,sw"), required=True)
    p.add_argument("--alpha", type=float, default=0.7)
    p.add_argument("--pretrain-abot", type=int, default=0, metavar="STEPS")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--patience", type=int, default=TrainConfig.patience)
    p.add_argument("--lr", type=float, default=TrainConfig.lr)
    p.add_argument("--hidden", type=int, default=GameConfig.hidden)
    p.add_argument("--gamma", type=float, default=GameConfig.gamma)
    p.add_argument("--vocab-limit", type=int, default=DEFAULT_LIMIT)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="game accuracy and SW prediction on a split")
    p.add_argument("--checkpoint", required=True, metavar="FILE")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--split", choices=tuple(SPLIT_ALIASES), required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="embedding-splitting SW finder")
    p.add_argument("--data", required=True, metavar="DIR")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--embeddings", metavar="FILE")
    src.add_argument("--random-embeddings", type=int, metavar="DIM")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split", default="test_sw")
    p.add_argument("--aggregate", choices=AGGREGATES, default="max")
    p.add_argument("--vocab-limit", type=int, default=DEFAULT_LIMIT)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("play", help="answer the Q-Bot's questions yourself")
    p.add_argument("--checkpoint", required=True, metavar="FILE")
    p.add_argument("--set-id", metavar="ID")
    p.add_argument("--data", metavar="DIR", help="corpus directory (default: the training corpus)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--log", metavar="FILE", help="append the session transcript here")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("dump", help="write game transcripts as JSON lines")
    p.add_argument("--checkpoint", required=True, metavar="FILE")
    p.add_argument("--data", required=True, metavar="DIR")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--limit", type=int, required=True, metavar="K")
    p.add_argument("--split", choices=tuple(SPLIT_ALIASES), default="test_sw")
    p.set_defaults(func=cmd_dump)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "baseline" and args.random_embeddings is not None and args.random_embeddings < 1:
            raise UsageError("--random-embeddings needs a positive dimension")
        args.func(args)
    # JSONDecodeError is a ValueError, so data errors are matched first
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"logq: data error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ValueError) as exc:
        print(f"logq: error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"logq: numeric failure: {exc}", file=sys.stderr)
        return 3
    except GameError as exc:
        print(f"logq: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
