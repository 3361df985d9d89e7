"""
Grounding the first question
============================

Adding a loss that pushes the first question toward a splitting word is
meant to make the channel readable by humans, at some cost in game accuracy.
At this scale the cost shows up and the readability does not: a few hundred
training sets are too few for the questioner to learn to spot splitting
words, so splitting-word prediction stays near its untrained level.
"""

import torch

from logquestions import corpus, engine, evaluation, embeddings, synthetic

torch.set_num_threads(1)

words, vectors = synthetic.synthetic_vectors(64, seed=0, num_distractors=100)
table = embeddings.from_vectors(words, vectors)
graph = corpus.ingest_pairs(synthetic.synthetic_pairs(4000, seed=0, changes=synthetic.DEFAULT_CHANGES))
sets, splits = corpus.build_corpus(graph, 800, table, seed=0)
by_id = {s.id: s for s in sets}
train = [by_id[i] for i in splits.partitions["train_sw"]]
dev = [by_id[i] for i in splits.partitions["dev_sw"]]
gcfg = engine.GameConfig(hidden=32)

for regime in ("game", "sw_game"):
    tcfg = engine.TrainConfig(loss_regime=regime, lr=1e-3, epochs=30, patience=30, seed=0)
    result = engine.train(train, dev, table, gcfg, tcfg)
    report = evaluation.evaluate_game_accuracy(result.qbot, result.abot, dev, table, gcfg)
    print(regime, "game acc", round(report.game_acc, 3), "sw pred", report.sw_pred)
