"""
Training the two agents
=======================

A short run on a synthetic corpus, then a look at what the questioner asks.
Expect accuracy well above the 25% chance level but far from converged; see
the acceptance tests for the full-length configuration. The questions are
usually distractor words that occur in no sentence: the agents settle on a
private code in which a question names a feature, not a word.
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
# a short run: larger steps peak sooner
tcfg = engine.TrainConfig(lr=1e-3, epochs=8, patience=8, seed=0)
untrained = engine.build_agents(table, gcfg, seed=0)
print("untrained:", evaluation.evaluate_game_accuracy(*untrained, dev, table, gcfg).game_acc)

result = engine.train(train, dev, table, gcfg, tcfg)
for row in result.metrics:
    print(row["step"], round(row["game_acc"], 3), row["sw_pred"])

# one set, all four targets
ts, _ = evaluation.play_all(result.qbot, result.abot, dev[:1], table, gcfg)
for t in ts:
    asked = [q[0] for q in t.question_tokens]
    print(t.target, asked, t.responses, t.guess, "ok" if t.correct else "miss")
