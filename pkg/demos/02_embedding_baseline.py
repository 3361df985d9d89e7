"""
A splitter with no learning
===========================

Every vocabulary word is scored by how cleanly its embedding affinities
divide a set two against two. Random high-dimensional vectors are nearly
orthogonal, so the score reduces to string matching.
"""

from logquestions import baseline, corpus, embeddings, synthetic
from logquestions.corpus import tokenize

graph = corpus.ingest_pairs(synthetic.synthetic_pairs(2000, seed=0))
sets, _ = corpus.build_corpus(graph, 400, None, seed=1)
with_sw = [s for s in sets if s.splitting_words]
words = sorted({w for s in with_sw for line in s.sentences for w in tokenize(line)})

# one set, up close
s = with_sw[0]
table = embeddings.random_table(words, 256, seed=0)
best = baseline.best_splitter(s, table)
dist = baseline.split_distribution(best, s, table)
print(s.sentences)
print("chosen:", table.token_at(best), "annotated:", s.splitting_words)
print("probs:", dist.probs.round(3), "pair:", dist.best_pair, "score:", round(dist.score, 4))

# accuracy as the dimension shrinks: nearly orthogonal vectors need room
for dim in (4, 16, 64, 256):
    table = embeddings.random_table(words, dim, seed=0)
    print(dim, baseline.evaluate_baseline(with_sw, table))
