"""
Sentence sets and splitting words
=================================

A set of four sentences is sampled as a walk through a graph of paired
sentences. A splitting word occurs in exactly two of the four, so asking
about it halves the candidates.
"""

from logquestions import corpus, synthetic

# a tiny hand-made set: "is" appears in two sentences, nothing else does
figure = corpus.SentenceSet("toy", ["man is playing", "dog is asleep",
                                    "woman plays guitar", "cat naps"])
print(corpus.find_splitting_words(figure))

# templated pairs stand in for paraphrase data
pairs = synthetic.synthetic_pairs(600, seed=0, changes=synthetic.DEFAULT_CHANGES)
print(pairs[0])

graph = corpus.ingest_pairs(pairs)
sets, splits = corpus.build_corpus(graph, 200, None, seed=1)
print({name: len(ids) for name, ids in splits.partitions.items()})

for s in sets[:3]:
    print(s.id, s.splitting_words)
    for sentence in s.sentences:
        print("   ", sentence)
