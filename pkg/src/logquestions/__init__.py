"""Two-agent log(N)-questions game over sentence sets.

A questioner sees N candidate sentences and gets log2(N) yes/no questions to
find the one sentence an answerer holds. Both agents are trained end to end
through discrete channels (Gumbel-softmax questions, straight-through answers).
"""
from .corpus import (CorpusSplits, PairGraph, SentenceSet, build_corpus, find_splitting_words,
                     ingest_pairs, sample_sentence_set, tokenize)
from .embeddings import EmbeddingTable, load_embeddings
from .engine import (GameConfig, GameTranscript, TrainConfig, combined_loss, game_loss,
                     play_episode, sw_loss, train)
from .baseline import best_splitter, evaluate_baseline, split_distribution
from .evaluation import MetricsReport, evaluate_game_accuracy, evaluate_sw_prediction

__version__ = "0.1.0"
