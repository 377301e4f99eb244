"""Text similarity metrics: BLEU, ROUGE-N and greedy embedding F."""

from .embedding import (
    EmbeddingProvider,
    HashEmbeddingProvider,
    RemoteEmbeddingProvider,
    StaticEmbeddingProvider,
    embed_greedy_f,
)
from .kernels import EncodedPairs, NgramStats, ngram_stats
from .report import Aggregate, MetricReport, PairScores, evaluate_corpus
from .scores import (
    RougeScore,
    bleu,
    bleu_scores,
    corpus_bleu,
    encode_pairs,
    rouge_n,
    rouge_scores,
    tokenize,
)

__all__ = [
    "Aggregate",
    "EmbeddingProvider",
    "EncodedPairs",
    "HashEmbeddingProvider",
    "MetricReport",
    "NgramStats",
    "PairScores",
    "RemoteEmbeddingProvider",
    "RougeScore",
    "StaticEmbeddingProvider",
    "bleu",
    "bleu_scores",
    "corpus_bleu",
    "embed_greedy_f",
    "encode_pairs",
    "evaluate_corpus",
    "ngram_stats",
    "rouge_n",
    "rouge_scores",
    "tokenize",
]
