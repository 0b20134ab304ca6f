"""Toolkit for curating labeled web-page corpora and building evaluation benchmarks.

Pipeline stages: ingest/auto-filter, human-budgeted cleaning triage,
temporal train/test splitting with near-duplicate leakage filtering,
base-rate-adjusted benchmark sampling, a sparse linear baseline, and
precision-oriented evaluation.
"""

from .corpus import Corpus, PageRecord, load_corpus, validate_record, write_corpus
from .lsh import SignLsh, build_index, exact_neighbors, query_candidates
from .text_vectors import (SparseVector, TfidfEncoder, char_ngrams,
                           cosine_similarity, fit_tfidf, select_top_features)

__version__ = "0.1.0"

__all__ = [
    "Corpus", "PageRecord", "load_corpus", "validate_record", "write_corpus",
    "SignLsh", "build_index", "exact_neighbors", "query_candidates",
    "SparseVector", "TfidfEncoder", "char_ngrams", "cosine_similarity",
    "fit_tfidf", "select_top_features",
]
