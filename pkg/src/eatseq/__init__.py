"""Event-Agent-Theme tuple extraction, transformation, and reconstruction."""

from .depgraph import DepGraph, Token, parse_conllu, serialize
from .eatcore import (
    ClauseFeatures,
    EatSequence,
    EatTuple,
    WordSlot,
    category_of,
    detect_clause_features,
    extract,
    render_lf,
)
from .errors import EatSeqError
from .transform import TransformSpec, remove_argument, replace_word, transform_grammar
from .vectorizer import EmbeddingStore, load_embeddings, sequence_to_matrix, tuple_to_vector

__version__ = "0.1.0"

__all__ = [
    "ClauseFeatures", "DepGraph", "EatSeqError", "EatSequence", "EatTuple",
    "EmbeddingStore", "Token", "TransformSpec", "WordSlot", "category_of",
    "detect_clause_features", "extract", "load_embeddings", "parse_conllu",
    "remove_argument", "render_lf", "replace_word", "sequence_to_matrix",
    "serialize", "transform_grammar", "tuple_to_vector",
]
