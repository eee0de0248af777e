"""Turn EAT tuples into numeric vectors of length 28 + 3S.

Layout: [28 Boolean grammatical features | Event embedding | Agent embedding |
Theme embedding].  The empty token embeds to the zero vector.
"""

from __future__ import annotations

import zlib

import numpy as np

from .eatcore import N_FEATURES, EatSequence, EatTuple
from .errors import EmptyFile, InconsistentDimension

OOV_POLICIES = ("zero", "hash_pseudorandom")


class EmbeddingStore:
    """Lemma -> vector table with a configurable out-of-vocabulary policy.

    ``zero`` maps unknown lemmas to the zero vector (indistinguishable from
    the empty token, which is the point: unknowns should have been masked
    upstream).  ``hash_pseudorandom`` derives a deterministic unit-norm
    vector from the lemma, which lets desk-scale tests run without a real
    embedding file.
    """

    def __init__(self, dim: int, table: dict | None = None,
                 oov_policy: str = "zero"):
        if dim <= 0:
            raise InconsistentDimension(f"embedding dimension must be positive, got {dim}")
        if oov_policy not in OOV_POLICIES:
            raise ValueError(f"unknown OOV policy {oov_policy!r}")
        self.dim = dim
        self.oov_policy = oov_policy
        self.table = {}
        for key, vec in (table or {}).items():
            arr = np.asarray(vec, dtype=np.float32)
            if arr.shape != (dim,):
                raise InconsistentDimension(
                    f"vector for {key!r} has length {arr.shape}, expected {dim}")
            self.table[key] = arr

    def __len__(self):
        return len(self.table)

    def __contains__(self, lemma):
        return lemma in self.table

    def lookup(self, lemma: str | None) -> np.ndarray:
        if lemma is None:
            return np.zeros(self.dim, dtype=np.float32)
        vec = self.table.get(lemma)
        if vec is not None:
            return vec
        if self.oov_policy == "zero":
            return np.zeros(self.dim, dtype=np.float32)
        return _hash_vector(lemma, self.dim)


def _hash_vector(lemma: str, dim: int) -> np.ndarray:
    seed = zlib.crc32(lemma.encode("utf-8"))
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim).astype(np.float32)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def load_embeddings(path, oov_policy: str = "zero") -> EmbeddingStore:
    """Load a whitespace-separated text embedding file (token v1 ... vS)."""
    table = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2 or parts == [""]:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise InconsistentDimension(
                    f"line {lineno}: row of length {len(values)}, expected {dim}")
            if token not in table:  # duplicates keep the first occurrence
                table[token] = np.asarray([float(v) for v in values],
                                          dtype=np.float32)
    if dim is None or not table:
        raise EmptyFile(f"{path}: no embedding rows found")
    return EmbeddingStore(dim, table, oov_policy)


def tuple_to_vector(t: EatTuple, store: EmbeddingStore) -> np.ndarray:
    """Vector of length 28 + 3S: features, then Event/Agent/Theme embeddings."""
    return np.concatenate([
        np.asarray(t.features(), dtype=np.float32),
        store.lookup(t.event.lemma),
        store.lookup(t.agent.lemma),
        store.lookup(t.theme.lemma),
    ])


def vector_features(vec: np.ndarray) -> list:
    """Read the 28 Boolean features back out of an EAT vector."""
    return [int(round(float(v))) for v in vec[:N_FEATURES]]


def sequence_to_matrix(seq: EatSequence, store: EmbeddingStore) -> np.ndarray:
    """Stack tuple vectors in order; shape (len(seq), 28 + 3S)."""
    if not len(seq):
        return np.zeros((0, N_FEATURES + 3 * store.dim), dtype=np.float32)
    return np.stack([tuple_to_vector(t, store) for t in seq.tuples])
