"""Label-text similarity providers.

A provider maps two label strings to a similarity in [0, 1] (1 = same
meaning).  It must be deterministic and symmetric with ``similarity(x, x) == 1``.
Two providers ship here: normalized Levenshtein similarity, and cosine
similarity of mean word vectors read from a plain-text table.
"""

from __future__ import annotations

import re
from typing import Mapping, Protocol

import numpy as np

from .control_flow import SimilarityMatrix
from .eventlog import EventLog
from .graphs import pairs

__all__ = [
    "SemanticProvider",
    "EditDistanceProvider",
    "VectorProvider",
    "VectorTable",
    "tokenize",
    "levenshtein",
    "edit_similarity",
    "vector_similarity",
    "load_vectors",
    "semantic_matrix",
]

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(label: str) -> list[str]:
    """Lowercase tokens split on whitespace, punctuation, ``_`` and camelCase."""
    return [t.lower() for t in _SPLIT.split(_CAMEL.sub(" ", label)) if t]


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _normalize(label: str) -> str:
    return " ".join(tokenize(label))


def edit_similarity(a: str, b: str) -> float:
    na, nb = _normalize(a), _normalize(b)
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(na, nb) / longest


class VectorTable:
    """Token -> fixed-dimension vector lookup."""

    def __init__(self, vectors: Mapping[str, np.ndarray], dim: int):
        self.dim = dim
        self._vectors = {}
        for tok, v in vectors.items():
            v = np.asarray(v, dtype=float)
            if v.shape != (dim,):
                raise ValueError(f"vector for {tok!r} has shape {v.shape}, expected ({dim},)")
            if not np.linalg.norm(v) > 0:
                raise ValueError(f"vector for {tok!r} has zero norm")
            self._vectors[tok.lower()] = v

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self._vectors[token]

    def __len__(self) -> int:
        return len(self._vectors)

    def mean_vector(self, label: str) -> np.ndarray | None:
        vecs = [self._vectors[t] for t in tokenize(label) if t in self._vectors]
        if not vecs:
            return None
        return np.mean(vecs, axis=0)


def load_vectors(path) -> VectorTable:
    """Read ``token v1 ... vd`` lines; an optional first line ``d=<dim>`` fixes d."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 1 and parts[0].startswith("d="):
                dim = int(parts[0][2:])
                continue
            tok, nums = parts[0], parts[1:]
            if dim is None:
                dim = len(nums)
            if len(nums) != dim:
                raise ValueError(f"{path}: line {lineno}: expected {dim} components, got {len(nums)}")
            try:
                vectors[tok.lower()] = np.array([float(x) for x in nums])
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: non-numeric component") from None
    if dim is None:
        raise ValueError(f"{path}: no vectors")
    return VectorTable(vectors, dim)


def vector_similarity(a: str, b: str, table: VectorTable) -> float:
    """Cosine of mean token vectors clipped to [0, 1].

    Falls back to :func:`edit_similarity` if either label has no known token.
    """
    va, vb = table.mean_vector(a), table.mean_vector(b)
    if va is None or vb is None:
        return edit_similarity(a, b)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        # opposite token vectors can cancel out in the mean
        return edit_similarity(a, b)
    cos = float(np.dot(va, vb) / (na * nb))
    return min(1.0, max(0.0, cos))


class SemanticProvider(Protocol):
    name: str

    def similarity(self, a: str, b: str) -> float: ...


class EditDistanceProvider:
    name = "edit"

    def similarity(self, a: str, b: str) -> float:
        return edit_similarity(a, b)


class VectorProvider:
    name = "vectors"

    def __init__(self, table: VectorTable):
        self.table = table

    @classmethod
    def from_file(cls, path) -> "VectorProvider":
        return cls(load_vectors(path))

    def similarity(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        # sorted arguments keep floating-point results symmetric
        return vector_similarity(*sorted((a, b)), self.table)


def semantic_matrix(log: EventLog, provider: SemanticProvider) -> SimilarityMatrix:
    """``1 - similarity`` for every label pair."""
    m = SimilarityMatrix("semantic", log.activities)
    for a, b in pairs(log.activities):
        s = float(provider.similarity(a, b))
        m[a, b] = min(1.0, max(0.0, 1.0 - s))
    return m
