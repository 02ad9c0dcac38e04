"""Data-value dissimilarity between activity labels.

Activities carrying numeric values are first grouped by their (Q1, Q3)
percentile vectors with average-linkage agglomerative clustering.  Only pairs
inside one group are compared in detail: both value sets are binned into
histograms sharing bin count and range, the histograms become signatures
(left bin boundary, bin fraction), and their 1-D EMD is divided by the shared
range so the score lands in [0, 1].
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .control_flow import SimilarityMatrix
from .emd import Signature, emd_1d
from .eventlog import EventLog, numeric_series
from .graphs import pairs

__all__ = [
    "PercentileVector",
    "ActivityCluster",
    "HistogramPair",
    "select_attribute",
    "extract_trimmed",
    "percentile_vector",
    "cluster_activities",
    "sturges_bins",
    "histogram_pair",
    "pair_score",
    "data_value_matrix",
]

DEFAULT_THETA_A = 1.0


@dataclass(frozen=True)
class PercentileVector:
    activity: str
    q1: float
    q3: float
    n: int

    @property
    def point(self) -> tuple[float, float]:
        return (self.q1, self.q3)


@dataclass(frozen=True)
class ActivityCluster:
    members: frozenset[str]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class HistogramPair:
    bins: int
    lo: float
    hi: float
    left_edges: tuple[float, ...]
    weights_a: tuple[float, ...]
    weights_b: tuple[float, ...]

    @property
    def range(self) -> float:
        return self.hi - self.lo

    def signatures(self) -> tuple[Signature, Signature]:
        return (Signature(self.left_edges, self.weights_a),
                Signature(self.left_edges, self.weights_b))


def select_attribute(log: EventLog, activity: str) -> str | None:
    """Numeric attribute most often present on events of ``activity``.

    Ties go to the alphabetically first name; ``None`` if the activity never
    carries a numeric value.
    """
    counts = Counter(k for e in log.events() if e.activity == activity for k in e.numeric_values)
    if not counts:
        return None
    return min(counts, key=lambda k: (-counts[k], k))


def extract_trimmed(log: EventLog, activity: str, trim: float = 0.0,
                    attribute: str | None = None) -> list[float] | None:
    """Sorted values of ``activity`` with ``floor(trim * n)`` dropped at each end.

    Returns ``None`` when nothing is left (the perspective does not apply).
    """
    if not 0.0 <= trim < 0.5:
        raise ValueError(f"trim must lie in [0, 0.5), got {trim}")
    values = sorted(numeric_series(log, activity, attribute))
    cut = math.floor(trim * len(values))
    if cut:
        values = values[cut:len(values) - cut]
    return values or None


def percentile_vector(values: Sequence[float], activity: str = "") -> PercentileVector:
    """25th/75th percentiles with linear interpolation at ``h = (n - 1) p``."""
    if len(values) == 0:
        raise ValueError("percentile_vector needs at least one value")
    q1, q3 = np.percentile(np.asarray(values, dtype=float), [25, 75], method="linear")
    return PercentileVector(activity, float(q1), float(q3), len(values))


def cluster_activities(vectors: Sequence[PercentileVector], theta_a: float) -> list[ActivityCluster]:
    """Average-linkage clustering of (Q1, Q3) points under Euclidean distance.

    Clusters keep merging while the closest pair is strictly nearer than
    ``theta_a``.  Equal distances are resolved by merging the pair whose sorted
    member names compare smallest.
    """
    if theta_a <= 0:
        raise ValueError("theta_a must be positive")
    vectors = sorted(vectors, key=lambda v: v.activity)
    if not vectors:
        return []
    pts = np.array([v.point for v in vectors], dtype=float)
    point_d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    n = len(vectors)
    alive = {i: [vectors[i].activity] for i in range(n)}
    # average inter-cluster distance, maintained with Lance-Williams updates
    link = {(i, j): float(point_d[i, j]) for i in range(n) for j in range(i + 1, n)}

    def order(item):
        (i, j), dist = item
        mi, mj = sorted(alive[i]), sorted(alive[j])
        return (dist, min(mi, mj), max(mi, mj))

    next_id = n
    while len(alive) > 1:
        (i, j), dist = min(link.items(), key=order)
        if not dist < theta_a:
            break
        ni, nj = len(alive[i]), len(alive[j])
        merged = alive.pop(i) + alive.pop(j)
        link = {
            **{kk: v for kk, v in link.items() if i not in kk and j not in kk},
            **{(k, next_id): (ni * link[min(i, k), max(i, k)] + nj * link[min(j, k), max(j, k)]) / (ni + nj)
               for k in alive},
        }
        alive[next_id] = merged
        next_id += 1
    return sorted((ActivityCluster(frozenset(m)) for m in alive.values()), key=lambda c: sorted(c.members))


def sturges_bins(n: int, rounding: str = "ceil") -> int:
    """Bin count for ``n`` samples.

    ``"ceil"`` gives ``ceil(log2 n) + 1``; ``"floor"`` gives ``floor(log2 n) + 1``.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    if rounding == "ceil":
        return (n - 1).bit_length() + 1
    if rounding == "floor":
        return n.bit_length()
    raise ValueError(f"unknown rounding {rounding!r}")


def _bin_fractions(values: np.ndarray, lo: float, width: float, k: int) -> np.ndarray:
    idx = np.floor((values - lo) / width).astype(int) if width > 0 else np.zeros(values.size, dtype=int)
    idx = np.clip(idx, 0, k - 1)
    return np.bincount(idx, minlength=k) / values.size


def histogram_pair(va: Sequence[float], vb: Sequence[float], rounding: str = "ceil") -> HistogramPair:
    """Histograms of two datasets over their joint [min, max] with equal-width bins.

    The bin count follows Sturges' rule on the smaller sample.  When every value
    is identical the pair collapses to a single bin.
    """
    a = np.asarray(va, dtype=float)
    b = np.asarray(vb, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("histogram_pair needs two non-empty datasets")
    lo = float(min(a.min(), b.min()))
    hi = float(max(a.max(), b.max()))
    k = sturges_bins(min(a.size, b.size), rounding) if hi > lo else 1
    width = (hi - lo) / k
    edges = tuple(lo + i * width for i in range(k))
    wa = _bin_fractions(a, lo, width, k)
    wb = _bin_fractions(b, lo, width, k)
    return HistogramPair(k, lo, hi, edges, tuple(wa.tolist()), tuple(wb.tolist()))


def pair_score(va: Sequence[float], vb: Sequence[float], rounding: str = "ceil") -> float:
    """Range-normalized histogram EMD between two value sets, in [0, 1]."""
    h = histogram_pair(va, vb, rounding)
    if h.range <= 0:
        return 0.0
    sa, sb = h.signatures()
    return min(1.0, max(0.0, emd_1d(sa, sb) / h.range))


def data_value_matrix(
    log: EventLog,
    theta_a: float = DEFAULT_THETA_A,
    trim: float = 0.0,
    attributes: Mapping[str, str] | None = None,
    rounding: str = "ceil",
    threads: int = 1,
) -> SimilarityMatrix:
    """Data-value scores for every label pair.

    * same percentile cluster: :func:`pair_score`;
    * different clusters, or only one side has values: 1;
    * neither side has values: ``None`` (not applicable).

    ``attributes`` pins the numeric attribute used for particular activities;
    otherwise :func:`select_attribute` chooses.
    """
    attributes = dict(attributes or {})
    data: dict[str, list[float]] = {}
    for a in sorted(log.activities):
        attr = attributes.get(a) or select_attribute(log, a)
        if attr is None:
            continue
        values = extract_trimmed(log, a, trim, attr)
        if values is not None:
            data[a] = values
    vectors = [percentile_vector(v, a) for a, v in data.items()]
    cluster_of = {}
    for ci, c in enumerate(cluster_activities(vectors, theta_a)):
        for a in c.members:
            cluster_of[a] = ci

    todo = []
    m = SimilarityMatrix("data_value", log.activities)
    for a, b in pairs(log.activities):
        if a in data and b in data:
            if cluster_of[a] == cluster_of[b]:
                todo.append((a, b))
            else:
                m[a, b] = 1.0
        elif a in data or b in data:
            m[a, b] = 1.0
        else:
            m[a, b] = None

    def one(ab):
        return pair_score(data[ab[0]], data[ab[1]], rounding)

    if threads > 1 and len(todo) > 8:
        with ThreadPoolExecutor(threads) as ex:
            scores = list(ex.map(one, todo))
    else:
        scores = [one(ab) for ab in todo]
    for ab, s in zip(todo, scores):
        m[ab] = s
    return m
