"""Earth Mover's Distance between weighted signatures.

:func:`emd` solves the transportation problem exactly with successive
shortest augmenting paths, so it accepts any non-negative ground distance
and unequal total masses.  Two closed forms cover the ground distances the
detector actually uses:

* :func:`emd_unit_ground` -- 0/1 cost between labels, which reduces to total
  variation, ``1 - sum(min(w_p, w_q))``;
* :func:`emd_1d` -- ``|p - q|`` cost between real-valued clusters, which is
  the area between the two CDFs.

Both fast paths require normalized signatures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

__all__ = [
    "Signature",
    "Flow",
    "EMDUndefinedError",
    "emd",
    "emd_unit_ground",
    "emd_1d",
    "unit_ground",
    "abs_ground",
]

FEAS_TOL = 1e-9
NORM_TOL = 1e-6
_EPS = 1e-13

GroundDistance = Callable[[Hashable, Hashable], float]


class EMDUndefinedError(ValueError):
    """Raised when no mass can be moved (a zero-weight side)."""


@dataclass(frozen=True)
class Signature:
    clusters: tuple
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.clusters) != len(self.weights):
            raise ValueError("clusters and weights differ in length")
        if len(set(self.clusters)) != len(self.clusters):
            raise ValueError("duplicate cluster id in signature")
        if any(not np.isfinite(w) or w < 0 for w in self.weights):
            raise ValueError("weights must be finite and non-negative")

    @classmethod
    def from_mapping(cls, m: Mapping) -> "Signature":
        keys = list(m)
        return cls(tuple(keys), tuple(float(m[k]) for k in keys))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Hashable, float]]) -> "Signature":
        pairs = list(pairs)
        return cls(tuple(p for p, _ in pairs), tuple(float(w) for _, w in pairs))

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def total(self) -> float:
        return float(sum(self.weights))

    def as_dict(self) -> dict:
        return dict(zip(self.clusters, self.weights))


@dataclass(frozen=True)
class Flow:
    """Optimal flow; ``matrix[i, j]`` is the mass moved from P's i-th to Q's j-th cluster."""

    matrix: np.ndarray
    total_moved: float


def unit_ground(p, q) -> float:
    return 0.0 if p == q else 1.0


def abs_ground(p, q) -> float:
    return abs(float(p) - float(q))


def _transport(wp: np.ndarray, wq: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Min-cost flow of ``min(sum wp, sum wq)`` units on the complete bipartite
    network.  Each round finds a cheapest residual path (Bellman-Ford, since
    reverse arcs carry negative cost) and saturates its bottleneck."""
    m, n = cost.shape
    flow = np.zeros((m, n))
    supply = wp.astype(float).copy()
    demand = wq.astype(float).copy()
    target = min(wp.sum(), wq.sum())
    sent = 0.0
    max_rounds = 4 * (m + n) * (m + n) + 10
    # relaxations must beat rounding noise, or zero-cost cycles look negative
    tol = 1e-12 * max(1.0, float(cost.max()))
    for _ in range(max_rounds):
        if target - sent <= _EPS * max(1.0, target):
            break
        dist_p = np.where(supply > _EPS, 0.0, np.inf)
        pred_p = np.full(m, -1)  # Q node we came back from; -1 = source
        dist_q = np.full(n, np.inf)
        pred_q = np.full(n, -1)
        for _ in range(m + n + 1):
            cand = dist_p[:, None] + cost
            best_i = np.argmin(cand, axis=0)
            best = cand[best_i, np.arange(n)]
            upd_q = best < dist_q - tol
            dist_q = np.where(upd_q, best, dist_q)
            pred_q = np.where(upd_q, best_i, pred_q)
            back = np.where(flow > _EPS, dist_q[None, :] - cost, np.inf)
            best_j = np.argmin(back, axis=1)
            bbest = back[np.arange(m), best_j]
            upd_p = bbest < dist_p - tol
            if not upd_p.any() and not upd_q.any():
                break
            dist_p = np.where(upd_p, bbest, dist_p)
            pred_p = np.where(upd_p, best_j, pred_p)
        sinks = np.where(demand > _EPS, dist_q, np.inf)
        j = int(np.argmin(sinks))
        if not np.isfinite(sinks[j]):
            break
        # walk back to the source, collecting arcs
        path = []
        bottleneck = min(demand[j], target - sent)
        q = j
        seen = set()
        while True:
            if q in seen:
                raise RuntimeError("cycle in shortest-path tree")
            seen.add(q)
            i = int(pred_q[q])
            path.append((i, q))
            back_j = int(pred_p[i])
            if back_j < 0:
                bottleneck = min(bottleneck, supply[i])
                break
            bottleneck = min(bottleneck, flow[i, back_j])
            path.append((i, -1 - back_j))
            q = back_j
        for i, q in path:
            if q >= 0:
                flow[i, q] += bottleneck
            else:
                flow[i, -1 - q] -= bottleneck
        supply[path[-1][0]] -= bottleneck
        demand[j] -= bottleneck
        sent += bottleneck
    else:
        raise RuntimeError("transport solver did not converge")
    flow[flow < 0] = 0.0
    return flow


def emd(P: Signature, Q: Signature, d: GroundDistance = unit_ground) -> tuple[float, Flow]:
    """Exact EMD: cheapest flow cost divided by the mass moved.

    The moved mass is ``min(P.total, Q.total)``.  Raises
    :class:`EMDUndefinedError` when that is zero.
    """
    if len(P) == 0 or len(Q) == 0:
        raise EMDUndefinedError("EMD of an empty signature is undefined")
    wp = np.asarray(P.weights, dtype=float)
    wq = np.asarray(Q.weights, dtype=float)
    if min(wp.sum(), wq.sum()) <= 0:
        raise EMDUndefinedError("EMD with a zero-weight signature is undefined")
    cost = np.array([[float(d(p, q)) for q in Q.clusters] for p in P.clusters])
    if (cost < 0).any() or not np.isfinite(cost).all():
        raise ValueError("ground distance must be finite and non-negative")
    flow = _transport(wp, wq, cost)
    moved = float(flow.sum())
    return float((flow * cost).sum() / moved), Flow(flow, moved)


def _normalized(sig: Signature, name: str) -> np.ndarray:
    w = np.asarray(sig.weights, dtype=float)
    total = w.sum()
    if abs(total - 1.0) >= NORM_TOL:
        raise ValueError(f"signature {name} must be normalized (weights sum to {total!r})")
    return w / total


def emd_unit_ground(P: Signature, Q: Signature) -> float:
    """EMD under 0/1 ground distance for normalized signatures."""
    wp = dict(zip(P.clusters, _normalized(P, "P")))
    wq = dict(zip(Q.clusters, _normalized(Q, "Q")))
    shared = sum(min(wp[c], wq[c]) for c in wp.keys() & wq.keys())
    return max(0.0, 1.0 - float(shared))


def emd_1d(P: Signature, Q: Signature) -> float:
    """EMD under ``|p - q|`` for normalized signatures over real numbers."""
    xp = np.asarray(P.clusters, dtype=float)
    xq = np.asarray(Q.clusters, dtype=float)
    wp = _normalized(P, "P")
    wq = _normalized(Q, "Q")
    support = np.union1d(xp, xq)
    if support.size < 2:
        return 0.0
    # mass of each distribution at every support point
    mp = np.zeros(support.size)
    mq = np.zeros(support.size)
    np.add.at(mp, np.searchsorted(support, xp), wp)
    np.add.at(mq, np.searchsorted(support, xq), wq)
    gap = np.abs(np.cumsum(mp) - np.cumsum(mq))[:-1]
    return float(np.dot(gap, np.diff(support)))
