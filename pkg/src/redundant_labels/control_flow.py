"""Control-flow dissimilarity between activity labels.

Each label gets four neighbour distributions (outgoing and incoming arcs in
the directly- and the indirectly-follows graph); weights are arc counts over
the directional total.  Two labels are compared per direction with EMD under
0/1 ground cost, and the four values are averaged.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .emd import Signature, emd_unit_ground
from .eventlog import EventLog
from .graphs import DEFAULT_THETA_LD, RelationGraph, build_dfg, build_ifg, pairs

__all__ = [
    "Direction",
    "DirectionalSignature",
    "SimilarityMatrix",
    "directional_signature",
    "directional_similarity",
    "follows_similarity",
    "control_flow_matrix",
    "control_flow_parts",
]


class Direction(str, Enum):
    OUTGOING = "out"
    INCOMING = "in"


@dataclass(frozen=True)
class DirectionalSignature:
    activity: str
    direction: Direction
    signature: Signature


class SimilarityMatrix:
    """Symmetric label-pair scores; 0 means most similar.

    Entries are floats in [0, 1] or ``None`` when the perspective does not
    apply to the pair.  The diagonal is never stored.
    """

    def __init__(self, kind: str, labels: Iterable[str], values: Mapping[tuple[str, str], float | None] = ()):
        self.kind = kind
        self.labels = tuple(sorted(labels))
        self._values: dict[tuple[str, str], float | None] = {}
        for (a, b), v in dict(values).items():
            self[a, b] = v

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        if a == b:
            raise KeyError(f"no diagonal entry ({a!r}, {a!r})")
        return (a, b) if a < b else (b, a)

    def __setitem__(self, ab: tuple[str, str], value: float | None) -> None:
        if value is not None:
            value = float(value)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"score {value!r} for {ab} outside [0, 1]")
        self._values[self._key(*ab)] = value

    def __getitem__(self, ab: tuple[str, str]) -> float | None:
        return self._values[self._key(*ab)]

    def __contains__(self, ab) -> bool:
        try:
            return self._key(*ab) in self._values
        except KeyError:
            return False

    def items(self):
        return sorted(self._values.items())

    def __len__(self) -> int:
        return len(self._values)

    def to_csv_rows(self) -> list[tuple[str, str, str]]:
        return [(a, b, "NA" if v is None else repr(v)) for (a, b), v in self.items()]


def directional_signature(g: RelationGraph, a: str, direction: Direction) -> DirectionalSignature:
    """Neighbour distribution of ``a``: arc count over the directional total."""
    nbrs = g.successors(a) if direction is Direction.OUTGOING else g.predecessors(a)
    total = sum(nbrs.values())
    sig = Signature.from_pairs((b, n / total) for b, n in sorted(nbrs.items()))
    return DirectionalSignature(a, Direction(direction), sig)


def _compare(sa: Signature, sb: Signature) -> float:
    # an activity with no neighbours in this direction is a start/end node
    if len(sa) == 0 and len(sb) == 0:
        return 0.0
    if len(sa) == 0 or len(sb) == 0:
        return 1.0
    return emd_unit_ground(sa, sb)


def directional_similarity(g: RelationGraph, a: str, b: str, direction: Direction) -> float:
    return _compare(directional_signature(g, a, direction).signature,
                    directional_signature(g, b, direction).signature)


def follows_similarity(g: RelationGraph, a: str, b: str) -> float:
    """Mean of the outgoing and incoming comparisons on one graph."""
    return 0.5 * (directional_similarity(g, a, b, Direction.OUTGOING)
                  + directional_similarity(g, a, b, Direction.INCOMING))


PART_NAMES = ("direct_out", "direct_in", "indirect_out", "indirect_in")


def _signatures(g: RelationGraph) -> dict[tuple[str, Direction], Signature]:
    return {(a, d): directional_signature(g, a, d).signature for a in g.nodes for d in Direction}


def control_flow_parts(dfg: RelationGraph, ifg: RelationGraph, labels: Sequence[str] | None = None,
                       threads: int = 1) -> dict[tuple[str, str], tuple[float, float, float, float]]:
    """The four directional scores for every unordered pair, in :data:`PART_NAMES` order."""
    sd, si = _signatures(dfg), _signatures(ifg)
    labels = sorted(dfg.nodes if labels is None else labels)
    todo = pairs(labels)

    def one(ab):
        a, b = ab
        return (
            _compare(sd[a, Direction.OUTGOING], sd[b, Direction.OUTGOING]),
            _compare(sd[a, Direction.INCOMING], sd[b, Direction.INCOMING]),
            _compare(si[a, Direction.OUTGOING], si[b, Direction.OUTGOING]),
            _compare(si[a, Direction.INCOMING], si[b, Direction.INCOMING]),
        )

    if threads > 1 and len(todo) > 64:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, todo, chunksize=64))
    else:
        results = [one(ab) for ab in todo]
    return dict(zip(todo, results))


def control_flow_matrix(log: EventLog, theta_ld: float = DEFAULT_THETA_LD,
                        weights: Sequence[float] | None = None, threads: int = 1) -> SimilarityMatrix:
    """Average of directly/indirectly x outgoing/incoming EMD scores per pair.

    ``weights`` optionally replaces the uniform average; it must hold four
    non-negative numbers in :data:`PART_NAMES` order.
    """
    if weights is not None:
        if len(weights) != 4 or any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("control-flow weights must be four non-negative numbers with positive sum")
        s = float(sum(weights))
        weights = tuple(w / s for w in weights)
    parts = control_flow_parts(build_dfg(log), build_ifg(log, theta_ld), threads=threads)
    m = SimilarityMatrix("control_flow", log.activities)
    for ab, vals in parts.items():
        score = sum(vals) / 4.0 if weights is None else sum(w * v for w, v in zip(weights, vals))
        m[ab] = min(1.0, max(0.0, score))
    return m
