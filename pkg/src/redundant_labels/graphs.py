"""Directly-follows and indirectly-follows graphs with arc counts."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping

from .eventlog import EventLog

__all__ = [
    "GraphKind",
    "RelationGraph",
    "build_dfg",
    "build_ifg",
    "long_distance_significance",
    "outgoing",
    "incoming",
    "to_dot",
]

DEFAULT_THETA_LD = 0.9


class GraphKind(str, Enum):
    DIRECTLY = "directly"
    INDIRECTLY = "indirectly"


@dataclass(frozen=True)
class RelationGraph:
    kind: GraphKind
    nodes: frozenset[str]
    arcs: Mapping[tuple[str, str], int]
    _out: Mapping[str, dict[str, int]] = field(init=False, repr=False, compare=False)
    _in: Mapping[str, dict[str, int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        out: dict[str, dict[str, int]] = {n: {} for n in self.nodes}
        inc: dict[str, dict[str, int]] = {n: {} for n in self.nodes}
        for (a, b), n in self.arcs.items():
            if a not in out or b not in inc:
                raise ValueError(f"arc ({a!r}, {b!r}) has an endpoint outside the node set")
            if n < 1:
                raise ValueError(f"arc ({a!r}, {b!r}) has count {n}")
            out[a][b] = n
            inc[b][a] = n
        object.__setattr__(self, "_out", out)
        object.__setattr__(self, "_in", inc)

    def successors(self, a: str) -> dict[str, int]:
        return self._out[a]

    def predecessors(self, a: str) -> dict[str, int]:
        return self._in[a]


def build_dfg(log: EventLog) -> RelationGraph:
    """Count every adjacent (a, b) event pair across all traces."""
    arcs: Counter = Counter()
    for t in log.traces:
        labels = t.activities
        arcs.update(zip(labels, labels[1:]))
    return RelationGraph(GraphKind.DIRECTLY, frozenset(log.activities), dict(arcs))


def _trace_level_counts(log: EventLog) -> tuple[Counter, Counter]:
    """Per ordered pair, the number of traces where a occurs before b; per
    label, the number of traces containing it."""
    follows: Counter = Counter()
    present: Counter = Counter()
    for t in log.traces:
        labels = t.activities
        present.update(set(labels))
        pairs = set()
        seen: set[str] = set()
        for b in labels:
            for a in seen:
                pairs.add((a, b))
            seen.add(b)
        follows.update(pairs)
    return follows, present


def _significance(n_follow: int, n_a: int, n_b: int) -> float:
    return 2.0 * n_follow / (n_a + n_b + 1)


def long_distance_significance(a: str, b: str, log: EventLog) -> float:
    """Long-distance dependency between ``a`` and ``b``.

    ``2 * |a >> b| / (|a| + |b| + 1)`` where every count is a number of
    traces: traces in which some ``a`` precedes some ``b``, and traces that
    contain each label.  The result lies in ``[0, 1)``.
    """
    if a not in log.activities or b not in log.activities:
        raise KeyError(a if a not in log.activities else b)
    n_follow = n_a = n_b = 0
    for t in log.traces:
        labels = t.activities
        has_a, has_b = a in labels, b in labels
        n_a += has_a
        n_b += has_b
        if has_a and has_b:
            first_a = labels.index(a)
            if any(x == b for x in labels[first_a + 1:]):
                n_follow += 1
    return _significance(n_follow, n_a, n_b)


def build_ifg(log: EventLog, theta_ld: float = DEFAULT_THETA_LD) -> RelationGraph:
    """Eventually-follows pairs whose long-distance significance is at least
    ``theta_ld``; arc count is the number of traces showing the pattern."""
    if not 0.0 <= theta_ld <= 1.0:
        raise ValueError(f"theta_ld must lie in [0, 1], got {theta_ld}")
    follows, present = _trace_level_counts(log)
    arcs = {
        (a, b): n
        for (a, b), n in follows.items()
        if _significance(n, present[a], present[b]) >= theta_ld
    }
    return RelationGraph(GraphKind.INDIRECTLY, frozenset(log.activities), arcs)


def outgoing(g: RelationGraph, a: str) -> set[tuple[str, int]]:
    return set(g.successors(a).items())


def incoming(g: RelationGraph, a: str) -> set[tuple[str, int]]:
    return set(g.predecessors(a).items())


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: RelationGraph, name: str | None = None) -> str:
    """Graphviz source for ``g``; nodes and arcs in sorted order."""
    name = name or ("dfg" if g.kind is GraphKind.DIRECTLY else "ifg")
    lines = [f"digraph {name} {{"]
    for n in sorted(g.nodes):
        lines.append(f"  {_dot_id(n)};")
    style = "" if g.kind is GraphKind.DIRECTLY else ", style=dashed"
    for (a, b) in sorted(g.arcs):
        lines.append(f'  {_dot_id(a)} -> {_dot_id(b)} [label="{g.arcs[a, b]}"{style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def pairs(labels: Iterable[str]) -> list[tuple[str, str]]:
    """Unordered label pairs in lexicographic order."""
    return list(combinations(sorted(labels), 2))
