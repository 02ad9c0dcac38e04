"""Combine per-perspective scores into redundancy verdicts.

Every perspective yields a dissimilarity per label pair (``None`` when it does
not apply).  A perspective is *satisfied* when its score is at most its
threshold; a combination rule (``all``, ``any`` or ``atleast:k``) over the
applicable, enabled perspectives decides whether the pair is redundant.
Pairs involving a rare label can be switched to a looser rule.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from . import __version__
from .control_flow import SimilarityMatrix, control_flow_matrix
from .data_value import DEFAULT_THETA_A, data_value_matrix
from .eventlog import EventLog, activity_frequency
from .graphs import DEFAULT_THETA_LD, pairs
from .semantic import SemanticProvider, semantic_matrix

__all__ = [
    "PERSPECTIVES",
    "ConfigError",
    "DetectorConfig",
    "PairVerdict",
    "DetectionReport",
    "evaluate_pair",
    "detect",
    "group_pairs",
]

PERSPECTIVES = ("control_flow", "data_value", "semantic")
_THRESHOLD_FIELD = {"control_flow": "theta_c", "data_value": "theta_d", "semantic": "theta_s"}


class ConfigError(ValueError):
    pass


def parse_combination(rule: str) -> tuple[str, int]:
    """``"all"`` / ``"any"`` / ``"atleast:k"`` -> (kind, k)."""
    r = rule.strip().lower().replace("_", "")
    if r in ("all", "any"):
        return r, 0
    if r.startswith("atleast"):
        tail = r[len("atleast"):].lstrip(":(").rstrip(")")
        try:
            k = int(tail)
        except ValueError:
            raise ConfigError(f"bad combination rule {rule!r}") from None
        if k < 1:
            raise ConfigError(f"atleast needs k >= 1, got {k}")
        return "atleast", k
    raise ConfigError(f"unknown combination rule {rule!r} (use all, any or atleast:k)")


@dataclass
class DetectorConfig:
    theta_c: float | None = 0.25
    theta_d: float | None = 0.1
    theta_s: float | None = None
    combination: str = "all"
    low_frequency: float | None = None
    low_frequency_combination: str = "any"
    theta_ld: float = DEFAULT_THETA_LD
    theta_a: float = DEFAULT_THETA_A
    trim: float = 0.0
    group_transitively: bool = False
    strict_na: bool = False
    value_attributes: Mapping[str, str] = field(default_factory=dict)
    cf_weights: Sequence[float] | None = None
    sturges: str = "ceil"

    @property
    def enabled(self) -> tuple[str, ...]:
        return tuple(p for p in PERSPECTIVES if self.threshold(p) is not None)

    def threshold(self, perspective: str) -> float | None:
        return getattr(self, _THRESHOLD_FIELD[perspective])

    def validate(self) -> "DetectorConfig":
        for p in PERSPECTIVES:
            t = self.threshold(p)
            if t is not None and not 0.0 <= t <= 1.0:
                raise ConfigError(f"{_THRESHOLD_FIELD[p]} must lie in [0, 1], got {t}")
        if not self.enabled:
            raise ConfigError("at least one of theta_c, theta_d, theta_s must be set")
        for rule in (self.combination, self.low_frequency_combination):
            kind, k = parse_combination(rule)
            if kind == "atleast" and k > len(self.enabled):
                raise ConfigError(f"{rule!r} asks for more perspectives than the {len(self.enabled)} enabled")
        if self.low_frequency is not None and not 0.0 < self.low_frequency <= 1.0:
            raise ConfigError(f"low_frequency must lie in (0, 1], got {self.low_frequency}")
        if not 0.0 <= self.theta_ld <= 1.0:
            raise ConfigError(f"theta_ld must lie in [0, 1], got {self.theta_ld}")
        if not self.theta_a > 0:
            raise ConfigError(f"theta_a must be positive, got {self.theta_a}")
        if not 0.0 <= self.trim < 0.5:
            raise ConfigError(f"trim must lie in [0, 0.5), got {self.trim}")
        if self.cf_weights is not None:
            w = list(self.cf_weights)
            if len(w) != 4 or any(x < 0 for x in w) or sum(w) <= 0:
                raise ConfigError("cf_weights must be four non-negative numbers with positive sum")
        if self.sturges not in ("ceil", "floor"):
            raise ConfigError(f"sturges must be 'ceil' or 'floor', got {self.sturges!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["value_attributes"] = dict(sorted(self.value_attributes.items()))
        d["cf_weights"] = None if self.cf_weights is None else list(self.cf_weights)
        return d


@dataclass(frozen=True)
class PairVerdict:
    a: str
    b: str
    scores: Mapping[str, float | None]
    satisfied: tuple[str, ...]
    redundant: bool
    rule: str

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "scores": {p: self.scores.get(p) for p in PERSPECTIVES},
            "satisfied": list(self.satisfied),
            "redundant": self.redundant,
            "rule": self.rule,
        }


def evaluate_pair(
    scores: Mapping[str, float | None],
    freq_a: float,
    freq_b: float,
    cfg: DetectorConfig,
    pair: tuple[str, str] = ("", ""),
) -> PairVerdict:
    """Apply the threshold rules of ``cfg`` to one pair's scores.

    Perspectives whose score is ``None`` are left out of the count, unless
    ``cfg.strict_na`` is set, in which case they score 1.  A pair with no
    applicable perspective is ``undecidable`` and never redundant.
    """
    applicable = []
    satisfied = []
    for p in cfg.enabled:
        s = scores.get(p)
        if s is None:
            if not cfg.strict_na:
                continue
            s = 1.0
        applicable.append(p)
        if s <= cfg.threshold(p):
            satisfied.append(p)

    if not applicable:
        return PairVerdict(pair[0], pair[1], dict(scores), (), False, "undecidable")

    rule = cfg.combination
    label = ""
    if cfg.low_frequency is not None and min(freq_a, freq_b) < cfg.low_frequency:
        rule = cfg.low_frequency_combination
        label = "low_frequency:"
    kind, k = parse_combination(rule)
    if kind == "all":
        redundant = len(satisfied) == len(applicable)
    elif kind == "any":
        redundant = len(satisfied) >= 1
    else:
        redundant = len(satisfied) >= k
    name = f"{label}{kind}" + (f":{k}" if kind == "atleast" else "")
    return PairVerdict(pair[0], pair[1], dict(scores), tuple(satisfied), redundant, name)


def group_pairs(redundant: Sequence[tuple[str, str]]) -> list[list[str]]:
    """Connected components (union-find) of the redundant-pair graph."""
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in redundant:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, list[str]] = {}
    for x in parent:
        groups.setdefault(find(x), []).append(x)
    return sorted(sorted(g) for g in groups.values())


@dataclass
class DetectionReport:
    config: dict
    log_fingerprint: dict
    pairs: list[PairVerdict]
    redundant_pairs: list[tuple[str, str]]
    groups: list[list[str]] | None = None
    tool: dict = field(default_factory=lambda: {"name": "redundant-labels", "version": __version__})

    def to_dict(self) -> dict:
        d = {
            "tool": self.tool,
            "config": self.config,
            "log_fingerprint": self.log_fingerprint,
            "pairs": [v.to_dict() for v in self.pairs],
            "redundant_pairs": [list(p) for p in self.redundant_pairs],
        }
        if self.groups is not None:
            d["groups"] = self.groups
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "b", *PERSPECTIVES, "satisfied", "redundant", "rule"])
        for v in self.pairs:
            w.writerow([v.a, v.b,
                        *("NA" if v.scores.get(p) is None else repr(v.scores[p]) for p in PERSPECTIVES),
                        ";".join(v.satisfied), str(v.redundant).lower(), v.rule])
        return buf.getvalue()

    def to_table(self) -> str:
        def fmt(x):
            return "   -  " if x is None else f"{x:6.3f}"

        rows = [("a", "b", "cflow", "data", "sem", "redundant", "rule")]
        for v in self.pairs:
            rows.append((v.a, v.b, *(fmt(v.scores.get(p)) for p in PERSPECTIVES),
                         "YES" if v.redundant else "", v.rule))
        widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        fp = self.log_fingerprint
        lines.append("")
        lines.append(f"{len(self.redundant_pairs)} redundant pair(s) among {len(self.pairs)} "
                     f"({fp['traces']} traces, {fp['events']} events, {fp['activities']} activities)")
        for a, b in self.redundant_pairs:
            lines.append(f"  {a}  <->  {b}")
        return "\n".join(lines) + "\n"


def compute_matrices(log: EventLog, cfg: DetectorConfig, provider: SemanticProvider | None = None,
                     threads: int = 1) -> dict[str, SimilarityMatrix]:
    """The similarity matrix of every enabled perspective."""
    jobs = {}
    if cfg.theta_c is not None:
        jobs["control_flow"] = lambda: control_flow_matrix(log, cfg.theta_ld, cfg.cf_weights, threads=threads)
    if cfg.theta_d is not None:
        jobs["data_value"] = lambda: data_value_matrix(log, cfg.theta_a, cfg.trim, cfg.value_attributes,
                                                       cfg.sturges, threads=threads)
    if cfg.theta_s is not None:
        jobs["semantic"] = lambda: semantic_matrix(log, provider)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(min(threads, len(jobs))) as ex:
            futures = {p: ex.submit(fn) for p, fn in jobs.items()}
            return {p: f.result() for p, f in futures.items()}
    return {p: fn() for p, fn in jobs.items()}


def detect(log: EventLog, cfg: DetectorConfig, provider: SemanticProvider | None = None,
           threads: int = 1, matrices: Mapping[str, SimilarityMatrix] | None = None) -> DetectionReport:
    """Score every unordered label pair and report the redundant ones.

    ``matrices`` may carry scores already produced by :func:`compute_matrices`
    for the same log and configuration.
    """
    cfg.validate()
    if len(log) == 0:
        raise ValueError("cannot run detection on an empty log")
    if cfg.theta_s is not None and provider is None:
        raise ConfigError("theta_s is set but no semantic provider was given")

    if matrices is None:
        matrices = compute_matrices(log, cfg, provider, threads)
    freq = activity_frequency(log)
    total = log.n_events
    verdicts = []
    for a, b in pairs(log.activities):
        scores = {p: matrices[p][a, b] if p in matrices else None for p in PERSPECTIVES}
        verdicts.append(evaluate_pair(scores, freq[a] / total, freq[b] / total, cfg, (a, b)))
    redundant = [(v.a, v.b) for v in verdicts if v.redundant]

    config = cfg.to_dict()
    config["semantic_provider"] = None if provider is None or cfg.theta_s is None else provider.name
    return DetectionReport(
        config=config,
        log_fingerprint=log.fingerprint(),
        pairs=verdicts,
        redundant_pairs=redundant,
        groups=group_pairs(redundant) if cfg.group_transitively else None,
    )
