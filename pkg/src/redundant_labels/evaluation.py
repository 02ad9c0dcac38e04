"""Synthetic-perturbation evaluation.

``H(x, y)``: pick x% of the activity labels at random and, for each, rename
y% of its events to a fresh synthetic label.  Each (original, synthetic)
pair is a known redundancy; detection output is scored against them with
precision, recall and f-score.
"""

from __future__ import annotations

import csv
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .detector import DetectionReport, DetectorConfig, detect, group_pairs
from .eventlog import EventLog, Trace, activity_frequency

logger = logging.getLogger(__name__)

__all__ = [
    "PerturbationError",
    "PerturbationSetting",
    "GroundTruth",
    "Metrics",
    "GridRow",
    "GridResult",
    "perturb",
    "score",
    "derive_seed",
    "run_grid",
    "read_pairs",
    "write_pairs",
    "GRID_X",
    "GRID_Y",
]

GRID_X = (20, 40, 60, 80, 100)
GRID_Y = (1, 5, 10, 15, 20, 25, 30)
SYN_SUFFIX = "_syn"


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationSetting:
    select_pct: float
    rename_pct: float
    seed: int
    replicate: int = 0

    def __post_init__(self):
        for name in ("select_pct", "rename_pct"):
            v = getattr(self, name)
            if not 0 < v <= 100:
                raise PerturbationError(f"{name} must lie in (0, 100], got {v}")


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class GroundTruth:
    synthetic: tuple[tuple[str, str], ...]
    known: tuple[tuple[str, str], ...] = ()

    def pairs(self, labels: Iterable[str] | None = None) -> set[tuple[str, str]]:
        """Every pair inside a group of mutually redundant labels.

        Groups are the connected components of synthetic plus known pairs, so
        a synthetic copy of one known-redundant label is also redundant with the
        others.  With ``labels`` given, pairs touching absent labels are dropped.
        """
        keep = None if labels is None else set(labels)
        out = set()
        for g in group_pairs([*self.synthetic, *self.known]):
            if keep is not None:
                g = [x for x in g if x in keep]
            out.update(_pair(a, b) for i, a in enumerate(g) for b in g[i + 1:])
        return out


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def score(detected: DetectionReport | Iterable[tuple[str, str]], truth: GroundTruth | Iterable[tuple[str, str]],
          labels: Iterable[str] | None = None) -> Metrics:
    """Compare detected pairs with the ground truth (pair order is irrelevant)."""
    if isinstance(detected, DetectionReport):
        detected = detected.redundant_pairs
    found = {_pair(a, b) for a, b in detected}
    if isinstance(truth, GroundTruth):
        actual = truth.pairs(labels)
    else:
        actual = {_pair(a, b) for a, b in truth}
    tp = len(found & actual)
    return Metrics(tp, len(found - actual), len(actual - found))


def _fresh_label(base: str, taken: set[str]) -> str:
    name = base + SYN_SUFFIX
    n = 2
    while name in taken:
        name = f"{base}{SYN_SUFFIX}{n}"
        n += 1
    return name


def perturb(log: EventLog, setting: PerturbationSetting,
            known_pairs: Sequence[tuple[str, str]] = ()) -> tuple[EventLog, GroundTruth]:
    """Rename a random share of events of randomly chosen labels.

    ``ceil(x% * |labels|)`` labels are drawn without replacement, and for each
    one ``ceil(y% * count)`` of its events, drawn uniformly over the whole log.
    A label is only eligible if it keeps at least one event under its old
    name.  Timestamps, values and trace membership are left untouched.
    """
    rng = np.random.default_rng(setting.seed)
    freq = activity_frequency(log)
    labels = sorted(log.activities)
    n_select = math.ceil(setting.select_pct / 100 * len(labels))
    n_rename = {a: math.ceil(setting.rename_pct / 100 * freq[a]) for a in labels}
    eligible = [a for a in labels if 1 <= n_rename[a] < freq[a]]
    if n_select > len(eligible):
        raise PerturbationError(
            f"H({setting.select_pct:g},{setting.rename_pct:g}) needs {n_select} labels that keep at least one "
            f"event after renaming, only {len(eligible)} qualify")
    chosen = sorted(rng.choice(len(eligible), size=n_select, replace=False).tolist())
    chosen = [eligible[i] for i in chosen]

    positions: dict[str, list[tuple[int, int]]] = {a: [] for a in chosen}
    for ti, t in enumerate(log.traces):
        for ei, e in enumerate(t.events):
            if e.activity in positions:
                positions[e.activity].append((ti, ei))

    taken = set(log.activities)
    renames: dict[tuple[int, int], str] = {}
    synthetic = []
    for a in chosen:
        new = _fresh_label(a, taken)
        taken.add(new)
        synthetic.append(_pair(a, new))
        pos = positions[a]
        for k in sorted(rng.choice(len(pos), size=n_rename[a], replace=False).tolist()):
            renames[pos[k]] = new

    traces = []
    for ti, t in enumerate(log.traces):
        events = tuple(replace(e, activity=renames[ti, ei]) if (ti, ei) in renames else e
                       for ei, e in enumerate(t.events))
        traces.append(Trace(t.case_id, events))
    meta = dict(log.source_meta)
    meta["perturbation"] = {"select_pct": setting.select_pct, "rename_pct": setting.rename_pct,
                            "seed": setting.seed, "replicate": setting.replicate,
                            "selected": chosen}
    out = EventLog.from_traces(traces, log.numeric_attribute_names, meta)
    known = tuple(_pair(a, b) for a, b in known_pairs)
    return out, GroundTruth(tuple(synthetic), known)


def derive_seed(master: int, x: float, y: float, replicate: int) -> int:
    """64-bit run seed mixed from the master seed and the grid coordinates."""
    entropy = [int(master) & (2**64 - 1), int(round(x * 1000)), int(round(y * 1000)), int(replicate)]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class GridRow:
    x: float
    y: float
    replicate: int
    seed: int
    metrics: Metrics


@dataclass
class GridResult:
    rows: list[GridRow]
    master_seed: int

    def summary(self) -> list[dict]:
        out = []
        cells: dict[tuple[float, float], list[GridRow]] = {}
        for r in self.rows:
            cells.setdefault((r.x, r.y), []).append(r)
        for (x, y), rows in cells.items():
            f = [r.metrics.f_score for r in rows]
            out.append({
                "x": x, "y": y, "runs": len(rows),
                "mean_precision": statistics.fmean(r.metrics.precision for r in rows),
                "mean_recall": statistics.fmean(r.metrics.recall for r in rows),
                "mean_f_score": statistics.fmean(f),
                "std_f_score": statistics.pstdev(f),
            })
        return out

    @property
    def mean_f_score(self) -> float:
        return statistics.fmean(r.metrics.f_score for r in self.rows) if self.rows else 0.0

    def write_raw(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "replicate", "seed", "tp", "fp", "fn", "precision", "recall", "f_score"])
            for r in self.rows:
                m = r.metrics
                w.writerow([_num(r.x), _num(r.y), r.replicate, r.seed, m.tp, m.fp, m.fn,
                            repr(m.precision), repr(m.recall), repr(m.f_score)])

    def write_summary(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            keys = ["x", "y", "runs", "mean_precision", "mean_recall", "mean_f_score", "std_f_score"]
            w.writerow(keys)
            for s in self.summary():
                w.writerow([_num(s["x"]), _num(s["y"]), s["runs"],
                            *(repr(s[k]) for k in keys[3:])])


def _num(v: float) -> str:
    return f"{v:g}"


# set once per worker process so the log is not pickled for every run
_shared: tuple | None = None


def _init_worker(log: EventLog, cfg: DetectorConfig, known: tuple) -> None:
    global _shared
    _shared = (log, cfg, known)


def _one_run(job, shared=None) -> GridRow:
    log, cfg, known = shared or _shared
    x, y, rep, seed = job
    plog, truth = perturb(log, PerturbationSetting(x, y, seed, rep), known)
    report = detect(plog, cfg)
    return GridRow(x, y, rep, seed, score(report, truth, plog.activities))


def run_grid(
    log: EventLog,
    xs: Sequence[float] = GRID_X,
    ys: Sequence[float] = GRID_Y,
    replicates: int = 5,
    cfg: DetectorConfig | None = None,
    master_seed: int = 0,
    known_pairs: Sequence[tuple[str, str]] = (),
    threads: int = 1,
) -> GridResult:
    """Perturb, detect and score every (x, y, replicate) combination.

    Rows come back in (x, y, replicate) order whatever the worker count.
    """
    cfg = (cfg or DetectorConfig()).validate()
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    shared = (log, cfg, tuple(known_pairs))
    jobs = [(x, y, rep, derive_seed(master_seed, x, y, rep)) for x in xs for y in ys for rep in range(replicates)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=shared) as ex:
            rows = list(ex.map(_one_run, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        rows = [_one_run(j, shared) for j in jobs]
    return GridResult(rows, master_seed)


def read_pairs(path) -> list[tuple[str, str]]:
    """Read a ``label_a,label_b`` CSV (header optional)."""
    out = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: row {i + 1}: expected two labels")
            if i == 0 and [c.strip() for c in row[:2]] == ["label_a", "label_b"]:
                continue
            out.append((row[0], row[1]))
    return out


def write_pairs(pairs: Iterable[tuple[str, str]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label_a", "label_b"])
        w.writerows(sorted(_pair(a, b) for a, b in pairs))
