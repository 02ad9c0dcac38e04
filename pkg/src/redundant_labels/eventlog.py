"""Event-log data model and ingestion.

Logs are read from CSV (one row per event) or from the commonly used
subset of IEEE XES.  Everything downstream works on :class:`EventLog`,
which is immutable once loaded: traces are tuples of frozen events,
sorted by timestamp with ties kept in file order.

Activity labels are kept exactly as they appear in the input.  Two labels
that differ only by case or spacing are *different* activities here; deciding
whether they are redundant is the detector's job.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Iterator, Mapping, Sequence

logger = logging.getLogger(__name__)

__all__ = [
    "ColumnMapping",
    "Event",
    "Trace",
    "EventLog",
    "LogFormatError",
    "MappingError",
    "load_csv",
    "load_xes",
    "load_log",
    "write_csv",
    "write_xes",
    "activity_frequency",
    "numeric_series",
    "parse_timestamp",
]


class LogFormatError(ValueError):
    """Input file could not be parsed.

    ``line`` is set for row-level CSV problems, ``offset`` (bytes from the
    start of the file) for malformed XML.
    """

    def __init__(self, message: str, *, path=None, line: int | None = None, offset: int | None = None):
        self.path = None if path is None else str(path)
        self.line = line
        self.offset = offset
        where = [self.path or ""]
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        prefix = ", ".join(w for w in where if w)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class MappingError(ValueError):
    """The column mapping does not match the file (a configuration problem)."""


@dataclass(frozen=True)
class ColumnMapping:
    case_col: str
    activity_col: str
    time_col: str
    value_cols: tuple[str, ...] = ()
    event_id_col: str | None = None
    delimiter: str = ","

    @classmethod
    def canonical(cls, value_cols: Iterable[str] = ()) -> "ColumnMapping":
        """Mapping that reads files produced by :func:`write_csv`."""
        return cls("case_id", "activity", "timestamp", tuple(value_cols), event_id_col="event_id")


@dataclass(frozen=True)
class Event:
    event_id: str
    activity: str
    timestamp: datetime
    numeric_values: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        if not self.events:
            raise ValueError(f"trace {self.case_id!r} has no events")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    activities: frozenset[str]
    numeric_attribute_names: frozenset[str] = frozenset()
    source_meta: Mapping[str, object] = field(default_factory=dict, compare=False)

    @classmethod
    def from_traces(
        cls,
        traces: Iterable[Trace],
        numeric_attribute_names: Iterable[str] | None = None,
        source_meta: Mapping[str, object] | None = None,
    ) -> "EventLog":
        traces = tuple(traces)
        activities = frozenset(e.activity for t in traces for e in t.events)
        if numeric_attribute_names is None:
            numeric_attribute_names = {k for t in traces for e in t.events for k in e.numeric_values}
        return cls(traces, activities, frozenset(numeric_attribute_names), dict(source_meta or {}))

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def n_events(self) -> int:
        return sum(len(t) for t in self.traces)

    def events(self) -> Iterator[Event]:
        for t in self.traces:
            yield from t.events

    def fingerprint(self) -> dict:
        """Counts plus a SHA-256 over the canonical CSV form."""
        buf = io.StringIO()
        _write_canonical(self, buf)
        return {
            "traces": len(self.traces),
            "events": self.n_events,
            "activities": len(self.activities),
            "sha256": hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest(),
        }


# -- timestamps -------------------------------------------------------------

_DATE_ONLY = re.compile(r"^\d{4}-\d{2}-\d{2}$")


def parse_timestamp(text: str) -> tuple[datetime, bool]:
    """Parse an ISO-8601 instant.

    Returns the datetime and whether the input was a bare date (midnight
    assumed).  Raises ``ValueError`` on anything unparseable.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty timestamp")
    if _DATE_ONLY.match(s):
        return datetime.combine(date.fromisoformat(s), datetime.min.time()), True
    if s[-1] in "zZ":
        s = s[:-1] + "+00:00"
    # fromisoformat on 3.10 only takes 3- or 6-digit fractions
    m = re.match(r"^(.*T\d{2}:\d{2}:\d{2})\.(\d+)(.*)$", s)
    if m and len(m.group(2)) not in (3, 6):
        frac = (m.group(2) + "000000")[:6]
        s = f"{m.group(1)}.{frac}{m.group(3)}"
    return datetime.fromisoformat(s), False


def _sort_key(ts: datetime) -> datetime:
    # naive timestamps are read as UTC so mixed inputs still compare
    if ts.tzinfo is None:
        return ts
    return ts.astimezone(timezone.utc).replace(tzinfo=None)


def _build_log(
    grouped: dict[str, list[tuple[datetime, int, Event]]],
    numeric_names: Iterable[str],
    meta: dict,
) -> EventLog:
    traces = []
    for case_id, rows in grouped.items():
        rows.sort(key=lambda r: (_sort_key(r[0]), r[1]))
        traces.append(Trace(case_id, tuple(r[2] for r in rows)))
    meta["traces"] = len(traces)
    meta["events"] = sum(len(t) for t in traces)
    return EventLog.from_traces(traces, numeric_names, meta)


# -- CSV --------------------------------------------------------------------


def _parse_number(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {text!r}")
    return v


def load_csv(path, mapping: ColumnMapping) -> EventLog:
    """Read a CSV event log, one event per row.

    Rows are grouped by case id (trace order follows first appearance of each
    case) and sorted by timestamp within a case; equal timestamps keep file
    order.  Empty cells in value columns mean the event has no value for that
    attribute.
    """
    grouped: dict[str, list[tuple[datetime, int, Event]]] = {}
    seen_ids: dict[str, set[str]] = {}
    date_only = 0
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh, delimiter=mapping.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise LogFormatError("file is empty (header row required)", path=path, line=1) from None
        index = {name: i for i, name in enumerate(header)}
        required = [mapping.case_col, mapping.activity_col, mapping.time_col, *mapping.value_cols]
        if mapping.event_id_col:
            required.append(mapping.event_id_col)
        missing = [c for c in required if c not in index]
        if missing:
            raise MappingError(f"{path}: column(s) not in header: {', '.join(missing)}")
        ci, ai, ti = index[mapping.case_col], index[mapping.activity_col], index[mapping.time_col]
        vi = [(c, index[c]) for c in mapping.value_cols]
        ei = index[mapping.event_id_col] if mapping.event_id_col else None

        for order, row in enumerate(reader):
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise LogFormatError(f"expected {len(header)} fields, got {len(row)}", path=path, line=line)
            case_id, activity = row[ci], row[ai]
            if not activity:
                raise LogFormatError("empty activity label", path=path, line=line)
            try:
                ts, bare = parse_timestamp(row[ti])
            except ValueError as exc:
                raise LogFormatError(f"bad timestamp {row[ti]!r} ({exc})", path=path, line=line) from None
            date_only += bare
            values = {}
            for name, i in vi:
                cell = row[i].strip()
                if not cell:
                    continue
                try:
                    values[name] = _parse_number(cell)
                except ValueError:
                    raise LogFormatError(f"non-numeric value {cell!r} in column {name!r}", path=path, line=line) from None
            event_id = row[ei] if ei is not None else f"r{line}"
            ids = seen_ids.setdefault(case_id, set())
            if event_id in ids:
                raise LogFormatError(f"duplicate event id {event_id!r} in case {case_id!r}", path=path, line=line)
            ids.add(event_id)
            grouped.setdefault(case_id, []).append((ts, order, Event(event_id, activity, ts, values)))

    if date_only:
        logger.warning("%s: %d timestamp(s) without time of day, midnight assumed", path, date_only)
    meta = {"filename": os.fspath(path), "format": "csv", "rows": sum(len(v) for v in grouped.values()),
            "date_only_timestamps": date_only}
    return _build_log(grouped, mapping.value_cols, meta)


def _fmt_number(v: float) -> str:
    return repr(float(v))


def _write_canonical(log: EventLog, fh) -> None:
    names = sorted(log.numeric_attribute_names)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["case_id", "event_id", "activity", "timestamp", *names])
    for t in log.traces:
        for e in t.events:
            vals = [_fmt_number(e.numeric_values[n]) if n in e.numeric_values else "" for n in names]
            w.writerow([t.case_id, e.event_id, e.activity, e.timestamp.isoformat(), *vals])


def write_csv(log: EventLog, path) -> None:
    """Write ``log`` in canonical CSV form (readable with ``ColumnMapping.canonical``)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_canonical(log, fh)


# -- XES --------------------------------------------------------------------

_NUMERIC_TAGS = {"float", "int"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _byte_offset(path, line: int, column: int) -> int:
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0
    for _ in range(line - 1):
        nl = data.find(b"\n", offset)
        if nl < 0:
            break
        offset = nl + 1
    return offset + column


def load_xes(path, numeric_keys: Iterable[str] = ()) -> EventLog:
    """Read the ``log/trace/event`` subset of XES.

    Only ``float``/``int`` attributes whose key is in ``numeric_keys`` are kept
    as numeric values.  Events without ``concept:name`` are skipped and
    counted in ``source_meta['skipped_events']``.
    """
    numeric_keys = set(numeric_keys)
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        line, col = exc.position
        raise LogFormatError(f"malformed XML ({exc})", path=path, offset=_byte_offset(path, line, col)) from None

    grouped: dict[str, list[tuple[datetime, int, Event]]] = {}
    skipped = date_only = 0
    order = 0
    for t_idx, trace_el in enumerate(el for el in root if _local(el.tag) == "trace"):
        case_id = None
        for attr in trace_el:
            if _local(attr.tag) == "string" and attr.get("key") == "concept:name":
                case_id = attr.get("value")
        if case_id is None:
            case_id = f"trace-{t_idx}"
        rows = grouped.setdefault(case_id, [])
        for e_idx, ev in enumerate(el for el in trace_el if _local(el.tag) == "event"):
            activity = ts = event_id = None
            values = {}
            for attr in ev:
                tag, key, val = _local(attr.tag), attr.get("key"), attr.get("value")
                if key == "concept:name" and tag == "string":
                    activity = val
                elif key == "time:timestamp" and tag == "date":
                    try:
                        ts, bare = parse_timestamp(val or "")
                    except ValueError as exc:
                        raise LogFormatError(
                            f"bad timestamp {val!r} in trace {case_id!r} ({exc})", path=path) from None
                    date_only += bare
                elif key == "identity:id":
                    event_id = val
                elif tag in _NUMERIC_TAGS and key in numeric_keys:
                    try:
                        values[key] = _parse_number(val)
                    except (TypeError, ValueError):
                        raise LogFormatError(f"bad {tag} value {val!r} for {key!r} in trace {case_id!r}",
                                             path=path) from None
            if not activity:
                skipped += 1
                continue
            if ts is None:
                raise LogFormatError(f"event {e_idx} of trace {case_id!r} has no time:timestamp", path=path)
            rows.append((ts, order, Event(event_id or f"{t_idx}:{e_idx}", activity, ts, values)))
            order += 1
        if not rows:
            del grouped[case_id]

    if skipped:
        logger.warning("%s: skipped %d event(s) without concept:name", path, skipped)
    if date_only:
        logger.warning("%s: %d timestamp(s) without time of day, midnight assumed", path, date_only)
    present = {k for rows in grouped.values() for _, _, e in rows for k in e.numeric_values}
    meta = {"filename": os.fspath(path), "format": "xes", "rows": order, "skipped_events": skipped,
            "date_only_timestamps": date_only}
    return _build_log(grouped, present, meta)


def write_xes(log: EventLog, path) -> None:
    root = ET.Element("log", {"xes.version": "1.0"})
    for t in log.traces:
        tr = ET.SubElement(root, "trace")
        ET.SubElement(tr, "string", {"key": "concept:name", "value": t.case_id})
        for e in t.events:
            ev = ET.SubElement(tr, "event")
            ET.SubElement(ev, "string", {"key": "identity:id", "value": e.event_id})
            ET.SubElement(ev, "string", {"key": "concept:name", "value": e.activity})
            ET.SubElement(ev, "date", {"key": "time:timestamp", "value": e.timestamp.isoformat()})
            for k in sorted(e.numeric_values):
                ET.SubElement(ev, "float", {"key": k, "value": _fmt_number(e.numeric_values[k])})
    ET.indent(root)
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)


def load_log(path, mapping: ColumnMapping | None = None, numeric_keys: Sequence[str] = ()) -> EventLog:
    """Dispatch on file extension (``.xes`` or anything else as CSV)."""
    if str(path).lower().endswith(".xes"):
        return load_xes(path, numeric_keys)
    if mapping is None:
        mapping = ColumnMapping.canonical(numeric_keys)
    return load_csv(path, mapping)


# -- queries ----------------------------------------------------------------


def activity_frequency(log: EventLog) -> dict[str, int]:
    """Event count per activity label."""
    return dict(Counter(e.activity for e in log.events()))


def numeric_series(log: EventLog, activity: str, attribute: str | None = None) -> list[float]:
    """All numeric values recorded on events of ``activity``, in log order.

    With ``attribute=None`` every numeric attribute of each event contributes
    (in attribute-name order); otherwise only ``attribute`` does.
    """
    if activity not in log.activities:
        raise KeyError(activity)
    out = []
    for e in log.events():
        if e.activity != activity:
            continue
        if attribute is None:
            out.extend(e.numeric_values[k] for k in sorted(e.numeric_values))
        elif attribute in e.numeric_values:
            out.append(e.numeric_values[attribute])
    return out
