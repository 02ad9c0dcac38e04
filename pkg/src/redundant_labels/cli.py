"""Command-line interface.

Commands: ``detect``, ``perturb``, ``evaluate`` and ``export-dfg``.  Settings
come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags (last one wins).

Exit codes: 0 success, 1 configuration or usage error, 2 input/output or
parse error.  Errors are also written to standard error as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import secrets
import sys
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .detector import ConfigError, DetectorConfig, compute_matrices, detect
from .evaluation import (GRID_X, GRID_Y, PerturbationError, PerturbationSetting, perturb, read_pairs, run_grid,
                         write_pairs)
from .eventlog import ColumnMapping, EventLog, LogFormatError, MappingError, load_csv, load_xes, write_csv, write_xes
from .graphs import build_dfg, build_ifg, to_dot
from .semantic import EditDistanceProvider, VectorProvider

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2

logger = logging.getLogger("redundant_labels")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# -- value parsing ----------------------------------------------------------


# "none" on the command line must survive the merge that drops unset flags
DISABLED = "<disabled>"


def _optional_float(s: str):
    if s.strip().lower() in ("", "none", "off", "disabled"):
        return DISABLED
    return float(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _str_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in _str_list(s)]


def _kv(s: str) -> dict[str, str]:
    out = {}
    for part in _str_list(s):
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


# name -> converter for every setting a config file or flag may carry
SETTINGS: dict[str, Callable[[str], Any]] = {
    "input": str,
    "case_col": str,
    "activity_col": str,
    "time_col": str,
    "event_id_col": str,
    "value_cols": _str_list,
    "numeric_keys": _str_list,
    "delimiter": str,
    "theta_c": _optional_float,
    "theta_d": _optional_float,
    "theta_s": _optional_float,
    "combination": str,
    "low_frequency": _optional_float,
    "low_frequency_combination": str,
    "theta_ld": float,
    "theta_a": float,
    "trim": float,
    "group": _bool,
    "strict_na": _bool,
    "value_attribute": _kv,
    "cf_weights": _float_list,
    "sturges": str,
    "semantic_provider": str,
    "vectors": str,
    "threads": int,
    "seed": int,
    "format": str,
    "out": str,
    "csv": str,
    "dump_matrices": str,
    "select_pct": float,
    "rename_pct": float,
    "truth": str,
    "known_pairs": str,
    "x": _float_list,
    "y": _float_list,
    "replicates": int,
    "out_raw": str,
    "out_summary": str,
    "kind": str,
}

_MAP_KEYS = {"case": "case_col", "activity": "activity_col", "time": "time_col", "event": "event_id_col",
             "values": "value_cols"}


def read_config(path) -> dict[str, Any]:
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in ("map", "mapping"):
            for k, v in _kv(value).items():
                out[_MAP_KEYS.get(k, k)] = v if k != "values" else v.split("|")
            continue
        if key not in SETTINGS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        try:
            out[key] = SETTINGS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


# -- argument parser --------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add(p, *flags, dest, conv, **kw):
    def convert(s):
        try:
            return SETTINGS[dest](s) if conv is None else conv(s)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    p.add_argument(*flags, dest=dest, type=convert, default=None, **kw)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", default=None, help="key = value settings file (flags override it)")
    _add(g, "--threads", dest="threads", conv=None, help="worker count (default: CPU count)")
    _add(g, "--seed", dest="seed", conv=None, help="random / master seed")
    g.add_argument("--format", dest="format", choices=["json", "csv", "table"], default=None,
                   help="what to print on standard output")
    g.add_argument("-v", "--verbose", action="store_true")

    inp = _Parser(add_help=False)
    g = inp.add_argument_group("input")
    g.add_argument("input", nargs="?", default=None, help="event log (.csv or .xes)")
    g.add_argument("--map", dest="map", default=None,
                   help="CSV columns, e.g. case=CaseID,activity=Activity,time=TS[,event=ID]")
    _add(g, "--numeric-keys", "--value-cols", dest="numeric_keys", conv=None,
         help="comma-separated numeric attributes / CSV value columns")
    g.add_argument("--delimiter", default=None, help="CSV delimiter (default ,)")

    det = _Parser(add_help=False)
    g = det.add_argument_group("detection")
    _add(g, "--theta-c", dest="theta_c", conv=None, help="control-flow threshold ('none' disables)")
    _add(g, "--theta-d", dest="theta_d", conv=None, help="data-value threshold ('none' disables)")
    _add(g, "--theta-s", dest="theta_s", conv=None, help="semantic threshold ('none' disables)")
    g.add_argument("--combination", default=None, help="all | any | atleast:k")
    _add(g, "--low-frequency", dest="low_frequency", conv=None,
         help="event-share below which a pair uses the low-frequency rule")
    g.add_argument("--low-frequency-combination", default=None, help="rule for rare labels (default any)")
    _add(g, "--theta-ld", dest="theta_ld", conv=None, help="long-distance threshold for indirect relations")
    _add(g, "--theta-a", dest="theta_a", conv=None, help="percentile clustering threshold (data units)")
    _add(g, "--trim", dest="trim", conv=None, help="fraction of values trimmed at each end")
    g.add_argument("--group", dest="group", action="store_const", const=True, default=None,
                   help="add transitive groups of redundant labels")
    g.add_argument("--strict-na", dest="strict_na", action="store_const", const=True, default=None,
                   help="score inapplicable perspectives as 1 instead of skipping them")
    g.add_argument("--value-attribute", dest="value_attribute", action="append", default=None,
                   metavar="ACTIVITY=ATTR", help="numeric attribute to use for an activity (repeatable)")
    _add(g, "--cf-weights", dest="cf_weights", conv=None,
         help="weights for direct-out,direct-in,indirect-out,indirect-in")
    g.add_argument("--sturges", choices=["ceil", "floor"], default=None)
    g.add_argument("--semantic-provider", choices=["edit", "vectors"], default=None)
    g.add_argument("--vectors", default=None, help="word-vector file for --semantic-provider vectors")

    parser = _Parser(prog="redundant-labels", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("detect", parents=[common, inp, det], help="find redundant label pairs")
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.add_argument("--csv", default=None, help="write the flat CSV report here")
    p.add_argument("--dump-matrices", dest="dump_matrices", default=None, metavar="DIR",
                   help="write one label_a,label_b,score CSV per perspective")

    p = sub.add_parser("perturb", parents=[common, inp], help="make an H(x,y) synthetic log")
    _add(p, "--select-pct", dest="select_pct", conv=None, help="percent of labels to pick (0, 100]")
    _add(p, "--rename-pct", dest="rename_pct", conv=None, help="percent of each picked label's events to rename")
    p.add_argument("--out", default=None, help="perturbed log path (default: derived from input and seed)")
    p.add_argument("--truth", default=None, help="ground-truth pairs CSV path")
    p.add_argument("--known-pairs", dest="known_pairs", default=None, help="label_a,label_b CSV of known redundancies")

    p = sub.add_parser("evaluate", parents=[common, inp, det], help="run the H(x,y) grid and score it")
    _add(p, "--x", dest="x", conv=None, help="select percentages (default 20,40,60,80,100)")
    _add(p, "--y", dest="y", conv=None, help="rename percentages (default 1,5,10,15,20,25,30)")
    _add(p, "--replicates", dest="replicates", conv=None, help="logs per setting (default 5)")
    p.add_argument("--known-pairs", dest="known_pairs", default=None)
    p.add_argument("--out-raw", dest="out_raw", default=None, help="per-run CSV (default evaluate_raw.csv)")
    p.add_argument("--out-summary", dest="out_summary", default=None,
                   help="per-setting CSV (default evaluate_summary.csv)")

    p = sub.add_parser("export-dfg", parents=[common, inp], help="write the relation graph as DOT")
    p.add_argument("--kind", choices=["direct", "indirect"], default=None)
    _add(p, "--theta-ld", dest="theta_ld", conv=None)
    p.add_argument("--out", default=None, help="DOT file (default: standard output)")
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults < config file < flags."""
    settings: dict[str, Any] = {}
    if args.config:
        settings.update(read_config(args.config))
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config", "command", "verbose")}
    if "map" in flags:
        try:
            for k, v in _kv(flags.pop("map")).items():
                if k not in _MAP_KEYS:
                    raise UsageError(f"unknown --map key {k!r} (use case, activity, time, event, values)")
                settings[_MAP_KEYS[k]] = v.split("|") if k == "values" else v
        except ValueError as exc:
            raise UsageError(f"--map: {exc}") from None
    if "value_attribute" in flags:
        merged = dict(settings.get("value_attribute", {}))
        for item in flags.pop("value_attribute"):
            merged.update(_kv(item))
        settings["value_attribute"] = merged
    settings.update(flags)
    settings = {k: (None if v is DISABLED else v) for k, v in settings.items()}
    settings.setdefault("threads", os.cpu_count() or 1)
    if settings.get("format", "json") not in ("json", "csv", "table"):
        raise UsageError(f"unknown format {settings['format']!r} (use json, csv or table)")
    if settings["threads"] < 1:
        raise UsageError("--threads must be at least 1")
    return settings


def detector_config(s: dict[str, Any]) -> DetectorConfig:
    kw = {}
    for name in ("theta_c", "theta_d", "theta_s", "combination", "low_frequency", "low_frequency_combination",
                 "theta_ld", "theta_a", "trim", "strict_na", "cf_weights", "sturges"):
        if name in s:
            kw[name] = s[name]
    if "group" in s:
        kw["group_transitively"] = s["group"]
    if "value_attribute" in s:
        kw["value_attributes"] = s["value_attribute"]
    return DetectorConfig(**kw).validate()


def _provider(s: dict[str, Any], cfg: DetectorConfig):
    if cfg.theta_s is None:
        return None
    kind = s.get("semantic_provider", "vectors" if "vectors" in s else "edit")
    if kind == "edit":
        return EditDistanceProvider()
    if kind == "vectors":
        if "vectors" not in s:
            raise UsageError("--semantic-provider vectors needs --vectors PATH")
        try:
            return VectorProvider.from_file(s["vectors"])
        except OSError as exc:
            raise InputError(f"cannot read vectors: {exc}") from None
        except ValueError as exc:
            raise InputError(str(exc)) from None
    raise UsageError(f"unknown semantic provider {kind!r}")


def _mapping(s: dict[str, Any]) -> ColumnMapping:
    values = tuple(s.get("numeric_keys") or s.get("value_cols") or ())
    if all(k in s for k in ("case_col", "activity_col", "time_col")):
        return ColumnMapping(s["case_col"], s["activity_col"], s["time_col"], values,
                             s.get("event_id_col"), s.get("delimiter", ","))
    if any(k in s for k in ("case_col", "activity_col", "time_col")):
        raise UsageError("--map needs all of case, activity and time")
    return ColumnMapping("case_id", "activity", "timestamp", values, "event_id", s.get("delimiter", ","))


def load_input(s: dict[str, Any]) -> EventLog:
    if "input" not in s:
        raise UsageError("no input log given")
    path = s["input"]
    try:
        if str(path).lower().endswith(".xes"):
            return load_xes(path, s.get("numeric_keys") or s.get("value_cols") or ())
        return load_csv(path, _mapping(s))
    except MappingError as exc:
        raise UsageError(str(exc)) from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except LogFormatError as exc:
        raise InputError(str(exc)) from None


def _provenance(command: str, s: dict[str, Any], extra: dict | None = None) -> dict:
    keep = {k: v for k, v in sorted(s.items()) if k not in ("threads", "format")}
    return {"tool": {"name": "redundant-labels", "version": __version__}, "command": command,
            "settings": keep, **(extra or {})}


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from None


def _write_meta(path, meta: dict) -> None:
    _write_text(f"{path}.meta.json", json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


# -- commands ---------------------------------------------------------------


def cmd_detect(s: dict[str, Any]) -> int:
    cfg = detector_config(s)
    provider = _provider(s, cfg)
    fmt = s.get("format", "json")
    log = load_input(s)
    if len(log) == 0:
        raise InputError(f"{s['input']}: log has no traces")
    matrices = compute_matrices(log, cfg, provider, s["threads"])
    report = detect(log, cfg, provider, threads=s["threads"], matrices=matrices)
    report.config["input"] = os.path.basename(str(s["input"]))
    if "seed" in s:
        report.config["seed"] = s["seed"]
    meta = _provenance("detect", s)
    if "out" in s:
        _write_text(s["out"], report.to_json())
    if "csv" in s:
        _write_text(s["csv"], report.to_csv())
        _write_meta(s["csv"], meta)
    if "dump_matrices" in s:
        out_dir = Path(s["dump_matrices"])
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputError(f"cannot create {out_dir}: {exc}") from None
        for name, m in matrices.items():
            rows = ["label_a,label_b,score"] + [_csv_line(r) for r in m.to_csv_rows()]
            target = out_dir / f"{name}.csv"
            _write_text(target, "\n".join(rows) + "\n")
            _write_meta(target, meta)
    text = {"json": report.to_json, "csv": report.to_csv, "table": report.to_table}[fmt]()
    sys.stdout.write(text)
    return EXIT_OK


def _csv_line(row) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(row)
    return buf.getvalue()


def cmd_perturb(s: dict[str, Any]) -> int:
    for k in ("select_pct", "rename_pct"):
        if k not in s:
            raise UsageError(f"--{k.replace('_', '-')} is required")
    seed = s.get("seed")
    generated = seed is None
    if generated:
        seed = secrets.randbits(63)
    try:
        setting = PerturbationSetting(s["select_pct"], s["rename_pct"], seed)
    except PerturbationError as exc:
        raise UsageError(str(exc)) from None
    known = _known_pairs(s)
    log = load_input(s)
    src = Path(s["input"])
    ext = ".xes" if src.suffix.lower() == ".xes" else ".csv"
    out = s.get("out") or f"{src.stem}_H{setting.select_pct:g}_{setting.rename_pct:g}_seed{seed}{ext}"
    truth_path = s.get("truth") or f"{Path(out).with_suffix('')}_truth.csv"
    if Path(out).resolve() == src.resolve():
        raise UsageError("refusing to overwrite the input log")
    try:
        plog, truth = perturb(log, setting, known)
    except PerturbationError as exc:
        raise InputError(str(exc)) from None
    try:
        (write_xes if ext == ".xes" else write_csv)(plog, out)
        write_pairs(sorted(truth.pairs(plog.activities)), truth_path)
    except OSError as exc:
        raise InputError(f"cannot write output: {exc}") from None
    meta = _provenance("perturb", s, {"seed": seed, "selected": plog.source_meta["perturbation"]["selected"],
                                      "synthetic_pairs": [list(p) for p in truth.synthetic]})
    _write_meta(out, meta)
    if generated:
        print(f"seed: {seed}")
    print(f"perturbed log: {out}")
    print(f"ground truth: {truth_path}")
    return EXIT_OK


def _known_pairs(s: dict[str, Any]) -> list[tuple[str, str]]:
    if "known_pairs" not in s:
        return []
    try:
        return read_pairs(s["known_pairs"])
    except OSError as exc:
        raise InputError(f"cannot read known pairs: {exc}") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_evaluate(s: dict[str, Any]) -> int:
    cfg = detector_config(s)
    if cfg.theta_s is not None:
        raise UsageError("evaluate scores synthetic labels; the semantic perspective is not supported here")
    xs = s.get("x", list(GRID_X))
    ys = s.get("y", list(GRID_Y))
    for name, vals in (("--x", xs), ("--y", ys)):
        if not vals or any(not 0 < v <= 100 for v in vals):
            raise UsageError(f"{name} values must lie in (0, 100]")
    reps = s.get("replicates", 5)
    if reps < 1:
        raise UsageError("--replicates must be at least 1")
    seed = s.get("seed", 0)
    known = _known_pairs(s)
    log = load_input(s)
    try:
        result = run_grid(log, xs, ys, reps, cfg, seed, known, threads=s["threads"])
    except PerturbationError as exc:
        raise InputError(str(exc)) from None
    raw = s.get("out_raw", "evaluate_raw.csv")
    summary = s.get("out_summary", "evaluate_summary.csv")
    try:
        result.write_raw(raw)
        result.write_summary(summary)
    except OSError as exc:
        raise InputError(f"cannot write output: {exc}") from None
    meta = _provenance("evaluate", s, {"master_seed": seed, "detector": cfg.to_dict(), "runs": len(result.rows),
                                       "mean_f_score": result.mean_f_score})
    _write_meta(raw, meta)
    _write_meta(summary, meta)
    fmt = s.get("format", "table")
    if fmt == "json":
        sys.stdout.write(json.dumps({"runs": len(result.rows), "mean_f_score": result.mean_f_score,
                                     "summary": result.summary()}, indent=2) + "\n")
    elif fmt == "csv":
        sys.stdout.write(Path(summary).read_text(encoding="utf-8"))
    else:
        print(f"{'x':>5} {'y':>5} {'mean F':>8} {'std F':>8}")
        for row in result.summary():
            print(f"{row['x']:>5g} {row['y']:>5g} {row['mean_f_score']:8.3f} {row['std_f_score']:8.3f}")
        print(f"{len(result.rows)} runs, mean f-score {result.mean_f_score:.3f}")
    return EXIT_OK


def cmd_export_dfg(s: dict[str, Any]) -> int:
    kind = s.get("kind", "direct")
    theta_ld = s.get("theta_ld", DetectorConfig().theta_ld)
    if not 0 <= theta_ld <= 1:
        raise UsageError("--theta-ld must lie in [0, 1]")
    log = load_input(s)
    if len(log) == 0:
        raise InputError(f"{s['input']}: log has no traces")
    g = build_dfg(log) if kind == "direct" else build_ifg(log, theta_ld)
    header = f"// {json.dumps(_provenance('export-dfg', s), sort_keys=True, default=str)}\n"
    text = header + to_dot(g)
    if "out" in s:
        _write_text(s["out"], text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "perturb": cmd_perturb, "evaluate": cmd_evaluate, "export-dfg": cmd_export_dfg}


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_CONFIG
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        settings = resolve(args)
        return COMMANDS[args.command](settings)
    except (UsageError, ConfigError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except InputError as exc:
        return _fail(EXIT_IO, "input", str(exc))


if __name__ == "__main__":
    sys.exit(main())
