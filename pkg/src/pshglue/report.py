"""Writing run reports as JSON, CSV tables or a plain-text summary."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import IoError

__all__ = ["report_dict", "emit_report", "render_text", "canonical_json", "load_report",
           "read_margins_csv", "read_probes_csv", "probes_csv_path", "MARGIN_COLUMNS",
           "PROBE_COLUMNS"]

MARGIN_COLUMNS = ("stage", "chart", "sample_point", "margin")
PROBE_COLUMNS = ("probe", "cutoff", "truncated_length")
VOLATILE = ("timing", "timestamp")


def report_dict(report) -> dict:
    return report if isinstance(report, dict) else report.to_dict()


def canonical_json(report) -> str:
    """JSON text with the wall-clock fields removed; equal for repeated seeded runs."""
    d = {k: v for k, v in report_dict(report).items() if k not in VOLATILE}
    return json.dumps(d, indent=2, allow_nan=False) + "\n"


def probes_csv_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_probes" + (p.suffix or ".csv"))


def _point_str(pt):
    return ";".join(repr(complex(re, im)) for re, im in pt)


def _point_parse(text):
    return [[c.real, c.imag] for c in (complex(t) for t in text.split(";"))]


def margin_rows(d):
    for st in d["stages"]:
        yield from st["margins"]


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def emit_report(report, path, fmt: str = "json") -> list[Path]:
    """Write ``report`` to ``path`` in ``fmt``; returns the files written.

    ``csv`` writes the margin table to ``path`` and the probe table next to it
    (``<stem>_probes.csv``).
    """
    d = report_dict(report)
    path = Path(path)
    try:
        if fmt == "json":
            path.write_text(json.dumps(d, indent=2, allow_nan=False) + "\n")
            return [path]
        if fmt == "text":
            path.write_text(render_text(d))
            return [path]
        if fmt == "csv":
            _write_csv(path, MARGIN_COLUMNS,
                       ([r["stage"], r["chart"], _point_str(r["sample_point"]), repr(r["margin"])]
                        for r in margin_rows(d)))
            ppath = probes_csv_path(path)
            _write_csv(ppath, PROBE_COLUMNS,
                       ([p["probe"], repr(tau), repr(length)]
                        for p in d["probes"] for tau, length in p.get("truncated_lengths", [])))
            return [path, ppath]
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc.strerror}") from None
    raise ValueError(f"unknown report format {fmt!r}")


def read_margins_csv(path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return [{"stage": r["stage"], "chart": r["chart"],
                     "sample_point": _point_parse(r["sample_point"]),
                     "margin": float(r["margin"])} for r in csv.DictReader(fh)]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None


def read_probes_csv(path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return [{"probe": r["probe"], "cutoff": float(r["cutoff"]),
                     "truncated_length": float(r["truncated_length"])}
                    for r in csv.DictReader(fh)]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None


def load_report(path) -> dict:
    try:
        d = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise IoError(f"{path} is not a JSON report: {exc}") from None
    if not isinstance(d, dict) or d.get("kind") != "run_report":
        raise IoError(f"{path} is not a run report")
    return d


def _fmt(x):
    return "-" if x is None else f"{x:.6g}"


def render_text(report) -> str:
    d = report_dict(report)
    out = [f"scenario {d['scenario']}  seed {d['seed']}  "
           f"{'PASS' if d['pass'] else 'FAIL'} (exit {d['exit_code']})"]
    if d.get("failing_stage"):
        out.append(f"failing stage: {d['failing_stage']}")
    out.append("")
    out.append("stages:")
    for st in d["stages"]:
        line = f"  {st['name']:<17} {st['status']}"
        summ = st["summary"]
        mins = [v["min_margin"] for v in summ.values() if isinstance(v, dict) and "min_margin" in v]
        if "min_margin" in summ:
            mins.append(summ["min_margin"])
        if mins:
            line += f"  min margin {min(mins):.6g}"
        if st["message"] and st["status"] != "skipped":
            line += f"  ({st['message']})"
        out.append(line)
    if d["K"]:
        out.append("")
        out.append("K: " + ", ".join(f"{k} = {_fmt(v)}" for k, v in d["K"].items()))
    if d["shells"]:
        out.append("")
        out.append("shell slopes C_c:")
        for sh in d["shells"]:
            out.append(f"  c = {sh['c']:>3}  C_c = {_fmt(sh['C'])}  ({sh['sample_count']} samples)")
    if d["reparam"]:
        r = d["reparam"]
        out.append("")
        out.append("r knots:  " + " ".join(_fmt(k) for k in r["knots"]))
        out.append("r slopes: " + " ".join(_fmt(s) for s in r["slopes"]))
    out.append("")
    out.append(f"probes ({len(d['probes'])}):")
    for p in d["probes"]:
        extra = ""
        if p.get("kind") == "finite":
            extra = f"  length {_fmt(p.get('length'))}"
        elif p.get("tail_exponent") is not None:
            extra = f"  tail exponent {p['tail_exponent']:.3f}"
        t0 = p.get("t0_cutoff")
        if t0:
            extra += f"  t0 cutoff tau = {t0['tau']:g} ({t0['chart']})"
        out.append(f"  {p['probe']:<12} -> {p['target']:<8} {p['verdict']}{extra}")
    out.append("")
    out.append("caveats:")
    out += [f"  - {c}" for c in d["caveats"]]
    return "\n".join(out) + "\n"
