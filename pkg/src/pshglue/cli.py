"""Command line entry point: ``pshglue <command> ...``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for
configuration problems (unreadable or invalid scenario, bad arguments).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, IoError, PshGlueError
from .report import emit_report, load_report, render_text
from .runner import reduce_chart, run_scenario
from .scenario import BUNDLED, bundled_scenario, load_scenario

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _scenario(arg, opts):
    path = Path(arg)
    if not path.exists() and arg.upper().replace("_", "-") in BUNDLED:
        path = bundled_scenario(arg)
    s = load_scenario(path)
    return s.with_overrides(seed=opts.seed, samples=opts.samples, tol=opts.tol)


def _pick(items, key, what):
    """Index of ``key`` in ``items`` by 0-based position or by label."""
    labels = [it.label for it in items]
    if key in labels:
        return labels.index(key)
    try:
        i = int(key)
    except ValueError:
        raise ConfigError(f"no {what} {key!r}; known: {labels}") from None
    if not 0 <= i < len(items):
        raise ConfigError(f"{what} index {i} out of range (0..{len(items) - 1})")
    return i


def _write(opts, report, default_fmt="json"):
    if opts.out:
        fmt = getattr(opts, "format", None) or default_fmt
        for p in emit_report(report, opts.out, fmt):
            print(f"wrote {p}", file=sys.stderr)


def cmd_verify_psh(opts):
    s = _scenario(opts.scenario, opts)
    rep = run_scenario(s, only="check_psh")
    st = rep.stage("check_psh")
    for label, summ in st.summary.items():
        flag = "pass" if summ["pass"] else "FAIL"
        print(f"{label}: {flag}  min margin {summ['min_margin']:.6g}  "
              f"(tol {summ['tol']:.3g}, {summ['sample_count']} samples"
              f"{', strict' if summ.get('strict') else ''})")
    if st.message:
        print(st.message)
    _write(opts, rep)
    return rep.exit_code


def cmd_glue(opts):
    s = _scenario(opts.scenario, opts)
    rep = run_scenario(s)
    print(render_text(rep), end="")
    _write(opts, rep)
    return rep.exit_code


def cmd_reduce(opts):
    s = _scenario(opts.scenario, opts)
    i = _pick(s.charts, opts.chart, "chart")
    info = reduce_chart(s, i)
    print(f"chart {info['chart']}: K = {info['K']:g}, min value {info['min_value']:.6g}, "
          f"unbounded below after reduction: {info['rescan']['unbounded_below']}")
    print(f"h' >= {info['h_min_d1']:.3g}, h'' >= {info['h_min_d2']:.3g} on [-{info['T']:g}, 10]")
    for p in info["probes"]:
        print(f"  {p['probe']}: {p['input_verdict']} -> {p['reduced_verdict']}, "
              f"scaling margin {p['scaling']['margin']:.3g}")
    if opts.out:
        try:
            Path(opts.out).write_text(json.dumps(info, indent=2, allow_nan=False) + "\n")
        except OSError as exc:
            raise IoError(f"cannot write {opts.out}: {exc.strerror}") from None
    return EXIT_PASS if info["pass"] else EXIT_FAIL


def cmd_probe(opts):
    s = _scenario(opts.scenario, opts)
    j = _pick(s.probes, opts.curve, "curve")
    rep = run_scenario(s, probe_indices=[j])
    if not rep.probes:
        print(f"pipeline stopped at {rep.failing_stage}; no probe run")
        return EXIT_FAIL
    p = rep.probes[0]
    print(f"{p['probe']} -> {p['target']}: {p['verdict']}")
    for tau, length in p.get("truncated_lengths", []):
        print(f"  tau {tau:.0e}  length {length:.10g}")
    _write(opts, rep)
    return rep.exit_code


def cmd_report(opts):
    try:
        d = load_report(opts.run)
    except IoError as exc:
        raise ConfigError(str(exc)) from None
    if opts.out:
        for p in emit_report(d, opts.out, opts.format):
            print(f"wrote {p}", file=sys.stderr)
    elif opts.format == "text":
        print(render_text(d), end="")
    elif opts.format == "json":
        print(json.dumps(d, indent=2))
    else:
        raise ConfigError("csv output needs --out")
    return d.get("exit_code", EXIT_FAIL)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the scenario's sampling seed")
    common.add_argument("--samples", type=int, help="samples per chart for the sampled checks")
    common.add_argument("--tol", type=float,
                        help="relative tolerance for psh, estimate and domination checks")
    common.add_argument("--out", help="output file")

    ap = argparse.ArgumentParser(prog="pshglue",
                                 description="Glue local psh potentials into a global one "
                                             "and check every step numerically.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-psh", parents=[common], help="check each chart potential is psh")
    p.add_argument("scenario", help="scenario file or bundled name (GLUE-1D, GLUE-2D)")
    p.set_defaults(func=cmd_verify_psh)

    p = sub.add_parser("glue", parents=[common], help="run the whole pipeline")
    p.add_argument("scenario")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json",
                   help="format of the --out file")
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("reduce-unbounded", parents=[common],
                       help="make one chart potential bounded below")
    p.add_argument("scenario")
    p.add_argument("--chart", required=True, help="chart index (0-based) or label")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("probe", parents=[common], help="classify one probe curve")
    p.add_argument("scenario")
    p.add_argument("--curve", required=True, help="curve index (0-based) or label")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("report", parents=[common], help="convert a saved JSON report")
    p.add_argument("run", help="JSON report written by glue --out")
    p.add_argument("--format", choices=("json", "csv", "text"), default="text")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        opts = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        return opts.func(opts)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PshGlueError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
