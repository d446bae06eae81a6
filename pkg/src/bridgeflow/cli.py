"""Command line driver."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .air import AirError
from .alarms import aggregate_corpus, emit_report
from .feasibility import scan_http_urls
from .oracle import explore
from .pipeline import (
    EXIT_ALARMS,
    EXIT_CLEAN,
    EXIT_ERROR,
    AnalysisOptions,
    analyze_app,
    attacker_methods,
    instrumented_text,
    load_program,
)

log = logging.getLogger("bridgeflow")


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _options(ns) -> AnalysisOptions:
    return AnalysisOptions(
        stubs=tuple(ns.stubs or ()),
        config=ns.config,
        timeout_secs=ns.timeout_secs,
        max_access_path=ns.max_access_path,
        call_depth=ns.call_depth,
        timings=ns.timings,
    )


def cmd_analyze(ns) -> int:
    report, code = analyze_app(ns.app, _options(ns))
    _emit(emit_report(report), ns.out)
    return code


def _corpus_one(args):
    path, opts, report_dir = args
    report, code = analyze_app(path, opts)
    if report_dir:
        write_atomic(Path(report_dir) / f"{report.app}.json", emit_report(report))
    return report, code


def cmd_corpus(ns) -> int:
    apps = sorted(Path(ns.dir).glob("*.air"))
    if not apps:
        log.error("no .air files in %s", ns.dir)
        return EXIT_ERROR
    opts = _options(ns)
    jobs = [(str(p), opts, ns.reports) for p in apps]
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            results = list(pool.map(_corpus_one, jobs))
    else:
        results = [_corpus_one(j) for j in jobs]
    ok = [r for r, c in results if c != EXIT_ERROR]
    failed = sorted(r.app for r, c in results if c == EXIT_ERROR)
    summary = aggregate_corpus(ok).as_dict() if ok else {"apps": []}
    summary["failed"] = failed
    _emit(json.dumps(summary, sort_keys=True, indent=2) + "\n", ns.out)
    if failed:
        return EXIT_ERROR
    return EXIT_ALARMS if any(r.alarms for r in ok) else EXIT_CLEAN


def cmd_instrument(ns) -> int:
    _emit(instrumented_text(ns.app, ns.stubs or ()), ns.out)
    return EXIT_CLEAN


def cmd_oracle(ns) -> int:
    program = load_program(ns.app, ns.stubs or ())
    trace = explore(program, attacker_methods(program), ns.max_seq, ns.max_steps)
    d = trace.as_dict()
    d.pop("sequence")
    d["max_seq"] = ns.max_seq
    _emit(json.dumps(d, sort_keys=True, indent=2) + "\n", ns.out)
    return EXIT_CLEAN


def cmd_scan_http(ns) -> int:
    program = load_program(ns.app, ns.stubs or ())
    for cls, method, s in scan_http_urls(program):
        print(f"{cls}\t{method}\t{s}")
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bridgeflow", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, analysis=False):
        sp.add_argument("--stubs", action="append", metavar="F")
        sp.add_argument("--out", metavar="F")
        if analysis:
            sp.add_argument("--config", metavar="F")
            sp.add_argument("--timeout-secs", type=float, default=900.0)
            sp.add_argument("--max-access-path", type=int, default=3)
            sp.add_argument("--call-depth", type=int, default=2)
            sp.add_argument("--timings", action="store_true",
                            help="include wall-clock phase durations (breaks byte determinism)")

    a = sub.add_parser("analyze", help="run the full pipeline on one app")
    a.add_argument("app")
    common(a, analysis=True)
    a.set_defaults(fn=cmd_analyze)

    i = sub.add_parser("instrument", help="emit the instrumented program as AIR text")
    i.add_argument("app")
    common(i)
    i.set_defaults(fn=cmd_instrument)

    c = sub.add_parser("corpus", help="analyze every .air file in a directory")
    c.add_argument("dir")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--reports", metavar="DIR", help="also write one report per app here")
    common(c, analysis=True)
    c.set_defaults(fn=cmd_corpus)

    o = sub.add_parser("oracle", help="run the concrete interpreter over attacker sequences")
    o.add_argument("app")
    o.add_argument("--max-seq", type=int, default=3)
    o.add_argument("--max-steps", type=int, default=100_000)
    common(o)
    o.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("scan-http", help="list hard-coded http:// URLs")
    s.add_argument("app")
    s.add_argument("--stubs", action="append", metavar="F")
    s.set_defaults(fn=cmd_scan_http)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return ns.fn(ns)
    except (AirError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
