"""The end-to-end pipeline: interface discovery, instrumentation, taint, refinement."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .air import AirError, Program, parse_program
from .alarms import AlarmReport, classify
from .babelview import render_airtext
from .callgraph import build_callgraph
from .feasibility import NOTE, scan_http_urls
from .instrument import instrument
from .interfaces import interface_methods, map_webviews
from .refine import (
    START_ACTIVITY,
    flag_suspicious_interface_names,
    match_preference_flows,
    report_preference_keys,
    resolve_intent_action,
)
from .strings import fold_program
from .taint.config import SourceSinkConfig, default_config, parse_config
from .taint.engine import TaintOptions, flows_to_sink, normalize_site, run_taint

log = logging.getLogger(__name__)

EXIT_CLEAN, EXIT_ALARMS, EXIT_ERROR = 0, 1, 2


@dataclass
class AnalysisOptions:
    stubs: tuple[str, ...] = ()  # paths of extra stub documents
    config: Optional[str] = None  # path of a source/sink configuration
    timeout_secs: Optional[float] = 900.0
    max_access_path: int = 3
    call_depth: int = 2
    timings: bool = False


@dataclass
class Analysis:
    """Everything the pipeline computed for one app."""

    program: Program
    config: SourceSinkConfig
    report: AlarmReport
    exit_code: int
    instrumented: Optional[Program] = None
    generated: dict = field(default_factory=dict)
    taint: object = None
    pref_leaks: list = field(default_factory=list)
    intents: list = field(default_factory=list)
    wmap: object = None


def load_config(path: Optional[str]) -> SourceSinkConfig:
    if path is None:
        return default_config()
    return parse_config(Path(path).read_text())


def load_program(path, stubs=()) -> Program:
    text = Path(path).read_text()
    return parse_program(text, extra_stubs=[Path(s).read_text() for s in stubs])


def _flow_record(f) -> dict:
    return {
        "source": f.source,
        "source_site": str(f.source_site),
        "sink": f.sink,
        "sink_site": str(normalize_site(f.sink_site, f.context)),
        "attacker": f.attacker_involved,
        "attribution": f.attribution.name if f.attribution else None,
    }


def analyze_program(program: Program, app: str, opts: Optional[AnalysisOptions] = None,
                    config: Optional[SourceSinkConfig] = None) -> Analysis:
    opts = opts or AnalysisOptions()
    config = config or load_config(opts.config)
    config.validate(program)
    times = {}
    t0 = time.monotonic()
    wmap = map_webviews(program, build_callgraph(program))
    instrumented, generated = instrument(program, wmap)
    times["instrument"] = time.monotonic() - t0
    cfg = config.with_attacker(generated.values())
    t1 = time.monotonic()
    result = run_taint(instrumented, cfg, TaintOptions(
        opts.max_access_path, opts.call_depth, opts.timeout_secs, True))
    times["taint"] = time.monotonic() - t1
    full = result.program  # instrumented program plus the dummy main
    graph = build_callgraph(full)
    consts = fold_program(full)
    prefs = match_preference_flows(result.flows, consts, full, cfg)
    intents = [
        resolve_intent_action(f, full, graph, result.pts, consts)
        for f in flows_to_sink(result.flows, START_ACTIVITY)
        if f.attacker_involved
    ]
    alarms = classify(result.flows, prefs, intents, program.manifest, wmap)
    imethods = {w: sorted(interface_methods(program, wmap, w)) for w in wmap.webviews()}
    every = sorted({m for ms in imethods.values() for m in ms})
    report = AlarmReport(
        app=app,
        alarms=alarms,
        interfaces={
            "webviews": wmap.as_dict(),
            "methods": {w: [str(m) for m in ms] for w, ms in imethods.items()},
            "suspicious_methods": [str(m) for m in flag_suspicious_interface_names(every, cfg)],
            "bindings": sorted({
                r.binding for regs in wmap.provenance.values() for r in regs if r.binding
            }),
            "target_api": program.manifest.target_api,
        },
        preference_keys=report_preference_keys(full, wmap, graph, cfg, consts),
        feasibility={
            "http_urls": [list(u) for u in scan_http_urls(program)],
            "interface_objects": sorted(wmap.interface_classes()),
            "note": NOTE,
        },
        flows=sorted({tuple(sorted(_flow_record(f).items())) for f in result.flows}),
        stats={
            "timed_out": result.timed_out,
            "nodes": result.stats["nodes"],
            "visits": result.stats["visits"],
            "flows": len(result.flows),
        },
        status="timeout" if result.timed_out else "ok",
    )
    report.flows = [dict(r) for r in report.flows]
    times["total"] = time.monotonic() - t0
    if opts.timings:
        report.stats["seconds"] = {k: round(v, 6) for k, v in times.items()}
    if result.timed_out:
        code = EXIT_ERROR
    else:
        code = EXIT_ALARMS if alarms else EXIT_CLEAN
    return Analysis(program, config, report, code, instrumented, generated, result,
                    prefs, intents, wmap)


def analyze_app(path, opts: Optional[AnalysisOptions] = None) -> tuple[AlarmReport, int]:
    """Analyze the AIR file at ``path``; returns the report and the exit code."""
    opts = opts or AnalysisOptions()
    app = Path(path).stem
    try:
        program = load_program(path, opts.stubs)
        return _finish(analyze_program(program, app, opts))
    except (AirError, OSError) as exc:
        log.error("%s: %s", path, exc)
        report = AlarmReport(app=app, status="error", stats={"error": str(exc)})
        return report, EXIT_ERROR


def _finish(a: Analysis):
    return a.report, a.exit_code


def instrumented_text(path, stubs=()) -> str:
    from .air import serialize

    program = load_program(path, stubs)
    wmap = map_webviews(program, build_callgraph(program))
    out, _ = instrument(program, wmap)
    return serialize(out)


def generated_text(program: Program) -> str:
    wmap = map_webviews(program)
    _, generated = instrument(program, wmap)
    return "\n".join(render_airtext(bv) for _, bv in sorted(generated.items()))


def attacker_methods(program: Program) -> list:
    """Every bridge method an attacker could call, over all Webviews."""
    wmap = map_webviews(program)
    out = set()
    for w in wmap.webviews():
        out |= interface_methods(program, wmap, w)
    return sorted(out)
