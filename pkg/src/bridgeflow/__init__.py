"""Static detection of data leaks and injections through Webview JavaScript bridges."""

from .air import Program, Sig, parse_program, serialize
from .alarms import AlarmCategory, AlarmReport, aggregate_corpus, emit_report, load_report
from .instrument import instrument
from .interfaces import interface_methods, map_webviews
from .pipeline import AnalysisOptions, analyze_app, analyze_program
from .taint import TaintOptions, default_config, run_taint

__version__ = "0.1.0"
