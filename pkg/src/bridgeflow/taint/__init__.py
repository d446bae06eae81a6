from .config import (
    ATTACKER_LABEL,
    EXFIL_LABEL,
    SourceSinkConfig,
    default_config,
    parse_config,
)
from .engine import (
    AccessPath,
    AnalysisTimeout,
    Flow,
    SourceTag,
    TaintFact,
    TaintOptions,
    TaintResult,
    flow_keys,
    flows_to_sink,
    run_taint,
)
from .pointsto import AllocSite, PointsTo, points_to
