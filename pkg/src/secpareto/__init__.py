"""secpareto: cost-optimal security-control portfolios on attack graphs."""

from .flow import FlowReport, apply_portfolio, critical_path, flow_report
from .ingest import (
    BindingError,
    BundleParseError,
    RiskTable,
    TechniqueRecord,
    bind_risks,
    compute_risk,
    parse_bundle,
)
from .model import (
    AttackGraph,
    ControlGroup,
    ControlLevel,
    EdgeDef,
    GraphValidationError,
    NodeKind,
    NodeRef,
    Portfolio,
    PortfolioError,
    ValidationReport,
    baseline_portfolio,
    load_graph,
    naked_portfolio,
    portfolio_cost,
    save_graph,
    validate_graph,
)
from .solver import (
    FrontierResult,
    NeighborhoodPoint,
    OptimizeResult,
    ParetoPoint,
    SearchSpaceError,
    SolveOptions,
    brute_force_frontier,
    evaluate_neighborhood,
    optimize,
    pareto_frontier,
)

__version__ = "0.1.0"

__all__ = [
    "AttackGraph",
    "BindingError",
    "BundleParseError",
    "ControlGroup",
    "ControlLevel",
    "EdgeDef",
    "FlowReport",
    "FrontierResult",
    "GraphValidationError",
    "NeighborhoodPoint",
    "NodeKind",
    "NodeRef",
    "OptimizeResult",
    "ParetoPoint",
    "Portfolio",
    "PortfolioError",
    "RiskTable",
    "SearchSpaceError",
    "SolveOptions",
    "TechniqueRecord",
    "ValidationReport",
    "apply_portfolio",
    "baseline_portfolio",
    "bind_risks",
    "brute_force_frontier",
    "compute_risk",
    "critical_path",
    "evaluate_neighborhood",
    "flow_report",
    "load_graph",
    "naked_portfolio",
    "optimize",
    "pareto_frontier",
    "parse_bundle",
    "portfolio_cost",
    "save_graph",
    "validate_graph",
]
