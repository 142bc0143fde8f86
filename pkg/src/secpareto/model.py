"""Attack-graph domain model: nodes, edges, control groups, portfolios.

An attack graph describes attacker privilege states (nodes) connected by
exploitable vulnerabilities (edges).  Each edge carries a default flow: the
probability that the unmitigated vulnerability is exploited.  Control groups
are counter-measures; each group offers mutually exclusive levels that
multiply the flow of the edges they protect by a reduction factor in [0, 1].
Level 0 of every group is the implicit "off" level: zero cost, no reductions,
never stored in the document.

Documents are JSON (see ``schema.json``); :func:`validate_graph` checks both
the structural layer (via the JSON schema) and the semantic invariants
(referential integrity, ranges, uniqueness).  All types are immutable value
objects: editing means building a new document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Any, Iterable, Mapping

import jsonschema

SCHEMA_PATH = Path(__file__).parent / "schema.json"
FORMAT_VERSION = 1

_schema_validator: jsonschema.Draft202012Validator | None = None


class NodeKind(str, Enum):
    SOURCE = "source"
    TARGET = "target"
    NORMAL = "normal"


@dataclass(frozen=True)
class NodeRef:
    """A privilege state of the attacker."""

    id: str
    label: str
    kind: NodeKind = NodeKind.NORMAL
    description: str | None = None
    # Optional pinned display coordinates for the UI; no other layout state
    # is persisted.
    x: float | None = None
    y: float | None = None


@dataclass(frozen=True)
class EdgeDef:
    """A vulnerability whose exploitation escalates privileges."""

    id: str
    from_node: str
    to_node: str
    vulnerability: str
    default_flow: float
    info_url: str | None = None


@dataclass(frozen=True)
class ControlLevel:
    """One deployable strength of a control group.

    ``flow_reduction`` maps edge ids to the factor the edge flow is
    multiplied by while this level is active.  Edges not listed are
    unaffected (factor 1).
    """

    name: str
    direct_cost: float
    indirect_cost: float
    flow_reduction: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ControlGroup:
    """A counter-measure with mutually exclusive levels.

    Stored levels occupy indices 1..len(levels); index 0 is the implicit
    free "off" level.  ``baseline_level`` marks the level already present
    in the analysed system (0 when nothing is deployed).
    """

    id: str
    name: str
    levels: tuple[ControlLevel, ...]
    baseline_level: int = 0

    @property
    def level_count(self) -> int:
        """Number of selectable indices, the implicit off level included."""
        return len(self.levels) + 1


@dataclass(frozen=True)
class AttackGraph:
    version: int
    name: str
    nodes: tuple[NodeRef, ...]
    edges: tuple[EdgeDef, ...]
    controls: tuple[ControlGroup, ...]

    def node_map(self) -> dict[str, NodeRef]:
        return {n.id: n for n in self.nodes}

    def edge_map(self) -> dict[str, EdgeDef]:
        return {e.id: e for e in self.edges}

    def control_map(self) -> dict[str, ControlGroup]:
        return {c.id: c for c in self.controls}

    def source(self) -> NodeRef:
        return next(n for n in self.nodes if n.kind is NodeKind.SOURCE)

    def targets(self) -> tuple[NodeRef, ...]:
        return tuple(n for n in self.nodes if n.kind is NodeKind.TARGET)


@dataclass(frozen=True)
class Portfolio:
    """One level choice (possibly 0 = off) for every control group."""

    selections: Mapping[str, int]

    def level_for(self, group_id: str) -> int:
        return self.selections[group_id]


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    location: str = ""

    def to_json_dict(self) -> dict[str, str]:
        return {"code": self.code, "message": self.message, "location": self.location}


@dataclass
class ValidationReport:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_json_dict(self) -> dict[str, list[dict[str, str]]]:
        return {
            "errors": [i.to_json_dict() for i in self.errors],
            "warnings": [i.to_json_dict() for i in self.warnings],
        }


class ModelError(Exception):
    """Base class for model-layer failures."""


class GraphValidationError(ModelError):
    """A document failed validation; carries the full report."""

    def __init__(self, report: ValidationReport):
        self.report = report
        first = report.errors[0].message if report.errors else "invalid document"
        extra = len(report.errors) - 1
        super().__init__(first if extra <= 0 else f"{first} (+{extra} more)")


class PortfolioError(ModelError):
    """A portfolio does not fit the graph it was applied to."""


def _schema() -> jsonschema.Draft202012Validator:
    global _schema_validator
    if _schema_validator is None:
        with open(SCHEMA_PATH, encoding="utf-8") as fh:
            _schema_validator = jsonschema.Draft202012Validator(json.load(fh))
    return _schema_validator


def _json_pointer(path: Iterable[Any]) -> str:
    return "/" + "/".join(str(p) for p in path)


def validate_graph(doc: Any) -> ValidationReport:
    """Validate a raw model document (parsed JSON, text, or bytes).

    Returns a report whose error list is empty exactly when every model
    invariant holds.  Warnings are non-fatal lints: a higher control level
    that is cheaper, or less effective on some edge, than a lower one.
    """
    report = ValidationReport()

    if isinstance(doc, (bytes, bytearray)):
        doc = doc.decode("utf-8", errors="replace")
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            report.errors.append(
                Issue("format", f"not valid JSON: {exc.msg}", f"line {exc.lineno} column {exc.colno}")
            )
            return report

    schema_errors = sorted(_schema().iter_errors(doc), key=lambda e: list(e.absolute_path))
    for err in schema_errors:
        report.errors.append(Issue("format", err.message, _json_pointer(err.absolute_path)))
    if schema_errors:
        return report

    node_ids: set[str] = set()
    source_count = 0
    target_count = 0
    for i, node in enumerate(doc["nodes"]):
        loc = f"/nodes/{i}"
        if node["id"] in node_ids:
            report.errors.append(Issue("duplicate-id", f'duplicate node id "{node["id"]}"', loc))
        node_ids.add(node["id"])
        if node["kind"] == "source":
            source_count += 1
        elif node["kind"] == "target":
            target_count += 1
    if source_count != 1:
        report.errors.append(
            Issue("source-count", f"exactly one source node required, found {source_count}", "/nodes")
        )
    if target_count < 1:
        report.errors.append(Issue("target-count", "at least one target node required", "/nodes"))

    edge_ids: set[str] = set()
    edge_triples: set[tuple[str, str, str]] = set()
    for i, edge in enumerate(doc["edges"]):
        loc = f"/edges/{i}"
        if edge["id"] in edge_ids:
            report.errors.append(Issue("duplicate-id", f'duplicate edge id "{edge["id"]}"', loc))
        edge_ids.add(edge["id"])
        if edge["from"] == edge["to"]:
            report.errors.append(Issue("self-loop", f'edge "{edge["id"]}": self-loop ({edge["from"]} -> {edge["to"]})', loc))
        for end in ("from", "to"):
            if edge[end] not in node_ids:
                report.errors.append(
                    Issue("dangling-node", f'edge "{edge["id"]}": unknown node "{edge[end]}"', loc)
                )
        if not 0.0 < edge["default_flow"] <= 1.0:
            report.errors.append(
                Issue("flow-range", f'edge "{edge["id"]}": default_flow out of (0,1] ({edge["default_flow"]})', loc)
            )
        triple = (edge["from"], edge["to"], edge["vulnerability"])
        if triple in edge_triples:
            report.errors.append(
                Issue("duplicate-edge", f'duplicate (from, to, vulnerability) triple {triple}', loc)
            )
        edge_triples.add(triple)

    control_ids: set[str] = set()
    for i, control in enumerate(doc["controls"]):
        loc = f"/controls/{i}"
        if control["id"] in control_ids:
            report.errors.append(Issue("duplicate-id", f'duplicate control id "{control["id"]}"', loc))
        control_ids.add(control["id"])
        levels = control["levels"]
        baseline = control.get("baseline_level", 0)
        if not 0 <= baseline <= len(levels):
            report.errors.append(
                Issue("baseline-range", f'control "{control["id"]}": baseline_level {baseline} out of 0..{len(levels)}', loc)
            )
        for j, level in enumerate(levels):
            lloc = f"{loc}/levels/{j}"
            for edge_id, factor in level["flow_reduction"].items():
                if edge_id not in edge_ids:
                    report.errors.append(
                        Issue("dangling-edge", f'control "{control["id"]}" level {j + 1}: unknown edge "{edge_id}"', lloc)
                    )
                if not 0.0 <= factor <= 1.0:
                    report.errors.append(
                        Issue(
                            "flow-reduction-range",
                            f'control "{control["id"]}" level {j + 1}: flow_reduction out of [0,1] for edge "{edge_id}" ({factor})',
                            lloc,
                        )
                    )
        # Lints: level lists are expected to grow stronger and dearer.
        for j in range(1, len(levels)):
            prev, cur = levels[j - 1], levels[j]
            if cur["direct_cost"] < prev["direct_cost"]:
                report.warnings.append(
                    Issue(
                        "cost-monotonicity",
                        f'control "{control["id"]}": level {j + 1} has lower direct_cost than level {j}',
                        f"{loc}/levels/{j}",
                    )
                )
            prev_red, cur_red = prev["flow_reduction"], cur["flow_reduction"]
            for edge_id in set(prev_red) | set(cur_red):
                if cur_red.get(edge_id, 1.0) > prev_red.get(edge_id, 1.0):
                    report.warnings.append(
                        Issue(
                            "reduction-monotonicity",
                            f'control "{control["id"]}": level {j + 1} is weaker than level {j} on edge "{edge_id}"',
                            f"{loc}/levels/{j}",
                        )
                    )
                    break
    return report


def graph_from_document(doc: Mapping[str, Any]) -> AttackGraph:
    """Build an :class:`AttackGraph` from an already-validated document."""
    nodes = tuple(
        NodeRef(
            id=n["id"],
            label=n["label"],
            kind=NodeKind(n["kind"]),
            description=n.get("description"),
            x=n.get("x"),
            y=n.get("y"),
        )
        for n in doc["nodes"]
    )
    edges = tuple(
        EdgeDef(
            id=e["id"],
            from_node=e["from"],
            to_node=e["to"],
            vulnerability=e["vulnerability"],
            default_flow=float(e["default_flow"]),
            info_url=e.get("info_url"),
        )
        for e in doc["edges"]
    )
    controls = tuple(
        ControlGroup(
            id=c["id"],
            name=c["name"],
            levels=tuple(
                ControlLevel(
                    name=lv["name"],
                    direct_cost=float(lv["direct_cost"]),
                    indirect_cost=float(lv["indirect_cost"]),
                    flow_reduction={k: float(v) for k, v in lv["flow_reduction"].items()},
                )
                for lv in c["levels"]
            ),
            baseline_level=int(c.get("baseline_level", 0)),
        )
        for c in doc["controls"]
    )
    return AttackGraph(
        version=int(doc["version"]),
        name=doc["name"],
        nodes=nodes,
        edges=edges,
        controls=controls,
    )


def graph_to_document(g: AttackGraph) -> dict[str, Any]:
    nodes = []
    for n in g.nodes:
        node: dict[str, Any] = {"id": n.id, "label": n.label, "kind": n.kind.value}
        if n.description is not None:
            node["description"] = n.description
        if n.x is not None:
            node["x"] = n.x
        if n.y is not None:
            node["y"] = n.y
        nodes.append(node)
    edges = []
    for e in g.edges:
        edge: dict[str, Any] = {
            "id": e.id,
            "from": e.from_node,
            "to": e.to_node,
            "vulnerability": e.vulnerability,
            "default_flow": e.default_flow,
        }
        if e.info_url is not None:
            edge["info_url"] = e.info_url
        edges.append(edge)
    controls = []
    for c in g.controls:
        control: dict[str, Any] = {"id": c.id, "name": c.name}
        if c.baseline_level:
            control["baseline_level"] = c.baseline_level
        control["levels"] = [
            {
                "name": lv.name,
                "direct_cost": lv.direct_cost,
                "indirect_cost": lv.indirect_cost,
                "flow_reduction": dict(lv.flow_reduction),
            }
            for lv in c.levels
        ]
        controls.append(control)
    return {"version": g.version, "name": g.name, "nodes": nodes, "edges": edges, "controls": controls}


def load_graph(source: str | Path | bytes | IO[bytes] | IO[str]) -> AttackGraph:
    """Load and validate a model document from a path, bytes, or stream.

    Raises :class:`GraphValidationError` (with the full report) when the
    document is not a valid model, and propagates I/O errors unchanged.
    """
    if isinstance(source, (str, Path)):
        raw: Any = Path(source).read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    else:
        raw = source.read()
    report = validate_graph(raw)
    if not report.ok:
        raise GraphValidationError(report)
    doc = json.loads(raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw)
    return graph_from_document(doc)


def save_graph(g: AttackGraph, destination: str | Path | IO[str]) -> None:
    """Write ``g`` as a UTF-8 JSON document; load_graph round-trips it."""
    text = json.dumps(graph_to_document(g), indent=2, ensure_ascii=False) + "\n"
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)


def baseline_portfolio(g: AttackGraph) -> Portfolio:
    """The portfolio matching the controls already present in the system."""
    return Portfolio({c.id: c.baseline_level for c in g.controls})


def naked_portfolio(g: AttackGraph) -> Portfolio:
    """All controls off: the model stripped of every protection."""
    return Portfolio({c.id: 0 for c in g.controls})


def check_portfolio(g: AttackGraph, p: Portfolio) -> None:
    """Raise :class:`PortfolioError` unless ``p`` fits ``g`` exactly."""
    groups = g.control_map()
    for group_id in p.selections:
        if group_id not in groups:
            raise PortfolioError(f'unknown control group "{group_id}"')
    for group in g.controls:
        if group.id not in p.selections:
            raise PortfolioError(f'missing selection for control group "{group.id}"')
        level = p.selections[group.id]
        if not isinstance(level, int) or isinstance(level, bool) or not 0 <= level <= len(group.levels):
            raise PortfolioError(
                f'control group "{group.id}": level {level!r} out of 0..{len(group.levels)}'
            )


def portfolio_cost(g: AttackGraph, p: Portfolio) -> tuple[float, float]:
    """(direct, indirect) cost of ``p``; the off level contributes nothing."""
    direct = 0.0
    indirect = 0.0
    for group in g.controls:
        level = p.selections[group.id]
        if level > 0:
            direct += group.levels[level - 1].direct_cost
            indirect += group.levels[level - 1].indirect_cost
    return direct, indirect


def portfolio_to_document(p: Portfolio) -> dict[str, Any]:
    return {"selections": dict(p.selections)}


def portfolio_from_document(doc: Mapping[str, Any]) -> Portfolio:
    if not isinstance(doc, Mapping) or "selections" not in doc or not isinstance(doc["selections"], Mapping):
        raise PortfolioError('portfolio document must be {"selections": {...}}')
    return Portfolio(dict(doc["selections"]))
