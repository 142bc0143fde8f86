"""Threat-intelligence ingestion: STIX-subset bundles to edge risk values.

Only three things in a bundle matter here: technique objects
(``attack-pattern``), the tactic phase names attached to them, and ``uses``
relationships pointing at them (the procedure examples, i.e. real-world
sightings of the technique).  Everything else is skipped without comment.

The initial risk of a technique is its procedure count divided by ten,
clamped to [0.05, 0.9]: a catalogued technique is never impossible, and
nine-plus sightings saturate at ninety percent.  Risks become default edge
flows through an analyst-authored binding map from edge ids to technique
ids; no automatic matching is attempted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Mapping

from .model import AttackGraph, EdgeDef

RISK_FLOOR = 0.05
RISK_CEILING = 0.9


class BundleParseError(Exception):
    """The bundle is not parseable as the supported STIX subset."""


class BindingError(Exception):
    """An edge-to-technique binding refers to unknown ids."""

    def __init__(self, failures: list[str]):
        self.failures = failures
        super().__init__("; ".join(failures))


@dataclass(frozen=True)
class TechniqueRecord:
    technique_id: str
    name: str
    tactics: frozenset[str]
    procedure_count: int
    url: str | None = None


@dataclass(frozen=True)
class RiskTable:
    """Per-(technique, tactic) initial risk, with technique info URLs."""

    entries: Mapping[tuple[str, str], float]
    urls: Mapping[str, str] = field(default_factory=dict)

    def risk_for(self, technique_id: str) -> float | None:
        risks = [r for (tid, _), r in self.entries.items() if tid == technique_id]
        return max(risks) if risks else None

    def to_json_dict(self) -> dict[str, float]:
        return {f"{tid}:{tactic}": risk for (tid, tactic), risk in self.entries.items()}

    def to_csv(self) -> str:
        lines = ["technique_id:tactic,risk"]
        for (tid, tactic), risk in self.entries.items():
            lines.append(f"{tid}:{tactic},{risk!r}")
        return "\n".join(lines) + "\n"


def parse_bundle(source: bytes | str | IO[bytes] | IO[str] | Mapping[str, Any]) -> list[TechniqueRecord]:
    """Extract technique records from a STIX-subset bundle.

    One record per technique object, with tactics taken from its kill-chain
    phase names and the procedure count from ``uses`` relationships whose
    target is the technique.  Raises :class:`BundleParseError` (naming the
    offending object index) on malformed objects.
    """
    if isinstance(source, Mapping):
        doc: Any = source
    else:
        raw = source if isinstance(source, (bytes, str)) else source.read()
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BundleParseError(f"bundle is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(doc, Mapping) or not isinstance(doc.get("objects"), list):
        raise BundleParseError('bundle must be an object with an "objects" array')

    techniques: dict[str, dict[str, Any]] = {}
    seen_ids: set[str] = set()
    uses_count: dict[str, int] = {}
    for i, obj in enumerate(doc["objects"]):
        if not isinstance(obj, Mapping) or "type" not in obj:
            raise BundleParseError(f"objects[{i}]: not a typed STIX object")
        if obj.get("revoked") or obj.get("x_mitre_deprecated"):
            continue
        if obj["type"] == "attack-pattern":
            techniques[_required(obj, "id", i)] = _parse_technique(obj, i, seen_ids)
        elif obj["type"] == "relationship" and obj.get("relationship_type") == "uses":
            target = _required(obj, "target_ref", i)
            if target.startswith("attack-pattern--"):
                uses_count[target] = uses_count.get(target, 0) + 1
        # other object types carry nothing we consume

    records = []
    for stix_id, tech in techniques.items():
        records.append(
            TechniqueRecord(
                technique_id=tech["technique_id"],
                name=tech["name"],
                tactics=frozenset(tech["tactics"]),
                procedure_count=uses_count.get(stix_id, 0),
                url=tech["url"],
            )
        )
    return records


def _required(obj: Mapping[str, Any], key: str, index: int) -> Any:
    if key not in obj:
        raise BundleParseError(f'objects[{index}]: missing "{key}"')
    return obj[key]


def _parse_technique(obj: Mapping[str, Any], index: int, seen: set[str]) -> dict[str, Any]:
    refs = obj.get("external_references", [])
    ext = next((r for r in refs if isinstance(r, Mapping) and "external_id" in r), None)
    if ext is None:
        raise BundleParseError(f"objects[{index}]: attack-pattern without an external_id reference")
    technique_id = ext["external_id"]
    if technique_id in seen:
        raise BundleParseError(f'objects[{index}]: duplicate technique id "{technique_id}"')
    seen.add(technique_id)
    tactics = [
        phase.get("phase_name", "")
        for phase in obj.get("kill_chain_phases", [])
        if isinstance(phase, Mapping) and phase.get("phase_name")
    ]
    return {
        "technique_id": technique_id,
        "name": _required(obj, "name", index),
        "tactics": tactics,
        "url": ext.get("url"),
    }


def compute_risk(records: Iterable[TechniqueRecord], tactic_filter: set[str] | frozenset[str]) -> RiskTable:
    """Risk per (technique, tactic) for tactics inside the filter.

    Entries are ordered by tactic, then descending procedure count, then
    technique id, which keeps exports stable run to run.
    """
    if not tactic_filter:
        raise ValueError("tactic_filter must not be empty")
    rows = []
    urls = {}
    for record in records:
        for tactic in sorted(record.tactics & tactic_filter):
            risk = min(RISK_CEILING, max(RISK_FLOOR, record.procedure_count / 10))
            rows.append((tactic, -record.procedure_count, record.technique_id, risk))
            if record.url:
                urls[record.technique_id] = record.url
    rows.sort()
    entries = {(tid, tactic): risk for tactic, _, tid, risk in rows}
    return RiskTable(entries=entries, urls=urls)


def bind_risks(g: AttackGraph, table: RiskTable, binding: Mapping[str, str]) -> AttackGraph:
    """Rewrite bound edges with the table's risk as their default flow.

    Bound edges also get the technique's info URL; unbound edges are left
    alone.  All unknown edge or technique ids are collected into one
    :class:`BindingError` rather than failing on the first.
    """
    edge_ids = {e.id for e in g.edges}
    failures = []
    for edge_id, technique_id in binding.items():
        if edge_id not in edge_ids:
            failures.append(f'unknown edge "{edge_id}"')
        if table.risk_for(technique_id) is None:
            failures.append(f'no risk entry for technique "{technique_id}"')
    if failures:
        raise BindingError(failures)

    new_edges = []
    for edge in g.edges:
        technique_id = binding.get(edge.id)
        if technique_id is None:
            new_edges.append(edge)
            continue
        new_edges.append(
            EdgeDef(
                id=edge.id,
                from_node=edge.from_node,
                to_node=edge.to_node,
                vulnerability=edge.vulnerability,
                default_flow=table.risk_for(technique_id),
                info_url=table.urls.get(technique_id, edge.info_url),
            )
        )
    return AttackGraph(
        version=g.version,
        name=g.name,
        nodes=g.nodes,
        edges=tuple(new_edges),
        controls=g.controls,
    )
