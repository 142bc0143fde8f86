from __future__ import annotations

import json

import pytest

from secpareto import bind_risks, compute_risk, parse_bundle
from secpareto.ingest import BindingError, BundleParseError, RiskTable, TechniqueRecord

FILTER = {"initial-access", "lateral-movement"}

# the 13 rows of the source technique table: (technique, tactic) -> count
EXPECTED_ROWS = [
    ("T865", "initial-access", 9),
    ("T822", "initial-access", 8),
    ("T817", "initial-access", 6),
    ("T862", "initial-access", 3),
    ("T818", "initial-access", 2),
    ("T847", "initial-access", 2),
    ("T810", "initial-access", 1),
    ("T883", "initial-access", 1),
    ("T822", "lateral-movement", 8),
    ("T859", "lateral-movement", 8),
    ("T866", "lateral-movement", 3),
    ("T867", "lateral-movement", 3),
    ("T844", "lateral-movement", 2),
]


def test_parse_bundle_counts(bundle_bytes):
    records = {r.technique_id: r for r in parse_bundle(bundle_bytes)}
    assert records["T865"].name == "Spearphishing Attachment"
    assert records["T865"].procedure_count == 9
    assert records["T810"].procedure_count == 1
    # one technique listed under two tactics yields a single record
    assert records["T822"].tactics == {"initial-access", "lateral-movement"}
    assert records["T822"].procedure_count == 8
    # the revoked entry is skipped silently
    assert "T999" not in records


def test_parse_bundle_empty():
    assert parse_bundle(b'{"objects": []}') == []


def test_parse_bundle_malformed_names_object_index():
    bundle = {"objects": [{"type": "attack-pattern", "id": "attack-pattern--x", "name": "n"}]}
    with pytest.raises(BundleParseError, match=r"objects\[0\]"):
        parse_bundle(json.dumps(bundle))
    with pytest.raises(BundleParseError, match="not valid JSON"):
        parse_bundle(b"[1,")


def test_parse_bundle_skips_unknown_types(bundle_bytes):
    doc = json.loads(bundle_bytes)
    doc["objects"].append({"type": "observed-data", "id": "observed-data--1"})
    before = parse_bundle(bundle_bytes)
    after = parse_bundle(json.dumps(doc))
    assert before == after


def test_compute_risk_reproduces_table(bundle_bytes):
    table = compute_risk(parse_bundle(bundle_bytes), FILTER)
    assert len(table.entries) == 13
    got = [(tid, tactic, risk) for (tid, tactic), risk in table.entries.items()]
    expected = [(tid, tactic, count / 10) for tid, tactic, count in EXPECTED_ROWS]
    assert got == expected


def test_compute_risk_clamps():
    records = [
        TechniqueRecord("T1", "zero", frozenset({"initial-access"}), 0),
        TechniqueRecord("T2", "many", frozenset({"initial-access"}), 12),
        TechniqueRecord("T3", "nine", frozenset({"initial-access"}), 9),
        TechniqueRecord("T4", "one", frozenset({"initial-access"}), 1),
    ]
    table = compute_risk(records, {"initial-access"})
    assert table.entries[("T1", "initial-access")] == 0.05
    assert table.entries[("T2", "initial-access")] == 0.9
    assert table.entries[("T3", "initial-access")] == 0.9
    assert table.entries[("T4", "initial-access")] == 0.1
    assert all(0.05 <= r <= 0.9 for r in table.entries.values())


def test_compute_risk_filter_soundness(bundle_bytes):
    records = parse_bundle(bundle_bytes)
    table = compute_risk(records, {"initial-access"})
    assert {t for _, t in table.entries} == {"initial-access"}
    # the evasion-only technique never slips in
    full = compute_risk(records, FILTER)
    assert all(tid != "T856" for tid, _ in full.entries)


def test_compute_risk_rejects_empty_filter(bundle_bytes):
    with pytest.raises(ValueError):
        compute_risk(parse_bundle(bundle_bytes), set())


def test_bind_risks_full_binding(ics_graph, bundle_bytes, ics_binding):
    table = compute_risk(parse_bundle(bundle_bytes), FILTER)
    bound = bind_risks(ics_graph, table, ics_binding)
    edge_map = bound.edge_map()
    for edge_id in ics_binding:
        assert 0.1 <= edge_map[edge_id].default_flow <= 0.9
        assert edge_map[edge_id].info_url and "Technique" in edge_map[edge_id].info_url
    # the shipped model was authored from exactly these risks
    assert bound == ics_graph


def test_bind_risks_empty_binding_is_identity(ics_graph, bundle_bytes):
    table = compute_risk(parse_bundle(bundle_bytes), FILTER)
    assert bind_risks(ics_graph, table, {}) == ics_graph


def test_bind_risks_idempotent(ics_graph, bundle_bytes, ics_binding):
    table = compute_risk(parse_bundle(bundle_bytes), FILTER)
    once = bind_risks(ics_graph, table, ics_binding)
    twice = bind_risks(once, table, ics_binding)
    assert once == twice


def test_bind_risks_collects_all_failures(ics_graph, bundle_bytes):
    table = compute_risk(parse_bundle(bundle_bytes), FILTER)
    with pytest.raises(BindingError) as err:
        bind_risks(ics_graph, table, {"no-such-edge": "T865", "e01": "T000"})
    text = str(err.value)
    assert "no-such-edge" in text
    assert "T000" in text
    assert len(err.value.failures) == 2


def test_risk_table_serialization(bundle_bytes):
    table = compute_risk(parse_bundle(bundle_bytes), FILTER)
    as_json = table.to_json_dict()
    assert as_json["T865:initial-access"] == 0.9
    assert len(as_json) == 13
    csv_text = table.to_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "technique_id:tactic,risk"
    assert len(lines) == 14
    assert lines[1] == "T865:initial-access,0.9"


def test_procedure_counting_against_hand_count(bundle_bytes):
    doc = json.loads(bundle_bytes)
    by_stix_id = {}
    for obj in doc["objects"]:
        if obj["type"] == "attack-pattern" and not obj.get("revoked"):
            by_stix_id[obj["id"]] = obj["external_references"][0]["external_id"]
    hand_counted: dict[str, int] = {}
    for obj in doc["objects"]:
        if obj["type"] == "relationship" and obj.get("relationship_type") == "uses":
            tid = by_stix_id.get(obj["target_ref"])
            if tid:
                hand_counted[tid] = hand_counted.get(tid, 0) + 1
    for record in parse_bundle(bundle_bytes):
        assert record.procedure_count == hand_counted.get(record.technique_id, 0)
