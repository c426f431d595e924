import random
from dataclasses import replace

import pytest

from beta_table import HARDWARE_TABLE, estimate_beta
from ccf_engine import (
    ResolvedCccg, apply_modified_bfm, ccf_event_id, check_conservation, expand_all, expand_ccf,
    ind_event_id, modified_bfm, resolve_cccg_beta,
)
from ft_engine import solve_fault_tree
from model import (
    BasicEvent, Cccg, CcfError, ComponentGroup, EventKind, FailureDomain, GateOp, InputKind,
    LookupScoreError, ModelError, ScoreSheet, validate,
)

BP_HW = ["BP-A1-HW", "BP-A2-HW", "BP-B1-HW", "BP-B2-HW", "BP-C1-HW", "BP-C2-HW", "BP-D1-HW", "BP-D2-HW"]


def bp_cccgs(beta_all, beta_div, suffix):
    members = [f"BP-{d}{i}-{suffix}" for d in "ABCD" for i in (1, 2)]
    cccgs = [ResolvedCccg("ALL", tuple(members), beta_all)]
    for d in "ABCD":
        cccgs.append(ResolvedCccg(f"DIV-{d}", (f"BP-{d}1-{suffix}", f"BP-{d}2-{suffix}"), beta_div))
    return members, cccgs


def test_hardware_bp_row():
    members, cccgs = bp_cccgs(2317 / 51000, 0.123, "HW")
    breakdown = modified_bfm("BP-HW", members, InputKind.INDEPENDENT_GIVEN, 4.0e-5, cccgs)
    assert breakdown.q_total == pytest.approx(4.813e-5, rel=0.01)
    assert breakdown.p_per_cccg["DIV-A"] == pytest.approx(5.943e-6, rel=0.01)
    assert breakdown.p_per_cccg["ALL"] == pytest.approx(2.187e-6, rel=0.01)
    assert breakdown.q_independent == 4.0e-5


def test_software_bp_row():
    members, cccgs = bp_cccgs(0.429, 0.568, "SW")
    breakdown = modified_bfm("BP-SW", members, InputKind.TOTAL_GIVEN, 1.871e-4, cccgs)
    assert breakdown.q_independent == pytest.approx(5.591e-7, rel=0.01)
    assert breakdown.p_per_cccg["DIV-B"] == pytest.approx(1.062e-4, rel=0.01)
    assert breakdown.p_per_cccg["ALL"] == pytest.approx(8.030e-5, rel=0.01)
    assert breakdown.beta_total == pytest.approx(0.997)


def test_software_lcl_row():
    members = ["LCL-A-SW", "LCL-B-SW", "LCL-C-SW", "LCL-D-SW"]
    breakdown = modified_bfm("LCL-SW", members, InputKind.TOTAL_GIVEN, 1.871e-4,
                             [ResolvedCccg("ALL", tuple(members), 0.568)])
    assert breakdown.q_independent == pytest.approx(8.086e-5, rel=0.01)
    assert breakdown.p_per_cccg["ALL"] == pytest.approx(1.062e-4, rel=0.01)


def test_no_cccgs_keeps_everything_independent():
    breakdown = modified_bfm("G", ["a", "b"], InputKind.TOTAL_GIVEN, 3e-3, [])
    assert breakdown.q_independent == breakdown.q_total == 3e-3
    assert breakdown.q_dependent == 0.0
    assert breakdown.p_per_cccg == {}


def test_inconsistent_betas():
    with pytest.raises(CcfError, match="inconsistent betas"):
        modified_bfm("G", ["a", "b"], InputKind.TOTAL_GIVEN, 1e-3, [
            ResolvedCccg("W1", ("a", "b"), 0.6),
            ResolvedCccg("W2", ("a", "b"), 0.5),
        ])


def test_probability_overflow():
    with pytest.raises(CcfError, match="probability overflow"):
        modified_bfm("G", ["a", "b"], InputKind.INDEPENDENT_GIVEN, 0.9, [ResolvedCccg("W", ("a", "b"), 0.5)])


def test_independent_given_rejects_uneven_membership():
    with pytest.raises(CcfError):
        modified_bfm("G", ["a", "b", "c"], InputKind.INDEPENDENT_GIVEN, 1e-3,
                     [ResolvedCccg("W", ("a", "b"), 0.1)])


def test_uneven_membership_gives_larger_independent_share():
    breakdown = modified_bfm("G", ["a", "b", "c"], InputKind.TOTAL_GIVEN, 1e-3, [
        ResolvedCccg("ALL", ("a", "b", "c"), 0.1),
        ResolvedCccg("AB", ("a", "b"), 0.2),
    ])
    assert breakdown.beta_total == pytest.approx(0.3)
    assert breakdown.q_independent_per_component["c"] == pytest.approx(0.9e-3)
    assert breakdown.q_independent_per_component["a"] == pytest.approx(0.7e-3)
    assert check_conservation(breakdown)


def test_random_groups_conserve_probability():
    rng = random.Random(31337)
    for _ in range(1000):
        n = rng.randint(2, 8)
        components = [f"C{i}" for i in range(n)]
        n_cccgs = rng.randint(0, 3)
        cccgs = []
        for w in range(n_cccgs):
            members = tuple(sorted(rng.sample(components, rng.randint(2, n))))
            cccgs.append(ResolvedCccg(f"W{w}", members, rng.uniform(0.001, 0.95 / n_cccgs)))
        q = rng.uniform(1e-7, 0.5)
        breakdown = modified_bfm("G", components, InputKind.TOTAL_GIVEN, q, cccgs)
        assert check_conservation(breakdown)
        for component in components:
            total = breakdown.q_independent_per_component[component] + sum(
                breakdown.p_per_cccg[c.id] for c in cccgs if component in c.members
            )
            assert total == pytest.approx(q, rel=1e-12)

        # 2のべき乗倍は丸め誤差なしで線形
        scale = 2.0 ** -rng.randint(1, 20)
        scaled = modified_bfm("G", components, InputKind.TOTAL_GIVEN, q * scale, cccgs)
        for component in components:
            assert scaled.q_independent_per_component[component] == \
                breakdown.q_independent_per_component[component] * scale
        for cccg_id, p in breakdown.p_per_cccg.items():
            assert scaled.p_per_cccg[cccg_id] == p * scale


def test_independent_given_round_trip():
    rng = random.Random(99)
    for _ in range(200):
        components = [f"C{i}" for i in range(rng.randint(2, 6))]
        q = rng.uniform(1e-8, 1e-2)
        cccgs = [ResolvedCccg("ALL", tuple(components), rng.uniform(0.01, 0.9))]
        breakdown = modified_bfm("G", components, InputKind.INDEPENDENT_GIVEN, q, cccgs)
        assert breakdown.q_independent == q
        assert all(v == q for v in breakdown.q_independent_per_component.values())
        assert check_conservation(breakdown)


def test_score_sheet_beta_for_hardware_group(bp_model):
    group = bp_model.get_group("BP-HW")
    cccg = next(c for c in bp_model.group_cccgs("BP-HW") if c.id == "ALL")
    assert resolve_cccg_beta(bp_model, group, cccg) == 2317 / 51000


def test_score_sheet_table_must_match_domain(bp_model):
    group = ComponentGroup("X", ("a", "b"), FailureDomain.SOFTWARE, InputKind.TOTAL_GIVEN, 1e-3)
    cccg = Cccg("ALL", "X", ("a", "b"), score_sheet="BP-HW-SHEET")
    with pytest.raises(CcfError):
        resolve_cccg_beta(bp_model, group, cccg)


def test_apply_to_bundled_groups(bp_model):
    hardware = apply_modified_bfm(bp_model, "BP-HW")
    assert hardware.q_total == pytest.approx(4.813e-5, rel=0.01)
    software = apply_modified_bfm(bp_model, "BP-SW")
    assert software.q_independent == pytest.approx(5.591e-7, rel=0.01)
    override = apply_modified_bfm(bp_model, "BP-SW", input_probability=1e-4)
    assert override.q_total == 1e-4


def test_expand_creates_thirteen_events(bp_model):
    expanded, diagnostics = expand_ccf(bp_model, "BP-HW")
    assert diagnostics == []
    new_ids = set(expanded.event_map) - set(bp_model.event_map)
    assert len(new_ids) == 13
    assert {ind_event_id(c) for c in BP_HW} <= new_ids
    assert ccf_event_id("BP-HW", "ALL") in new_ids
    assert expanded.event_map[ccf_event_id("BP-HW", "DIV-A")].kind == EventKind.CCF
    assert expanded.event_map[ccf_event_id("BP-HW", "DIV-A")].probability == pytest.approx(5.943e-6, rel=0.01)
    assert not any(c in expanded.event_map for c in BP_HW)


def test_expanded_leaf_becomes_or_gate(bp_model):
    expanded, _ = expand_ccf(bp_model, "BP-HW")
    leaf = expanded.gate_map["BP-A1-HW"]
    assert leaf.op == GateOp.OR
    assert leaf.children == ("IND-BP-A1-HW", "CCF-BP-HW-ALL", "CCF-BP-HW-DIV-A")


def test_expand_does_not_modify_input(bp_model):
    before = bp_model.basic_events
    expand_ccf(bp_model, "BP-HW")
    assert bp_model.basic_events == before
    assert not bp_model.get_group("BP-HW").expanded


def test_second_expansion_is_noop_with_warning(bp_model):
    expanded, _ = expand_ccf(bp_model, "BP-HW")
    again, diagnostics = expand_ccf(expanded, "BP-HW")
    assert again is expanded
    assert [(d.rule, d.severity) for d in diagnostics] == [("already-expanded", "warning")]


def test_component_without_cccg_is_relabelled(bp_model):
    group = ComponentGroup("SOLO", ("BP-A1-SW", "BP-A2-SW"), FailureDomain.SOFTWARE, InputKind.TOTAL_GIVEN, 1e-4)
    model = replace(
        bp_model,
        component_groups=(group,),
        cccgs=(),
        score_sheets=(),
    )
    expanded, _ = expand_ccf(model, "SOLO")
    assert expanded.gate_map["BP-A1"].children == ("BP-A1-HW", "IND-BP-A1-SW")
    assert expanded.event_map["IND-BP-A1-SW"].probability == 1e-4
    assert [d for d in validate(expanded) if d.severity == "error"] == []


def test_expand_all_passes_validation_and_solves(bp_model):
    expanded, breakdowns, diagnostics = expand_all(bp_model)
    assert sorted(breakdowns) == ["BP-HW", "BP-SW", "LCL-SW"]
    assert diagnostics == []
    assert all(g.expanded for g in expanded.component_groups)
    assert [d for d in validate(expanded) if d.severity == "error"] == []
    result = solve_fault_tree(expanded, "RPS-SIGNAL-FAIL")
    events = {e for cs in result.cut_sets for e in cs.events}
    assert "CCF-BP-SW-ALL" in events
    assert "CCF-LCL-SW-ALL" in events
    single = {cs.events for cs in result.cut_sets if cs.order == 1}
    assert ("CCF-BP-SW-ALL",) in single


def test_expand_id_conflict_is_error(bp_model):
    clash = BasicEvent(id="IND-BP-A1-HW", probability=1e-3)
    model = replace(bp_model, basic_events=bp_model.basic_events + (clash,))
    with pytest.raises(ModelError):
        expand_ccf(model, "BP-HW")


def test_check_conservation_detects_mismatch():
    members, cccgs = bp_cccgs(0.4, 0.3, "SW")
    breakdown = modified_bfm("BP-SW", members, InputKind.TOTAL_GIVEN, 1e-3, cccgs)
    broken = replace(breakdown, q_independent_per_component={c: 0.0 for c in members})
    assert not check_conservation(broken)


def test_score_sheet_must_be_complete():
    with pytest.raises(LookupScoreError):
        estimate_beta(HARDWARE_TABLE, ScoreSheet("partial", "HARDWARE", {"Redundancy": "A"}))
