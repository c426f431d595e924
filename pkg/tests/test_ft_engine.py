import random
from dataclasses import replace

import pytest

from builders import (
    gate, inclusion_exclusion, prime_implicants, random_coherent_tree, tree_model,
    truth_table_probability,
)
from ft_engine import (
    CutSet, compare_fault_trees, compare_top_results, contribution_percent, cut_set_events,
    exact_bruteforce, exact_from_cut_sets, generate_cut_sets, min_cut_upper_bound, minimal_cut_sets,
    minimize, quantify, single_points_of_failure, solve_fault_tree,
)
from model import Model, ModelError, ResourceLimitError
from report import format_sci
from settings import AnalysisSettings


def event_tuples(cut_sets):
    return {cs.events for cs in cut_sets}


def test_or_gate_gives_singletons():
    model = tree_model({"a": 0.1, "b": 0.2}, [gate("TOP", "OR", "a", "b")])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert event_tuples(cut_sets) == {("a",), ("b",)}


def test_and_gate_gives_one_product():
    model = tree_model({"a": 0.1, "b": 0.2}, [gate("TOP", "AND", "a", "b")])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert event_tuples(cut_sets) == {("a", "b")}
    assert cut_sets[0].probability == pytest.approx(0.02)


def test_kofn_two_of_four_gives_six_pairs():
    model = tree_model({e: 0.1 for e in "abcd"}, [gate("TOP", "KOFN", "a", "b", "c", "d", k=2)])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert len(cut_sets) == 6
    assert all(cs.order == 2 for cs in cut_sets)


def test_absorption_removes_superset():
    model = tree_model({"a": 0.1, "b": 0.2}, [
        gate("TOP", "OR", "a", "G1"),
        gate("G1", "AND", "a", "b"),
    ])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert event_tuples(cut_sets) == {("a",)}


def test_minimize_keeps_only_minimal_masks():
    assert minimize([0b011, 0b001, 0b110, 0b100, 0b111]) == {0b001, 0b100}


def test_cut_sets_sorted_by_probability_then_ids():
    model = tree_model({"b": 0.1, "a": 0.1, "c": 0.5}, [gate("TOP", "OR", "c", "b", "a")])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert [cs.events for cs in cut_sets] == [("c",), ("a",), ("b",)]


def test_truncation_drops_small_products_and_reports_mass():
    model = tree_model({"a": 1e-3, "b": 1e-3, "c": 1e-2}, [
        gate("TOP", "OR", "c", "G1"),
        gate("G1", "AND", "a", "b"),
    ])
    expansion = generate_cut_sets(model, "TOP", truncation=1e-5)
    assert event_tuples(expansion.cut_sets) == {("c",)}
    assert expansion.truncated_mass_bound == pytest.approx(1e-6)


def test_lowering_truncation_never_removes_cut_sets():
    rng = random.Random(7)
    for _ in range(50):
        model = random_coherent_tree(rng)
        top = model.fault_trees[0].top
        previous = None
        for truncation in (1e-1, 1e-2, 1e-3, 0.0):
            cut_sets = {cs.events: cs.probability for cs in generate_cut_sets(model, top, truncation).cut_sets}
            if previous is not None:
                for events, probability in previous.items():
                    assert cut_sets[events] == probability
            previous = cut_sets


def test_house_event_true_drops_out_of_cut_sets():
    model = tree_model({"a": 0.1, "H": 1.0}, [gate("TOP", "AND", "a", "H")], house=["H"])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert event_tuples(cut_sets) == {("a",)}


def test_house_event_false_blocks_branch():
    model = tree_model({"a": 0.1, "b": 0.2, "H": 0.0}, [
        gate("TOP", "OR", "b", "G1"),
        gate("G1", "AND", "a", "H"),
    ], house=["H"])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    assert event_tuples(cut_sets) == {("b",)}
    assert exact_bruteforce(model.get_fault_tree("FT"), model) == pytest.approx(0.2)


def test_house_event_making_top_always_true_is_error():
    model = tree_model({"a": 0.1, "H": 1.0}, [gate("TOP", "OR", "a", "H")], house=["H"])
    with pytest.raises(ModelError):
        generate_cut_sets(model, "TOP")


def test_cycle_is_structural_error():
    model = tree_model({"a": 0.1}, [
        gate("TOP", "OR", "a", "G1"),
        gate("G1", "AND", "a", "TOP"),
    ])
    with pytest.raises(ModelError, match="cycle"):
        generate_cut_sets(model, "TOP")


def test_working_set_cap_names_limit():
    probabilities = {f"e{i}": 0.5 for i in range(8)}
    gates = [
        gate("G1", "OR", "e0", "e1", "e2", "e3"),
        gate("G2", "OR", "e4", "e5", "e6", "e7"),
        gate("TOP", "AND", "G1", "G2"),
    ]
    model = tree_model(probabilities, gates)
    with pytest.raises(ResourceLimitError) as info:
        generate_cut_sets(model, "TOP", max_cut_sets=10)
    assert info.value.limit_name == "max_cut_sets"
    assert info.value.limit == 10


def test_two_singletons_sum_and_mcub():
    model = tree_model({"a": 1e-3, "b": 1e-3}, [gate("TOP", "OR", "a", "b")])
    result = solve_fault_tree(model, "FT")
    assert format_sci(result.rare_event_sum) == "2.000E-3"
    assert format_sci(result.mcub) == "1.999E-3"


def test_exact_for_single_product():
    model = tree_model({"a": 0.1, "b": 0.1}, [gate("TOP", "AND", "a", "b")])
    settings = AnalysisSettings()
    settings.method.set_method("exact")
    result = solve_fault_tree(model, "FT", settings)
    assert result.headline("exact") == pytest.approx(0.01)


def test_exact_missing_above_cap_raises_on_headline():
    model = tree_model({"a": 0.1, "b": 0.1, "c": 0.1}, [gate("TOP", "OR", "a", "b", "c")])
    cut_sets = minimal_cut_sets(model.get_fault_tree("FT"), model)
    result = quantify(cut_sets, model, exact_event_cap=2)
    assert result.exact is None
    with pytest.raises(ResourceLimitError):
        result.headline("exact")


def test_bruteforce_kofn_two_of_three_fair_coins():
    model = tree_model({e: 0.5 for e in "abc"}, [gate("TOP", "KOFN", "a", "b", "c", k=2)])
    assert exact_bruteforce(model.get_fault_tree("FT"), model) == pytest.approx(0.5)


def test_bruteforce_cap_names_limit():
    model = tree_model({e: 0.5 for e in "abcd"}, [gate("TOP", "OR", "a", "b", "c", "d")])
    with pytest.raises(ResourceLimitError) as info:
        exact_bruteforce(model.get_fault_tree("FT"), model, event_cap=3)
    assert info.value.limit_name == "bruteforce_event_cap"


def test_min_cut_upper_bound_empty_and_certain():
    assert min_cut_upper_bound([]) == 0.0
    assert min_cut_upper_bound([1.0, 0.5]) == pytest.approx(1.0)


def test_dominant_rows_contribution():
    rows = [1.210e-6, 2.052e-8, 1.944e-8, 1.944e-8]
    assert sum(rows) == pytest.approx(1.2694e-6, abs=1e-10)
    assert contribution_percent(rows[0], 1.270e-6) == pytest.approx(95.31, abs=0.1)


def test_contribution_of_zero_total():
    assert contribution_percent(0.0, 0.0) == 0.0


def test_rts_demo_headline_and_cut_sets(rts_model):
    result = solve_fault_tree(rts_model, "RTS-FAIL")
    assert len(result.cut_sets) == 13
    assert format_sci(result.rare_event_sum) in ("1.269E-6", "1.270E-6")
    top = result.cut_sets[0]
    assert top.events == ("RPS-ROD-CF-RCCAS",)
    assert result.contributions[0] == pytest.approx(95.3, abs=0.1)
    assert [format_sci(cs.probability) for cs in result.cut_sets[:4]] == \
        ["1.210E-6", "2.052E-8", "1.944E-8", "1.944E-8"]
    assert sum(result.contributions) == pytest.approx(100.0)


def test_rts_demo_single_point_of_failure(rts_model):
    result = solve_fault_tree(rts_model, "RTS-FAIL")
    assert [cs.events for cs in single_points_of_failure(result)] == [("RPS-ROD-CF-RCCAS",)]


def test_esfas_demo_single_cut_set(esfas_model):
    result = solve_fault_tree(esfas_model, "ESFAS-FAIL")
    assert len(result.cut_sets) == 1
    assert format_sci(result.rare_event_sum) == "2.095E-5"


def test_solve_accepts_gate_id(esfas_model):
    by_tree = solve_fault_tree(esfas_model, "ESFAS-FAIL")
    by_gate = solve_fault_tree(esfas_model, "ESFAS-TOP")
    assert by_tree.rare_event_sum == by_gate.rare_event_sum


def test_output_is_deterministic(rts_model):
    first = solve_fault_tree(rts_model, "RTS-FAIL")
    second = solve_fault_tree(rts_model, "RTS-FAIL")
    assert first.cut_sets == second.cut_sets
    assert first.rare_event_sum == second.rare_event_sum


def test_random_trees_match_truth_table():
    rng = random.Random(20240601)
    for _ in range(500):
        model = random_coherent_tree(rng)
        ft = model.fault_trees[0]
        cut_sets = minimal_cut_sets(ft, model)
        assert event_tuples(cut_sets) == prime_implicants(model, ft.top)

        truth = truth_table_probability(model, ft.top)
        brute = exact_bruteforce(ft, model)
        assert brute == pytest.approx(truth, rel=1e-12, abs=1e-300)

        result = quantify(cut_sets, model)
        assert result.exact == pytest.approx(truth, rel=1e-12, abs=1e-300)
        if len(cut_sets) <= 10:
            probabilities = {e: model.event_map[e].probability for e in model.event_map}
            expected = inclusion_exclusion([cs.events for cs in cut_sets], probabilities)
            assert brute == pytest.approx(expected, rel=1e-12, abs=1e-15)

        slack = 1e-12 * result.rare_event_sum
        assert result.exact <= result.mcub + slack
        assert result.mcub <= result.rare_event_sum + slack


def test_exact_from_cut_sets_agrees_with_explicit_cut_sets():
    model = tree_model({"a": 0.2, "b": 0.3, "c": 0.4}, [gate("TOP", "OR", "a", "b", "c")])
    cut_sets = [CutSet(("a",), 0.2), CutSet(("b",), 0.3), CutSet(("c",), 0.4)]
    assert exact_from_cut_sets(cut_sets, model) == pytest.approx(1 - 0.8 * 0.7 * 0.6)


def test_cut_set_events():
    cut_sets = [CutSet(("a", "b"), 0.02), CutSet(("b", "c"), 0.06)]
    assert cut_set_events(cut_sets) == frozenset({"a", "b", "c"})


def test_exact_is_computed_with_sum_headline():
    model = tree_model({"a": 0.1, "b": 0.2}, [gate("TOP", "OR", "a", "b")])
    result = solve_fault_tree(model, "FT")
    assert result.headline() == pytest.approx(0.3)
    assert result.exact == pytest.approx(0.28)


def test_exact_is_skipped_above_event_cap():
    model = tree_model({"a": 0.1, "b": 0.2}, [gate("TOP", "OR", "a", "b")])
    settings = AnalysisSettings()
    settings.limits.exact_event_cap = 1
    assert solve_fault_tree(model, "FT", settings).exact is None


def single_event_result(probability):
    return quantify([CutSet(("AFW-PUMP-CCF",), probability)], Model(), exact=False, top="AFW")


def test_top_comparison_of_auxiliary_feedwater():
    row = compare_top_results("AFW", single_event_result(1.487e-5), single_event_result(1.231e-5))
    assert row.baseline == 1.487e-5
    assert row.improved == 1.231e-5
    assert row.delta_percent == pytest.approx(-17.2159, abs=1e-4)
    assert (row.baseline_cut_sets, row.improved_cut_sets) == (1, 1)
    assert row.flag == ""


def test_top_comparison_flags():
    assert compare_top_results("X", None, single_event_result(1e-5)).flag == "absent-baseline"
    assert compare_top_results("X", single_event_result(1e-5), None).flag == "absent-improved"
    row = compare_top_results("X", single_event_result(0.0), single_event_result(1e-5))
    assert row.flag == "zero-baseline"
    assert row.delta_percent is None


def test_compare_fault_trees(toy_model, toy_improved_model):
    rows = compare_fault_trees(toy_model, toy_improved_model, ["RPS-FAIL", "AFW-FAIL", "RPS-FAIL"])
    assert [row.fault_tree for row in rows] == ["RPS-FAIL", "AFW-FAIL"]
    rps, afw = rows
    assert rps.baseline == pytest.approx(2e-6)
    assert rps.improved == pytest.approx(1.1e-6)
    assert rps.delta_percent == pytest.approx(-45.0)
    assert afw.baseline == pytest.approx(5.9e-5)
    assert afw.improved == pytest.approx(1.4e-5)
    assert afw.delta_percent == pytest.approx(-76.2712, abs=1e-3)
    assert afw.baseline_cut_sets == afw.improved_cut_sets == 2


def test_compare_fault_trees_missing_top(toy_model, toy_improved_model):
    reduced = replace(toy_improved_model,
                      fault_trees=tuple(ft for ft in toy_improved_model.fault_trees if ft.name == "RPS-FAIL"))
    row, = compare_fault_trees(toy_model, reduced, ["AFW-FAIL"])
    assert row.flag == "absent-improved"
    assert row.improved is None
    assert row.baseline_cut_sets == 2
    with pytest.raises(ModelError):
        compare_fault_trees(toy_model, toy_improved_model, ["NO-SUCH-TREE"])
