#!/usr/bin/env python3
"""
Test script for the online allocation algorithms.
"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import (
    Advertiser, AdSlot, Instance, InstanceMeta, AlgorithmKind, TieBreak,
    ContractError, TieScriptError, NumeralError, SizeCapError, DigitVector
)
from services import (
    AllocationService, get_allocation_service, get_generator_service, scaling_constant
)

F = Fraction


def unit_instance(advertiser_count, rows, **meta) -> Instance:
    return Instance(
        advertisers=tuple(Advertiser(adv, F(1)) for adv in range(advertiser_count)),
        slots=tuple(AdSlot(slot, tuple((adv, F(1)) for adv in row)) for slot, row in enumerate(rows)),
        meta=InstanceMeta(**meta)
    )


def test_scaling_constant():
    print("Testing the scaling constant...")

    assert scaling_constant(7, 4) == F(2187, 14197)
    assert scaling_constant(2, 2) == F(1, 3)
    assert scaling_constant(1, 2) == 1
    with pytest.raises(NumeralError):
        scaling_constant(3, 1)
    with pytest.raises(NumeralError):
        scaling_constant(0, 2)

    print("[OK] Scaling constant is exact")


def test_greedy_on_its_tight_example():
    print("Testing greedy on the tight example...")

    service = get_allocation_service()
    generated = get_generator_service().gen_greedy_tight(7, 4)
    result, trace, duals = service.run_greedy(generated.source, tie=generated.script)

    assert result.revenue == 7
    assert result.matched_advertisers() == set(range(7))
    assert trace.k == 7 and trace.d == 4
    assert len(trace.arrivals) == len(generated.source.slots)
    assert trace.total_primal == result.revenue
    # shared advertisers reach z = 1 through the 1/k neighbor updates alone
    assert duals.z == [F(1)] * 10

    small = get_generator_service().gen_greedy_tight(1, 2)
    result, _, _ = service.run_greedy(small.source, tie=small.script)
    assert result.revenue == 1

    print("[OK] Greedy earns k on the (k+d-1) tight example")


def test_greedy_picks_the_highest_bid():
    print("Testing greedy bid order and tie scripts...")

    service = get_allocation_service()
    instance = Instance(
        advertisers=(Advertiser(0, F(1)), Advertiser(1, F(1))),
        slots=(AdSlot(0, ((0, F(1, 2)), (1, F(1)))),),
        meta=InstanceMeta(claimed_k=1, claimed_d=2)
    )
    result, _, _ = service.run_greedy(instance)
    assert result.assignment() == {0: 1}

    with pytest.raises(TieScriptError):
        service.run_greedy(instance, tie=TieBreak.scripted([0]))

    with pytest.raises(ContractError):
        service.run_greedy(unit_instance(1, [[0]]))

    print("[OK] Greedy honours bids and rejects non-argmax scripts")


def test_tie_policies():
    print("Testing tie-breaking policies...")

    service = get_allocation_service()
    # advertiser 1 has degree 2 by the time slot 1 arrives
    instance = unit_instance(3, [[1], [0, 1, 2]], claimed_k=1, claimed_d=3)

    lowest, _, _ = service.run_greedy(instance, tie=TieBreak.lowest())
    assert lowest.assignment()[1] == 0

    degree, _, _ = service.run_greedy(instance, tie=TieBreak.highest_degree())
    assert degree.assignment()[1] == 0  # advertiser 1 is already full

    instance = unit_instance(3, [[0, 1, 2]], claimed_k=1, claimed_d=3)
    seeded_a, _, _ = service.run_greedy(instance, tie=TieBreak.seeded(11))
    seeded_b, _, _ = service.run_greedy(instance, tie=TieBreak.seeded(11))
    assert seeded_a.assignment() == seeded_b.assignment()

    scripted, _, _ = service.run_greedy(instance, tie=TieBreak.scripted([2]))
    assert scripted.assignment() == {0: 2}

    print("[OK] Tie policies working correctly")


def test_high_degree_on_the_phased_upper_bound():
    print("Testing high-degree on the phased upper bound...")

    service = get_allocation_service()
    instance = get_generator_service().gen_high_degree_ub(3, 2).source
    assert len(instance.advertisers) == 16

    result, trace, duals = service.run_high_degree(instance)
    assert result.matched_count == 14
    assert result.revenue / instance.meta.known_opt == F(7, 8)
    assert trace.scaling == F(1, 7)
    assert duals.z == [F(1)] * 16

    adaptive = get_generator_service().gen_high_degree_ub(3, 2, adaptive=True).source
    result, trace, _ = service.run_high_degree(adaptive)
    assert result.matched_count == 14
    assert len(trace.instance.slots) == len(trace.arrivals)

    print("[OK] High-degree leaves d^(k+1)(1-1/d)^k advertisers unmatched")


def test_high_degree_rejects_weighted_input():
    print("Testing the high-degree input contract...")

    service = get_allocation_service()
    weighted = Instance(
        advertisers=(Advertiser(0, F(2)),),
        slots=(AdSlot(0, ((0, F(1)),)),),
        meta=InstanceMeta(claimed_k=1, claimed_d=2)
    )
    with pytest.raises(ContractError):
        service.run_high_degree(weighted)

    print("[OK] Weighted input rejected")


def test_equal_bids_rule():
    print("Testing the equal-bids rule...")

    service = get_allocation_service()
    instance = get_generator_service().gen_equal_bids_tight(2, 2, F(1, 2)).source
    result, trace, duals = service.run_equal_bids(instance)

    assert result.revenue == 5
    assert duals.z == [F(1), F(1), F(1)]
    assert trace.finalization.dual_cost == 6
    assert trace.total_dual == trace.finalization.dual_cost
    # C = 1/3: the first match raises the dual by exactly (1 + C) * bid
    assert trace.arrivals[0].delta_dual == F(4, 3)

    mixed = Instance(
        advertisers=(Advertiser(0, F(2)),),
        slots=(AdSlot(0, ((0, F(1)),)), AdSlot(1, ((0, F(1, 2)),))),
        meta=InstanceMeta(claimed_k=1, claimed_d=2)
    )
    with pytest.raises(ContractError):
        service.run_equal_bids(mixed)

    print("[OK] Equal-bids rule working correctly")


def test_general_bids_keeps_digit_vectors_bounded():
    print("Testing the general-bids rule...")

    service = get_allocation_service()
    instance = get_generator_service().gen_random_kd(2, 3, 3, 60, seed=5, bids="general").source
    result, trace, duals = service.run_general_bids(instance)

    assert result.revenue == trace.total_primal
    assert all(spend <= budget for spend, budget in zip(result.spend, instance.budgets))
    for pending in duals.zc:
        assert isinstance(pending, DigitVector)
        assert pending.places <= 2
        assert pending.non_null_count() <= 1
    assert all(z >= 1 for z in duals.z)
    bound = 1 + trace.scaling
    assert all(record.delta_dual <= bound * record.delta_primal for record in trace.arrivals)

    print("[OK] General-bids digit vectors stay within k places")


def test_randomized_runs_are_reproducible():
    print("Testing RANDOM and RANKING seeds...")

    service = get_allocation_service()
    instance = get_generator_service().gen_random_kd(2, 3, 6, 6, seed=3).source

    first, _ = service.run_random(instance, seed=42)
    second, _ = service.run_random(instance, seed=42)
    assert first.assignment() == second.assignment()

    ranked_a, ranking_trace = service.run_ranking(instance, seed=9)
    ranked_b, _ = service.run_ranking(instance, seed=9)
    assert ranked_a.assignment() == ranked_b.assignment()
    assert ranking_trace.seed == 9
    assert ranking_trace.algorithm is AlgorithmKind.RANKING

    result, trace, duals = service.run(AlgorithmKind.RANDOM, instance, seed=1)
    assert duals is None
    assert trace.seed == 1

    print("[OK] Randomized runs reproduce from their seed")


def test_exact_random_distribution():
    print("Testing the exact RANDOM distribution...")

    service = get_allocation_service()
    instance = unit_instance(2, [[0, 1], [0]])
    outcomes = service.enumerate_random_outcomes(instance)
    assert outcomes == {F(1): F(1, 2), F(2): F(1, 2)}
    assert service.expected_random_revenue(instance) == F(3, 2)

    too_big = unit_instance(1, [[0]] * 40)
    with pytest.raises(SizeCapError):
        service.enumerate_random_outcomes(too_big)

    print("[OK] RANDOM distribution enumerated exactly")


def test_adaptive_star_caps_every_algorithm():
    print("Testing the adaptive star...")

    service = get_allocation_service()
    star = get_generator_service().gen_star_1mR(F(1, 2), 2).source
    result, trace, _ = service.run_greedy(star)

    assert result.revenue == 2 * F(1001, 2000)
    assert trace.instance.meta.known_opt == 2

    print("[OK] Star limits greedy to just over 1-R per advertiser")


def test_split_copies_reduction():
    print("Testing the split-copies reduction...")

    service = get_allocation_service()
    base = Instance(
        advertisers=(Advertiser(0, F(2)),),
        slots=tuple(AdSlot(slot, ((0, F(1)),)) for slot in range(3)),
        meta=InstanceMeta(claimed_k=1, claimed_d=2)
    )
    reduced = service.split_copies_reduction(base, 1)
    assert len(reduced.advertisers) == 5
    assert all(copy.budget == 1 for copy in reduced.advertisers)

    result, trace, _ = service.run_high_degree(reduced, k=1, d=2)
    translated = reduced.translate(result)
    assert translated.revenue == 2
    assert translated.spend == [F(2)]
    assert trace.arrivals[2].feasible == ()

    print("[OK] Split copies translate back to the equal-bids instance")


if __name__ == "__main__":
    try:
        test_scaling_constant()
        test_greedy_on_its_tight_example()
        test_greedy_picks_the_highest_bid()
        test_tie_policies()
        test_high_degree_on_the_phased_upper_bound()
        test_high_degree_rejects_weighted_input()
        test_equal_bids_rule()
        test_general_bids_keeps_digit_vectors_bounded()
        test_randomized_runs_are_reproducible()
        test_exact_random_distribution()
        test_adaptive_star_caps_every_algorithm()
        test_split_copies_reduction()
        print("\n[SUCCESS] All allocation service tests passed!")
        sys.exit(0)
    except Exception as e:
        print(f"[ERROR] Allocation service test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
