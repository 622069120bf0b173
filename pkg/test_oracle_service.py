#!/usr/bin/env python3
"""
Test script for the offline oracles.
"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import Advertiser, AdSlot, Instance, InstanceMeta, OptKind, ContractError, SizeCapError
from services import get_allocation_service, get_generator_service, get_oracle_service

F = Fraction


def mixed_instance() -> Instance:
    return Instance(
        advertisers=(Advertiser(0, F(1)), Advertiser(1, F(2))),
        slots=(
            AdSlot(0, ((0, F(1, 2)), (1, F(1)))),
            AdSlot(1, ((0, F(1, 3)),)),
            AdSlot(2, ((1, F(2)),)),
        )
    )


def test_max_matching():
    print("Testing maximum matching...")

    oracle = get_oracle_service()
    instance = get_generator_service().gen_greedy_tight(7, 4).source
    certificate = oracle.max_matching(instance)
    assert certificate.value == 10
    assert certificate.kind is OptKind.EXACT
    assert len({adv for _, adv in certificate.witness}) == 10
    assert len({slot for slot, _ in certificate.witness}) == 10

    with pytest.raises(ContractError):
        oracle.max_matching(mixed_instance())

    print("[OK] Maximum matching working correctly")


def test_brute_force_allocation():
    print("Testing brute force allocation...")

    oracle = get_oracle_service()
    certificate = oracle.brute_force_allocation(mixed_instance())
    assert certificate.value == F(17, 6)
    assert sorted(certificate.witness) == [(0, 0), (1, 0), (2, 1)]

    big = get_generator_service().gen_greedy_tight(7, 4).source
    with pytest.raises(SizeCapError):
        oracle.brute_force_allocation(big)

    print("[OK] Brute force finds the exact optimum")


def test_b_matching_agrees_with_brute_force():
    print("Testing the min-cost-flow b-matching...")

    oracle = get_oracle_service()
    instance = get_generator_service().gen_equal_bids_tight(2, 2, F(1, 2)).source
    flow = oracle.max_weight_b_matching(instance)
    brute = oracle.brute_force_allocation(instance)
    assert flow.value == brute.value == 6
    assert oracle.exact_certificate(instance).source == "b-matching"

    with pytest.raises(ContractError):
        oracle.max_weight_b_matching(mixed_instance())

    print("[OK] b-matching agrees with brute force")


def test_hall_check_finds_a_smallest_violator():
    print("Testing Hall's condition...")

    oracle = get_oracle_service()
    crowded = Instance(
        advertisers=tuple(Advertiser(adv, F(1)) for adv in range(3)),
        slots=(
            AdSlot(0, ((0, F(1)), (1, F(1)), (2, F(1)))),
            AdSlot(1, ((2, F(1)),)),
        )
    )
    report = oracle.hall_check(crowded)
    assert not report.passed
    assert report.violating_set == (0, 1)
    assert report.neighborhood == (0,)

    assert oracle.hall_check(get_generator_service().gen_greedy_tight(3, 2).source).passed

    with pytest.raises(SizeCapError):
        oracle.hall_check(crowded, cap=2)

    print("[OK] Hall violators reported")


def test_upper_bound_and_best_certificate():
    print("Testing certificate selection...")

    oracle = get_oracle_service()
    bound = oracle.opt_upper_bound(mixed_instance())
    assert bound.value == F(17, 6)
    assert bound.kind is OptKind.UPPER_BOUND
    assert oracle.best_certificate(mixed_instance()).source == "brute-force"

    general = get_generator_service().gen_random_kd(2, 3, 3, 60, seed=5, bids="general").source
    assert oracle.exact_certificate(general) is None
    assert oracle.best_certificate(general).kind is OptKind.UPPER_BOUND

    star = get_generator_service().gen_star_1mR(F(1, 2), 2).source
    _, trace, _ = get_allocation_service().run_greedy(star)
    certificate = oracle.best_certificate(trace.instance)
    assert certificate.kind is OptKind.CONSTRUCTION
    assert certificate.value == 2

    print("[OK] Strongest certificate chosen")


def test_verify_known_opt():
    print("Testing known optimum verification...")

    oracle = get_oracle_service()
    tight = get_generator_service().gen_greedy_tight(7, 4).source
    assert oracle.verify_known_opt(tight) is True
    assert oracle.verify_known_opt(tight.with_meta(known_opt=F(9))) is False
    assert oracle.verify_known_opt(tight.with_meta(known_opt=None)) is None

    certificate = oracle.best_certificate(tight.with_meta(known_opt=F(9)))
    assert certificate.value == 10

    print("[OK] Known optima verified")


if __name__ == "__main__":
    try:
        test_max_matching()
        test_brute_force_allocation()
        test_b_matching_agrees_with_brute_force()
        test_hall_check_finds_a_smallest_violator()
        test_upper_bound_and_best_certificate()
        test_verify_known_opt()
        print("\n[SUCCESS] All oracle service tests passed!")
        sys.exit(0)
    except Exception as e:
        print(f"[ERROR] Oracle service test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
