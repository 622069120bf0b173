#!/usr/bin/env python3
"""
Test script for the instance generators.
"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import Instance, ParameterError
from services import get_allocation_service, get_generator_service, get_instance_service

F = Fraction


def test_greedy_tight_family():
    print("Testing greedy-tight instances...")

    generator = get_generator_service()
    generated = generator.gen_greedy_tight(7, 4)
    instance = generated.source

    assert len(instance.advertisers) == 10
    assert generated.known_opt == 10
    assert instance.max_slot_degree == 4
    assert generated.script.script == tuple(range(7))
    assert get_instance_service().validate_kd(instance, 7, 4).is_kd

    with pytest.raises(ParameterError):
        generator.gen_greedy_tight(1, 4)

    print("[OK] Greedy-tight instances are (k,d)-bounded")


def test_equal_bids_tight_family():
    print("Testing equal-bids-tight instances...")

    generator = get_generator_service()
    generated = generator.gen_equal_bids_tight(2, 2, F(1, 2))
    assert generated.known_opt == 6
    assert generated.source.is_equal_bids
    assert get_instance_service().validate_kd(generated.source, 2, 2).is_kd

    result, _, _ = get_allocation_service().run_greedy(generated.source, tie=generated.script)
    assert result.revenue == 4

    with pytest.raises(ParameterError):
        generator.gen_equal_bids_tight(2, 2, F(2, 3))

    print("[OK] Greedy earns k/(k+d-1) of the optimum")


def test_adwords_greedy_tight_family():
    print("Testing adwords-greedy-tight instances...")

    generator = get_generator_service()
    generated = generator.gen_adwords_greedy_tight(2, 2, F(1, 2))
    instance = generated.source
    assert len(instance.advertisers) == 5
    assert generated.known_opt == 5
    assert get_instance_service().compute_r_max(instance) == F(1, 2)

    result, _, _ = get_allocation_service().run_greedy(instance, tie=generated.script)
    assert result.revenue == 2 + F(1, 500)

    non_unit = generator.gen_adwords_greedy_tight(2, 2, F(2, 5))
    assert non_unit.known_opt == 13

    # k = d-1: the unlucky advertisers need every shared slot, the lucky ones need one each
    assert generator.gen_adwords_greedy_tight(1, 2, F(2, 5)).known_opt is None

    with pytest.raises(ParameterError):
        generator.gen_adwords_greedy_tight(2, 2, F(3, 5))

    print("[OK] Greedy stops just above 1-R per lucky advertiser")


def test_adwords_greedy_tight_exact_ratio_for_non_unit_rate():
    print("Testing adwords-greedy-tight with R = 2/5...")

    k, d, rate = 3, 2, F(2, 5)
    generated = get_generator_service().gen_adwords_greedy_tight(k, d, rate)
    instance = generated.source
    lucky = k * 5
    assert len(instance.advertisers) == lucky + 3
    assert generated.known_opt == instance.total_budget == 18
    assert get_instance_service().compute_r_max(instance) == rate
    assert get_instance_service().validate_kd(instance, k, d).is_kd

    result, _, _ = get_allocation_service().run_greedy(instance, tie=generated.script)
    eps = instance.meta.eps
    assert eps == rate / 1000
    assert result.revenue == lucky * (1 - rate + eps)

    target = (1 - rate) * k / (k + (d - 1) * (1 - rate))
    assert target == F(1, 2)
    assert (result.revenue - lucky * eps) / generated.known_opt == target

    print("[OK] Ratio is (1-R)k/(k+(d-1)(1-R)) up to the eps slots")


def test_upper_bound_families():
    print("Testing the phased upper-bound families...")

    generator = get_generator_service()
    static = generator.gen_high_degree_ub(3, 2)
    assert isinstance(static.source, Instance)
    assert static.known_opt == 16
    report = get_instance_service().validate_kd(static.source, 3, 2)
    assert report.is_kd

    adaptive = generator.gen_adwords_ub(2, 2, F(1, 2))
    assert adaptive.source.is_adaptive
    assert len(adaptive.source.advertisers) == 16

    with pytest.raises(ParameterError):
        generator.gen_high_degree_ub(2, 3)

    print("[OK] Upper-bound families built")


def test_random_instances_are_reproducible():
    print("Testing random (k,d)-bounded instances...")

    generator = get_generator_service()
    validator = get_instance_service()
    for bids in ("unit", "vertex", "equal", "general"):
        first = generator.gen_random_kd(2, 3, 5, 30, seed=7, bids=bids).source
        second = generator.gen_random_kd(2, 3, 5, 30, seed=7, bids=bids).source
        assert first == second
        assert validator.validate_kd(first, 2, 3).is_kd

    assert generator.gen_random_kd(2, 3, 5, 30, bids="vertex").source.is_vertex_weighted
    assert generator.gen_random_kd(2, 3, 5, 30, bids="equal").source.is_equal_bids

    with pytest.raises(ParameterError):
        generator.gen_random_kd(3, 2, 10, 5)
    with pytest.raises(ParameterError):
        generator.gen_random_kd(2, 3, 5, 30, bids="lognormal")

    print("[OK] Random instances reproduce from their seed")


def test_outlier_composite():
    print("Testing outlier composites...")

    generator = get_generator_service()
    base = generator.gen_greedy_tight(3, 2).source
    composite = generator.gen_outlier_composite(base, F(1, 5), seed=2)
    instance = composite.source

    report = get_instance_service().validate_kd(instance, 3, 2)
    assert report.alpha == F(1, 5)
    assert report.outliers == frozenset(range(4, len(instance.advertisers)))
    assert composite.known_opt == F(9, 2)
    assert instance.meta.generator_tag == "outlier"

    assert generator.gen_outlier_composite(base, F(0)).source is base
    with pytest.raises(ParameterError):
        generator.gen_outlier_composite(base, F(1))

    print("[OK] Outliers hold exactly an alpha share of the budget")


def test_generate_coerces_parameters():
    print("Testing the generator registry...")

    generator = get_generator_service()
    generated = generator.generate("greedy-tight", {"k": "3", "d": "2"})
    assert generated.source.meta.opt_kind == "exact"

    star = generator.generate("star", {"R": "1/3", "n": "2"})
    assert star.source.is_adaptive

    with pytest.raises(ParameterError):
        generator.generate("lattice", {})
    with pytest.raises(ParameterError):
        generator.generate("greedy-tight", {"k": "3"})
    with pytest.raises(ParameterError):
        generator.generate("greedy-tight", {"k": "three", "d": "2"})

    print("[OK] Registry parameters coerced and checked")


if __name__ == "__main__":
    try:
        test_greedy_tight_family()
        test_equal_bids_tight_family()
        test_adwords_greedy_tight_family()
        test_adwords_greedy_tight_exact_ratio_for_non_unit_rate()
        test_upper_bound_families()
        test_random_instances_are_reproducible()
        test_outlier_composite()
        test_generate_coerces_parameters()
        print("\n[SUCCESS] All generator service tests passed!")
        sys.exit(0)
    except Exception as e:
        print(f"[ERROR] Generator service test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
