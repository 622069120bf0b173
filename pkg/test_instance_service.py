#!/usr/bin/env python3
"""
Test script for instances, the instance codec and (k,d) validation.
"""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import (
    Advertiser, AdSlot, Instance, InstanceMeta, InstanceParseError, InstanceReferenceError,
    InstanceValidationError, UndefinedRatioError, ContractError
)
from services import get_codec_service, get_instance_service, get_generator_service
from utils import parse_rational, format_rational, ceil_fraction, is_unit_fraction

F = Fraction


def small_instance() -> Instance:
    """Two advertisers, three slots, mixed bids"""
    return Instance(
        advertisers=(Advertiser(0, F(1)), Advertiser(1, F(2))),
        slots=(
            AdSlot(0, ((0, F(1, 2)), (1, F(1)))),
            AdSlot(1, ((0, F(1, 3)),)),
            AdSlot(2, ((1, F(2)),)),
        ),
        meta=InstanceMeta(claimed_k=1, claimed_d=2, generator_tag="hand")
    )


def test_rational_helpers():
    print("Testing rational helpers...")

    assert parse_rational("3/6") == F(1, 2)
    assert parse_rational(" 7 ") == 7
    assert parse_rational(4) == 4
    assert format_rational(F(6, 3)) == "2"
    assert format_rational(F(-1, 3)) == "-1/3"
    assert ceil_fraction(F(7, 2)) == 4
    assert ceil_fraction(F(4)) == 4
    assert is_unit_fraction(F(1, 5))
    assert not is_unit_fraction(F(2, 5))

    for bad in ("0.5", "1/0", "a/b", True):
        with pytest.raises(ValueError):
            parse_rational(bad)

    print("[OK] Rational helpers working correctly")


def test_instance_invariants():
    print("Testing instance invariants...")

    with pytest.raises(InstanceValidationError):
        Advertiser(0, F(0))
    with pytest.raises(InstanceValidationError):
        AdSlot(0, ((0, F(1)), (0, F(1))))
    with pytest.raises(InstanceValidationError):
        Instance((Advertiser(0, F(1)),), (AdSlot(0, ((0, F(2)),)),))
    with pytest.raises(InstanceReferenceError):
        Instance((Advertiser(0, F(1)),), (AdSlot(0, ((3, F(1)),)),))
    with pytest.raises(InstanceValidationError):
        Instance((Advertiser(1, F(1)),), ())

    instance = small_instance()
    assert instance.edge_count == 4
    assert instance.max_slot_degree == 2
    assert instance.degrees() == [2, 2]
    assert instance.bid_mass() == [F(5, 6), F(3)]
    assert instance.max_ratios() == [F(1, 2), F(1)]
    assert not instance.is_unweighted
    assert not instance.is_vertex_weighted
    assert not instance.is_equal_bids

    print("[OK] Instance invariants enforced")


def test_validate_kd_reports_outliers():
    print("Testing (k,d) validation...")

    service = get_instance_service()
    instance = small_instance()

    report = service.validate_kd(instance, 1, 2)
    assert not report.is_kd
    assert report.outliers == frozenset({0})
    assert report.alpha == F(1, 3)
    assert report.oversized_slots == ()
    assert report.d_observed == 2

    narrow = service.validate_kd(instance, 1, 1)
    assert narrow.oversized_slots == (0,)

    # advertiser 0 has two edges (degree form holds) but only 5/6 of its budget in bids
    assert 0 in report.form_disagreements

    with pytest.raises(ContractError):
        service.validate_kd(instance, 0, 2)

    tight = get_generator_service().gen_greedy_tight(7, 4).source
    assert service.validate_kd(tight, 7, 4).is_kd

    print("[OK] Validation reports instead of raising")


def test_r_max_and_feasibility():
    print("Testing R_max and feasible neighbors...")

    service = get_instance_service()
    instance = small_instance()
    assert service.compute_r_max(instance) == 1

    with pytest.raises(UndefinedRatioError):
        service.compute_r_max(Instance((Advertiser(0, F(1)),), ()))

    slot = instance.slots[0]
    assert service.feasible_neighbors(instance, slot, [F(0), F(0)]) == {0, 1}
    assert service.feasible_neighbors(instance, slot, [F(1, 2), F(3, 2)]) == {0}
    assert service.feasible_neighbors(instance, slot, [F(2, 3), F(1)]) == {1}

    print("[OK] R_max and feasibility working correctly")


def test_codec_keeps_rationals_exact(tmp_path):
    print("Testing instance codec...")

    codec = get_codec_service()
    instance = small_instance()
    path = codec.save_instance(instance, tmp_path / "small.json")
    text = path.read_text(encoding="utf-8")
    assert '"1/3"' in text
    assert "0.33" not in text

    loaded = codec.load_instance(path)
    assert loaded == instance
    assert codec.fingerprint(loaded) == codec.fingerprint(instance)
    assert codec.fingerprint(instance.with_meta(generator_tag="other")) == codec.fingerprint(instance)

    print("[OK] Codec keeps rationals exact")


def test_codec_reports_field_paths():
    print("Testing codec error reporting...")

    codec = get_codec_service()

    with pytest.raises(InstanceParseError) as excinfo:
        codec.loads('{"advertisers": [{"id": 0, "budget": "0.5"}], "slots": []}')
    assert excinfo.value.field_path == "advertisers[0].budget"

    with pytest.raises(InstanceParseError) as excinfo:
        codec.loads('{"advertisers": [{"id": 0, "budget": "1"}], "slots": [{"id": 0, "edges": [{"adv": 0}]}]}')
    assert excinfo.value.field_path == "slots[0].edges[0].bid"

    with pytest.raises(InstanceParseError) as excinfo:
        codec.loads('{"advertisers": [}')
    assert excinfo.value.line == 1

    with pytest.raises(InstanceReferenceError):
        codec.loads('{"advertisers": [{"id": 0, "budget": "1"}], '
                    '"slots": [{"id": 0, "edges": [{"adv": 4, "bid": "1"}]}]}')

    print("[OK] Parse errors name the offending field")


def test_adaptive_recipe_survives_the_codec(tmp_path):
    print("Testing adaptive recipes in the codec...")

    codec = get_codec_service()
    source = get_generator_service().gen_high_degree_ub(2, 2, adaptive=True).source
    path = codec.save_instance(source, tmp_path / "adaptive.json")
    assert '"adaptive"' in path.read_text(encoding="utf-8")

    loaded = codec.load_instance(path)
    assert loaded.is_adaptive
    assert loaded.budgets == source.budgets
    assert loaded.meta.known_opt == source.meta.known_opt

    print("[OK] Adaptive recipes reload")


if __name__ == "__main__":
    import tempfile

    try:
        test_rational_helpers()
        test_instance_invariants()
        test_validate_kd_reports_outliers()
        test_r_max_and_feasibility()
        with tempfile.TemporaryDirectory() as scratch:
            test_codec_keeps_rationals_exact(Path(scratch))
            test_adaptive_recipe_survives_the_codec(Path(scratch))
        test_codec_reports_field_paths()
        print("\n[SUCCESS] All instance service tests passed!")
        sys.exit(0)
    except Exception as e:
        print(f"[ERROR] Instance service test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
