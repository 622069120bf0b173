#!/usr/bin/env python3
"""
Test script for bound tables, experiments and CSV reports.
"""

import logging
import sys
from fractions import Fraction
from pathlib import Path

import pandas as pd
import pytest

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent))

from models import (
    AlgorithmKind, ExperimentSpec, ExperimentReport, OptKind, ParameterError, REPORT_COLUMNS
)
from services import (
    get_experiment_service, get_generator_service, matching_bound, greedy_matching_bound,
    greedy_bound, det_bound, guaranteed_matched, saturates_all
)

F = Fraction


def test_closed_forms():
    print("Testing closed-form bounds...")

    assert matching_bound(7, 4) == 1 - F(3, 4) ** 7
    assert matching_bound(7, 4) == F(14197, 16384)
    assert greedy_matching_bound(7, 4) == F(7, 10)
    assert greedy_bound(7, 4, F(1, 2)) == F(7, 17)
    assert det_bound(7, 4, F(1, 2)) == F(14197, 32768)
    assert guaranteed_matched(3, 2, 16) == 14
    assert saturates_all(7, 4, 7)
    assert not saturates_all(7, 4, 8)

    print("[OK] Closed forms are exact")


def test_bounds_table():
    print("Testing the bounds table...")

    service = get_experiment_service()
    rows = service.bounds_table([F(1, 2)])
    assert len(rows) == 1
    assert float(rows[0].asymptotic_ours) == pytest.approx(0.432332, abs=1e-6)
    assert float(rows[0].asymptotic_sota) == pytest.approx(0.277778, abs=1e-6)
    assert rows[0].matching_bound is None

    rows = service.bounds_table([F(1, 2), F(1, 3)], [(7, 4), (2, 2)])
    assert len(rows) == 4
    assert rows[0].det_bound == det_bound(7, 4, F(1, 2))
    assert float(rows[0].exponential_bound) == pytest.approx(1 - 2.718281828459045 ** (-7 / 4), abs=1e-12)

    with pytest.raises(ParameterError):
        service.bounds_table([F(1)])
    with pytest.raises(ParameterError):
        service.bounds_table([F(1, 2)], [(0, 2)])

    print("[OK] Bounds table working correctly")


def test_algorithm_bound():
    print("Testing per-algorithm bounds...")

    service = get_experiment_service()
    generator = get_generator_service()
    tight = generator.gen_greedy_tight(7, 4).source
    assert service.algorithm_bound(AlgorithmKind.GREEDY, tight, 7, 4) == F(7, 10)
    assert service.algorithm_bound(AlgorithmKind.HIGH_DEGREE, tight, 7, 4) == matching_bound(7, 4)
    assert service.algorithm_bound(AlgorithmKind.RANKING, tight, 7, 4) is None
    assert service.algorithm_bound(AlgorithmKind.GREEDY, tight, 7, 3) is None

    composite = generator.gen_outlier_composite(generator.gen_greedy_tight(3, 2).source, F(1, 5)).source
    assert service.algorithm_bound(AlgorithmKind.GREEDY, composite, 3, 2) == F(4, 5) * F(3, 4)

    print("[OK] Bounds scaled by 1 - alpha")


def test_verdicts():
    print("Testing bound verdicts...")

    service = get_experiment_service()
    assert service._verdict(F(3, 4), F(3, 4), OptKind.EXACT) == "true"
    assert service._verdict(F(1, 2), F(3, 4), OptKind.EXACT) == "false"
    assert service._verdict(F(1, 2), F(3, 4), OptKind.UPPER_BOUND) == "unknown"
    assert service._verdict(F(1, 2), None, OptKind.EXACT) == "n/a"
    assert service._verdict(F(7, 10), F(3, 4), OptKind.EXACT, slack=0.1) == "true"

    report = ExperimentReport(ExperimentSpec(AlgorithmKind.GREEDY, generator="greedy-tight"))
    report.bound_met = "false"
    assert report.exit_code == 2

    print("[OK] Verdicts and exit codes consistent")


def test_greedy_experiment_reports_the_tight_ratio(tmp_path):
    print("Testing a greedy experiment...")

    service = get_experiment_service()
    spec = ExperimentSpec(
        algorithm=AlgorithmKind.GREEDY,
        generator="greedy-tight",
        generator_params={"k": "7", "d": "4"},
        verify="full",
        report_path=str(tmp_path / "greedy.csv")
    )
    report = service.run_experiment(spec)

    assert report.mean_ratio == F(7, 10)
    assert report.bound == F(7, 10)
    assert report.bound_met == "true"
    assert report.certification.passed
    assert report.exit_code == 0
    row = report.rows[0]
    assert row["revenue"] == "7"
    assert row["opt"] == "10"
    assert row["opt_kind"] == "exact"
    assert row["instance"] == "greedy-tight(d=4,k=7)"

    frame = pd.read_csv(tmp_path / "greedy.csv", dtype=str, keep_default_na=False)
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.loc[0, "ratio"] == "7/10"

    print("[OK] Greedy experiment reports k/(k+d-1)")


def test_high_degree_experiment_meets_its_bound():
    print("Testing a high-degree experiment...")

    report = get_experiment_service().run_experiment(ExperimentSpec(
        algorithm=AlgorithmKind.HIGH_DEGREE,
        generator="high-degree-ub",
        generator_params={"k": "3", "d": "2"}
    ))
    assert report.mean_ratio == F(7, 8)
    assert report.bound == F(7, 8)
    assert report.bound_met == "true"

    print("[OK] High-degree meets 1-(1-1/d)^k exactly")


def test_randomized_experiment_aggregates_trials():
    print("Testing randomized trials...")

    service = get_experiment_service()
    spec = ExperimentSpec(
        algorithm=AlgorithmKind.RANKING,
        generator="random",
        generator_params={"k": "2", "d": "3", "nL": "6", "nR": "6", "seed": "3"},
        trials=8,
        seed=4
    )
    first = service.run_experiment(spec)
    second = service.run_experiment(spec)

    assert len(first.ratios) == 8
    assert first.ratios == second.ratios
    assert first.std_ratio is not None
    assert first.stderr_ratio == pytest.approx(first.std_ratio / 8 ** 0.5)
    assert first.bound_met == "n/a"
    assert first.rows[0]["trials"] == 8
    assert all(0 < ratio <= 1 for ratio in first.ratios)

    print("[OK] Trials aggregate deterministically")


def test_trial_results_do_not_depend_on_the_worker_count():
    print("Testing trials across worker counts...")

    service = get_experiment_service()
    spec = ExperimentSpec(
        algorithm=AlgorithmKind.RANDOM,
        generator="random",
        generator_params={"k": "2", "d": "2", "nL": "6", "nR": "8", "seed": "1"},
        trials=12,
        seed=9
    )
    workers = service.config.trial_workers
    try:
        service.config.trial_workers = 1
        serial = service.run_experiment(spec)
        service.config.trial_workers = 4
        pooled = service.run_experiment(spec)
    finally:
        service.config.trial_workers = workers

    assert serial.ratios == pooled.ratios
    assert serial.rows == pooled.rows

    print("[OK] Trials reduce in seed order")


class _Collect(logging.Handler):
    def __init__(self):
        super().__init__(logging.DEBUG)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def test_runs_and_trials_are_logged():
    print("Testing run, certification and trial logging...")

    collect = _Collect()
    root = logging.getLogger("adalloc")
    level = root.level
    root.addHandler(collect)
    root.setLevel(logging.INFO)
    try:
        service = get_experiment_service()
        service.run_experiment(ExperimentSpec(
            algorithm=AlgorithmKind.GREEDY,
            generator="greedy-tight",
            generator_params={"k": "3", "d": "2"},
            verify="full"
        ))
        service.run_experiment(ExperimentSpec(
            algorithm=AlgorithmKind.RANKING,
            generator="random",
            generator_params={"k": "2", "d": "3", "nL": "6", "nR": "6", "seed": "3"},
            trials=10
        ))
    finally:
        root.removeHandler(collect)
        root.setLevel(level)

    completed = [message for message in collect.messages if message.startswith("Completed: ")]
    assert any(message.startswith("Completed: greedy run over 4 advertisers - revenue 3 ")
               for message in completed)
    assert any(message.startswith("Completed: certifying greedy trace at level full - ")
               and "passed=True" in message for message in completed)
    assert any(message.startswith("Completed: 10 ranking trials on random(") and "mean revenue" in message
               for message in completed)
    assert any(message.endswith("] 10/10") for message in collect.messages)

    print("[OK] Operations log their outcome")


def test_invalid_spec_is_rejected():
    print("Testing spec validation...")

    service = get_experiment_service()
    with pytest.raises(ParameterError):
        service.run_experiment(ExperimentSpec(AlgorithmKind.GREEDY))
    with pytest.raises(ParameterError):
        service.run_experiment(ExperimentSpec(AlgorithmKind.GREEDY, instance_path="x.json", generator="star"))
    with pytest.raises(ParameterError):
        service.run_experiment(ExperimentSpec(AlgorithmKind.RANDOM, generator="star", trials=0))

    print("[OK] Invalid specs rejected")


if __name__ == "__main__":
    import tempfile

    try:
        test_closed_forms()
        test_bounds_table()
        test_algorithm_bound()
        test_verdicts()
        with tempfile.TemporaryDirectory() as scratch:
            test_greedy_experiment_reports_the_tight_ratio(Path(scratch))
        test_high_degree_experiment_meets_its_bound()
        test_randomized_experiment_aggregates_trials()
        test_trial_results_do_not_depend_on_the_worker_count()
        test_runs_and_trials_are_logged()
        test_invalid_spec_is_rejected()
        print("\n[SUCCESS] All experiment service tests passed!")
        sys.exit(0)
    except Exception as e:
        print(f"[ERROR] Experiment service test failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
