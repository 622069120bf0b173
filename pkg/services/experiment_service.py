"""
Experiment service for the adalloc toolkit.

Closed-form competitive ratios (exact where they are rational, mpmath where
they are not), the per-algorithm bound an experiment is held to, and the
experiment runner that turns runs, certificates and optima into CSV rows.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
import pandas as pd

from models import (
    Instance, ArrivalSource, AlgorithmKind, RunTrace, OptKind, OptCertificate, CertificationReport,
    ExperimentSpec, BoundRow, ExperimentReport, REPORT_COLUMNS, ParameterError, TraceMismatchError
)
from utils import get_config, get_logger, log_operation, format_rational, ceil_fraction
from .allocation_service import AllocationService, get_allocation_service
from .certification_service import CertificationService, get_certification_service
from .codec_service import CodecService, get_codec_service
from .generator_service import GeneratorService, get_generator_service
from .instance_service import InstanceService, get_instance_service
from .oracle_service import OracleService, get_oracle_service

logger = get_logger(__name__)


# Closed forms

def matching_bound(k: int, d: int) -> Fraction:
    """1 - (1 - 1/d)^k"""
    return 1 - (1 - Fraction(1, d)) ** k


def greedy_matching_bound(k: int, d: int) -> Fraction:
    return Fraction(k, k + d - 1)


def greedy_bound(k: int, d: int, rate: Fraction) -> Fraction:
    """(1-R) k / (k + (d-1)(1-R))"""
    keep = 1 - Fraction(rate)
    return keep * k / (k + (d - 1) * keep)


def det_bound(k: int, d: int, rate: Fraction) -> Fraction:
    """(1-R)(1 - (1-1/d)^k)"""
    return (1 - Fraction(rate)) * matching_bound(k, d)


def guaranteed_matched(k: int, d: int, n: int) -> int:
    """Advertisers high-degree matches at least on a (k,d)-bounded instance with n advertisers"""
    return ceil_fraction(matching_bound(k, d) * n)


def saturates_all(k: int, d: int, n: int) -> bool:
    """True when (1-1/d)^k n < 1, i.e. high-degree must match every advertiser"""
    return (1 - Fraction(1, d)) ** k * n < 1


def _mp(value: Fraction) -> mpmath.mpf:
    return mpmath.mpf(value.numerator) / value.denominator


class ExperimentService:
    """
    Service for bound tables and experiments.
    Reports are deterministic: the same spec and seed give the same CSV bytes.
    """

    def __init__(self, allocation_service: Optional[AllocationService] = None,
                 certification_service: Optional[CertificationService] = None,
                 oracle_service: Optional[OracleService] = None,
                 generator_service: Optional[GeneratorService] = None,
                 instance_service: Optional[InstanceService] = None,
                 codec_service: Optional[CodecService] = None):
        self.allocation = allocation_service or get_allocation_service()
        self.certification = certification_service or get_certification_service()
        self.oracle = oracle_service or get_oracle_service()
        self.generators = generator_service or get_generator_service()
        self.instances = instance_service or get_instance_service()
        self.codec = codec_service or get_codec_service()
        self.config = get_config()

    # Bounds

    def bounds_table(self, rates: Sequence[Fraction],
                     kd_pairs: Optional[Iterable[Tuple[int, int]]] = None) -> List[BoundRow]:
        """
        Closed-form ratios per R, and per (R, k, d) when pairs are given.

        The asymptotic columns (1-R)(1-e^(-1/R)) and (1-R)(1-(1+R)^(-1/R))
        and the estimate 1-e^(-k/d) are mpmath values at the configured
        precision; all other columns are exact.
        """
        pairs = list(kd_pairs or [])
        rows = []
        with mpmath.workdps(self.config.precision_digits):
            for rate in rates:
                rate = Fraction(rate)
                if not 0 < rate < 1:
                    raise ParameterError(f"bounds need 0 < R < 1, got {rate}")
                r = _mp(rate)
                ours = (1 - r) * (1 - mpmath.exp(-1 / r))
                sota = (1 - r) * (1 - mpmath.power(1 + r, -1 / r))
                if not pairs:
                    rows.append(BoundRow(r=rate, asymptotic_ours=ours, asymptotic_sota=sota))
                for k, d in pairs:
                    if k < 1 or d < 1:
                        raise ParameterError(f"bounds need k, d >= 1, got ({k},{d})")
                    rows.append(BoundRow(
                        r=rate,
                        k=k,
                        d=d,
                        greedy_bound=greedy_bound(k, d, rate),
                        greedy_matching_bound=greedy_matching_bound(k, d),
                        matching_bound=matching_bound(k, d),
                        det_bound=det_bound(k, d, rate),
                        exponential_bound=1 - mpmath.exp(-mpmath.mpf(k) / d),
                        asymptotic_ours=ours,
                        asymptotic_sota=sota
                    ))
        return rows

    def algorithm_bound(self, kind: AlgorithmKind, instance: Instance, k: Optional[int],
                        d: Optional[int]) -> Optional[Fraction]:
        """
        Ratio the algorithm is guaranteed on this (realized) instance, scaled by
        1 - alpha for outliers; None when no guarantee applies.
        """
        if kind is AlgorithmKind.RANKING or k is None or instance.edge_count == 0:
            return None
        d = d if d is not None else max(1, instance.max_slot_degree)
        report = self.instances.validate_kd(instance, k, d)
        if report.oversized_slots:
            return None

        rate = self.instances.compute_r_max(instance)
        simple = instance.is_unweighted or instance.is_vertex_weighted or instance.is_equal_bids
        if kind is AlgorithmKind.GREEDY:
            bound = greedy_matching_bound(k, d) if simple else greedy_bound(k, d, rate)
        elif kind in (AlgorithmKind.HIGH_DEGREE, AlgorithmKind.EQUAL_BIDS):
            bound = matching_bound(k, d)
        elif kind is AlgorithmKind.GENERAL_BIDS:
            bound = det_bound(k, d, rate)
        else:
            bound = matching_bound(k, d) if simple else det_bound(k, d, rate)
        return (1 - report.alpha) * bound

    # Experiments

    def load_source(self, spec: ExperimentSpec) -> Tuple[ArrivalSource, Any]:
        if spec.instance_path:
            return self.codec.load_instance(spec.instance_path), None
        generated = self.generators.generate(spec.generator, spec.generator_params)
        return generated.source, generated.script

    @staticmethod
    def _ratio(revenue: Fraction, opt: OptCertificate) -> Fraction:
        return revenue / opt.value if opt.value > 0 else Fraction(1)

    @staticmethod
    def _verdict(value: Fraction, bound: Optional[Fraction], opt_kind: OptKind,
                 slack: float = 0.0) -> str:
        if bound is None:
            return "n/a"
        met = float(value) >= float(bound) - slack if slack else value >= bound
        if met:
            return "true"
        return "unknown" if opt_kind is OptKind.UPPER_BOUND else "false"

    def _row(self, spec: ExperimentSpec, trace: RunTrace, revenue: Fraction, opt: OptCertificate,
             ratio: Fraction, bound: Optional[Fraction], verdict: str, seed: Optional[int]) -> Dict[str, Any]:
        instance = trace.instance
        r_max = self.instances.compute_r_max(instance) if instance.edge_count else None
        return {
            "instance": spec.label,
            "algorithm": spec.algorithm.value,
            "k": trace.k if trace.k is not None else "",
            "d": trace.d if trace.d is not None else "",
            "r_max": format_rational(r_max) if r_max is not None else "",
            "revenue": format_rational(revenue),
            "opt": format_rational(opt.value),
            "opt_kind": opt.kind.value,
            "ratio": format_rational(ratio),
            "bound": format_rational(bound) if bound is not None else "",
            "bound_met": verdict,
            "seed": seed if seed is not None else "",
            "trials": spec.trials if spec.algorithm.is_randomized else 1
        }

    def run_experiment(self, spec: ExperimentSpec) -> ExperimentReport:
        """
        Run one experiment and write its CSV row when a report path is set.

        Deterministic algorithms run once and are certified at spec.verify;
        randomized ones run spec.trials times on seeds split from spec.seed
        and are judged on mean >= bound - 3 * stderr.
        """
        problems = spec.validate()
        if problems:
            raise ParameterError("; ".join(problems))

        source, script = self.load_source(spec)
        tie = spec.tie
        if tie is None and spec.algorithm is AlgorithmKind.GREEDY:
            tie = script
        report = ExperimentReport(spec)

        if spec.algorithm.is_randomized:
            self._run_trials(spec, source, report)
        else:
            result, trace, _ = self.allocation.run(spec.algorithm, source, spec.k, spec.d, tie)
            opt = self.oracle.best_certificate(trace.instance)
            ratio = self._ratio(result.revenue, opt)
            report.bound = self.algorithm_bound(spec.algorithm, trace.instance, trace.k, trace.d)
            report.certification = self.certification.certify_run(trace, spec.verify)
            report.trace = trace
            report.ratios = [ratio]
            report.mean_ratio = ratio
            report.bound_met = self._verdict(ratio, report.bound, opt.kind)
            report.rows.append(self._row(spec, trace, result.revenue, opt, ratio, report.bound,
                                         report.bound_met, None))

        logger.info(f"{spec.label} / {spec.algorithm.value}: ratio {report.mean_ratio}, "
                    f"bound {report.bound}, met {report.bound_met}")
        if spec.report_path:
            self.write_report(report.rows, spec.report_path)
        return report

    def _run_trials(self, spec: ExperimentSpec, source: ArrivalSource, report: ExperimentReport):
        seeds = [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(spec.seed).spawn(spec.trials)]
        static_opt = self.oracle.best_certificate(source) if isinstance(source, Instance) else None

        def run_trial(seed: int) -> Tuple[Fraction, RunTrace, OptCertificate]:
            result, trace, _ = self.allocation.run(spec.algorithm, source, spec.k, spec.d, seed=seed)
            return result.revenue, trace, static_opt or self.oracle.best_certificate(trace.instance)

        # results are reduced in seed order whatever order the workers finish in
        outcomes: Dict[int, Tuple[Fraction, RunTrace, OptCertificate]] = {}
        label = f"{spec.trials} {spec.algorithm.value} trials on {spec.label}"
        with log_operation(logger, label) as trial_log:
            with ThreadPoolExecutor(max_workers=min(self.config.trial_workers, len(seeds))) as executor:
                future_to_index = {executor.submit(run_trial, seed): index for index, seed in enumerate(seeds)}
                for future in as_completed(future_to_index):
                    outcomes[future_to_index[future]] = future.result()
                    trial_log.progress(len(outcomes), len(seeds))

            revenues: List[Fraction] = []
            for index in range(len(seeds)):
                revenue, trace, opt = outcomes[index]
                revenues.append(revenue)
                report.ratios.append(self._ratio(revenue, opt))
            mean_revenue = sum(revenues, Fraction(0)) / len(revenues)
            trial_log.record(f"mean revenue {mean_revenue}")

        ratios = pd.Series([float(ratio) for ratio in report.ratios])
        report.mean_ratio = sum(report.ratios, Fraction(0)) / len(report.ratios)
        if len(ratios) > 1:
            report.std_ratio = float(ratios.std())
            report.stderr_ratio = float(ratios.sem())
        k = spec.k if spec.k is not None else source.meta.claimed_k
        d = spec.d if spec.d is not None else source.meta.claimed_d
        report.trace = trace
        report.bound = self.algorithm_bound(spec.algorithm, trace.instance, k, d)
        report.bound_met = self._verdict(report.mean_ratio, report.bound, opt.kind,
                                         3 * (report.stderr_ratio or 0.0))

        row = self._row(spec, trace, mean_revenue, opt, report.mean_ratio, report.bound, report.bound_met, spec.seed)
        if k is not None:
            row["k"] = k
        if d is not None:
            row["d"] = d
        report.rows.append(row)

    def write_report(self, rows: List[Dict[str, Any]], path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
        frame.to_csv(path, index=False)
        logger.info(f"Wrote {len(rows)} report rows to {path}")
        return path

    def certify(self, trace_path, instance_path, level: Optional[str] = None) -> CertificationReport:
        """Certify a trace file against the realized instance file written next to it"""
        trace, header = self.codec.load_trace(trace_path)
        instance = self.codec.load_instance(instance_path)
        if not isinstance(instance, Instance):
            raise TraceMismatchError("certify needs the realized static instance, not an adaptive recipe")
        if header.get("advertisers") is not None and header["advertisers"] != len(instance.advertisers):
            raise TraceMismatchError(f"trace has {header['advertisers']} advertisers, "
                                     f"instance has {len(instance.advertisers)}")
        return self.certification.certify_trace(instance, trace, level)


def get_experiment_service() -> ExperimentService:
    """Get experiment service instance"""
    return ExperimentService()
