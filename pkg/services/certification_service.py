"""
Certification service for the adalloc toolkit.

Checks that a run's duals certify its revenue: LP dual feasibility, the
per-arrival ratio audit, the high-degree potential, and the general-bids
digit and normalization lemmas. certify_trace() rebuilds everything from a
trace file and the instance it was recorded on, so it trusts nothing the
runner computed except what the trace states.
"""

from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from models import (
    Instance, AlgorithmKind, RunTrace, ArrivalRecord, DualState, DigitVector,
    NormalizationEvent, EdgeViolation, AuditResult, PotentialTracker, LemmaReport,
    CheckOutcome, CertificationReport, TraceMismatchError
)
from utils import VERIFY_LEVELS, get_config, get_logger, log_operation
from .codec_service import CodecService, get_codec_service
from .instance_service import InstanceService, get_instance_service

logger = get_logger(__name__)

PRIMAL_DUAL_KINDS = (AlgorithmKind.HIGH_DEGREE, AlgorithmKind.EQUAL_BIDS, AlgorithmKind.GENERAL_BIDS)
MONOTONE_DUAL_KINDS = (AlgorithmKind.GREEDY, AlgorithmKind.HIGH_DEGREE, AlgorithmKind.EQUAL_BIDS)


def ratio_bound(trace: RunTrace) -> Optional[Fraction]:
    """Per-arrival DeltaD / DeltaP bound the algorithm's analysis promises, None when there is none"""
    if trace.algorithm is AlgorithmKind.GREEDY:
        return Fraction(trace.k + trace.d - 1, trace.k)
    if trace.algorithm in PRIMAL_DUAL_KINDS:
        return 1 + trace.scaling
    return None


class CertificationService:
    """
    Service for checking dual certificates.
    Every check is exact and reports failures instead of raising.
    """

    def __init__(self, instance_service: Optional[InstanceService] = None,
                 codec_service: Optional[CodecService] = None):
        self.instances = instance_service or get_instance_service()
        self.codec = codec_service or get_codec_service()

    # Dual feasibility and ratio

    def check_dual_feasibility(self, instance: Instance, duals: DualState) -> List[EdgeViolation]:
        """Edges where b_ij z_i + y_j >= b_ij fails"""
        violations = []
        for slot, adv, bid in instance.edges():
            y = duals.y[slot] if slot < len(duals.y) else Fraction(0)
            slack = bid * duals.z[adv] + y - bid
            if slack < 0:
                violations.append(EdgeViolation(slot, adv, bid, slack))
        return violations

    def audit_ratio(self, trace: RunTrace, bound: Fraction) -> AuditResult:
        """DeltaD <= bound * DeltaP at every matched arrival and D <= bound * P before finalization"""
        primal, dual = Fraction(0), Fraction(0)
        for record in trace.arrivals:
            primal += record.delta_primal
            dual += record.delta_dual
            if record.matched and record.delta_dual > bound * record.delta_primal:
                return AuditResult(False, bound, record.index,
                                   f"arrival {record.index}: dD={record.delta_dual} > {bound} * dP={record.delta_primal}")
            if not record.matched and record.delta_dual > 0:
                return AuditResult(False, bound, record.index,
                                   f"arrival {record.index}: unmatched slot raised the dual by {record.delta_dual}")
            if dual > bound * primal:
                return AuditResult(False, bound, record.index,
                                   f"after arrival {record.index}: D={dual} > {bound} * P={primal}")
        return AuditResult(True, bound)

    # Potential

    def potential_step(self, tracker: PotentialTracker, neighbors: Iterable[int],
                       decision: Optional[int]) -> Fraction:
        """
        Apply one arrival to the tracker and return the exact change in phi.

        Unmatched neighbors each gain one degree, multiplying their term by
        d/(d-1); the matched advertiser's term leaves phi.
        """
        before = tracker.phi
        for adv in neighbors:
            if adv in tracker.unmatched:
                tracker.phi += tracker.term(adv) / (tracker.d - 1)
            tracker.degrees[adv] += 1
        if decision is not None and decision in tracker.unmatched:
            tracker.phi -= tracker.term(decision)
            tracker.unmatched.discard(decision)
        return tracker.phi - before

    def replay_potential(self, instance: Instance, trace: RunTrace, d: int) -> Tuple[List[Fraction], PotentialTracker]:
        """Delta phi of every arrival of a matching trace"""
        tracker = PotentialTracker.start(len(instance.advertisers), d)
        deltas = [
            self.potential_step(tracker, instance.slots[record.index].neighbors(), record.decision)
            for record in trace.arrivals
        ]
        return deltas, tracker

    # General-bids lemmas

    def check_digit_lemma(self, duals: DualState, instance: Instance, k: int, d: int,
                          advertisers: Optional[Iterable[int]] = None) -> LemmaReport:
        """
        Current-copy digit vectors have at most k places, at most k-1 non-null
        digits, and no digit above the advertiser's largest bid-to-budget ratio.
        """
        report = LemmaReport("digits")
        max_ratios = instance.max_ratios()
        for adv in (range(len(duals.z)) if advertisers is None else advertisers):
            pending = duals.zc[adv]
            if not isinstance(pending, DigitVector):
                report.fail(adv, "pending dual is not a digit vector")
                continue
            if pending.d != d:
                report.fail(adv, f"digit vector base uses d={pending.d}, expected {d}")
            if pending.places > k:
                report.fail(adv, f"{pending.places} places > k={k}")
            if pending.non_null_count() > k - 1:
                report.fail(adv, f"{pending.non_null_count()} non-null digits > k-1={k - 1}")
            if pending.places and pending.max_digit() > max_ratios[adv]:
                report.fail(adv, f"digit {pending.max_digit()} exceeds max ratio {max_ratios[adv]}")
        return report

    def check_almost_feasible(self, duals: DualState, instance: Instance, k: int) -> LemmaReport:
        """
        Before the final raise to one: z_i >= offered_i/k - max ratio for every
        advertiser, and z_i >= 1 - max ratio for every non-outlier. Outliers are
        reported in `skipped`.
        """
        report = LemmaReport("almost-feasible")
        masses = instance.bid_mass()
        max_ratios = instance.max_ratios()
        for advertiser in instance.advertisers:
            adv = advertiser.id
            z = duals.z[adv]
            floor = duals.offered[adv] / k - max_ratios[adv]
            if z < floor:
                report.fail(adv, f"z={z} < offered/k - max ratio = {floor}")
            if masses[adv] < k * advertiser.budget:
                report.skipped.add(adv)
                continue
            if z < 1 - max_ratios[adv]:
                report.fail(adv, f"z={z} < 1 - max ratio = {1 - max_ratios[adv]}")
        return report

    def check_normalization_events(self, events: Sequence[NormalizationEvent], k: int) -> LemmaReport:
        """Every raise of z_i is paid for by an at least equal drop in value(z_i^c)"""
        report = LemmaReport("normalization")
        for event in events:
            adv = event.advertiser
            if event.kind == "match":
                if event.value_drop > event.z_gain:
                    report.fail(adv, f"match dropped {event.value_drop} > gain {event.z_gain}")
                if event.digit_drop > (k - 1) * event.z_gain:
                    report.fail(adv, f"match digit drop {event.digit_drop} > (k-1) * {event.z_gain}")
            elif event.kind == "overflow":
                if event.value_drop < event.z_gain:
                    report.fail(adv, f"overflow dropped {event.value_drop} < gain {event.z_gain}")
            elif event.kind == "common":
                if event.value_drop != event.z_gain or event.digit_drop != k * event.z_gain:
                    report.fail(adv, f"common extraction dropped {event.value_drop} (digits {event.digit_drop}) "
                                     f"for gain {event.z_gain}")
            else:
                report.fail(adv, f"unknown event kind {event.kind!r}")
        return report

    # Trace certification

    def _replay(self, instance: Instance, trace: RunTrace, report: CertificationReport) -> Optional[List[Fraction]]:
        """Recompute feasibility, decisions and spend; returns the offered mass per advertiser"""
        budgets = instance.budgets
        spend = [Fraction(0)] * len(budgets)
        offered = [Fraction(0)] * len(budgets)
        revenue = Fraction(0)

        def fail(record: ArrivalRecord, detail: str) -> None:
            report.add(CheckOutcome("replay", False, record.index,
                                    {"arrival": record.index, "slot": record.slot_id}, detail))

        for position, record in enumerate(trace.arrivals):
            if record.index != position or record.slot_id != position:
                fail(record, f"record {position} names arrival {record.index}, slot {record.slot_id}")
                return None
            slot = instance.slots[position]
            feasible = tuple(sorted(self.instances.feasible_neighbors(instance, slot, spend)))
            if feasible != record.feasible:
                fail(record, f"feasible set {list(record.feasible)} differs from {list(feasible)}")
                return None
            for adv in feasible:
                offered[adv] += slot.bid_for(adv) / budgets[adv]
            if record.decision is None:
                if feasible:
                    fail(record, f"slot skipped with feasible neighbors {list(feasible)}")
                    return None
                if record.delta_primal != 0 or record.bid != 0:
                    fail(record, "unmatched slot reports a primal gain")
                    return None
                continue
            if record.decision not in feasible:
                fail(record, f"advertiser {record.decision} is not feasible")
                return None
            bid = slot.bid_for(record.decision)
            if record.bid != bid or record.delta_primal != bid:
                fail(record, f"charged {record.bid} (dP {record.delta_primal}) but the bid is {bid}")
                return None
            spend[record.decision] += bid
            revenue += bid
            if spend[record.decision] > budgets[record.decision]:
                fail(record, f"advertiser {record.decision} overspent")
                return None

        report.add(CheckOutcome("replay", True, len(trace.arrivals)))
        report.add(CheckOutcome(
            "primal-sum", trace.total_primal == revenue, len(trace.arrivals),
            detail=f"sum dP={trace.total_primal}, revenue={revenue}"))
        return offered

    def _dual_states(self, instance: Instance, trace: RunTrace) -> DualState:
        """Fresh dual state shaped like the runner's"""
        digit_params = None
        if trace.algorithm is AlgorithmKind.GENERAL_BIDS:
            digit_params = (trace.d, trace.k, trace.scaling)
        duals = DualState.fresh(instance.budgets, digit_params)
        duals.y = [Fraction(0)] * len(instance.slots)
        return duals

    def _apply_snapshots(self, duals: DualState, record_snapshots, trace: RunTrace):
        for adv, snapshot in record_snapshots.items():
            duals.z[adv] = snapshot.z
            if snapshot.digits is not None:
                duals.zc[adv] = DigitVector(snapshot.digits, trace.d, trace.k, trace.scaling)
            else:
                duals.zc[adv] = snapshot.pending

    def certify_trace(self, instance: Instance, trace: RunTrace, level: Optional[str] = None) -> CertificationReport:
        """
        Certify a recorded run against the instance it ran on.

        Args:
            instance: The (realized) static instance of the run
            trace: Recorded trace, typically loaded from a trace file
            level: off (replay only), ratio (duals and ratio audit) or full (adds the lemma checks)

        Returns:
            CertificationReport; failures carry the offending arrival index
        """
        level = (level or get_config().default_verify_level).lower()
        if level not in VERIFY_LEVELS:
            raise ValueError(f"unknown verification level {level!r}")

        fingerprint = self.codec.fingerprint(instance)
        if trace.fingerprint is not None and trace.fingerprint != fingerprint:
            raise TraceMismatchError(f"trace was recorded on instance {trace.fingerprint}, got {fingerprint}")
        if len(trace.arrivals) != len(instance.slots):
            raise TraceMismatchError(
                f"trace has {len(trace.arrivals)} arrivals but the instance has {len(instance.slots)} slots")

        report = CertificationReport(trace.algorithm.value, level)
        with log_operation(logger, f"certifying {trace.algorithm.value} trace at level {level}") as cert_log:
            offered = self._replay(instance, trace, report)
            if offered is not None and level != "off":
                if trace.algorithm.keeps_duals:
                    self._certify_duals(instance, trace, level, offered, report)
                else:
                    report.warnings.append(f"{trace.algorithm.value} keeps no duals; only the replay was checked")
            cert_log.record(f"{len(report.checks)} checks, passed={report.passed}")

        if not report.passed:
            logger.error(f"Certification failed: {report.first_failure().name} {report.first_failure().detail}")
        return report

    def _certify_duals(self, instance: Instance, trace: RunTrace, level: str,
                       offered: List[Fraction], report: CertificationReport):
        k, d = trace.k, trace.d
        full = level == "full"
        duals = self._dual_states(instance, trace)
        kd_report = self.instances.validate_kd(instance, k, d)
        max_ratios = instance.max_ratios()

        # dual sums
        total = trace.total_dual
        report.add(CheckOutcome("dual-sum", total == trace.finalization.dual_cost, len(trace.arrivals) + 1,
                                detail=f"sum dD={total}, final dual cost={trace.finalization.dual_cost}"))

        bound = ratio_bound(trace)
        audit = self.audit_ratio(trace, bound)
        report.add(CheckOutcome(
            "ratio-audit", audit.passed, len(trace.arrivals),
            None if audit.passed else {"arrival": audit.offending_arrival},
            audit.message or f"bound {bound}"))

        lemma_failure: Optional[CheckOutcome] = None
        event_failure: Optional[CheckOutcome] = None
        monotone_failure: Optional[CheckOutcome] = None
        lp_dual = Fraction(0)
        for record in trace.arrivals:
            self._apply_snapshots(duals, record.snapshots, trace)
            if not full:
                continue
            if trace.algorithm is AlgorithmKind.GENERAL_BIDS:
                if lemma_failure is None:
                    digits = self.check_digit_lemma(duals, instance, k, d, record.snapshots.keys())
                    if not digits.passed:
                        adv, reason = next(iter(digits.failures.items()))
                        lemma_failure = CheckOutcome("digit-lemma", False, record.index,
                                                     {"arrival": record.index, "advertiser": adv}, reason)
                if event_failure is None:
                    events = self.check_normalization_events(record.events, k)
                    if not events.passed:
                        adv, reason = next(iter(events.failures.items()))
                        event_failure = CheckOutcome("normalization", False, record.index,
                                                     {"arrival": record.index, "advertiser": adv}, reason)
            if trace.algorithm in MONOTONE_DUAL_KINDS and monotone_failure is None:
                current = duals.dual_cost
                if current < lp_dual:
                    monotone_failure = CheckOutcome("dual-nondecreasing", False, record.index,
                                                    {"arrival": record.index}, f"dual fell from {lp_dual} to {current}")
                lp_dual = current

        if full and trace.algorithm is AlgorithmKind.GENERAL_BIDS:
            report.add(lemma_failure or CheckOutcome("digit-lemma", True, len(trace.arrivals)))
            report.add(event_failure or CheckOutcome("normalization", True, len(trace.arrivals)))
            duals.offered = offered
            almost = self.check_almost_feasible(duals, instance, k)
            failure = next(iter(almost.failures.items()), None)
            report.add(CheckOutcome(
                "almost-feasible", almost.passed, len(instance.advertisers) - len(almost.skipped),
                None if failure is None else {"advertiser": failure[0]},
                failure[1] if failure else f"{len(almost.skipped)} outliers skipped"))
        if full and trace.algorithm in MONOTONE_DUAL_KINDS:
            report.add(monotone_failure or CheckOutcome("dual-nondecreasing", True, len(trace.arrivals)))
        if full and trace.algorithm is AlgorithmKind.HIGH_DEGREE:
            self._certify_high_degree(instance, trace, duals, kd_report.is_kd, report)

        # finalization and LP feasibility
        self._apply_snapshots(duals, trace.finalization.snapshots, trace)
        if duals.dual_cost != trace.finalization.dual_cost:
            report.add(CheckOutcome("final-duals", False, len(instance.advertisers),
                                    detail=f"snapshots give D={duals.dual_cost}, trace states {trace.finalization.dual_cost}"))
        violations = self.check_dual_feasibility(instance, duals)
        hard = [violation for violation in violations if violation.advertiser not in kd_report.outliers]
        for violation in violations:
            if violation.advertiser in kd_report.outliers:
                report.warnings.append(
                    f"outlier advertiser {violation.advertiser} leaves edge to slot {violation.slot} "
                    f"short by {-violation.slack}")
        first = hard[0] if hard else None
        report.add(CheckOutcome(
            "dual-feasibility", not hard, instance.edge_count,
            None if first is None else {"slot": first.slot, "advertiser": first.advertiser,
                                        "bid": str(first.bid), "slack": str(first.slack)},
            f"{len(hard)} violated edges" if hard else ""))
        report.max_z = duals.max_z
        logger.debug(f"max z = {report.max_z}, bound {bound}, max ratio {max(max_ratios, default=0)}")

    def _certify_high_degree(self, instance: Instance, trace: RunTrace, duals: DualState,
                             is_kd: bool, report: CertificationReport):
        """Potential, closed form for unmatched advertisers and argmax-degree checks"""
        k, d = trace.k, trace.d
        growth = Fraction(d, d - 1)
        degrees = instance.degrees()
        matched = {record.decision for record in trace.arrivals if record.matched}

        mismatches = [
            adv for adv in range(len(instance.advertisers))
            if adv not in matched and duals.z[adv] != min(Fraction(1), trace.scaling * (growth ** degrees[adv] - 1))
        ]
        report.add(CheckOutcome(
            "unmatched-closed-form", not mismatches, len(instance.advertisers) - len(matched),
            {"advertiser": mismatches[0]} if mismatches else None))

        if not instance.is_unweighted:
            report.warnings.append("potential and argmax checks need unweighted input; skipped")
            return
        if instance.max_slot_degree > d:
            report.warnings.append(f"slot degree {instance.max_slot_degree} exceeds d={d}; potential check skipped")
            return

        deltas, tracker = self.replay_potential(instance, trace, d)
        rising = next((index for index, delta in enumerate(deltas) if delta > 0), None)
        report.add(CheckOutcome(
            "potential", rising is None, len(deltas),
            None if rising is None else {"arrival": rising}, f"final phi={tracker.phi}"))
        if is_kd:
            unmatched = len(tracker.unmatched)
            limit = (1 - Fraction(1, d)) ** k * len(instance.advertisers)
            report.add(CheckOutcome("unmatched-count", unmatched <= limit, len(instance.advertisers),
                                    detail=f"{unmatched} unmatched, limit {limit}"))

        seen = [0] * len(instance.advertisers)
        offender = None
        for record in trace.arrivals:
            for adv in instance.slots[record.index].neighbors():
                seen[adv] += 1
            if record.matched and offender is None:
                # uncapped: z saturates at degree k, so only the tie policy separates higher degrees
                if seen[record.decision] != max(seen[adv] for adv in record.feasible):
                    offender = record.index
        report.add(CheckOutcome(
            "argmax-degree", offender is None, len(trace.matched_records()),
            None if offender is None else {"arrival": offender}))

    def certify_run(self, trace: RunTrace, level: Optional[str] = None) -> CertificationReport:
        """Certify a trace held in memory against its realized instance"""
        if trace.instance is None:
            raise TraceMismatchError("trace carries no realized instance")
        return self.certify_trace(trace.instance, trace, level)


def get_certification_service() -> CertificationService:
    """Get certification service instance"""
    return CertificationService()
