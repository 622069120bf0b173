"""
Allocation service for the adalloc toolkit.

Runs the online algorithms as stream processors over an arrival source. All
runners share one loop (_execute); what differs per algorithm (scores, dual
updates, finalization) lives in a small rule class. Every run returns the
allocation and a trace; the primal-dual algorithms also return their duals.
"""

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from models import (
    Instance, ArrivalSource, AdSlot, AlgorithmKind, TiePolicy, TieBreak, Match,
    AllocationResult, ArrivalRecord, FinalizationRecord, RunTrace, DualState,
    NormalizationEvent, DigitVector, ContractError, TieScriptError, NumeralError,
    SizeCapError, value, place_add, shift_append, truncate_fraction, pop_overflow,
    extract_common, trim_to
)
from utils import get_config, get_logger, log_operation
from .adaptive_sources import SplitCopiesInstance
from .instance_service import InstanceService, get_instance_service

logger = get_logger(__name__)

RunOutput = Tuple[AllocationResult, RunTrace, Optional[DualState]]


def scaling_constant(k: int, d: int) -> Fraction:
    """C = 1 / ((d/(d-1))^k - 1)"""
    if d < 2:
        raise NumeralError(f"base d/(d-1) is undefined for d={d}")
    if k < 1:
        raise NumeralError(f"k must be at least 1, got {k}")
    return 1 / (Fraction(d, d - 1) ** k - 1)


def arrival_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for one arrival, split off the run's root seed"""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


@dataclass
class RunContext:
    """Run-local state shared by the loop and the rule"""
    budgets: Tuple[Fraction, ...]
    spend: List[Fraction]
    degrees: List[int]
    k: Optional[int]
    d: Optional[int]
    scaling: Optional[Fraction]
    tie: TieBreak
    seed: int = 0
    duals: Optional[DualState] = None
    index: int = 0
    slot: Optional[AdSlot] = None
    events: List[NormalizationEvent] = field(default_factory=list)

    @property
    def growth(self) -> Fraction:
        """d/(d-1)"""
        return Fraction(self.d, self.d - 1)


def break_tie(ctx: RunContext, candidates: Sequence[int]) -> int:
    """Pick one of the equally scored candidates according to the run's TieBreak"""
    tie = ctx.tie
    if tie.policy is TiePolicy.SCRIPT:
        choice = tie.scripted_choice(ctx.slot.id)
        if choice is None:
            return min(candidates)
        if choice not in candidates:
            raise TieScriptError(
                f"slot {ctx.slot.id}: scripted advertiser {choice} is not among the argmax candidates {list(candidates)}")
        return choice
    if len(candidates) == 1:
        return candidates[0]
    if tie.policy is TiePolicy.HIGHEST_DEGREE:
        return max(candidates, key=lambda adv: (ctx.degrees[adv], -adv))
    if tie.policy is TiePolicy.SEEDED:
        ordered = sorted(candidates)
        return ordered[int(arrival_rng(tie.seed, ctx.index).integers(len(ordered)))]
    return min(candidates)


class AllocationRule:
    """Per-algorithm hooks called by the shared run loop"""

    kind: AlgorithmKind
    default_tie = TieBreak.lowest()

    def fresh_duals(self, ctx: RunContext) -> Optional[DualState]:
        return DualState.fresh(ctx.budgets)

    def check_slot(self, ctx: RunContext, slot: AdSlot):
        """Raise ContractError when the slot breaks the algorithm's input contract"""

    def prepare(self, ctx: RunContext, feasible: List[int], bids: Dict[int, Fraction]):
        """Dual work that must happen before the match decision"""

    def score(self, ctx: RunContext, adv: int, bid: Fraction) -> Fraction:
        raise NotImplementedError

    def choose(self, ctx: RunContext, feasible: List[int], bids: Dict[int, Fraction]) -> int:
        scores = {adv: self.score(ctx, adv, bids[adv]) for adv in feasible}
        best = max(scores.values())
        return break_tie(ctx, [adv for adv in feasible if scores[adv] == best])

    def update(self, ctx: RunContext, chosen: int, feasible: List[int], bids: Dict[int, Fraction]):
        """Dual updates after the match"""

    def finalize(self, ctx: RunContext, realized: Instance):
        """End-of-run dual loop"""


class GreedyRule(AllocationRule):
    """Highest bid wins; duals fitted so that DeltaD <= (k+d-1)/k DeltaP"""

    kind = AlgorithmKind.GREEDY

    def __init__(self, literal_budget: bool = False):
        self.literal_budget = literal_budget

    def score(self, ctx, adv, bid):
        return bid

    def update(self, ctx, chosen, feasible, bids):
        duals = ctx.duals
        budgets = ctx.budgets
        duals.set_z(chosen, min(Fraction(1), duals.z[chosen] + bids[chosen] / budgets[chosen]))
        for adv in feasible:
            if adv == chosen:
                continue
            denominator = ctx.k * (budgets[chosen] if self.literal_budget else budgets[adv])
            duals.set_z(adv, min(Fraction(1), duals.z[adv] + bids[adv] / denominator))

    def finalize(self, ctx, realized):
        if realized.edge_count == 0:
            return
        r_max = max(realized.max_ratios())
        for adv, budget in enumerate(ctx.budgets):
            if budget - ctx.spend[adv] < r_max * budget and ctx.duals.z[adv] != 1:
                ctx.duals.set_z(adv, Fraction(1))


class HighDegreeRule(AllocationRule):
    """Vertex-weighted primal-dual rule scoring (z_i + C) b_ij"""

    kind = AlgorithmKind.HIGH_DEGREE
    default_tie = TieBreak.highest_degree()

    def check_slot(self, ctx, slot):
        for adv, bid in slot.edges:
            if bid != ctx.budgets[adv]:
                raise ContractError(
                    f"high-degree needs vertex-weighted input; slot {slot.id} bids {bid} "
                    f"for advertiser {adv} with budget {ctx.budgets[adv]}")

    def score(self, ctx, adv, bid):
        return (ctx.duals.z[adv] + ctx.scaling) * bid

    def update(self, ctx, chosen, feasible, bids):
        duals = ctx.duals
        duals.set_z(chosen, Fraction(1))
        step = ctx.scaling / (ctx.d - 1)
        for adv in feasible:
            if adv != chosen:
                duals.set_z(adv, min(Fraction(1), duals.z[adv] * ctx.growth + step))


class EqualBidsRule(AllocationRule):
    """
    Equal-bids primal-dual rule.

    z_i^c is the dual of the advertiser's current copy, capped at b_i/B_i; a
    full copy rolls over into z_i the next time the advertiser is feasible.
    """

    kind = AlgorithmKind.EQUAL_BIDS

    def __init__(self):
        self.bids: Dict[int, Fraction] = {}

    def check_slot(self, ctx, slot):
        for adv, bid in slot.edges:
            if self.bids.setdefault(adv, bid) != bid:
                raise ContractError(
                    f"equal-bids needs one bid per advertiser; advertiser {adv} bids "
                    f"{self.bids[adv]} and {bid}")

    def _roll_over(self, duals: DualState, adv: int):
        duals.set_z(adv, min(Fraction(1), duals.z[adv] + duals.zc[adv]))
        duals.set_pending(adv, Fraction(0))

    def prepare(self, ctx, feasible, bids):
        duals = ctx.duals
        for adv in feasible:
            if duals.zc[adv] == bids[adv] / ctx.budgets[adv]:
                self._roll_over(duals, adv)

    def score(self, ctx, adv, bid):
        return ctx.duals.zc[adv] * ctx.budgets[adv] + ctx.scaling * bid

    def update(self, ctx, chosen, feasible, bids):
        duals = ctx.duals
        duals.set_pending(chosen, bids[chosen] / ctx.budgets[chosen])
        for adv in feasible:
            if adv == chosen:
                continue
            cap = bids[adv] / ctx.budgets[adv]
            grown = duals.zc[adv] * ctx.growth + ctx.scaling * cap / (ctx.d - 1)
            duals.set_pending(adv, min(cap, grown))

    def finalize(self, ctx, realized):
        for adv in range(len(ctx.budgets)):
            if ctx.duals.zc[adv] != 0:
                self._roll_over(ctx.duals, adv)


class GeneralBidsRule(AllocationRule):
    """
    General-bids primal-dual rule on base-d/(d-1) digit vectors.

    Before the decision every feasible neighbor sets aside z_i^f, its z_i^c
    truncated to b_ij/B_i. The winner collects b_ij/B_i into z_i; the others
    take z_i^f back shifted one place with b_ij/B_i appended, then normalize
    an overflowing place k or a full row of non-null digits into z_i.
    """

    kind = AlgorithmKind.GENERAL_BIDS

    def fresh_duals(self, ctx):
        return DualState.fresh(ctx.budgets, (ctx.d, ctx.k, ctx.scaling))

    def prepare(self, ctx, feasible, bids):
        duals = ctx.duals
        for adv in feasible:
            duals.hold_fraction(adv, truncate_fraction(duals.zc[adv], bids[adv] / ctx.budgets[adv]))

    def score(self, ctx, adv, bid):
        return ctx.duals.zf[adv].value() * ctx.budgets[adv] + ctx.scaling * bid

    def update(self, ctx, chosen, feasible, bids):
        duals = ctx.duals
        held = duals.release_fraction(chosen)
        ratio = bids[chosen] / ctx.budgets[chosen]
        duals.set_z(chosen, duals.z[chosen] + ratio)
        ctx.events.append(NormalizationEvent(chosen, "match", ratio, value(held), held.digit_sum()))

        for adv in feasible:
            if adv != chosen:
                self._absorb(ctx, adv, bids[adv] / ctx.budgets[adv])

    def _absorb(self, ctx: RunContext, adv: int, ratio: Fraction):
        duals = ctx.duals
        held = duals.release_fraction(adv)
        combined = place_add(duals.zc[adv], shift_append(held, ratio))
        duals.set_pending(adv, combined)

        if combined.place(ctx.k) != 0:
            top, rest = pop_overflow(combined)
            duals.set_pending(adv, rest)
            duals.set_z(adv, duals.z[adv] + top / ctx.k)
            ctx.events.append(NormalizationEvent(adv, "overflow", top / ctx.k, value(combined) - value(rest), top))
        else:
            duals.set_pending(adv, trim_to(combined, ctx.k))

        current: DigitVector = duals.zc[adv]
        if current.places == ctx.k and current.non_null_count() == ctx.k:
            common, rest = extract_common(current)
            duals.set_pending(adv, rest)
            duals.set_z(adv, duals.z[adv] + common)
            ctx.events.append(NormalizationEvent(adv, "common", common, value(current) - value(rest),
                                                 current.digit_sum() - rest.digit_sum()))

    def finalize(self, ctx, realized):
        for adv in range(len(ctx.budgets)):
            if ctx.duals.z[adv] < 1:
                ctx.duals.set_z(adv, Fraction(1))


class RandomRule(AllocationRule):
    """Uniformly random feasible neighbor, one split generator per arrival"""

    kind = AlgorithmKind.RANDOM

    def fresh_duals(self, ctx):
        return None

    def choose(self, ctx, feasible, bids):
        return feasible[int(arrival_rng(ctx.seed, ctx.index).integers(len(feasible)))]


class RankingRule(AllocationRule):
    """Feasible neighbor with the smallest rank in one random permutation of the advertisers"""

    kind = AlgorithmKind.RANKING

    def __init__(self):
        self.rank: Optional[np.ndarray] = None

    def fresh_duals(self, ctx):
        self.rank = np.random.default_rng(np.random.SeedSequence(ctx.seed)).permutation(len(ctx.budgets))
        return None

    def choose(self, ctx, feasible, bids):
        return min(feasible, key=lambda adv: int(self.rank[adv]))


class AllocationService:
    """
    Service for running the online allocation algorithms.
    Runs are single-threaded and deterministic given source, parameters and seed.
    """

    def __init__(self, instance_service: Optional[InstanceService] = None):
        self.instances = instance_service or get_instance_service()

    # Parameter resolution

    def _resolve_k(self, source: ArrivalSource, k: Optional[int]) -> int:
        k = k if k is not None else source.meta.claimed_k
        if k is None:
            raise ContractError("k is required: pass it explicitly or claim it in the instance meta")
        if k < 1:
            raise ContractError(f"k must be at least 1, got {k}")
        return k

    def _resolve_d(self, source: ArrivalSource, d: Optional[int]) -> int:
        claimed = d if d is not None else source.meta.claimed_d
        observed = source.max_slot_degree if isinstance(source, Instance) else None
        if claimed is None:
            if observed is None:
                raise ContractError("d is required for adaptive sources without a claimed d")
            claimed = observed
        if observed is not None and observed > claimed:
            logger.warning(f"Claimed d={claimed} is below the observed slot degree {observed}; "
                           f"ratio audits may fail")
        return max(1, claimed)

    # Shared loop

    def _execute(self, source: ArrivalSource, rule: AllocationRule, k: Optional[int], d: Optional[int],
                 scaling: Optional[Fraction], tie: Optional[TieBreak], seed: int = 0) -> RunOutput:
        budgets = source.budgets
        spend = [Fraction(0)] * len(budgets)
        ctx = RunContext(
            budgets=budgets,
            spend=spend,
            degrees=[0] * len(budgets),
            k=k,
            d=d,
            scaling=scaling,
            tie=tie or rule.default_tie,
            seed=seed
        )
        ctx.duals = rule.fresh_duals(ctx)
        duals = ctx.duals
        result = AllocationResult(spend=spend)
        trace = RunTrace(rule.kind, k, d, scaling, seed if rule.kind.is_randomized else None)

        with log_operation(logger, f"{rule.kind.value} run over {len(budgets)} advertisers") as run_log:
            stream = source.open_stream()
            index = 0
            while True:
                slot = stream.next_slot(spend)
                if slot is None:
                    break
                rule.check_slot(ctx, slot)
                for adv in slot.neighbors():
                    ctx.degrees[adv] += 1

                feasible = sorted(self.instances.feasible_neighbors(source, slot, spend))
                bids = dict(slot.edges)
                before = duals.accounting_cost if duals is not None else Fraction(0)
                if duals is not None:
                    duals.open_slot()
                    for adv in feasible:
                        duals.offered[adv] += bids[adv] / budgets[adv]

                ctx.index, ctx.slot, ctx.events = index, slot, []
                decision, bid = None, Fraction(0)
                if feasible:
                    rule.prepare(ctx, feasible, bids)
                    decision = rule.choose(ctx, feasible, bids)
                    bid = bids[decision]
                    spend[decision] += bid
                    result.matches.append(Match(slot.id, decision, bid))
                    result.revenue += bid
                    rule.update(ctx, decision, feasible, bids)

                trace.arrivals.append(ArrivalRecord(
                    index=index,
                    slot_id=slot.id,
                    feasible=tuple(feasible),
                    decision=decision,
                    bid=bid,
                    delta_primal=bid,
                    delta_dual=(duals.accounting_cost - before) if duals is not None else Fraction(0),
                    snapshots=duals.take_snapshots() if duals is not None else {},
                    events=tuple(ctx.events)
                ))
                logger.debug(f"arrival {index}: slot {slot.id} feasible {feasible} -> {decision}")
                index += 1

            trace.instance = stream.realized()
            if duals is not None:
                before = duals.accounting_cost
                rule.finalize(ctx, trace.instance)
                trace.finalization = FinalizationRecord(
                    delta_dual=duals.dual_cost - before,
                    dual_cost=duals.dual_cost,
                    snapshots=duals.take_snapshots()
                )
            run_log.record(f"revenue {result.revenue} over {len(trace.arrivals)} arrivals, "
                           f"{result.matched_count} advertisers matched")

        return result, trace, duals

    # Algorithms

    def scaling_constant(self, k: int, d: int) -> Fraction:
        return scaling_constant(k, d)

    def run_greedy(self, source: ArrivalSource, k: Optional[int] = None, tie: Optional[TieBreak] = None,
                   literal_budget: bool = False, d: Optional[int] = None) -> RunOutput:
        """
        Greedy by bid with dual fitting.

        Args:
            source: Static or adaptive instance
            k: k of the dual accounting (claimed k when omitted)
            tie: Tie-breaking among equal bids (lowest index by default)
            literal_budget: Divide neighbor updates by the winner's budget instead of their own
            d: d recorded for the ratio audit (claimed or observed when omitted)

        Returns:
            (allocation, trace, duals)
        """
        k = self._resolve_k(source, k)
        d = self._resolve_d(source, d)
        return self._execute(source, GreedyRule(literal_budget), k, d, None, tie)

    def run_high_degree(self, source: ArrivalSource, k: Optional[int] = None, d: Optional[int] = None,
                        tie: Optional[TieBreak] = None) -> RunOutput:
        """Primal-dual high-degree on vertex-weighted input; ties go to the highest degree by default"""
        if isinstance(source, Instance) and not source.is_vertex_weighted:
            raise ContractError("high-degree needs vertex-weighted input (b_ij = B_i on every edge)")
        k = self._resolve_k(source, k)
        d = max(2, self._resolve_d(source, d))
        return self._execute(source, HighDegreeRule(), k, d, scaling_constant(k, d), tie)

    def run_equal_bids(self, source: ArrivalSource, k: Optional[int] = None, d: Optional[int] = None,
                       tie: Optional[TieBreak] = None) -> RunOutput:
        """Equal-bids primal-dual rule"""
        if isinstance(source, Instance) and not source.is_equal_bids:
            raise ContractError("equal-bids needs one bid value per advertiser")
        k = self._resolve_k(source, k)
        d = max(2, self._resolve_d(source, d))
        return self._execute(source, EqualBidsRule(), k, d, scaling_constant(k, d), tie)

    def run_general_bids(self, source: ArrivalSource, k: Optional[int] = None, d: Optional[int] = None,
                         tie: Optional[TieBreak] = None) -> RunOutput:
        """General-bids primal-dual rule on digit vectors"""
        k = self._resolve_k(source, k)
        d = max(2, self._resolve_d(source, d))
        if k < d - 1:
            logger.warning(f"general-bids with k={k} < d-1={d - 1}: the overflow step may not cover z_i")
        return self._execute(source, GeneralBidsRule(), k, d, scaling_constant(k, d), tie)

    def run_random(self, source: ArrivalSource, seed: int = 0) -> Tuple[AllocationResult, RunTrace]:
        result, trace, _ = self._execute(source, RandomRule(), source.meta.claimed_k,
                                         source.meta.claimed_d, None, None, seed)
        return result, trace

    def run_ranking(self, source: ArrivalSource, seed: int = 0) -> Tuple[AllocationResult, RunTrace]:
        """
        RANKING over feasible neighbors.

        On unweighted input feasible means unmatched; other inputs are accepted
        and treated the same way.
        """
        if isinstance(source, Instance) and not source.is_unweighted:
            logger.info("ranking on weighted input: feasibility stands in for being unmatched")
        result, trace, _ = self._execute(source, RankingRule(), source.meta.claimed_k,
                                         source.meta.claimed_d, None, None, seed)
        return result, trace

    def run(self, kind: AlgorithmKind, source: ArrivalSource, k: Optional[int] = None,
            d: Optional[int] = None, tie: Optional[TieBreak] = None, seed: int = 0) -> RunOutput:
        """Dispatch by algorithm kind; randomized runs return None for the duals"""
        if kind is AlgorithmKind.GREEDY:
            return self.run_greedy(source, k, tie, d=d)
        if kind is AlgorithmKind.HIGH_DEGREE:
            return self.run_high_degree(source, k, d, tie)
        if kind is AlgorithmKind.EQUAL_BIDS:
            return self.run_equal_bids(source, k, d, tie)
        if kind is AlgorithmKind.GENERAL_BIDS:
            return self.run_general_bids(source, k, d, tie)
        if kind is AlgorithmKind.RANDOM:
            return (*self.run_random(source, seed), None)
        return (*self.run_ranking(source, seed), None)

    # Reductions and exact expectations

    def split_copies_reduction(self, instance: Instance, k: int) -> SplitCopiesInstance:
        """Vertex-weighted reduction of an equal-bids instance; translate() maps matches back"""
        reduced = SplitCopiesInstance(instance, k)
        logger.info(f"Split {len(instance.advertisers)} advertisers into {len(reduced.advertisers)} copies")
        return reduced

    def enumerate_random_outcomes(self, instance: Instance) -> Dict[Fraction, Fraction]:
        """Exact distribution of RANDOM's revenue: revenue -> probability"""
        cap = get_config().brute_force_slot_cap
        if len(instance.slots) > cap:
            raise SizeCapError(f"outcome enumeration is capped at {cap} slots, instance has {len(instance.slots)}")

        outcomes: Dict[Fraction, Fraction] = defaultdict(Fraction)
        spend = [Fraction(0)] * len(instance.advertisers)

        def walk(position: int, revenue: Fraction, probability: Fraction):
            if position == len(instance.slots):
                outcomes[revenue] += probability
                return
            slot = instance.slots[position]
            feasible = sorted(self.instances.feasible_neighbors(instance, slot, spend))
            if not feasible:
                walk(position + 1, revenue, probability)
                return
            share = probability / len(feasible)
            for adv in feasible:
                bid = slot.bid_for(adv)
                spend[adv] += bid
                walk(position + 1, revenue + bid, share)
                spend[adv] -= bid

        walk(0, Fraction(0), Fraction(1))
        return dict(outcomes)

    def expected_random_revenue(self, instance: Instance) -> Fraction:
        return sum((revenue * probability for revenue, probability in
                    self.enumerate_random_outcomes(instance).items()), Fraction(0))


def get_allocation_service() -> AllocationService:
    """Get allocation service instance"""
    return AllocationService()
