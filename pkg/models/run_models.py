"""
Run models: allocations, traces, tie-breaking and dual state.

A run produces an AllocationResult (the integral x_ij), a RunTrace (one record
per arrival plus the finalization record) and, for the primal-dual algorithms,
the final DualState.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .digit_vector import DigitVector, place_sub
from .instance_models import Instance


class AlgorithmKind(Enum):
    """Online algorithms the toolkit runs"""
    GREEDY = "greedy"
    HIGH_DEGREE = "high-degree"
    EQUAL_BIDS = "equal-bids"
    GENERAL_BIDS = "general-bids"
    RANDOM = "random"
    RANKING = "ranking"

    @property
    def is_randomized(self) -> bool:
        return self in (AlgorithmKind.RANDOM, AlgorithmKind.RANKING)

    @property
    def keeps_duals(self) -> bool:
        return not self.is_randomized


class TiePolicy(Enum):
    """How a runner picks among equally scored candidates"""
    LOWEST_INDEX = "lowest"
    HIGHEST_DEGREE = "degree"
    SCRIPT = "script"
    SEEDED = "seeded"


@dataclass(frozen=True)
class TieBreak:
    """
    Tie-breaking input of a run.

    A script lists, per slot id, the advertiser that must win the tie; None
    entries (or slots past the end of the list) fall back to lowest index.
    """
    policy: TiePolicy = TiePolicy.LOWEST_INDEX
    script: Tuple[Optional[int], ...] = ()
    seed: int = 0

    @classmethod
    def lowest(cls) -> 'TieBreak':
        return cls(TiePolicy.LOWEST_INDEX)

    @classmethod
    def highest_degree(cls) -> 'TieBreak':
        return cls(TiePolicy.HIGHEST_DEGREE)

    @classmethod
    def scripted(cls, choices: Sequence[Optional[int]]) -> 'TieBreak':
        return cls(TiePolicy.SCRIPT, tuple(choices))

    @classmethod
    def seeded(cls, seed: int) -> 'TieBreak':
        return cls(TiePolicy.SEEDED, seed=seed)

    def scripted_choice(self, slot_id: int) -> Optional[int]:
        if self.policy is not TiePolicy.SCRIPT or slot_id >= len(self.script):
            return None
        return self.script[slot_id]


@dataclass(frozen=True)
class Match:
    """One x_ij = 1 with the bid charged to the advertiser"""
    slot: int
    advertiser: int
    bid: Fraction


@dataclass
class AllocationResult:
    """Integral allocation, revenue P and per-advertiser spend"""
    matches: List[Match] = field(default_factory=list)
    revenue: Fraction = Fraction(0)
    spend: List[Fraction] = field(default_factory=list)

    def matched_advertisers(self) -> Set[int]:
        return {match.advertiser for match in self.matches}

    @property
    def matched_count(self) -> int:
        return len(self.matched_advertisers())

    def unmatched_advertisers(self, advertiser_count: int) -> List[int]:
        matched = self.matched_advertisers()
        return [adv for adv in range(advertiser_count) if adv not in matched]

    def assignment(self) -> Dict[int, int]:
        """slot id -> advertiser id"""
        return {match.slot: match.advertiser for match in self.matches}


@dataclass(frozen=True)
class AdvertiserSnapshot:
    """Dual values of one advertiser after an update"""
    z: Fraction
    pending: Fraction = Fraction(0)
    digits: Optional[Tuple[Fraction, ...]] = None


@dataclass(frozen=True)
class NormalizationEvent:
    """
    A step that moved dual mass into z_i in the general-bids algorithm.

    kind is "match" (z_i += b_ij/B_i), "overflow" (z_i += b_k/k) or "common"
    (z_i += b). value_drop and digit_drop measure what z_i^c lost.
    """
    advertiser: int
    kind: str
    z_gain: Fraction
    value_drop: Fraction
    digit_drop: Fraction


@dataclass
class ArrivalRecord:
    """What happened when one slot arrived"""
    index: int
    slot_id: int
    feasible: Tuple[int, ...]
    decision: Optional[int]
    bid: Fraction
    delta_primal: Fraction
    delta_dual: Fraction
    snapshots: Dict[int, AdvertiserSnapshot] = field(default_factory=dict)
    events: Tuple[NormalizationEvent, ...] = ()

    @property
    def matched(self) -> bool:
        return self.decision is not None


@dataclass
class FinalizationRecord:
    """The end-of-run dual loop"""
    delta_dual: Fraction = Fraction(0)
    dual_cost: Fraction = Fraction(0)
    snapshots: Dict[int, AdvertiserSnapshot] = field(default_factory=dict)


@dataclass
class RunTrace:
    """Per-arrival records of one run; sum of delta_primal is P, sum of delta_dual is D"""
    algorithm: AlgorithmKind
    k: Optional[int] = None
    d: Optional[int] = None
    scaling: Optional[Fraction] = None
    seed: Optional[int] = None
    arrivals: List[ArrivalRecord] = field(default_factory=list)
    finalization: FinalizationRecord = field(default_factory=FinalizationRecord)
    instance: Optional[Instance] = None
    fingerprint: Optional[str] = None

    @property
    def total_primal(self) -> Fraction:
        return sum((record.delta_primal for record in self.arrivals), Fraction(0))

    @property
    def arrival_dual(self) -> Fraction:
        """Dual cost accumulated before the finalization loop"""
        return sum((record.delta_dual for record in self.arrivals), Fraction(0))

    @property
    def total_dual(self) -> Fraction:
        return self.arrival_dual + self.finalization.delta_dual

    def matched_records(self) -> List[ArrivalRecord]:
        return [record for record in self.arrivals if record.matched]


Pending = Union[Fraction, DigitVector]


@dataclass
class DualState:
    """
    All dual variables of one run.

    z and y are the LP dual; zc holds the pending current-copy mass (a plain
    rational for equal bids, a DigitVector for general bids, zero otherwise);
    zf holds the per-arrival bounded fractions of the general-bids algorithm.
    accounting_cost is sum_i B_i (z_i + value(zc_i) + value(zf_i)) + sum_j y_j,
    the quantity whose per-arrival change is charged against the primal gain.
    """
    budgets: Tuple[Fraction, ...]
    z: List[Fraction] = field(default_factory=list)
    y: List[Fraction] = field(default_factory=list)
    zc: List[Pending] = field(default_factory=list)
    zf: Dict[int, DigitVector] = field(default_factory=dict)
    offered: List[Fraction] = field(default_factory=list)
    accounting_cost: Fraction = Fraction(0)
    touched: Set[int] = field(default_factory=set)

    @classmethod
    def fresh(cls, budgets: Sequence[Fraction], digit_params: Optional[Tuple[int, int, Fraction]] = None) -> 'DualState':
        """Zero duals; digit_params=(d, k, C) gives every advertiser a k-place zero vector"""
        size = len(budgets)
        if digit_params is None:
            pending: List[Pending] = [Fraction(0)] * size
        else:
            d, k, scaling = digit_params
            pending = [DigitVector.zero(d, k, scaling) for _ in range(size)]
        return cls(
            budgets=tuple(budgets),
            z=[Fraction(0)] * size,
            zc=pending,
            offered=[Fraction(0)] * size
        )

    def pending_value(self, advertiser: int) -> Fraction:
        pending = self.zc[advertiser]
        if isinstance(pending, DigitVector):
            return pending.value()
        return pending

    def set_z(self, advertiser: int, value: Fraction):
        self.accounting_cost += self.budgets[advertiser] * (value - self.z[advertiser])
        self.z[advertiser] = value
        self.touched.add(advertiser)

    def set_pending(self, advertiser: int, pending: Pending):
        before = self.pending_value(advertiser)
        self.zc[advertiser] = pending
        after = self.pending_value(advertiser)
        self.accounting_cost += self.budgets[advertiser] * (after - before)
        self.touched.add(advertiser)

    def hold_fraction(self, advertiser: int, fraction: DigitVector):
        """Move `fraction` out of zc into zf; the held mass stays in accounting_cost"""
        self.zc[advertiser] = place_sub(self.zc[advertiser], fraction)
        self.zf[advertiser] = fraction
        self.touched.add(advertiser)

    def release_fraction(self, advertiser: int) -> DigitVector:
        """Drop the held zf and its mass"""
        fraction = self.zf.pop(advertiser)
        self.accounting_cost -= self.budgets[advertiser] * fraction.value()
        return fraction

    def open_slot(self):
        """Materialize y_j = 0 for a newly arrived slot"""
        self.y.append(Fraction(0))

    @property
    def dual_cost(self) -> Fraction:
        """LP dual objective sum_i B_i z_i + sum_j y_j"""
        return (sum((budget * z for budget, z in zip(self.budgets, self.z)), Fraction(0))
                + sum(self.y, Fraction(0)))

    @property
    def max_z(self) -> Fraction:
        return max(self.z, default=Fraction(0))

    def snapshot(self, advertiser: int) -> AdvertiserSnapshot:
        pending = self.zc[advertiser]
        if isinstance(pending, DigitVector):
            return AdvertiserSnapshot(self.z[advertiser], pending.value(), pending.digits)
        return AdvertiserSnapshot(self.z[advertiser], pending)

    def take_snapshots(self) -> Dict[int, AdvertiserSnapshot]:
        """Snapshots of every advertiser touched since the last call"""
        snapshots = {adv: self.snapshot(adv) for adv in sorted(self.touched)}
        self.touched.clear()
        return snapshots
