"""
Instance models for online ad allocation.

An instance is a bipartite graph of advertisers (offline, with budgets) and ad
slots (online, arriving in list order with their bids). Matching problems are
the degenerate cases b_ij = B_i = 1 (unweighted) and b_ij = B_i
(vertex-weighted); there is no separate graph type.

Static instances are immutable. Adaptive instances compute each slot from the
running algorithm's spend through a per-run SlotStream, and every stream can
hand back the static instance it actually emitted.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .errors import InstanceReferenceError, InstanceValidationError

Edge = Tuple[int, Fraction]


@dataclass(frozen=True)
class Advertiser:
    """Offline vertex with a positive budget B_i"""
    id: int
    budget: Fraction

    def __post_init__(self):
        object.__setattr__(self, 'budget', Fraction(self.budget))
        if self.budget <= 0:
            raise InstanceValidationError(f"advertiser {self.id} has non-positive budget {self.budget}")


@dataclass(frozen=True)
class AdSlot:
    """Online vertex: its edges (advertiser id, bid) in the order given"""
    id: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        edges = tuple((int(adv), Fraction(bid)) for adv, bid in self.edges)
        object.__setattr__(self, 'edges', edges)
        advertisers = [adv for adv, _ in edges]
        if len(set(advertisers)) != len(advertisers):
            raise InstanceValidationError(f"slot {self.id} lists an advertiser twice")

    @property
    def degree(self) -> int:
        return len(self.edges)

    def neighbors(self) -> Tuple[int, ...]:
        return tuple(adv for adv, _ in self.edges)

    def bid_for(self, advertiser: int) -> Optional[Fraction]:
        for adv, bid in self.edges:
            if adv == advertiser:
                return bid
        return None


@dataclass(frozen=True)
class InstanceMeta:
    """Claimed (k,d), optional certified optimum and provenance"""
    claimed_k: Optional[int] = None
    claimed_d: Optional[int] = None
    known_opt: Optional[Fraction] = None
    opt_kind: Optional[str] = None  # construction | exact
    generator_tag: Optional[str] = None
    eps: Optional[Fraction] = None
    params: Dict[str, Any] = field(default_factory=dict)
    notes: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.known_opt is not None:
            object.__setattr__(self, 'known_opt', Fraction(self.known_opt))
            if self.opt_kind is None:
                object.__setattr__(self, 'opt_kind', "construction")
        if self.eps is not None:
            object.__setattr__(self, 'eps', Fraction(self.eps))


class ArrivalSource(ABC):
    """Anything a runner can consume: advertisers plus a fresh slot stream per run"""

    advertisers: Tuple[Advertiser, ...]
    meta: InstanceMeta
    is_adaptive: bool = False

    @abstractmethod
    def open_stream(self) -> 'SlotStream':
        """Start a new run-local stream of arrivals"""

    @property
    def budgets(self) -> Tuple[Fraction, ...]:
        return tuple(advertiser.budget for advertiser in self.advertisers)

    @property
    def total_budget(self) -> Fraction:
        return sum(self.budgets, Fraction(0))


@dataclass(frozen=True)
class Instance(ArrivalSource):
    """A static instance; slot order is the arrival order"""
    advertisers: Tuple[Advertiser, ...] = ()
    slots: Tuple[AdSlot, ...] = ()
    meta: InstanceMeta = field(default_factory=InstanceMeta)

    def __post_init__(self):
        advertisers = tuple(self.advertisers)
        slots = tuple(self.slots)
        object.__setattr__(self, 'advertisers', advertisers)
        object.__setattr__(self, 'slots', slots)

        for position, advertiser in enumerate(advertisers):
            if advertiser.id != position:
                raise InstanceValidationError(
                    f"advertiser at position {position} has id {advertiser.id}")
        for position, slot in enumerate(slots):
            if slot.id != position:
                raise InstanceValidationError(f"slot at position {position} has id {slot.id}")
            for adv, bid in slot.edges:
                if adv < 0 or adv >= len(advertisers):
                    raise InstanceReferenceError(f"slot {slot.id} references unknown advertiser {adv}")
                if bid <= 0 or bid > advertisers[adv].budget:
                    raise InstanceValidationError(
                        f"slot {slot.id} bid {bid} for advertiser {adv} is outside (0, {advertisers[adv].budget}]")

    def open_stream(self) -> 'SlotStream':
        return StaticSlotStream(self)

    def with_meta(self, **changes) -> 'Instance':
        return replace(self, meta=replace(self.meta, **changes))

    def edges(self) -> Iterator[Tuple[int, int, Fraction]]:
        """Yield (slot id, advertiser id, bid) in arrival order"""
        for slot in self.slots:
            for adv, bid in slot.edges:
                yield slot.id, adv, bid

    @property
    def edge_count(self) -> int:
        return sum(slot.degree for slot in self.slots)

    @property
    def max_slot_degree(self) -> int:
        return max((slot.degree for slot in self.slots), default=0)

    def degrees(self) -> List[int]:
        counts = [0] * len(self.advertisers)
        for _, adv, _ in self.edges():
            counts[adv] += 1
        return counts

    def bid_mass(self) -> List[Fraction]:
        """Sum of bids per advertiser"""
        totals = [Fraction(0)] * len(self.advertisers)
        for _, adv, bid in self.edges():
            totals[adv] += bid
        return totals

    def max_bids(self) -> List[Fraction]:
        """Largest bid per advertiser (0 without edges)"""
        highest = [Fraction(0)] * len(self.advertisers)
        for _, adv, bid in self.edges():
            if bid > highest[adv]:
                highest[adv] = bid
        return highest

    def max_ratios(self) -> List[Fraction]:
        """max_j b_ij / B_i per advertiser"""
        return [bid / advertiser.budget for bid, advertiser in zip(self.max_bids(), self.advertisers)]

    @property
    def is_unweighted(self) -> bool:
        return (all(advertiser.budget == 1 for advertiser in self.advertisers)
                and all(bid == 1 for _, _, bid in self.edges()))

    @property
    def is_vertex_weighted(self) -> bool:
        return all(bid == self.advertisers[adv].budget for _, adv, bid in self.edges())

    def equal_bids(self) -> Optional[Dict[int, Fraction]]:
        """Per-advertiser bid when each advertiser bids the same everywhere, else None"""
        bids: Dict[int, Fraction] = {}
        for _, adv, bid in self.edges():
            if bids.setdefault(adv, bid) != bid:
                return None
        return bids

    @property
    def is_equal_bids(self) -> bool:
        return self.equal_bids() is not None


class SlotStream(ABC):
    """Run-local arrival stream; remembers every slot it emitted"""

    def __init__(self, source: ArrivalSource):
        self.source = source
        self.emitted: List[AdSlot] = []

    @abstractmethod
    def next_slot(self, spend: Sequence[Fraction]) -> Optional[AdSlot]:
        """Next arrival given the current per-advertiser spend, or None when done"""

    def _emit(self, edges: Sequence[Edge]) -> AdSlot:
        slot = AdSlot(len(self.emitted), tuple(edges))
        self.emitted.append(slot)
        return slot

    def realized(self) -> Instance:
        """The static instance made of the slots emitted so far"""
        return Instance(self.source.advertisers, tuple(self.emitted), self.source.meta)


class StaticSlotStream(SlotStream):
    """Replays a static instance's slots in order"""

    def __init__(self, source: Instance):
        super().__init__(source)
        self._position = 0

    def next_slot(self, spend: Sequence[Fraction]) -> Optional[AdSlot]:
        if self._position >= len(self.source.slots):
            return None
        slot = self.source.slots[self._position]
        self._position += 1
        self.emitted.append(slot)
        return slot

    def realized(self) -> Instance:
        if len(self.emitted) == len(self.source.slots):
            return self.source
        return super().realized()


class AdaptiveInstance(ArrivalSource):
    """
    Instance whose later bids depend on the running algorithm's spend.

    Subclasses store their recipe parameters so the codec can persist
    {generator, params} instead of expanded edges.
    """

    is_adaptive = True
    generator: str = "adaptive"

    def __init__(self, advertisers: Sequence[Advertiser], meta: InstanceMeta):
        self.advertisers = tuple(advertisers)
        self.meta = meta

    @abstractmethod
    def recipe_params(self) -> Dict[str, Any]:
        """JSON-compatible parameters that rebuild this recipe"""

    def __repr__(self) -> str:
        return f"{type(self).__name__}(advertisers={len(self.advertisers)}, generator={self.generator!r})"


@dataclass
class KdReport:
    """Outcome of a (k,d)-boundedness check; validation reports, it never raises"""
    k: int
    d: int
    is_kd: bool = True
    d_observed: int = 0
    outliers: FrozenSet[int] = frozenset()
    alpha: Fraction = Fraction(0)
    oversized_slots: Tuple[int, ...] = ()
    degree_outliers: FrozenSet[int] = frozenset()

    @property
    def form_disagreements(self) -> FrozenSet[int]:
        """Advertisers where the degree form and the budget form of the bound disagree"""
        return self.outliers.symmetric_difference(self.degree_outliers)

    def summary(self) -> str:
        status = "is" if self.is_kd else "is not"
        return (f"instance {status} ({self.k},{self.d})-bounded: max slot degree {self.d_observed}, "
                f"{len(self.outliers)} outliers, alpha={self.alpha}")
