"""
Adaptive arrival sources.

Each recipe is a generator of edge lists that looks at the running spend
between yields: the stream stores the spend it was handed before resuming the
recipe, so code after a `yield` sees how the algorithm answered that slot.
Recipes persist as {generator, params}; build_adaptive() rebuilds them.
"""

from dataclasses import replace
from fractions import Fraction
from math import floor
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Type

from models import (
    Advertiser, AdSlot, Instance, InstanceMeta, AdaptiveInstance, SlotStream,
    AllocationResult, Match, ParameterError, SizeCapError, ContractError
)
from models.instance_models import Edge
from utils import get_config, get_logger, parse_rational, format_rational, ceil_fraction, is_unit_fraction

logger = get_logger(__name__)

ONE = Fraction(1)


class StepwiseStream(SlotStream):
    """Drives a recipe's step generator one slot at a time"""

    def __init__(self, source: 'StepwiseInstance'):
        super().__init__(source)
        self.spend: Tuple[Fraction, ...] = tuple(Fraction(0) for _ in source.advertisers)
        self.declined: List[int] = []
        self._steps = source.steps(self)

    def next_slot(self, spend: Sequence[Fraction]) -> Optional[AdSlot]:
        self.spend = tuple(spend)
        try:
            edges = next(self._steps)
        except StopIteration:
            return None
        return self._emit(edges)

    def realized(self) -> Instance:
        instance = super().realized()
        meta = self.source.realized_meta(instance, self)
        return Instance(instance.advertisers, instance.slots, meta)


class StepwiseInstance(AdaptiveInstance):
    """Adaptive instance described by a step generator"""

    def open_stream(self) -> StepwiseStream:
        return StepwiseStream(self)

    def steps(self, stream: StepwiseStream) -> Iterator[List[Edge]]:
        raise NotImplementedError

    def realized_meta(self, instance: Instance, stream: StepwiseStream) -> InstanceMeta:
        return self.meta

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> 'StepwiseInstance':
        raise NotImplementedError


def _charge(group: Sequence[int], spend: Sequence[Fraction]) -> Tuple[int, bool]:
    """Advertiser the last group slot went to; a declined slot is charged to its lowest index"""
    winners = [adv for adv in group if spend[adv] > 0]
    if winners:
        return winners[0], False
    return min(group), True


def _star_steps(stream: StepwiseStream, adv: int, rate: Fraction, eps: Fraction,
                eps_cap: int, large_slots: int) -> Iterator[List[Edge]]:
    """eps bids while the residual is at least `rate`, then bids of `rate` it can no longer take"""
    budget = stream.source.advertisers[adv].budget
    sent = 0
    while sent < eps_cap and budget - stream.spend[adv] >= rate * budget:
        yield [(adv, eps * budget)]
        sent += 1
    if budget - stream.spend[adv] < rate * budget:
        for _ in range(large_slots):
            yield [(adv, rate * budget)]


def star_optimum(eps_count: int, large_count: int, rate: Fraction, eps: Fraction) -> Fraction:
    """Best unit-budget packing of eps_count bids of eps and large_count bids of rate"""
    best = Fraction(0)
    for large in range(min(large_count, floor(1 / rate)) + 1):
        residual = 1 - large * rate
        small = min(eps_count, floor(residual / eps))
        best = max(best, large * rate + small * eps)
    return best


class StarInstance(StepwiseInstance):
    """
    Disjoint single-advertiser stars with unit budgets.

    Each star sends eps bids while the advertiser's residual budget is at least
    R and then ceil(k/R) bids of R, which the algorithm can no longer afford.
    """

    generator = "star"

    def __init__(self, rate: Fraction, count: int, eps: Optional[Fraction] = None, k: int = 1):
        rate = Fraction(rate)
        eps = Fraction(eps) if eps is not None else rate / 1000
        if not 0 < rate < 1:
            raise ParameterError(f"star needs 0 < R < 1, got {rate}")
        if not 0 < eps < rate:
            raise ParameterError(f"star needs 0 < eps < R, got eps={eps}")
        if count < 1 or k < 1:
            raise ParameterError("star needs n >= 1 and k >= 1")

        self.rate = rate
        self.count = count
        self.eps = eps
        self.k = k
        self.eps_cap = floor((1 - rate) / eps) + 1
        self.large_slots = ceil_fraction(k / rate)

        config = get_config()
        slots = count * (self.eps_cap + self.large_slots)
        if slots > config.max_star_slots:
            raise SizeCapError(f"star instance needs {slots} slots, cap is {config.max_star_slots}",
                               config.estimate_memory_bytes(count, slots))

        known_opt = count * star_optimum(self.eps_cap, self.large_slots, rate, eps)
        meta = InstanceMeta(
            claimed_k=k,
            claimed_d=1,
            known_opt=known_opt,
            opt_kind="construction",
            generator_tag=self.generator,
            eps=eps,
            params={"R": format_rational(rate), "n": count, "eps": format_rational(eps), "k": k}
        )
        super().__init__([Advertiser(adv, ONE) for adv in range(count)], meta)

    def steps(self, stream: StepwiseStream) -> Iterator[List[Edge]]:
        for adv in range(self.count):
            yield from _star_steps(stream, adv, self.rate, self.eps, self.eps_cap, self.large_slots)

    def realized_meta(self, instance: Instance, stream: StepwiseStream) -> InstanceMeta:
        counts = {adv: [0, 0] for adv in range(self.count)}
        for _, adv, bid in instance.edges():
            counts[adv][0 if bid == self.eps else 1] += 1
        known_opt = sum((star_optimum(small, large, self.rate, self.eps) for small, large in counts.values()),
                        Fraction(0))
        return replace(self.meta, known_opt=known_opt)

    def recipe_params(self) -> Dict[str, Any]:
        return {"R": self.rate, "n": self.count, "eps": self.eps, "k": self.k}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> 'StarInstance':
        return cls(parse_rational(params["R"]), int(params["n"]),
                   parse_rational(params["eps"]) if params.get("eps") is not None else None,
                   int(params.get("k", 1)))


class HighDegreeUpperBoundInstance(StepwiseInstance):
    """
    Phased matching upper bound on d^(k+1) unit-budget advertisers.

    Each of k phases groups the still-unmatched advertisers into slots of d;
    whatever a maximal algorithm does, one member of every group is matched.
    Padding slots then lift matched advertisers to degree k, giving a graph
    that is k-regular on advertisers and d-regular on slots.
    """

    generator = "high-degree-ub"

    def __init__(self, k: int, d: int):
        if d < 2 or k < d:
            raise ParameterError(f"high-degree upper bound needs k >= d >= 2, got k={k}, d={d}")
        self.k = k
        self.d = d
        count = d ** (k + 1)

        config = get_config()
        if count > config.max_generated_advertisers:
            raise SizeCapError(
                f"d^(k+1) = {count} advertisers exceeds the cap of {config.max_generated_advertisers}",
                config.estimate_memory_bytes(count, count * k))

        meta = InstanceMeta(
            claimed_k=k,
            claimed_d=d,
            known_opt=Fraction(count),
            opt_kind="construction",
            generator_tag=self.generator,
            params={"k": k, "d": d},
            notes=("declined slots are charged to their lowest-index neighbor",)
        )
        super().__init__([Advertiser(adv, ONE) for adv in range(count)], meta)

    def steps(self, stream: StepwiseStream) -> Iterator[List[Edge]]:
        count = len(self.advertisers)
        matched_in: Dict[int, int] = {}
        for phase in range(1, self.k + 1):
            unmatched = [adv for adv in range(count) if adv not in matched_in]
            for start in range(0, len(unmatched), self.d):
                group = unmatched[start:start + self.d]
                yield [(adv, ONE) for adv in group]
                taken, declined = _charge(group, stream.spend)
                if declined:
                    stream.declined.append(len(stream.emitted) - 1)
                matched_in[taken] = phase

        pool = [adv for adv in sorted(matched_in) for _ in range(self.k - matched_in[adv])]
        width = len(pool) // self.d
        for start in range(width):
            group = [pool[start + offset * width] for offset in range(self.d)]
            if len(set(group)) != self.d:
                raise ContractError(f"padding slot {start} repeats an advertiser")
            yield [(adv, ONE) for adv in group]

    def recipe_params(self) -> Dict[str, Any]:
        return {"k": self.k, "d": self.d}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> 'HighDegreeUpperBoundInstance':
        return cls(int(params["k"]), int(params["d"]))


class AdwordsUpperBoundInstance(StepwiseInstance):
    """
    Upper bound for deterministic algorithms with bids of R = 1/m.

    k*m rounds of d-neighbor slots at bid R shrink the set of untouched
    advertisers by a factor (1 - 1/d) each round; every advertiser that was
    matched then faces a star on its remaining budget.
    """

    generator = "adwords-ub"

    def __init__(self, k: int, d: int, rate: Fraction, eps: Optional[Fraction] = None):
        rate = Fraction(rate)
        if d < 2 or k < d:
            raise ParameterError(f"adwords upper bound needs k >= d >= 2, got k={k}, d={d}")
        if not is_unit_fraction(rate) or rate > Fraction(1, 2):
            raise ParameterError(f"adwords upper bound needs R = 1/m <= 1/2, got {rate}")
        eps = Fraction(eps) if eps is not None else rate / 1000
        if not 0 < eps < rate:
            raise ParameterError(f"adwords upper bound needs 0 < eps < R, got eps={eps}")

        self.k = k
        self.d = d
        self.rate = rate
        self.eps = eps
        self.rounds = k * rate.denominator
        self.eps_cap = floor((1 - rate) / eps) + 1
        self.large_slots = ceil_fraction(k / rate)
        count = d ** self.rounds

        config = get_config()
        if count > config.max_generated_advertisers:
            raise SizeCapError(
                f"d^(k/R) = {count} advertisers exceeds the cap of {config.max_generated_advertisers}",
                config.estimate_memory_bytes(count, count * self.rounds))
        gadget_slots = floor((1 - 2 * rate) / eps) + 1 + self.large_slots
        if count * gadget_slots > config.max_star_slots:
            raise SizeCapError(f"star gadgets need about {count * gadget_slots} slots, "
                               f"cap is {config.max_star_slots}",
                               config.estimate_memory_bytes(count, count * gadget_slots))

        meta = InstanceMeta(
            claimed_k=k,
            claimed_d=d,
            known_opt=Fraction(count),
            opt_kind="construction",
            generator_tag=self.generator,
            eps=eps,
            params={"k": k, "d": d, "R": format_rational(rate), "eps": format_rational(eps)},
            notes=("declined slots are charged to their lowest-index neighbor",)
        )
        super().__init__([Advertiser(adv, ONE) for adv in range(count)], meta)

    def steps(self, stream: StepwiseStream) -> Iterator[List[Edge]]:
        active = list(range(len(self.advertisers)))
        matched: List[int] = []
        for _ in range(self.rounds):
            still_active = []
            for start in range(0, len(active), self.d):
                group = active[start:start + self.d]
                yield [(adv, self.rate) for adv in group]
                taken, declined = _charge(group, stream.spend)
                if declined:
                    stream.declined.append(len(stream.emitted) - 1)
                matched.append(taken)
                still_active.extend(adv for adv in group if adv != taken)
            active = still_active

        for adv in sorted(matched):
            yield from _star_steps(stream, adv, self.rate, self.eps, self.eps_cap, self.large_slots)

    def recipe_params(self) -> Dict[str, Any]:
        return {"k": self.k, "d": self.d, "R": self.rate, "eps": self.eps}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> 'AdwordsUpperBoundInstance':
        return cls(int(params["k"]), int(params["d"]), parse_rational(params["R"]),
                   parse_rational(params["eps"]) if params.get("eps") is not None else None)


class SplitCopiesInstance(StepwiseInstance):
    """
    Vertex-weighted view of an equal-bids instance.

    Advertiser i becomes B_i/b_i + deg(i)//k copies of weight b_i. Each edge of
    i goes to the first copy that is still unmatched and has fewer than k
    edges; once B_i/b_i copies are matched, i's further edges are dropped.
    Slot ids are preserved, so matches translate back one to one.
    """

    generator = "split-copies"

    def __init__(self, base: Instance, k: int):
        if not isinstance(base, Instance):
            raise ContractError("split-copies reduction needs a static instance")
        if k < 1:
            raise ContractError(f"k must be at least 1, got {k}")
        bids = base.equal_bids()
        if bids is None:
            raise ContractError("split-copies reduction needs equal bids per advertiser")

        self.base = base
        self.k = k
        degrees = base.degrees()
        copies: List[Advertiser] = []
        back_map: List[Tuple[int, int]] = []
        self.copies_of: List[List[int]] = []
        self.multiplicity: List[int] = []
        for advertiser in base.advertisers:
            bid = bids.get(advertiser.id)
            if bid is None:
                multiplicity, weight = 1, advertiser.budget
            else:
                ratio = advertiser.budget / bid
                if ratio.denominator != 1:
                    raise ContractError(f"advertiser {advertiser.id}: B/b = {ratio} is not an integer")
                multiplicity, weight = ratio.numerator, bid
            own = []
            for index in range(multiplicity + degrees[advertiser.id] // k):
                own.append(len(copies))
                copies.append(Advertiser(len(copies), weight))
                back_map.append((advertiser.id, index))
            self.copies_of.append(own)
            self.multiplicity.append(multiplicity)
        self.back_map: Tuple[Tuple[int, int], ...] = tuple(back_map)

        meta = InstanceMeta(
            claimed_k=k,
            claimed_d=base.meta.claimed_d,
            generator_tag=self.generator,
            params={"k": k}
        )
        super().__init__(copies, meta)

    def steps(self, stream: StepwiseStream) -> Iterator[List[Edge]]:
        routed = [0] * len(self.advertisers)
        for slot in self.base.slots:
            edges = []
            for adv, bid in slot.edges:
                own = self.copies_of[adv]
                if sum(1 for copy in own if stream.spend[copy] > 0) >= self.multiplicity[adv]:
                    continue
                target = next((copy for copy in own if stream.spend[copy] == 0 and routed[copy] < self.k), None)
                if target is None:
                    raise ContractError(f"advertiser {adv} ran out of copies at slot {slot.id}")
                routed[target] += 1
                edges.append((target, bid))
            yield edges

    def translate(self, result: AllocationResult) -> AllocationResult:
        """Map copy matches back to charges on the original advertisers"""
        spend = [Fraction(0)] * len(self.base.advertisers)
        matches = []
        for match in result.matches:
            adv, _ = self.back_map[match.advertiser]
            spend[adv] += match.bid
            matches.append(Match(match.slot, adv, match.bid))
        return AllocationResult(matches=matches, revenue=result.revenue, spend=spend)

    def recipe_params(self) -> Dict[str, Any]:
        return {"base": self.base, "k": self.k}

    @classmethod
    def from_params(cls, params: Dict[str, Any]) -> 'SplitCopiesInstance':
        return cls(params["base"], int(params["k"]))


RECIPES: Dict[str, Type[StepwiseInstance]] = {
    StarInstance.generator: StarInstance,
    HighDegreeUpperBoundInstance.generator: HighDegreeUpperBoundInstance,
    AdwordsUpperBoundInstance.generator: AdwordsUpperBoundInstance,
    SplitCopiesInstance.generator: SplitCopiesInstance
}


def build_adaptive(generator: str, params: Dict[str, Any]) -> StepwiseInstance:
    """Rebuild an adaptive instance from its stored recipe"""
    recipe = RECIPES.get(generator)
    if recipe is None:
        raise ParameterError(f"unknown adaptive recipe {generator!r}")
    logger.debug(f"Rebuilding adaptive recipe {generator} ({', '.join(sorted(params))})")
    try:
        return recipe.from_params(params)
    except (KeyError, ValueError, TypeError) as e:
        raise ParameterError(f"bad parameters for {generator}: {e}")
