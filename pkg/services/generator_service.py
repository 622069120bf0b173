"""
Generator service for the adalloc toolkit.

Builds the instance families used to test and stress the algorithms: tight
examples for greedy (with the tie script that makes them tight), the
phased upper-bound constructions, adaptive stars, random (k,d)-bounded
instances and outlier composites. Generators are deterministic given their
parameters and seed.
"""

from dataclasses import dataclass, replace
from fractions import Fraction
from math import floor
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from models import (
    Advertiser, AdSlot, Instance, InstanceMeta, ArrivalSource, TieBreak, ParameterError, ContractError
)
from utils import get_logger, parse_rational, format_rational, ceil_fraction, is_unit_fraction
from .adaptive_sources import (
    StarInstance, HighDegreeUpperBoundInstance, AdwordsUpperBoundInstance, StepwiseInstance
)
from .codec_service import CodecService, get_codec_service
from .instance_service import InstanceService, get_instance_service
from .oracle_service import OracleService, get_oracle_service

logger = get_logger(__name__)

ONE = Fraction(1)
BID_MODES = ("unit", "vertex", "equal", "general")
RANDOM_ATTEMPTS = 50


@dataclass
class GeneratedInstance:
    """A generated source with its tie script and certified optimum"""
    source: ArrivalSource
    script: Optional[TieBreak] = None
    known_opt: Optional[Fraction] = None


def _unit_slots(rows: List[List[int]], bid: Fraction = ONE) -> Tuple[AdSlot, ...]:
    return tuple(AdSlot(slot, tuple((adv, bid) for adv in row)) for slot, row in enumerate(rows))


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


PARAM_TYPES: Dict[str, Callable[[Any], Any]] = {
    "k": int,
    "d": int,
    "n": int,
    "nL": int,
    "nR": int,
    "seed": int,
    "R": parse_rational,
    "eps": parse_rational,
    "alpha": parse_rational,
    "r_max": parse_rational,
    "bids": str,
    "adaptive": _parse_bool
}


class GeneratorService:
    """
    Service for building instance families.
    Known optima are re-verified by the oracles whenever the instance is within their caps.
    """

    def __init__(self, instance_service: Optional[InstanceService] = None,
                 oracle_service: Optional[OracleService] = None,
                 codec_service: Optional[CodecService] = None):
        self.instances = instance_service or get_instance_service()
        self.oracle = oracle_service or get_oracle_service()
        self.codec = codec_service or get_codec_service()

    # Greedy tight examples

    def gen_greedy_tight(self, k: int, d: int) -> GeneratedInstance:
        """
        Greedy's worst case on unit bids.

        Advertisers 0..k-1 each own one block slot that also reaches the d-1
        shared advertisers k..k+d-2; degree-one slots then bring the owners up
        to degree k. The script sends block slot t to advertiser t, after which
        the owners are full and the shared advertisers never win anything.
        """
        if d < 1 or k < 1:
            raise ParameterError(f"greedy-tight needs k >= 1 and d >= 1, got k={k}, d={d}")
        if k < d - 1:
            raise ParameterError(f"the bound cannot be tight for k < d-1 (k={k}, d={d})")

        shared = list(range(k, k + d - 1))
        rows = [[owner] + shared for owner in range(k)]
        for owner in range(k):
            rows.extend([owner] for _ in range(max(1, k - 1)))

        known_opt = Fraction(k + d - 1)
        instance = Instance(
            advertisers=tuple(Advertiser(adv, ONE) for adv in range(k + d - 1)),
            slots=_unit_slots(rows),
            meta=InstanceMeta(claimed_k=k, claimed_d=d, known_opt=known_opt, generator_tag="greedy-tight",
                              params={"k": k, "d": d})
        )
        return GeneratedInstance(instance, TieBreak.scripted(range(k)), known_opt)

    def gen_equal_bids_tight(self, k: int, d: int, rate: Fraction) -> GeneratedInstance:
        """m = 1/R glued copies of the greedy-tight block on budgets m with unit bids"""
        rate = Fraction(rate)
        if not is_unit_fraction(rate) or rate.denominator < 2:
            raise ParameterError(f"equal-bids-tight needs R = 1/m with m >= 2, got {rate}")
        if k < 1 or d < 1 or k < d - 1:
            raise ParameterError(f"equal-bids-tight needs k >= max(1, d-1), got k={k}, d={d}")

        copies = rate.denominator
        shared = list(range(k, k + d - 1))
        rows = [[owner] + shared for _ in range(copies) for owner in range(k)]
        script = [owner for _ in range(copies) for owner in range(k)]
        for owner in range(k):
            rows.extend([owner] for _ in range(copies * max(1, k - 1)))

        known_opt = Fraction((k + d - 1) * copies)
        instance = Instance(
            advertisers=tuple(Advertiser(adv, Fraction(copies)) for adv in range(k + d - 1)),
            slots=_unit_slots(rows),
            meta=InstanceMeta(claimed_k=k, claimed_d=d, known_opt=known_opt, generator_tag="equal-bids-tight",
                              params={"k": k, "d": d, "R": format_rational(rate)})
        )
        return GeneratedInstance(instance, TieBreak.scripted(script), known_opt)

    def gen_adwords_greedy_tight(self, k: int, d: int, rate: Fraction,
                                 eps: Optional[Fraction] = None) -> GeneratedInstance:
        """
        Greedy's worst case with bids up to R.

        Writing 1-R = a/b, k*b lucky and (d-1)*a unlucky unit-budget
        advertisers share k*a*b slots bidding 1/b. The script gives every such
        slot to its lucky neighbor, which ends at 1-R; an eps slot then leaves
        each lucky advertiser just short of R, so its ceil(k/R) slots bidding R
        all go unsold.

        For R strictly between the unit fractions 1/(m+1) and 1/m the shared
        slots are the two unit-fraction blocks glued on the common bid 1/b:
        in the optimum a lucky advertiser fills m slots bidding R plus
        b - m*(b-a) of its shared slots, and the unlucky advertisers split the
        rest. The optimum is the total budget whenever that split exists,
        which the b-matching oracle decides.
        """
        rate = Fraction(rate)
        if not 0 < rate <= Fraction(1, 2):
            raise ParameterError(f"adwords-greedy-tight needs 0 < R <= 1/2, got {rate}")
        if k < 1 or d < 2 or k < d - 1:
            raise ParameterError(f"adwords-greedy-tight needs k >= d-1 and d >= 2, got k={k}, d={d}")
        eps = Fraction(eps) if eps is not None else rate / 1000
        if not 0 < eps < rate:
            raise ParameterError(f"adwords-greedy-tight needs 0 < eps < R, got eps={eps}")

        keep = 1 - rate
        a, b = keep.numerator, keep.denominator
        lucky_count, unlucky_count = k * b, (d - 1) * a
        unlucky = [lucky_count + offset for offset in range(unlucky_count)]
        edges: List[List[Tuple[int, Fraction]]] = []
        script: List[Optional[int]] = []
        for slot in range(k * a * b):
            lucky = slot % lucky_count
            row = [(lucky, Fraction(1, b))]
            row.extend((unlucky[(slot * (d - 1) + offset) % unlucky_count], Fraction(1, b)) for offset in range(d - 1))
            edges.append(row)
            script.append(lucky)
        for lucky in range(lucky_count):
            edges.append([(lucky, eps)])
            edges.extend([(lucky, rate)] for _ in range(ceil_fraction(k / rate)))

        count = lucky_count + unlucky_count
        kept_shared = b - floor(1 / rate) * (b - a)
        if self._unlucky_split_exists(edges[kept_shared * lucky_count:k * a * b], lucky_count, unlucky_count, b):
            known_opt: Optional[Fraction] = Fraction(count)
        else:
            known_opt = None
            logger.warning(f"adwords-greedy-tight({k},{d},{rate}): the unlucky advertisers cannot fill their "
                           f"budgets next to the lucky ones; leaving OPT to the oracles")
        instance = Instance(
            advertisers=tuple(Advertiser(adv, ONE) for adv in range(count)),
            slots=tuple(AdSlot(slot, tuple(row)) for slot, row in enumerate(edges)),
            meta=InstanceMeta(claimed_k=k, claimed_d=d, known_opt=known_opt, generator_tag="adwords-greedy-tight",
                              eps=eps, params={"k": k, "d": d, "R": format_rational(rate),
                                               "eps": format_rational(eps)})
        )
        return GeneratedInstance(instance, TieBreak.scripted(script), known_opt)

    def _unlucky_split_exists(self, free_rows: List[List[Tuple[int, Fraction]]], lucky_count: int,
                              unlucky_count: int, per_budget: int) -> bool:
        """True when the shared slots left over by the lucky advertisers can fill every unlucky budget"""
        if len(free_rows) < unlucky_count * per_budget:
            return False
        rows = [[(adv - lucky_count, bid) for adv, bid in row if adv >= lucky_count] for row in free_rows]
        residual = Instance(
            advertisers=tuple(Advertiser(adv, ONE) for adv in range(unlucky_count)),
            slots=tuple(AdSlot(slot, tuple(row)) for slot, row in enumerate(rows))
        )
        return self.oracle.max_weight_b_matching(residual).value == unlucky_count

    # Upper-bound constructions

    def realize_lowest(self, source: StepwiseInstance) -> Instance:
        """Run an adaptive source against the maximal responder that takes the lowest feasible index"""
        budgets = source.budgets
        spend = [Fraction(0)] * len(budgets)
        stream = source.open_stream()
        while True:
            slot = stream.next_slot(spend)
            if slot is None:
                break
            feasible = sorted(self.instances.feasible_neighbors(source, slot, spend))
            if feasible:
                spend[feasible[0]] += slot.bid_for(feasible[0])
        return stream.realized()

    def gen_high_degree_ub(self, k: int, d: int, adaptive: bool = False) -> GeneratedInstance:
        """
        d^(k+1) advertisers of which exactly d^(k+1) (1-1/d)^k stay unmatched.

        The static form is the adaptive construction answered by lowest
        index; every suite algorithm sees symmetric neighbors in each phase
        and follows that realization.
        """
        source = HighDegreeUpperBoundInstance(k, d)
        if adaptive:
            return GeneratedInstance(source, known_opt=source.meta.known_opt)
        instance = self.realize_lowest(source)
        return GeneratedInstance(instance, known_opt=instance.meta.known_opt)

    def gen_star_1mR(self, rate: Fraction, n: int, eps: Optional[Fraction] = None, k: int = 1) -> GeneratedInstance:
        """n adaptive stars; no algorithm gains more than (1-R+eps) per star"""
        source = StarInstance(rate, n, eps, k)
        return GeneratedInstance(source, known_opt=source.meta.known_opt)

    def gen_adwords_ub(self, k: int, d: int, rate: Fraction, eps: Optional[Fraction] = None) -> GeneratedInstance:
        source = AdwordsUpperBoundInstance(k, d, rate, eps)
        return GeneratedInstance(source, known_opt=source.meta.known_opt)

    # Random instances

    def _place_stubs(self, rng: np.random.Generator, stubs: List[Tuple[int, Fraction]],
                     slot_count: int, d: int) -> Optional[List[List[Tuple[int, Fraction]]]]:
        """Drop stubs into slots of capacity d without repeating an advertiser inside a slot"""
        rows: List[List[Tuple[int, Fraction]]] = [[] for _ in range(slot_count)]
        members: List[set] = [set() for _ in range(slot_count)]
        for position in rng.permutation(len(stubs)):
            adv, bid = stubs[int(position)]
            open_slots = [slot for slot in range(slot_count) if len(rows[slot]) < d and adv not in members[slot]]
            if not open_slots:
                return None
            slot = open_slots[int(rng.integers(len(open_slots)))]
            rows[slot].append((adv, bid))
            members[slot].add(adv)
        return rows

    def gen_random_kd(self, k: int, d: int, nL: int, nR: int, seed: int = 0, bids: str = "unit",
                      r_max: Fraction = Fraction(1, 2)) -> GeneratedInstance:
        """
        Random (k,d)-bounded instance.

        Args:
            k, d: Bound to satisfy (budget form) and maximum slot degree
            nL, nR: Advertiser and slot counts
            seed: Root seed; equal seeds give identical instances
            bids: unit | vertex (b = B in 1..4) | equal (B = m, b = 1, 1/m <= r_max)
                  | general (B = 1, bids in r_max * {1/4, 1/2, 3/4, 1})
            r_max: Largest bid-to-budget ratio for equal and general bids

        Returns:
            GeneratedInstance without a known optimum
        """
        if bids not in BID_MODES:
            raise ParameterError(f"unknown bid mode {bids!r}; expected one of {', '.join(BID_MODES)}")
        if k < 1 or d < 1 or nL < 1 or nR < 1:
            raise ParameterError("random instances need k, d, nL, nR >= 1")
        if nR * d < nL * k:
            raise ParameterError(f"infeasible: nR*d = {nR * d} < nL*k = {nL * k}")
        r_max = Fraction(r_max)
        if not 0 < r_max <= 1:
            raise ParameterError(f"r_max must lie in (0, 1], got {r_max}")

        rng = np.random.default_rng(np.random.SeedSequence(seed))
        budgets: List[Fraction] = []
        stubs: List[Tuple[int, Fraction]] = []
        for adv in range(nL):
            if bids == "unit":
                budgets.append(ONE)
                stubs.extend((adv, ONE) for _ in range(k))
            elif bids == "vertex":
                budget = Fraction(int(rng.integers(1, 5)))
                budgets.append(budget)
                stubs.extend((adv, budget) for _ in range(k))
            elif bids == "equal":
                low = ceil_fraction(1 / r_max)
                copies = int(rng.integers(low, low + 2))
                budgets.append(Fraction(copies))
                stubs.extend((adv, ONE) for _ in range(k * copies))
            else:
                budgets.append(ONE)
                mass = Fraction(0)
                while mass < k:
                    bid = Fraction(int(rng.integers(1, 5)), 4) * r_max
                    stubs.append((adv, bid))
                    mass += bid

        per_advertiser = np.bincount([adv for adv, _ in stubs], minlength=nL)
        if len(stubs) > nR * d or per_advertiser.max() > nR:
            raise ParameterError(f"{len(stubs)} edges do not fit into {nR} slots of degree {d}")

        rows = None
        for attempt in range(RANDOM_ATTEMPTS):
            rows = self._place_stubs(rng, stubs, nR, d)
            if rows is not None:
                break
            logger.debug(f"Random placement attempt {attempt + 1} got stuck, retrying")
        if rows is None:
            raise ParameterError(f"could not place {len(stubs)} edges into {nR} slots of degree {d}")

        instance = Instance(
            advertisers=tuple(Advertiser(adv, budget) for adv, budget in enumerate(budgets)),
            slots=tuple(AdSlot(slot, tuple(row)) for slot, row in enumerate(rows)),
            meta=InstanceMeta(claimed_k=k, claimed_d=d, generator_tag="random",
                              params={"k": k, "d": d, "nL": nL, "nR": nR, "seed": seed, "bids": bids,
                                      "r_max": format_rational(r_max)})
        )
        report = self.instances.validate_kd(instance, k, d)
        if not report.is_kd:
            raise ParameterError(f"generated instance failed validation: {report.summary()}")
        return GeneratedInstance(instance)

    def gen_outlier_composite(self, base: Instance, alpha: Fraction, seed: int = 0) -> GeneratedInstance:
        """
        Add one to three outlier advertisers holding exactly an alpha share of the budget.

        Each outlier gets a single slot bidding half its budget, inserted at a
        random position of the arrival order.
        """
        alpha = Fraction(alpha)
        if not 0 <= alpha < 1:
            raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
        if alpha == 0:
            return GeneratedInstance(base, known_opt=base.meta.known_opt)

        rng = np.random.default_rng(np.random.SeedSequence(seed))
        count = int(rng.integers(1, 4))
        outlier_budget = alpha / (1 - alpha) * base.total_budget / count
        first = len(base.advertisers)
        advertisers = base.advertisers + tuple(Advertiser(first + offset, outlier_budget) for offset in range(count))

        rows = [list(slot.edges) for slot in base.slots]
        for offset in range(count):
            position = int(rng.integers(0, len(rows) + 1))
            rows.insert(position, [(first + offset, outlier_budget / 2)])

        known_opt = None
        if base.meta.known_opt is not None:
            known_opt = base.meta.known_opt + count * outlier_budget / 2
        params = dict(base.meta.params)
        params.update({"alpha": format_rational(alpha), "seed": seed, "base": base.meta.generator_tag})
        meta = replace(base.meta, known_opt=known_opt, generator_tag="outlier", params=params,
                       opt_kind="construction" if known_opt is not None else None)
        instance = Instance(advertisers, tuple(AdSlot(slot, tuple(row)) for slot, row in enumerate(rows)), meta)
        return GeneratedInstance(instance, known_opt=known_opt)

    # Registry

    def families(self) -> Dict[str, Callable[..., GeneratedInstance]]:
        return {
            "greedy-tight": lambda p: self.gen_greedy_tight(p["k"], p["d"]),
            "equal-bids-tight": lambda p: self.gen_equal_bids_tight(p["k"], p["d"], p["R"]),
            "adwords-greedy-tight": lambda p: self.gen_adwords_greedy_tight(p["k"], p["d"], p["R"], p.get("eps")),
            "high-degree-ub": lambda p: self.gen_high_degree_ub(p["k"], p["d"], p.get("adaptive", False)),
            "star": lambda p: self.gen_star_1mR(p["R"], p["n"], p.get("eps"), p.get("k", 1)),
            "adwords-ub": lambda p: self.gen_adwords_ub(p["k"], p["d"], p["R"], p.get("eps")),
            "random": lambda p: self.gen_random_kd(p["k"], p["d"], p["nL"], p["nR"], p.get("seed", 0),
                                                   p.get("bids", "unit"), p.get("r_max", Fraction(1, 2))),
            "outlier": lambda p: self.gen_outlier_composite(self._base(p), p["alpha"], p.get("seed", 0))
        }

    def _base(self, params: Dict[str, Any]) -> Instance:
        base = params["base"]
        if not isinstance(base, Instance):
            base = self.codec.load_instance(base)
        if not isinstance(base, Instance):
            raise ParameterError("outlier composites need a static base instance")
        return base

    def generate(self, family: str, params: Dict[str, Any], verify: bool = True) -> GeneratedInstance:
        """
        Build a family member from loosely typed parameters (e.g. CLI strings).

        Args:
            family: Registry name such as "greedy-tight" or "random"
            params: Parameter values; strings are coerced per parameter name
            verify: Re-check known optima of static instances with the oracles

        Returns:
            GeneratedInstance
        """
        builders = self.families()
        if family not in builders:
            raise ParameterError(f"unknown generator family {family!r}; expected one of {', '.join(builders)}")

        coerced = {}
        for name, value in params.items():
            converter = PARAM_TYPES.get(name)
            try:
                coerced[name] = converter(value) if converter is not None and value is not None else value
            except (ValueError, TypeError) as e:
                raise ParameterError(f"bad value {value!r} for parameter {name}: {e}")

        try:
            generated = builders[family](coerced)
        except KeyError as e:
            raise ParameterError(f"{family} needs parameter {e.args[0]}")

        source = generated.source
        logger.info(f"Generated {family} with {len(source.advertisers)} advertisers"
                    + (f" and {len(source.slots)} slots" if isinstance(source, Instance) else " (adaptive)"))
        if verify and isinstance(source, Instance) and generated.known_opt is not None:
            verified = self.oracle.verify_known_opt(source)
            if verified is False:
                raise ContractError(f"{family}: construction optimum {generated.known_opt} failed verification")
            if verified:
                source = source.with_meta(opt_kind="exact")
                generated = replace(generated, source=source)
                logger.info(f"{family}: OPT {generated.known_opt} verified exactly")
        return generated


def get_generator_service() -> GeneratorService:
    """Get generator service instance"""
    return GeneratorService()
