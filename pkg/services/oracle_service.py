"""
Oracle service for the adalloc toolkit.

Offline optima at desk scale. Exact certificates come from maximum matching
(unweighted), min-cost-flow b-matching (equal bids) or brute force over slot
assignments (any bids, few slots); Hall's condition certifies that every
advertiser can be matched. Everything else falls back to a combinatorial
upper bound.
"""

from fractions import Fraction
from functools import lru_cache, reduce
from math import floor, gcd
from typing import List, Optional, Tuple

import networkx as nx

from models import Instance, OptKind, OptCertificate, HallReport, ContractError, SizeCapError
from utils import get_config, get_logger

logger = get_logger(__name__)


def _advertiser_node(adv: int) -> Tuple[str, int]:
    return ("advertiser", adv)


def _slot_node(slot: int) -> Tuple[str, int]:
    return ("slot", slot)


class OracleService:
    """
    Service for offline optima and structural certificates.
    Oracles are pure; caps come from the config unless passed explicitly.
    """

    def __init__(self, config=None):
        self.config = config or get_config()

    def max_matching(self, instance: Instance) -> OptCertificate:
        """Maximum-cardinality matching of an unweighted instance (Hopcroft-Karp)"""
        if not instance.is_unweighted:
            raise ContractError("max_matching needs an unweighted instance")

        graph = nx.Graph()
        advertisers = [_advertiser_node(advertiser.id) for advertiser in instance.advertisers]
        graph.add_nodes_from(advertisers, bipartite=0)
        graph.add_nodes_from((_slot_node(slot.id) for slot in instance.slots), bipartite=1)
        graph.add_edges_from((_advertiser_node(adv), _slot_node(slot)) for slot, adv, _ in instance.edges())

        matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=advertisers)
        witness = sorted(
            (matching[node][1], node[1]) for node in advertisers if node in matching
        )
        logger.debug(f"Maximum matching covers {len(witness)} of {len(advertisers)} advertisers")
        return OptCertificate(Fraction(len(witness)), OptKind.EXACT, witness, "max-matching")

    def brute_force_allocation(self, instance: Instance, cap: Optional[int] = None) -> OptCertificate:
        """
        Exact optimum by searching every per-slot assignment.

        Args:
            instance: Any static instance with at most `cap` slots
            cap: Slot cap (config brute_force_slot_cap by default)

        Returns:
            Exact OptCertificate with a (slot, advertiser) witness
        """
        cap = cap if cap is not None else self.config.brute_force_slot_cap
        if len(instance.slots) > cap:
            raise SizeCapError(f"brute force is capped at {cap} slots, instance has {len(instance.slots)}; "
                               f"use opt_upper_bound instead")

        budgets = instance.budgets
        slots = instance.slots

        def charged(spend: Tuple[Fraction, ...], adv: int, bid: Fraction) -> Tuple[Fraction, ...]:
            return spend[:adv] + (spend[adv] + bid,) + spend[adv + 1:]

        @lru_cache(maxsize=None)
        def best(position: int, spend: Tuple[Fraction, ...]) -> Fraction:
            if position == len(slots):
                return Fraction(0)
            value = best(position + 1, spend)
            for adv, bid in slots[position].edges:
                if spend[adv] + bid <= budgets[adv]:
                    value = max(value, bid + best(position + 1, charged(spend, adv, bid)))
            return value

        spend = tuple(Fraction(0) for _ in budgets)
        optimum = best(0, spend)

        witness: List[Tuple[int, int]] = []
        remaining = optimum
        for position, slot in enumerate(slots):
            if best(position + 1, spend) == remaining:
                continue
            for adv, bid in slot.edges:
                if spend[adv] + bid <= budgets[adv] and bid + best(position + 1, charged(spend, adv, bid)) == remaining:
                    witness.append((slot.id, adv))
                    spend = charged(spend, adv, bid)
                    remaining -= bid
                    break

        logger.debug(f"Brute force over {len(slots)} slots: OPT = {optimum}")
        return OptCertificate(optimum, OptKind.EXACT, witness, "brute-force")

    def hall_check(self, instance: Instance, cap: Optional[int] = None) -> HallReport:
        """
        Hall's condition on the unweighted view by subset enumeration.

        Neighborhoods are built incrementally over bitmasks; the reported
        violator has the fewest advertisers (lowest mask among those).
        """
        cap = cap if cap is not None else self.config.hall_advertiser_cap
        count = len(instance.advertisers)
        if count > cap:
            raise SizeCapError(f"Hall check is capped at {cap} advertisers, instance has {count}",
                               (1 << count) * 32)

        neighborhoods = [0] * count
        for slot, adv, _ in instance.edges():
            neighborhoods[adv] |= 1 << slot

        gamma = [0] * (1 << count)
        best_mask, best_size = None, count + 1
        for mask in range(1, 1 << count):
            lowest = mask & -mask
            gamma[mask] = gamma[mask & (mask - 1)] | neighborhoods[lowest.bit_length() - 1]
            size = bin(mask).count("1")
            if size < best_size and bin(gamma[mask]).count("1") < size:
                best_mask, best_size = mask, size

        if best_mask is None:
            return HallReport(True)
        violators = tuple(adv for adv in range(count) if best_mask >> adv & 1)
        neighborhood = tuple(slot for slot in range(len(instance.slots)) if gamma[best_mask] >> slot & 1)
        logger.info(f"Hall's condition fails for advertisers {violators} with neighborhood {neighborhood}")
        return HallReport(False, violators, neighborhood)

    def opt_upper_bound(self, instance: Instance) -> OptCertificate:
        """min(sum_i min(B_i, sum_j b_ij), sum_j max_i b_ij)"""
        masses = instance.bid_mass()
        budget_side = sum((min(advertiser.budget, masses[advertiser.id]) for advertiser in instance.advertisers),
                          Fraction(0))
        slot_side = sum((max((bid for _, bid in slot.edges), default=Fraction(0)) for slot in instance.slots),
                        Fraction(0))
        return OptCertificate(min(budget_side, slot_side), OptKind.UPPER_BOUND, source="upper-bound")

    def max_weight_b_matching(self, instance: Instance) -> OptCertificate:
        """
        Exact optimum of an equal-bids instance by min-cost flow.

        Advertiser i can take floor(B_i/b_i) slots; every slot either goes to
        one advertiser or bypasses to the sink, so the maximum flow always
        routes every slot and the cheapest one maximizes revenue.
        """
        bids = instance.equal_bids()
        if bids is None:
            raise ContractError("max_weight_b_matching needs equal bids per advertiser")
        if not bids:
            return OptCertificate(Fraction(0), OptKind.EXACT, [], "b-matching")

        scale = reduce(lambda a, b: a * b // gcd(a, b), (bid.denominator for bid in bids.values()), 1)
        graph = nx.DiGraph()
        for slot in instance.slots:
            node = _slot_node(slot.id)
            graph.add_edge("source", node, capacity=1, weight=0)
            graph.add_edge(node, "sink", capacity=1, weight=0)
            for adv, bid in slot.edges:
                graph.add_edge(node, _advertiser_node(adv), capacity=1, weight=-int(bid * scale))
        for adv, bid in bids.items():
            graph.add_edge(_advertiser_node(adv), "sink",
                           capacity=floor(instance.advertisers[adv].budget / bid), weight=0)

        flow = nx.max_flow_min_cost(graph, "source", "sink")
        witness = sorted(
            (slot.id, adv)
            for slot in instance.slots
            for adv, _ in slot.edges
            if flow[_slot_node(slot.id)].get(_advertiser_node(adv), 0) > 0
        )
        value = sum((bids[adv] for _, adv in witness), Fraction(0))
        logger.debug(f"b-matching over {len(instance.slots)} slots: OPT = {value}")
        return OptCertificate(value, OptKind.EXACT, witness, "b-matching")

    def exact_certificate(self, instance: Instance) -> Optional[OptCertificate]:
        """The cheapest exact oracle that applies within the caps, or None"""
        if instance.edge_count <= self.config.exact_oracle_edge_cap:
            if instance.is_unweighted:
                return self.max_matching(instance)
            if instance.is_equal_bids:
                return self.max_weight_b_matching(instance)
        if len(instance.slots) <= self.config.brute_force_slot_cap:
            return self.brute_force_allocation(instance)
        return None

    def verify_known_opt(self, instance: Instance) -> Optional[bool]:
        """True when an exact oracle confirms meta.known_opt, False when it refutes it, None when out of reach"""
        known = instance.meta.known_opt
        if known is None:
            return None
        if instance.is_unweighted and known == len(instance.advertisers) \
                and len(instance.advertisers) <= self.config.hall_advertiser_cap:
            return self.hall_check(instance).passed
        exact = self.exact_certificate(instance)
        if exact is None:
            return None
        if exact.value != known:
            logger.error(f"{instance.meta.generator_tag} claims OPT {known}, {exact.source} finds {exact.value}")
            return False
        return True

    def best_certificate(self, instance: Instance) -> OptCertificate:
        """
        Strongest available certificate: a verified known optimum, an exact
        oracle, a trusted construction value, then the upper bound.
        """
        known = instance.meta.known_opt
        exact = self.exact_certificate(instance)
        if known is not None:
            if exact is None:
                return OptCertificate(known, OptKind.CONSTRUCTION, source=instance.meta.generator_tag or "meta")
            if exact.value != known:
                logger.warning(f"Ignoring claimed OPT {known}: {exact.source} finds {exact.value}")
                return exact
            return OptCertificate(known, OptKind.EXACT, exact.witness,
                                  f"{instance.meta.generator_tag or 'meta'} verified by {exact.source}")
        if exact is not None:
            return exact
        return self.opt_upper_bound(instance)


def get_oracle_service() -> OracleService:
    """Get oracle service instance"""
    return OracleService()
