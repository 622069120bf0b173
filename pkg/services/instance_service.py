"""
Instance service for the adalloc toolkit.

(k,d)-boundedness validation, bid-to-budget ratios, feasibility of an arriving
slot under the running spend, and the save/load round trip through the codec.
"""

import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Set

from models import (
    Instance, AdSlot, ArrivalSource, KdReport, UndefinedRatioError, ContractError
)
from utils import get_logger
from .codec_service import CodecService, get_codec_service

logger = get_logger(__name__)


class InstanceService:
    """
    Service for checking and persisting instances.
    Validation reports and never raises on a non-conforming instance.
    """

    def __init__(self, codec_service: Optional[CodecService] = None):
        self.codec = codec_service or get_codec_service()

    def validate_kd(self, instance: Instance, k: int, d: int) -> KdReport:
        """
        Check (k,d)-boundedness in its budget form.

        Args:
            instance: Static instance to check
            k: Required bid mass per advertiser in budgets (sum_j b_ij >= k B_i)
            d: Maximum slot degree

        Returns:
            KdReport with outliers and alpha populated whether or not the check passes
        """
        if k < 1 or d < 1:
            raise ContractError(f"validate_kd needs k >= 1 and d >= 1, got k={k}, d={d}")

        oversized = tuple(slot.id for slot in instance.slots if slot.degree > d)
        masses = instance.bid_mass()
        degrees = instance.degrees()
        outliers = frozenset(
            advertiser.id for advertiser in instance.advertisers
            if masses[advertiser.id] < k * advertiser.budget
        )
        degree_outliers = frozenset(
            advertiser.id for advertiser in instance.advertisers if degrees[advertiser.id] < k
        )

        total = instance.total_budget
        outlier_budget = sum((instance.advertisers[adv].budget for adv in outliers), Fraction(0))
        alpha = outlier_budget / total if total > 0 else Fraction(0)

        report = KdReport(
            k=k,
            d=d,
            is_kd=not oversized and not outliers,
            d_observed=instance.max_slot_degree,
            outliers=outliers,
            alpha=alpha,
            oversized_slots=oversized,
            degree_outliers=degree_outliers
        )
        if report.form_disagreements:
            logger.info(f"Degree and budget forms of ({k},{d}) disagree on "
                        f"{len(report.form_disagreements)} advertisers")
        logger.debug(report.summary())
        return report

    def compute_r_max(self, instance: Instance) -> Fraction:
        """max over edges of b_ij / B_i"""
        if instance.edge_count == 0:
            raise UndefinedRatioError("R_max is undefined for an instance without edges")
        return max(bid / instance.advertisers[adv].budget for _, adv, bid in instance.edges())

    def feasible_neighbors(self, instance: ArrivalSource, slot: AdSlot,
                           spend: Sequence[Fraction]) -> Set[int]:
        """Neighbors whose residual budget covers their bid on this slot"""
        budgets = instance.budgets
        return {adv for adv, bid in slot.edges if budgets[adv] - spend[adv] >= bid}

    def codec_roundtrip(self, source: ArrivalSource, directory: Optional[str] = None) -> ArrivalSource:
        """Save to a file and load it back"""
        with tempfile.TemporaryDirectory(dir=directory) as scratch:
            path = Path(scratch) / "instance.json"
            self.codec.save_instance(source, path)
            return self.codec.load_instance(path)


def get_instance_service() -> InstanceService:
    """Get instance service instance"""
    return InstanceService()
