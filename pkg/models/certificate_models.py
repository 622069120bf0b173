"""
Certificate and report models.

OptCertificate carries an offline optimum (or an upper bound on it); the
remaining classes collect the outcomes of the dual and lemma checks in the
same spirit as a validation result: checks accumulate failures instead of
raising.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Set, Tuple


class OptKind(Enum):
    """How an optimum value is known"""
    EXACT = "exact"
    UPPER_BOUND = "upper-bound"
    CONSTRUCTION = "construction"


@dataclass
class OptCertificate:
    """Offline optimum; exact certificates carry a witness (slot, advertiser) list"""
    value: Fraction
    kind: OptKind
    witness: Optional[List[Tuple[int, int]]] = None
    source: str = ""

    @property
    def is_exact(self) -> bool:
        return self.kind is not OptKind.UPPER_BOUND


@dataclass
class HallReport:
    """Outcome of Hall's condition; violating_set is a smallest violator"""
    passed: bool
    violating_set: Tuple[int, ...] = ()
    neighborhood: Tuple[int, ...] = ()


@dataclass
class EdgeViolation:
    """An edge whose dual constraint b_ij z_i + y_j >= b_ij fails"""
    slot: int
    advertiser: int
    bid: Fraction
    slack: Fraction


@dataclass
class AuditResult:
    """Per-arrival ratio audit"""
    passed: bool
    bound: Fraction
    offending_arrival: Optional[int] = None
    message: str = ""


@dataclass
class PotentialTracker:
    """phi = sum over unmatched advertisers of (d/(d-1))^{degree}"""
    d: int
    unmatched: Set[int] = field(default_factory=set)
    degrees: List[int] = field(default_factory=list)
    phi: Fraction = Fraction(0)

    @classmethod
    def start(cls, advertiser_count: int, d: int) -> 'PotentialTracker':
        return cls(
            d=d,
            unmatched=set(range(advertiser_count)),
            degrees=[0] * advertiser_count,
            phi=Fraction(advertiser_count)
        )

    @property
    def base(self) -> Fraction:
        return Fraction(self.d, self.d - 1)

    def term(self, advertiser: int) -> Fraction:
        return self.base ** self.degrees[advertiser]


@dataclass
class LemmaReport:
    """Per-advertiser outcome of a lemma check"""
    name: str
    passed: bool = True
    failures: Dict[int, str] = field(default_factory=dict)
    skipped: Set[int] = field(default_factory=set)

    def fail(self, advertiser: int, reason: str):
        self.passed = False
        self.failures.setdefault(advertiser, reason)


@dataclass
class CheckOutcome:
    """One named check inside a certification report"""
    name: str
    passed: bool
    checked: int = 0
    counterexample: Optional[Dict[str, Any]] = None
    detail: str = ""


@dataclass
class CertificationReport:
    """All checks run against one trace"""
    algorithm: str
    level: str
    checks: List[CheckOutcome] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    max_z: Optional[Fraction] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, check: CheckOutcome):
        self.checks.append(check)

    def failed_checks(self) -> List[CheckOutcome]:
        return [check for check in self.checks if not check.passed]

    def first_failure(self) -> Optional[CheckOutcome]:
        failures = self.failed_checks()
        return failures[0] if failures else None

    def to_dict(self) -> Dict[str, Any]:
        """Structured form written next to reports"""
        return {
            "algorithm": self.algorithm,
            "level": self.level,
            "passed": self.passed,
            "max_z": str(self.max_z) if self.max_z is not None else None,
            "warnings": list(self.warnings),
            "checks": [
                {
                    "name": check.name,
                    "passed": check.passed,
                    "checked": check.checked,
                    "counterexample": check.counterexample,
                    "detail": check.detail
                }
                for check in self.checks
            ]
        }
