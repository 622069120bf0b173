"""
Experiment and bound-table models.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

from .certificate_models import CertificationReport
from .run_models import AlgorithmKind, RunTrace, TieBreak

REPORT_COLUMNS = [
    "instance", "algorithm", "k", "d", "r_max", "revenue", "opt", "opt_kind",
    "ratio", "bound", "bound_met", "seed", "trials"
]


@dataclass
class ExperimentSpec:
    """
    One experiment: an instance source, an algorithm with its parameters and
    the report destination. Either instance_path or generator must be set.
    """
    algorithm: AlgorithmKind
    instance_path: Optional[str] = None
    generator: Optional[str] = None
    generator_params: Dict[str, Any] = field(default_factory=dict)
    k: Optional[int] = None
    d: Optional[int] = None
    tie: Optional[TieBreak] = None  # None: the generator's script for greedy, else the algorithm default
    verify: str = "ratio"
    trials: int = 1
    seed: int = 0
    report_path: Optional[str] = None

    def validate(self) -> List[str]:
        """Problems with the spec; empty when it can run"""
        problems = []
        if not self.instance_path and not self.generator:
            problems.append("an instance file or a generator is required")
        if self.instance_path and self.generator:
            problems.append("give either an instance file or a generator, not both")
        if self.algorithm.is_randomized and self.trials < 1:
            problems.append("randomized algorithms need at least one trial")
        if self.verify not in ("off", "ratio", "full"):
            problems.append(f"unknown verification level {self.verify!r}")
        return problems

    @property
    def label(self) -> str:
        if self.instance_path:
            return self.instance_path
        params = ",".join(f"{key}={value}" for key, value in sorted(self.generator_params.items()))
        return f"{self.generator}({params})"


@dataclass
class BoundRow:
    """Closed-form competitive ratios for one R (and optionally one (k,d))"""
    r: Fraction
    k: Optional[int] = None
    d: Optional[int] = None
    greedy_bound: Optional[Fraction] = None
    greedy_matching_bound: Optional[Fraction] = None
    matching_bound: Optional[Fraction] = None
    det_bound: Optional[Fraction] = None
    exponential_bound: Optional[Any] = None
    asymptotic_ours: Any = None
    asymptotic_sota: Any = None


@dataclass
class ExperimentReport:
    """Rows in the fixed CSV schema plus the aggregate statistics behind them"""
    spec: ExperimentSpec
    rows: List[Dict[str, Any]] = field(default_factory=list)
    certification: Optional[CertificationReport] = None
    trace: Optional[RunTrace] = None  # last run
    ratios: List[Fraction] = field(default_factory=list)
    mean_ratio: Optional[Fraction] = None
    std_ratio: Optional[float] = None
    stderr_ratio: Optional[float] = None
    bound: Optional[Fraction] = None
    bound_met: str = "n/a"  # true | false | unknown (OPT only bounded) | n/a

    @property
    def exit_code(self) -> int:
        if self.certification is not None and not self.certification.passed:
            return 1
        if self.bound_met == "false":
            return 2
        return 0
