"""
Data models for the adalloc toolkit.

Instances (static and adaptive), base-d/(d-1) digit vectors, run results,
traces and dual state, oracle certificates and experiment rows. Models are
plain dataclasses; the services package holds the operations on them.
"""

from .errors import (
    AdAllocError, InstanceError, InstanceParseError, InstanceReferenceError,
    InstanceValidationError, UndefinedRatioError, ContractError, TieScriptError,
    ParameterError, SizeCapError, NumeralError, PlaceUnderflowError,
    NoOverflowError, NullDigitError, TraceMismatchError
)
from .instance_models import (
    Advertiser, AdSlot, InstanceMeta, Instance, KdReport, ArrivalSource,
    SlotStream, StaticSlotStream, AdaptiveInstance
)
from .digit_vector import (
    DigitVector, value, place_add, place_sub, shift_append, truncate_fraction,
    pop_overflow, extract_common, trim_to, digit_eq, value_eq
)
from .run_models import (
    AlgorithmKind, TiePolicy, TieBreak, Match, AllocationResult, AdvertiserSnapshot,
    NormalizationEvent, ArrivalRecord, FinalizationRecord, RunTrace, DualState
)
from .certificate_models import (
    OptKind, OptCertificate, HallReport, EdgeViolation, AuditResult,
    PotentialTracker, LemmaReport, CheckOutcome, CertificationReport
)
from .experiment_models import ExperimentSpec, BoundRow, ExperimentReport, REPORT_COLUMNS

__all__ = [
    'AdAllocError',
    'InstanceError',
    'InstanceParseError',
    'InstanceReferenceError',
    'InstanceValidationError',
    'UndefinedRatioError',
    'ContractError',
    'TieScriptError',
    'ParameterError',
    'SizeCapError',
    'NumeralError',
    'PlaceUnderflowError',
    'NoOverflowError',
    'NullDigitError',
    'TraceMismatchError',
    'Advertiser',
    'AdSlot',
    'InstanceMeta',
    'Instance',
    'KdReport',
    'ArrivalSource',
    'SlotStream',
    'StaticSlotStream',
    'AdaptiveInstance',
    'DigitVector',
    'value',
    'place_add',
    'place_sub',
    'shift_append',
    'truncate_fraction',
    'pop_overflow',
    'extract_common',
    'trim_to',
    'digit_eq',
    'value_eq',
    'AlgorithmKind',
    'TiePolicy',
    'TieBreak',
    'Match',
    'AllocationResult',
    'AdvertiserSnapshot',
    'NormalizationEvent',
    'ArrivalRecord',
    'FinalizationRecord',
    'RunTrace',
    'DualState',
    'OptKind',
    'OptCertificate',
    'HallReport',
    'EdgeViolation',
    'AuditResult',
    'PotentialTracker',
    'LemmaReport',
    'CheckOutcome',
    'CertificationReport',
    'ExperimentSpec',
    'BoundRow',
    'ExperimentReport',
    'REPORT_COLUMNS'
]
