"""
Services package for the adalloc toolkit.

Contains the instance codec and validation, the online algorithms, dual
certification, offline oracles, instance generators and the experiment
harness.
"""

from .codec_service import CodecService, get_codec_service
from .instance_service import InstanceService, get_instance_service
from .adaptive_sources import (
    StepwiseInstance, StarInstance, HighDegreeUpperBoundInstance, AdwordsUpperBoundInstance,
    SplitCopiesInstance, build_adaptive
)
from .allocation_service import AllocationService, get_allocation_service, scaling_constant
from .certification_service import CertificationService, get_certification_service, ratio_bound
from .oracle_service import OracleService, get_oracle_service
from .generator_service import GeneratorService, GeneratedInstance, get_generator_service
from .experiment_service import (
    ExperimentService, get_experiment_service, matching_bound, greedy_matching_bound, greedy_bound,
    det_bound, guaranteed_matched, saturates_all
)

__all__ = [
    'CodecService',
    'get_codec_service',
    'InstanceService',
    'get_instance_service',
    'StepwiseInstance',
    'StarInstance',
    'HighDegreeUpperBoundInstance',
    'AdwordsUpperBoundInstance',
    'SplitCopiesInstance',
    'build_adaptive',
    'AllocationService',
    'get_allocation_service',
    'scaling_constant',
    'CertificationService',
    'get_certification_service',
    'ratio_bound',
    'OracleService',
    'get_oracle_service',
    'GeneratorService',
    'GeneratedInstance',
    'get_generator_service',
    'ExperimentService',
    'get_experiment_service',
    'matching_bound',
    'greedy_matching_bound',
    'greedy_bound',
    'det_bound',
    'guaranteed_matched',
    'saturates_all'
]
