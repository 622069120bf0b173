"""
Exception hierarchy for the adalloc toolkit.

Validators report problems in result objects; these exceptions are reserved
for contract breaches, unreadable input and requests the oracles or
generators refuse to serve.
"""

from typing import Optional


class AdAllocError(Exception):
    """Base class for every toolkit error"""


class InstanceError(AdAllocError):
    """Problems with an instance or its on-disk form"""


class InstanceParseError(InstanceError):
    """Malformed instance or trace file"""

    def __init__(self, message: str, field_path: str = "", line: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field_path:
            location.append(f"field {field_path}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.field_path = field_path
        self.line = line


class InstanceReferenceError(InstanceError):
    """An edge references an advertiser that does not exist"""


class InstanceValidationError(InstanceError):
    """An instance invariant is violated (bid above budget, duplicate edge, ...)"""


class UndefinedRatioError(AdAllocError):
    """The bid-to-budget ratio of an edge-free instance is undefined"""


class ContractError(AdAllocError):
    """An algorithm was handed input outside its precondition"""


class TieScriptError(ContractError):
    """An adversarial tie script named a non-argmax or infeasible advertiser"""


class ParameterError(AdAllocError):
    """Invalid generator or experiment parameters"""


class SizeCapError(AdAllocError):
    """A request exceeds a configured size cap"""

    def __init__(self, message: str, required_bytes: Optional[int] = None):
        if required_bytes is not None:
            message = f"{message} (needs about {required_bytes / 2 ** 20:.1f} MiB)"
        super().__init__(message)
        self.required_bytes = required_bytes


class NumeralError(AdAllocError):
    """Digit vector operation outside its precondition"""


class PlaceUnderflowError(NumeralError):
    """Placewise subtraction went negative"""

    def __init__(self, place: int):
        super().__init__(f"place_sub underflow at place {place}")
        self.place = place


class NoOverflowError(NumeralError):
    """pop_overflow called on a vector without a non-null place-k digit"""


class NullDigitError(NumeralError):
    """extract_common called on a vector with a null digit"""


class TraceMismatchError(AdAllocError):
    """A trace does not belong to the instance it is certified against"""
