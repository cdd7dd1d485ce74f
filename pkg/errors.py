"""
Error types for the quantum graph toolkit and their exit-code mapping.
Validation problems exit with 2, numerical failures with 3.
"""

import logging
import traceback
from typing import Optional

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class QuantumGraphError(Exception):
    """Base class for every error raised by the toolkit"""

    exit_code = EXIT_UNEXPECTED


class ValidationError(QuantumGraphError, ValueError):
    """Bad input: wrong shapes, out-of-range parameters, non-unitary couplings"""

    exit_code = EXIT_VALIDATION


class DimensionMismatchError(ValidationError):
    pass


class NonUnitaryError(ValidationError):
    pass


class NonCirculantError(ValidationError):
    """Spectral operations need the analytic circulant eigenbasis"""


class ConstraintViolationError(ValidationError):
    pass


class InvalidIntervalError(ValidationError):
    pass


class IndexOutOfRangeError(ValidationError, IndexError):
    pass


class ParameterRangeError(ValidationError):
    pass


class NumericalError(QuantumGraphError, ArithmeticError):
    """The inputs were fine but the computation could not produce a result"""

    exit_code = EXIT_NUMERICAL


class SingularMatrixError(NumericalError):
    pass


class PoleError(NumericalError):
    pass


class EmptyContourError(NumericalError):
    """Fermi contour requested at an energy that lies in a spectral gap"""

    def __init__(self, message: str, q_star: Optional[float] = None):
        super().__init__(message)
        self.q_star = q_star


def exit_code_for(error: BaseException) -> int:
    """Exit code for an exception raised while running a command"""
    if isinstance(error, QuantumGraphError):
        return error.exit_code
    if isinstance(error, OSError):
        # unwritable output path
        return EXIT_VALIDATION
    return EXIT_UNEXPECTED


def handle_command_error(error: BaseException, command: Optional[str] = None) -> int:
    """Log a failed command and return its exit code"""
    tb = "".join(traceback.format_exception(type(error), error, error.__traceback__))
    logger.debug(f"[COMMAND ERROR] {command}: {error}\n{tb}")

    code = exit_code_for(error)
    if isinstance(error, EmptyContourError):
        logger.error(f"❌ {command}: empty Fermi contour, {error}")
    elif isinstance(error, ValidationError):
        logger.error(f"❌ {command}: invalid parameters, {error}")
    elif isinstance(error, NumericalError):
        logger.error(f"❌ {command}: numerical failure, {error}")
    elif isinstance(error, OSError):
        logger.error(f"❌ {command}: cannot write output, {error}")
    else:
        logger.error(f"❌ Unhandled error in command {command}: {error}\n{tb}")
    return code
