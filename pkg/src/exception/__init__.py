import sys
import logging
import traceback


def error_message_detail(error: Exception, error_detail: sys) -> str:
    """
    Build a descriptive error message with the file name and line number where
    the error originated.

    When an exception is in flight, the location is read from
    `error_detail.exc_info()`. Typed errors raised directly by the numerical
    components have no traceback yet, so the location is taken from the frame
    that constructed the exception instead.

    Parameters
    ----------
    error : Exception
        The exception instance (or message) being reported.
    error_detail : sys
        The `sys` module, used to retrieve traceback information.

    Returns
    -------
    str
        A formatted error message containing file name, line number, and the exception text.
    """
    _, _, exc_tb = error_detail.exc_info()

    if exc_tb is not None:
        while exc_tb.tb_next is not None:
            exc_tb = exc_tb.tb_next
        file_name = exc_tb.tb_frame.f_code.co_filename
        line_number = exc_tb.tb_lineno
    else:
        # skip this function and the exception constructors
        frames = [f for f in traceback.extract_stack()[:-1] if f.filename != __file__]
        origin = frames[-1] if frames else None
        file_name = origin.filename if origin else "<unknown>"
        line_number = origin.lineno if origin else -1

    error_message = f"Error occured in python script: [{file_name}] at line number [{line_number}]: {str(error)}"

    logging.error(error_message)

    return error_message


class CustomException(Exception):
    """
    A standardized application-level exception that captures detailed context
    including file name, line number, and the original error message.

    Every typed error of the package derives from it, so callers that only care
    about "something in the engine failed" can catch this single class.
    """

    def __init__(self, error_message, error_detail: sys = sys):
        """
        Parameters
        ----------
        error_message : str or Exception
            The raw exception message or description of the error.
        error_detail : sys
            The `sys` module used to retrieve traceback information for the error.
        """
        super().__init__(str(error_message))
        self.raw_message = str(error_message)
        self.error_message = error_message_detail(error_message, error_detail)

    def __str__(self) -> str:
        return self.error_message


class RangeError(CustomException):
    """An index or order lies outside a precomputed table."""


class NumericError(CustomException):
    """Non-finite samples reached a quadrature or transform."""


class DomainTooSmallError(CustomException):
    """Significant density mass sits next to the grid boundary."""


class DegenerateExtremumError(CustomException):
    """The chosen extremum has a vanishing second derivative."""


class ModelDomainError(CustomException):
    """A demographic or segregation parameter is out of its domain."""


class InsufficientMetadataError(CustomException):
    """A global minimum is required but neither known nor searchable."""


class SingularOperatorError(CustomException):
    """The linear part of the steady problem is (near) singular."""


class DegeneratePivotError(CustomException):
    """The linear alpha_1 equation has a vanishing pivot."""


class NoRealRootError(CustomException):
    """The alpha_1 quadratic has no real root (epsilon too large)."""


class DivergenceError(CustomException):
    """A fixed-point iteration stopped contracting or ran out of iterations."""


class InadmissibleError(CustomException):
    """The steady denominator 1 + m - int(m q) is nonpositive on the support."""


class BlowUpError(CustomException):
    """The Galerkin state left the blow-up guard."""


class StepSizeError(CustomException):
    """An explicit step produced negative density values."""


class FitError(CustomException):
    """A decay-rate fit was attempted on a non-decaying window."""


class FitOverflowError(CustomException):
    """A weighted tail integral diverges on the grid."""


class ConfigError(CustomException):
    """An experiment configuration is malformed."""


class ValidationFailure(CustomException):
    """At least one property check of the validation suite failed."""
