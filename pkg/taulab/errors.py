"""
Error hierarchy for taulab.

Domain errors are caller input outside a contract (CLI exit code 2).
Numerical errors are failures of a computation on valid input (exit code 3).
"""

from typing import Any, Dict, Optional


class TaulabError(Exception):
    """Base class for every error raised by taulab."""

    tag: str = "taulab"
    exit_code: int = 3

    def __init__(self, message: str, *, tag: Optional[str] = None, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        if tag is not None:
            self.tag = tag
        self.context: Dict[str, Any] = dict(context or {})

    def __str__(self) -> str:
        message = super().__str__()
        return f"[{self.tag}] {message}"


class DomainError(TaulabError, ValueError):
    """Input outside the documented domain of an operation."""

    tag = "domain"
    exit_code = 2


class ParseError(DomainError):
    """Malformed command-line or config field."""

    tag = "parse"


class DuplicateExponentError(DomainError):
    """Two exponents coincide, so the exponential family is not independent."""

    tag = "duplicate-exponent"


class NonDecayingSymbolError(DomainError):
    """Re beta <= 0: the Lame symbol does not decay along the half line."""

    tag = "non-decaying-symbol"


class PoleError(DomainError):
    """Evaluation at (or numerically on top of) a pole."""

    tag = "pole"


class NumericalError(TaulabError, ArithmeticError):
    """A computation failed on valid input."""

    tag = "numerical"
    exit_code = 3


class SingularMatrixError(NumericalError):
    """LU factorization hit an exactly zero pivot."""

    tag = "singular-matrix"


class NearSingularError(NumericalError):
    """Matrix condition number exceeded the inversion threshold."""

    tag = "near-singular"

    def __init__(self, message: str, *, cond: float, **kwargs: Any):
        super().__init__(message, **kwargs)
        self.cond = cond
        self.context.setdefault("cond", cond)


class ResonantIndexError(NumericalError):
    """Sylvester step n has W_inf and W_inf + nI sharing an eigenvalue."""

    tag = "resonant-index"

    def __init__(self, message: str, *, n: int, **kwargs: Any):
        super().__init__(message, **kwargs)
        self.n = n
        self.context.setdefault("n", n)


class IntegrationError(NumericalError):
    """ODE integrator or quadrature routine did not succeed."""

    tag = "integration"


class ConvergenceError(NumericalError):
    """A truncation never reached its plateau."""

    tag = "convergence"


class NonFiniteOutputError(NumericalError):
    """NaN or Inf about to be written to an output file."""

    tag = "non-finite"
