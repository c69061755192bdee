"""Exception hierarchy shared by the analysis, solver and CLI layers."""


class UrbanCrimeError(Exception):
    """Base class for all package errors."""


class NotFound(UrbanCrimeError, KeyError):
    """A named builtin (kinetics pack, canned config, ...) does not exist."""

    def __str__(self):
        return Exception.__str__(self)


class ZeroModeExcluded(UrbanCrimeError, ValueError):
    """The constant Neumann mode (sigma = 0) was requested."""


class HypothesisViolated(UrbanCrimeError, ValueError):
    """A structural hypothesis of the analysis fails (e.g. eta(A) <= eta'(A) B)."""


class NoPositiveBifurcation(UrbanCrimeError, ValueError):
    """Every enumerated bifurcation value is non-positive."""


class DegenerateProjection(UrbanCrimeError, ArithmeticError):
    """Zero denominator while solving for the first-order projections."""


class ResonantK2(UrbanCrimeError, ArithmeticError):
    """The linear system for the second-order branch coefficient is singular."""


class PreconditionError(UrbanCrimeError, ValueError):
    """An operation was called outside its stated precondition."""


class NumericalBlowup(UrbanCrimeError, FloatingPointError):
    """Time stepping failed: non-finite values or persistent step rejection.

    ``state`` carries the last finite state when one is available.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class InsufficientData(UrbanCrimeError, ValueError):
    """Too few valid samples for a fit."""


class ConfigError(UrbanCrimeError, ValueError):
    """Malformed or invalid run configuration."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.detail = message
        self.key = key
        self.line = line
