"""Exception hierarchy shared by the solver modules and the CLI."""

from __future__ import annotations


class SspError(Exception):
    """Base class for all errors raised by sspkit."""

    exit_code = 4


class InvalidModelError(SspError):
    """A model (or generated branch) violates the SSP invariants."""

    exit_code = 1

    def __init__(self, violations, where: str | None = None):
        self.violations = list(violations)
        head = f"invalid model ({where})" if where else "invalid model"
        lines = [str(v) for v in self.violations[:10]]
        super().__init__(head + ": " + "; ".join(lines))


class NonConvergenceError(SspError):
    """An iteration ran out of sweeps before meeting its stopping rule."""

    exit_code = 2

    def __init__(self, message: str, trace=None):
        self.trace = trace
        super().__init__(message)


class ParameterError(SspError, ValueError):
    exit_code = 3


class InfeasiblePolicyError(ParameterError):
    """A policy picks a control that is not available at some state."""


class ContractViolation(SspError):
    """A post-condition that the theory guarantees did not hold.

    Seeing one of these means a solver bug (or a numerical edge case that
    the tolerances do not cover), not bad user input.
    """

    exit_code = 4
