"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line interface:
0 ok, 1 other failures (including a rerun mismatch), 2 configuration,
3 Bragg / decoherence-free divergence, 4 defective spectrum with no usable fallback, 5 non-convergent tau.
"""

from __future__ import annotations


class TransportError(Exception):
    exit_code = 1


class ConfigError(TransportError, ValueError):
    exit_code = 2


class NoDrive(ConfigError):
    """The drive mask selects no atom, so the steady state is identically zero."""


class StepTooLarge(ConfigError):
    pass


class TooLarge(ConfigError):
    pass


class SingularMatrix(TransportError):
    """Interaction matrix is singular: a Bragg-spaced, decoherence-free case."""

    exit_code = 3

    def __init__(self, message: str, spacings: tuple[float, float, float] | None = None):
        super().__init__(message)
        self.spacings = spacings


class DivergentMode(TransportError):
    exit_code = 3


class Defective(TransportError):
    """Eigenvectors coalesce; the eigenmode expansion is not trustworthy."""

    exit_code = 4

    def __init__(self, message: str, condition_number: float = float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class EigenUnavailable(Defective):
    pass


class NonConvergent(TransportError):
    exit_code = 5


class ZeroState(TransportError):
    pass


class PositivityLost(TransportError):
    pass
