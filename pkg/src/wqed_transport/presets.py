"""Named parameter sets used for figure reproduction."""

from __future__ import annotations

from math import pi

from .config import SystemConfig


def single_mode(**changes) -> SystemConfig:
    """Single spectrally isolated, right-localized mode (optimal transport)."""
    base = SystemConfig(n_left=10, n_right=10, xi_left=1.8 * pi, xi_d=1.5 * pi,
                        xi_right=1.158 * pi, directionality=0.5)
    return base.replace(**changes) if changes else base


def mode_pair(**changes) -> SystemConfig:
    """Two nearly degenerate isolated modes sharing the transport."""
    base = SystemConfig(n_left=10, n_right=10, xi_left=1.96 * pi, xi_d=1.158 * pi,
                        xi_right=1.158 * pi, directionality=0.5)
    return base.replace(**changes) if changes else base


def optimum_cut(xi_right: float, **changes) -> SystemConfig:
    """A point on the xi_left = 1.8 pi line of the N = 20, D = 0.5 phase diagram."""
    return single_mode(xi_right=xi_right, **changes)


def fringe_array(n_left: int, n_right: int, xi_left: float = 1.5 * pi, xi_right: float = pi,
                 **changes) -> SystemConfig:
    """D = 0.5, xi_D = 1.5 pi; used for counting high-T_p fringes along xi_R."""
    base = SystemConfig(n_left=n_left, n_right=n_right, xi_left=xi_left, xi_d=1.5 * pi,
                        xi_right=xi_right, directionality=0.5)
    return base.replace(**changes) if changes else base


PRESETS = {"single-mode": single_mode, "mode-pair": mode_pair}
