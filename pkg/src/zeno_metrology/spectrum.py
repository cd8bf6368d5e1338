"""Bound state of the probe-environment system.

A pole of the Laplace-transformed amplitude satisfies ``y(varpi) = varpi`` with

    y(varpi) = omega0 + gamma - int_0^inf J(w) / (w - varpi) dw.

Below the band edge (``varpi < 0``) ``y`` decreases with increasing ``varpi``,
so there is exactly one isolated root when ``y(0) < 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .spectral import NoiseSpec, ProbeSpec, dispersion_integral, second_dispersion_integral

__all__ = [
    "BoundState",
    "BracketError",
    "y_function",
    "bound_state_exists",
    "find_bound_state",
    "bound_state_gamma_sensitivity",
    "y_samples",
]


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundState:
    varpi_b: float
    Z: float
    residual: float = 0.0

    def __post_init__(self):
        if not self.varpi_b < 0:
            raise ValueError(f"bound-state frequency must be negative, got {self.varpi_b}")
        if not 0 < self.Z <= 1:
            raise ValueError(f"residue must lie in (0, 1], got {self.Z}")


def y_function(probe: ProbeSpec, noise: NoiseSpec, varpi: float) -> float:
    if varpi > 0:
        raise ValueError("y is evaluated below the band edge only (varpi <= 0)")
    return probe.frequency - dispersion_integral(noise, varpi)


def bound_state_exists(probe: ProbeSpec, noise: NoiseSpec) -> bool:
    """True iff ``y(0) < 0``; the marginal case ``y(0) == 0`` counts as absent."""
    return y_function(probe, noise, 0.0) < 0.0


def find_bound_state(probe: ProbeSpec, noise: NoiseSpec, tol: float | None = None) -> BoundState | None:
    """Solve ``y(varpi) = varpi`` on ``varpi < 0``; ``None`` when no bound state forms.

    The root is bracketed in ``[varpi_lo, 0]`` (``varpi_lo`` expanded
    geometrically from ``-(omega0 + gamma)``), bisected down to ``tol``
    (default ``1e-12 omega0``) and polished by three secant-slope Newton steps.
    """
    if not bound_state_exists(probe, noise):
        return None
    tol = 1e-12 * probe.omega0 if tol is None else tol

    def g(v):
        return y_function(probe, noise, v) - v

    hi = 0.0
    lo = -probe.frequency
    for _ in range(200):
        if g(lo) > 0:
            break
        hi = lo
        lo *= 2.0
    else:
        raise BracketError("could not bracket the bound-state root")

    # g(lo) > 0 >= g(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    for _ in range(3):
        step = max(1e-7 * abs(root), 1e-14)
        if root + step >= 0:
            break
        slope = (g(root + step) - g(root - step)) / (2 * step)
        cand = root - g(root) / slope
        if not lo <= cand <= hi or abs(g(cand)) > abs(g(root)):
            break
        root = cand

    Z = 1.0 / (1.0 + second_dispersion_integral(noise, root))
    return BoundState(varpi_b=root, Z=Z, residual=abs(g(root)))


def bound_state_gamma_sensitivity(probe: ProbeSpec, noise: NoiseSpec, step: float | None = None) -> float:
    """Central difference of ``varpi_b`` in ``gamma``; equals ``Z`` analytically."""
    step = 1e-5 * probe.omega0 if step is None else step
    up = find_bound_state(replace(probe, gamma=probe.gamma + step), noise)
    down = find_bound_state(replace(probe, gamma=probe.gamma - step), noise)
    if up is None or down is None:
        raise ValueError("no bound state within the finite-difference stencil")
    return (up.varpi_b - down.varpi_b) / (2 * step)


def y_samples(probe: ProbeSpec, noise: NoiseSpec, varpi) -> np.ndarray:
    """``y`` on a grid of ``varpi <= 0``, for redrawing the spectrum construction."""
    return np.array([y_function(probe, noise, float(v)) for v in np.atleast_1d(varpi)])

