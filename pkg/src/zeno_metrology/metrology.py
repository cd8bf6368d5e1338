"""Photon-difference statistics and frequency-estimation precision.

The interferometer is fed with a coherent state ``alpha = |alpha| e^{i phi_coh}``
in one port and squeezed vacuum ``xi = r e^{i phi_sq}`` in the other. The
measured observable is the photon-number difference ``M`` of the two output
ports, and the precision of estimating ``gamma`` follows from error
propagation, ``delta_gamma = delta_M / |d M_mean / d gamma|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import Trajectory, solve_c

__all__ = [
    "InputState",
    "PrecisionSeries",
    "DegenerateStateError",
    "ideal_statistics",
    "ideal_min_delta_gamma",
    "zeno_limit",
    "shot_noise_limit",
    "noisy_statistics",
    "delta_gamma_series",
    "asymptotic_min_delta_gamma",
    "zeno_asymptotic_min_delta_gamma",
    "markovian_min_delta_gamma",
    "markovian_optimal_delta_gamma",
    "optimal_beta",
    "find_local_minima",
]

_AMPLITUDE_SLACK = 1e-6
_MIN_RESIDUE = 1e-6


class DegenerateStateError(ValueError):
    """beta = 1/2: the mean signal carries no gamma dependence."""


def optimal_beta(N: float) -> float:
    """Large-N optimal squeezed fraction (2 sqrt(N))^-1."""
    if not N > 0:
        raise ValueError(f"N must be > 0, got {N}")
    return 0.5 / math.sqrt(N)


@dataclass(frozen=True)
class InputState:
    """Coherent (x) squeezed-vacuum input with ``N`` photons, a fraction ``beta`` squeezed.

    The default phases (both zero) satisfy ``phi_sq = 2 phi_coh`` as well as
    ``phi_coh = 2 phi_sq``. Use :meth:`matched` for nonzero phases.
    """

    N: float
    beta: float
    phi_coh: float = 0.0
    phi_sq: float = 0.0
    r: float = field(init=False, repr=False)
    alpha_abs: float = field(init=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.N) and self.N > 0):
            raise ValueError(f"N must be > 0, got {self.N}")
        if not 0 <= self.beta < 1:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        object.__setattr__(self, "r", math.asinh(math.sqrt(self.beta * self.N)))
        object.__setattr__(self, "alpha_abs", math.sqrt((1.0 - self.beta) * self.N))

    @classmethod
    def matched(cls, N, beta, phi_coh=0.0, convention="sq=2coh"):
        """Build a state whose phases satisfy one of the two phase-matching conventions.

        ``"sq=2coh"`` sets ``phi_sq = 2 phi_coh`` (the condition for the ideal
        optimum); ``"coh=2sq"`` treats the given angle as ``phi_sq`` and sets
        ``phi_coh = 2 phi_sq``.
        """
        if convention == "sq=2coh":
            return cls(N, beta, phi_coh, 2.0 * phi_coh)
        if convention == "coh=2sq":
            return cls(N, beta, 2.0 * phi_coh, phi_coh)
        raise ValueError(f"unknown convention {convention!r}")

    @property
    def alpha(self) -> complex:
        return self.alpha_abs * complex(math.cos(self.phi_coh), math.sin(self.phi_coh))

    @property
    def sinh2r(self) -> float:
        return self.beta * self.N

    @property
    def contrast(self) -> float:
        """sinh^2 r - |alpha|^2, the amplitude of the mean signal."""
        return self.sinh2r - self.alpha_abs**2

    def _quadrature_terms(self) -> tuple[float, float]:
        # (in-phase weight, out-of-phase weight) multiplying Re^2 and Im^2 of e^{i w0 t} c
        r = self.r
        a = self.alpha
        mixed = abs(a * math.cosh(r) - a.conjugate() * complex(math.cos(self.phi_sq), math.sin(self.phi_sq)) * math.sinh(r)) ** 2
        in_phase = self.alpha_abs**2 + 0.5 * math.sinh(2 * r) ** 2
        out_phase = mixed + self.sinh2r
        return in_phase, out_phase


@dataclass(frozen=True)
class PrecisionSeries:
    """delta_gamma(t) with the statistics it was built from; NaN marks undefined points."""

    times: np.ndarray
    delta_gamma: np.ndarray
    mean_M: np.ndarray
    delta_M: np.ndarray
    local_minima: list = field(default_factory=list)

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.delta_gamma)


def ideal_statistics(state: InputState, gamma: float, t: float) -> tuple[float, float]:
    if t < 0:
        raise ValueError("t must be >= 0")
    cos2 = math.cos(gamma * t) ** 2
    in_phase, out_phase = state._quadrature_terms()
    mean = state.contrast * math.cos(gamma * t)
    return mean, math.sqrt(cos2 * in_phase + (1.0 - cos2) * out_phase)


def ideal_min_delta_gamma(state: InputState, t: float) -> float:
    """Best ideal precision, reached at ``gamma t = (2m+1) pi/2`` with matched phases."""
    if t <= 0:
        raise ValueError("t must be > 0")
    if state.beta == 0.5:
        raise DegenerateStateError("beta = 1/2 leaves the mean signal independent of gamma")
    b = state.beta
    num = math.sqrt((1.0 - b) * math.exp(-2.0 * state.r) + b)
    return num / (t * math.sqrt(state.N) * abs(1.0 - 2.0 * b))


def zeno_limit(N: float, t: float) -> float:
    """(t N^{3/4})^-1."""
    if N <= 0 or t <= 0:
        raise ValueError("N and t must be > 0")
    return 1.0 / (t * N**0.75)


def shot_noise_limit(N: float, t: float) -> float:
    """(t N^{1/2})^-1."""
    if N <= 0 or t <= 0:
        raise ValueError("N and t must be > 0")
    return 1.0 / (t * math.sqrt(N))


def noisy_statistics(state: InputState, c, omega0: float, t):
    """Mean and deviation of M for probe amplitude ``c`` at time ``t``.

    Vectorised over matching arrays ``c`` and ``t``. The last variance term,
    ``(1 - |c|^2)(|alpha|^2 + sinh^2 r)/2``, is the vacuum noise let in by
    photon loss.
    """
    c = np.asarray(c, dtype=complex)
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(c) > 1.0 + _AMPLITUDE_SLACK):
        raise ValueError("probe amplitude exceeds 1 (|c| > 1 + 1e-6)")
    rot = np.exp(1j * omega0 * t) * c
    re, im = rot.real, rot.imag
    in_phase, out_phase = state._quadrature_terms()
    loss = 0.5 * (1.0 - np.abs(c) ** 2) * state.N
    var = re**2 * in_phase + im**2 * out_phase + loss
    mean = re * state.contrast
    dM = np.sqrt(np.maximum(var, 0.0))
    if mean.ndim == 0:
        return float(mean), float(dM)
    return mean, dM


def _finite_difference_sensitivity(traj: Trajectory, step: float) -> np.ndarray:
    probe = traj.probe
    up = solve_c(replace(probe, gamma=probe.gamma + step), traj.noise, traj.t_max, traj.h)
    down = solve_c(replace(probe, gamma=probe.gamma - step), traj.noise, traj.t_max, traj.h)
    return (up.c - down.c) / (2.0 * step)


def delta_gamma_series(
    state: InputState, traj: Trajectory, find_minima: bool = True, fd_step: float | None = None
) -> PrecisionSeries:
    """Pointwise precision along a trajectory that carries ``dc_dgamma``.

    ``d M_mean / d gamma = Re[e^{i omega0 t} dc/dgamma] (sinh^2 r - |alpha|^2)``.
    Points where this slope falls below ``1e-12 t N`` are left undefined (NaN).
    Passing ``fd_step`` replaces ``dc_dgamma`` by a central difference of two
    extra solves at ``gamma +- fd_step`` (a cross-check mode).
    """
    if fd_step is not None:
        dc = _finite_difference_sensitivity(traj, fd_step)
    elif traj.dc_dgamma is None:
        raise ValueError("trajectory has no gamma-sensitivity; use solve_sensitivity")
    else:
        dc = traj.dc_dgamma
    omega0 = traj.probe.omega0
    mean, dM = noisy_statistics(state, traj.c, omega0, traj.times)
    slope = (np.exp(1j * omega0 * traj.times) * dc).real * state.contrast
    cutoff = 1e-12 * traj.times * state.N
    dg = np.full_like(dM, np.nan)
    ok = np.abs(slope) > cutoff
    ok &= np.abs(slope) > 0
    dg[ok] = dM[ok] / np.abs(slope[ok])
    series = PrecisionSeries(times=traj.times, delta_gamma=dg, mean_M=mean, delta_M=dM)
    if find_minima:
        series.local_minima.extend(find_local_minima(series))
    return series


def find_local_minima(series: PrecisionSeries) -> list[tuple[float, float]]:
    """Discrete 3-point minima of ``delta_gamma``, refined by a parabola through the neighbours.

    Undefined (NaN) samples never take part in a candidate window.
    """
    y = np.asarray(series.delta_gamma, dtype=float)
    t = np.asarray(series.times, dtype=float)
    if np.count_nonzero(np.isfinite(y)) < 3:
        return []
    y0, y1, y2 = y[:-2], y[1:-1], y[2:]
    finite = np.isfinite(y0) & np.isfinite(y1) & np.isfinite(y2)
    with np.errstate(invalid="ignore"):
        idx = np.nonzero(finite & (y1 < y0) & (y1 <= y2))[0] + 1
    out = []
    for i in idx:
        a, b, c = y[i - 1], y[i], y[i + 1]
        curv = a - 2.0 * b + c
        dt = 0.5 * (t[i + 1] - t[i - 1])
        if curv > 0:
            shift = 0.5 * (a - c) / curv
            out.append((float(t[i] + shift * dt), float(b - 0.125 * (a - c) ** 2 / curv)))
        else:
            out.append((float(t[i]), float(b)))
    return out


def _check_residue(Z):
    if not (_MIN_RESIDUE <= Z <= 1.0):
        raise ValueError(f"residue Z must lie in [{_MIN_RESIDUE}, 1], got {Z}")


def asymptotic_min_delta_gamma(N: float, beta: float, Z: float, t: float) -> float:
    """Long-time local-minimum precision when a bound state with residue ``Z`` forms.

    ``[(1-beta) e^{-2r} + beta + (1-Z^2)/(2 Z^2)]^{1/2} / (Z t sqrt(N) |1 - 2 beta|)``
    with exact ``r``; see :func:`zeno_asymptotic_min_delta_gamma` for the
    large-N form at ``beta = (2 sqrt N)^-1``.
    """
    _check_residue(Z)
    if t <= 0:
        raise ValueError("t must be > 0")
    if beta == 0.5:
        raise DegenerateStateError("beta = 1/2 is degenerate")
    r = math.asinh(math.sqrt(beta * N))
    num = (1.0 - beta) * math.exp(-2.0 * r) + beta + (1.0 - Z * Z) / (2.0 * Z * Z)
    return math.sqrt(num) / (Z * t * math.sqrt(N) * abs(1.0 - 2.0 * beta))


def zeno_asymptotic_min_delta_gamma(N: float, Z: float, t: float) -> float:
    """Large-N form ``(t N^{3/4})^-1 / Z * [1 + (1-Z^2) sqrt(N) / (2 Z^2)]^{1/2}``.

    Obtained from :func:`asymptotic_min_delta_gamma` at ``beta = (2 sqrt N)^-1``
    with ``e^{-2r} ~ 1/(4 sinh^2 r)`` and ``1 - beta, 1 - 2 beta -> 1``; at
    ``N = 100`` it sits about 10% below the exact-r value.
    """
    _check_residue(Z)
    return zeno_limit(N, t) / Z * math.sqrt(1.0 + (1.0 - Z * Z) * math.sqrt(N) / (2.0 * Z * Z))


def markovian_min_delta_gamma(N: float, kappa: float, t: float) -> float:
    """((e^{2 kappa t} - 1) / (2 N t^2))^{1/2}, the Markovian precision at beta = (2 sqrt N)^-1."""
    if kappa < 0 or t <= 0:
        raise ValueError("need kappa >= 0 and t > 0")
    return math.sqrt(math.expm1(2.0 * kappa * t) / (2.0 * N * t * t))


def markovian_optimal_delta_gamma(N: float, kappa: float) -> float:
    """Value ``e kappa / sqrt(2N)`` at ``t = 1/kappa``.

    This drops the ``-1`` in ``e^{2 kappa t} - 1``; the exact minimiser of
    :func:`markovian_min_delta_gamma` is at ``kappa t ~ 0.797``.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    return math.e * kappa / math.sqrt(2.0 * N)
