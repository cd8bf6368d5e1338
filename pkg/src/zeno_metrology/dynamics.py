"""Exact and approximate dynamics of the probe amplitude c(t).

The amplitude obeys the Volterra integro-differential equation

    c'(t) + i (omega0 + gamma) c(t) + int_0^t f(t - tau) c(tau) dtau = 0,  c(0) = 1.

``solve_c`` integrates it with a second-order product-integration trapezoid
rule: ``c`` is linearly interpolated between grid points and integrated
against exact kernel moments, the free rotation ``exp(-i (omega0 + gamma) t)``
is carried by an exact integrating factor, and the newest value is solved
for implicitly.
The history sum is a Toeplitz convolution, which is accumulated with a
divide-and-conquer FFT scheme so that a run costs O(n log^2 n) instead of
O(n^2).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .spectral import (
    NoiseSpec,
    ProbeSpec,
    kernel_interval_weights,
    principal_value_shift,
    spectral_density,
)

__all__ = [
    "Trajectory",
    "MarkovianParams",
    "SolverDivergence",
    "default_step",
    "solve_c",
    "solve_sensitivity",
    "markovian_params",
    "markovian_c",
    "asymptotic_c",
    "plateau",
]

_LEAF = 128


class SolverDivergence(ArithmeticError):
    """Raised when the time stepper produces a non-finite value."""

    def __init__(self, step: int, t: float):
        super().__init__(f"solver diverged at step {step} (t = {t:.6g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class Trajectory:
    """Amplitude record on a uniform grid ``times = h * arange(n + 1)``."""

    times: np.ndarray
    c: np.ndarray
    probe: ProbeSpec
    noise: NoiseSpec
    h: float
    dc_dgamma: np.ndarray | None = field(default=None)

    def __post_init__(self):
        for arr in (self.times, self.c, self.dc_dgamma):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def t_max(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class MarkovianParams:
    kappa: float
    delta: float


def default_step(probe: ProbeSpec, noise: NoiseSpec) -> float:
    """min(0.02/omega0, 0.2/omega_c)."""
    return min(0.02 / probe.omega0, 0.2 / noise.omega_c)


def _grid(t_max: float, h: float) -> int:
    if not t_max > 0 or not h > 0:
        raise ValueError("t_max and h must be positive")
    n = int(round(t_max / h))
    if abs(n * h - t_max) > 1e-9 * t_max:
        n = int(math.ceil(t_max / h))
    return max(n, 1)


def _run(probe, noise, t_max, h, with_sensitivity):
    if noise.eta > 0 and h * noise.omega_c > 0.5:
        warnings.warn(
            f"h * omega_c = {h * noise.omega_c:.3g} > 0.5; the kernel is under-resolved",
            RuntimeWarning,
            stacklevel=3,
        )
    n = _grid(t_max, h)
    times = h * np.arange(n + 1)
    omega = probe.frequency

    if noise.eta == 0:
        P = Q = np.zeros(n + 1, dtype=complex)
    else:
        P, Q = kernel_interval_weights(noise, h, n + 1)
    # I_n = sum_{m<=n} G[n-m] c_m - Q[n+1] c_0  (Q, P indexed from k = 1)
    G = np.empty(n + 1, dtype=complex)
    G[0] = Q[0]
    G[1:] = P[:n] + Q[1 : n + 1]
    tail = np.concatenate(([0j], Q[1 : n + 1]))  # tail[n] = Q_{n+1}

    rows = 2 if with_sensitivity else 1
    x = np.zeros((rows, n + 1), dtype=complex)
    hist = np.zeros((rows, n + 1), dtype=complex)
    x[0, 0] = 1.0

    half = 0.5 * h
    rot = np.exp(-1j * omega * h)
    denom = 1.0 + half * G[0]
    # conv[r] holds the memory integral I at the previous grid point (I_0 = 0)
    conv_prev = [0j, 0j]

    def step_block(lo, hi):
        for k in range(max(lo, 1), hi):
            local = G[k - lo : 0 : -1] if k > lo else None
            hc = hist[0, k] - tail[k] * x[0, 0]
            if local is not None:
                hc += np.dot(local, x[0, lo:k])
            ck = (rot * (x[0, k - 1] - half * conv_prev[0]) - half * hc) / denom
            if not np.isfinite(ck):
                raise SolverDivergence(k, k * h)
            if with_sensitivity:
                hd = hist[1, k]
                if local is not None:
                    hd += np.dot(local, x[1, lo:k])
                # exact gamma-derivative of the step above (d rot / d gamma = -i h rot)
                dk = (
                    rot * (x[1, k - 1] - half * conv_prev[1])
                    - 1j * h * rot * (x[0, k - 1] - half * conv_prev[0])
                    - half * hd
                ) / denom
                if not np.isfinite(dk):
                    raise SolverDivergence(k, k * h)
                x[1, k] = dk
                conv_prev[1] = G[0] * dk + hd
            x[0, k] = ck
            conv_prev[0] = G[0] * ck + hc

    def solve(lo, hi):
        if hi - lo <= _LEAF:
            step_block(lo, hi)
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        # contribution of x[lo:mid] to hist[mid:hi]
        g = G[: hi - lo]
        for r in range(rows):
            conv = signal.fftconvolve(x[r, lo:mid], g)
            hist[r, mid:hi] += conv[mid - lo : hi - lo]
        solve(mid, hi)

    solve(0, n + 1)
    c = x[0].copy()
    d = x[1].copy() if with_sensitivity else None
    return Trajectory(times=times, c=c, probe=probe, noise=noise, h=h, dc_dgamma=d)


def solve_c(probe: ProbeSpec, noise: NoiseSpec, t_max: float, h: float | None = None) -> Trajectory:
    """Integrate the amplitude equation on ``[0, t_max]`` with step ``h``.

    ``h`` defaults to :func:`default_step`. A ``RuntimeWarning`` is issued
    when ``h * omega_c > 0.5`` and the coupling is nonzero.
    """
    h = default_step(probe, noise) if h is None else h
    return _run(probe, noise, t_max, h, with_sensitivity=False)


def solve_sensitivity(probe: ProbeSpec, noise: NoiseSpec, t_max: float, h: float | None = None) -> Trajectory:
    """Like :func:`solve_c` but also integrates d c / d gamma.

    The derivative satisfies the same equation with the extra source
    ``-i c(t)`` and zero initial value. It is advanced as the exact
    gamma-derivative of the discrete step for ``c``, so it agrees with finite
    differences of :func:`solve_c` up to round-off.
    """
    h = default_step(probe, noise) if h is None else h
    return _run(probe, noise, t_max, h, with_sensitivity=True)


def markovian_params(probe: ProbeSpec, noise: NoiseSpec) -> MarkovianParams:
    """Decay rate ``kappa = pi J(omega0 + gamma)`` and principal-value shift ``delta``."""
    a = probe.frequency
    return MarkovianParams(kappa=math.pi * spectral_density(noise, a), delta=principal_value_shift(noise, a))


def markovian_c(params: MarkovianParams, probe: ProbeSpec, t):
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise ValueError("t must be >= 0")
    out = np.exp(-(params.kappa + 1j * (probe.frequency + params.delta)) * tt)
    return complex(out) if out.ndim == 0 else out


def asymptotic_c(bound, t):
    """Long-time form ``Z exp(-i varpi_b t)``; not valid at short times (``asymptotic_c(b, 0) == Z``)."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise ValueError("t must be >= 0")
    out = bound.Z * np.exp(-1j * bound.varpi_b * tt)
    return complex(out) if out.ndim == 0 else out


def plateau(traj: Trajectory, fraction: float = 0.2) -> tuple[float, float]:
    """Mean and standard deviation of ``|c|`` over the final ``fraction`` of the window."""
    start = traj.t_max * (1.0 - fraction)
    sel = np.abs(traj.c[traj.times >= start - 1e-12 * traj.t_max])
    return float(sel.mean()), float(sel.std())
