"""Ohmic-family spectral density, its memory kernel and frequency integrals.

All quantities are expressed in units of the probe frequency ``omega0``.
The spectral density is

    J(w) = eta * w * (w / omega_c)**(s - 1) * exp(-w / omega_c)

and the memory kernel is its one-sided Fourier transform

    f(t) = int_0^inf J(w) exp(-i w t) dw
         = eta * omega_c**2 * Gamma(s + 1) * (1 + i omega_c t)**(-(s + 1)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "NoiseSpec",
    "ProbeSpec",
    "spectral_density",
    "memory_kernel",
    "kernel_primitive",
    "kernel_interval_weights",
    "dispersion_integral",
    "second_dispersion_integral",
    "principal_value_shift",
    "upper_frequency",
]

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-13, limit=400)


@dataclass(frozen=True)
class NoiseSpec:
    """Environment parameters: coupling ``eta``, cutoff ``omega_c``, Ohmicity ``s``."""

    eta: float
    omega_c: float
    s: float = 1.0

    def __post_init__(self):
        for name in ("eta", "omega_c", "s"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.omega_c <= 0:
            raise ValueError(f"omega_c must be > 0, got {self.omega_c}")
        if self.s <= 0:
            raise ValueError(f"s must be > 0, got {self.s}")

    @property
    def kernel_amplitude(self) -> float:
        """f(0) = eta * omega_c**2 * Gamma(s + 1)."""
        return self.eta * self.omega_c**2 * special.gamma(self.s + 1.0)


@dataclass(frozen=True)
class ProbeSpec:
    """Probe mode frequency ``omega0`` and the encoded frequency ``gamma``."""

    omega0: float = 1.0
    gamma: float = math.pi

    def __post_init__(self):
        if not (math.isfinite(self.omega0) and math.isfinite(self.gamma)):
            raise ValueError("omega0 and gamma must be finite")
        if self.omega0 <= 0:
            raise ValueError(f"omega0 must be > 0, got {self.omega0}")
        if self.omega0 + self.gamma <= 0:
            raise ValueError("omega0 + gamma must be > 0")

    @property
    def frequency(self) -> float:
        """Dressed-free frequency omega0 + gamma of the encoding arm."""
        return self.omega0 + self.gamma


def upper_frequency(noise: NoiseSpec) -> float:
    """Truncation point for frequency quadratures; the dropped tail is ~exp(-50)."""
    return noise.omega_c * max(50.0, noise.s + 40.0)


def spectral_density(noise: NoiseSpec, omega):
    """Evaluate J(omega). Accepts scalars or arrays; J(0) = 0 for every s."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError("spectral density is defined for omega >= 0 only")
    x = w / noise.omega_c
    with np.errstate(divide="ignore", invalid="ignore"):
        out = noise.eta * noise.omega_c * x**noise.s * np.exp(-x)
    out = np.where(w == 0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def memory_kernel(noise: NoiseSpec, t):
    """Closed-form kernel f(t); scalar or array ``t >= 0``."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise ValueError("memory kernel is defined for t >= 0 only")
    out = noise.kernel_amplitude * (1.0 + 1j * noise.omega_c * tt) ** (-(noise.s + 1.0))
    return complex(out) if out.ndim == 0 else out


def kernel_primitive(noise: NoiseSpec, t1: float, t2: float) -> complex:
    """Exact integral of the memory kernel over ``[t1, t2]``."""
    if t1 < 0 or t2 < t1:
        raise ValueError(f"need 0 <= t1 <= t2, got t1={t1}, t2={t2}")
    if t1 == t2 or noise.eta == 0:
        return 0j
    s, wc = noise.s, noise.omega_c
    v1 = 1.0 + 1j * wc * t1
    v2 = 1.0 + 1j * wc * t2
    # v1**-s - v2**-s written as -v1**-s * expm1(-s * log(v2 / v1)) to avoid cancellation
    ratio_log = np.log1p((v2 - v1) / v1)
    diff = -(v1 ** (-s)) * np.expm1(-s * ratio_log)
    return complex(noise.eta * wc * special.gamma(s + 1.0) / (1j * s) * diff)


def _binomial_series_coeffs(s: float, terms: int) -> np.ndarray:
    # coefficients of (1 + z)**(-(s+1)) = sum_m a_m z**m
    a = np.empty(terms)
    a[0] = 1.0
    for m in range(1, terms):
        a[m] = a[m - 1] * (-(s + m)) / m
    return a


def _unit_moments(s: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """g0(z) = int_0^1 (1+zy)^-(s+1) dy and g1(z) = int_0^1 y (1+zy)^-(s+1) dy."""
    z = np.asarray(z, dtype=complex)
    g0 = np.empty_like(z)
    g1 = np.empty_like(z)
    small = np.abs(z) <= 0.5
    if np.any(small):
        zs = z[small]
        a = _binomial_series_coeffs(s, 64)
        m = np.arange(64)
        powers = zs[:, None] ** m[None, :]
        g0[small] = powers @ (a / (m + 1))
        g1[small] = powers @ (a / (m + 2))
    big = ~small
    if np.any(big):
        zb = z[big]
        w = 1.0 + zb
        g0[big] = (1.0 - w ** (-s)) / (s * zb)
        if abs(s - 1.0) < 1e-12:
            prim = np.log(w) + 1.0 / w - 1.0
        else:
            prim = (w ** (1.0 - s) - 1.0) / (1.0 - s) + (w ** (-s) - 1.0) / s
        g1[big] = prim / zb**2
    return g0, g1


def kernel_interval_weights(noise: NoiseSpec, h: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear-interpolation moments of the kernel on ``[(k-1)h, kh]``, k = 1..n.

    Returns ``(P, Q)`` with ``P[k-1] = int f(u) (u - (k-1)h)/h du`` and
    ``Q[k-1] = int f(u) (kh - u)/h du``, so ``P + Q`` is the plain primitive
    over the interval. Both are evaluated in local coordinates, which keeps
    them accurate for large ``k``.
    """
    if h <= 0 or n < 1:
        raise ValueError("need h > 0 and n >= 1")
    k = np.arange(1, n + 1)
    va = 1.0 + 1j * noise.omega_c * (k - 1) * h
    z = 1j * noise.omega_c * h / va
    g0, g1 = _unit_moments(noise.s, z)
    scale = noise.kernel_amplitude * va ** (-(noise.s + 1.0)) * h
    P = scale * g1
    Q = scale * (g0 - g1)
    return P, Q


def _segment_breaks(noise: NoiseSpec, anchor: float, hi: float) -> list[float]:
    """Geometric breakpoints so quad resolves both ``anchor`` and ``omega_c`` scales."""
    lo = min(anchor, noise.omega_c) if anchor > 0 else noise.omega_c
    lo = max(lo, hi * 1e-14)
    pts = [0.0]
    x = lo
    while x < hi:
        pts.append(x)
        x *= 4.0
    pts.append(hi)
    return pts


def _integrate_dispersion(noise: NoiseSpec, varpi: float, power: int) -> float:
    # int_0^hi J(w) / (w - varpi)**power dw, written as w**p * smooth(w);
    # the first segment hands w**p to quad as an algebraic weight
    s, wc = noise.s, noise.omega_c
    pref = noise.eta * wc ** (1.0 - s)
    hi = upper_frequency(noise)
    pts = _segment_breaks(noise, -varpi, hi)
    if varpi == 0.0:
        p = s - power

        def smooth(w):
            return pref * math.exp(-w / wc)
    else:
        p = s

        def smooth(w):
            return pref * math.exp(-w / wc) / (w - varpi) ** power

    total, _ = integrate.quad(smooth, pts[0], pts[1], weight="alg", wvar=(p, 0.0), **_QUAD_OPTS)
    for a, b in zip(pts[1:-1], pts[2:]):
        val, _ = integrate.quad(lambda w: smooth(w) * w**p, a, b, **_QUAD_OPTS)
        total += val
    return total


def dispersion_integral(noise: NoiseSpec, varpi: float) -> float:
    """int_0^inf J(w) / (w - varpi) dw for ``varpi <= 0``.

    At ``varpi = 0`` this equals ``eta * omega_c * Gamma(s)``.
    """
    if varpi > 0:
        raise ValueError("varpi must be <= 0; use principal_value_shift inside the band")
    if noise.eta == 0:
        return 0.0
    if math.isinf(varpi):
        return 0.0
    return _integrate_dispersion(noise, float(varpi), 1)


def second_dispersion_integral(noise: NoiseSpec, varpi: float) -> float:
    """int_0^inf J(w) / (varpi - w)**2 dw for ``varpi < 0``."""
    if varpi >= 0:
        raise ValueError("varpi must be < 0")
    if noise.eta == 0 or math.isinf(varpi):
        return 0.0
    return _integrate_dispersion(noise, float(varpi), 2)


def principal_value_shift(noise: NoiseSpec, a: float, window: float | None = None) -> float:
    """Cauchy principal value P int_0^inf J(w) / (a - w) dw for ``a > 0``.

    The singular window ``[a - d, a + d]`` (``d = a/10`` by default) is folded
    onto ``u in (0, d]`` where the integrand becomes ``-(J(a+u) - J(a-u))/u``,
    which is regular; the rest is ordinary quadrature.
    """
    if not a > 0:
        raise ValueError(f"a must be > 0, got {a}")
    if noise.eta == 0:
        return 0.0
    d = a / 10.0 if window is None else float(window)
    if not 0 < d < a:
        raise ValueError("window must lie in (0, a)")
    hi = max(upper_frequency(noise), 2.0 * (a + d))

    def J(w):
        return spectral_density(noise, w)

    def folded(u):
        if u == 0.0:
            return -2.0 * _density_slope(noise, a)
        return -(J(a + u) - J(a - u)) / u

    core, _ = integrate.quad(folded, 0.0, d, **_QUAD_OPTS)
    left, _ = integrate.quad(lambda w: J(w) / (a - w), 0.0, a - d, **_QUAD_OPTS)
    right = 0.0
    pts = [p for p in _segment_breaks(noise, a, hi) if p > a + d]
    pts = [a + d] + pts
    for lo_, hi_ in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda w: J(w) / (a - w), lo_, hi_, **_QUAD_OPTS)
        right += val
    return core + left + right


def _density_slope(noise: NoiseSpec, w: float) -> float:
    x = w / noise.omega_c
    return noise.eta * x ** (noise.s - 1.0) * math.exp(-x) * (noise.s - x)
