"""Parameter sweeps, beta optimisation and figure-data tables."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .dynamics import default_step, plateau, solve_sensitivity
from .metrology import (
    InputState,
    asymptotic_min_delta_gamma,
    delta_gamma_series,
    find_local_minima,
    optimal_beta,
    shot_noise_limit,
    zeno_limit,
)
from .spectral import NoiseSpec, ProbeSpec
from .spectrum import bound_state_exists, find_bound_state

__all__ = [
    "ParameterRecord",
    "SolverSettings",
    "SweepGrid",
    "SweepResult",
    "BetaOptimum",
    "OptimizationError",
    "find_local_minima",
    "optimize_beta",
    "existence_crossover",
    "run_sweep",
    "reproduce_fig1b",
    "reproduce_fig2",
    "reproduce_fig3",
    "format_number",
    "write_table",
]

AXES = ("omega_c", "eta", "N", "t")
FIG1_OMEGA_C = tuple(np.linspace(100.0, 400.0, 25))
FIG2_OMEGA_C = (150.0, 250.0, 300.0, 400.0)
FIG2_N = tuple(10.0 ** np.arange(1.0, 4.01, 0.5))
FIG3_ETA = tuple(np.linspace(0.005, 0.05, 25))


def format_number(x, digits: int = 17) -> str:
    """Locale-independent ``digits``-significant-digit text; ``nan`` marks undefined values."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, f".{digits}g")


def write_table(columns, rows, digits: int = 17) -> str:
    """CSV text: header row, ``,`` separator, Unix newlines."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(v, digits) for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class ParameterRecord:
    """Probe, environment and input-state parameters; ``beta=None`` means (2 sqrt N)^-1."""

    probe: ProbeSpec = ProbeSpec(1.0, math.pi)
    noise: NoiseSpec = NoiseSpec(0.02, 300.0, 1.0)
    N: float = 100.0
    beta: float | None = None
    phi_coh: float = 0.0
    phi_sq: float = 0.0

    def __post_init__(self):
        self.state()

    def state(self, N: float | None = None) -> InputState:
        N = self.N if N is None else N
        beta = optimal_beta(N) if self.beta is None else self.beta
        return InputState(N, beta, self.phi_coh, self.phi_sq)

    def with_axis(self, axis: str, value: float) -> "ParameterRecord":
        if axis == "omega_c":
            return replace(self, noise=replace(self.noise, omega_c=value))
        if axis == "eta":
            return replace(self, noise=replace(self.noise, eta=value))
        if axis == "N":
            return replace(self, N=value)
        if axis == "t":
            return self
        raise ValueError(f"unknown axis {axis!r}")


@dataclass(frozen=True)
class SolverSettings:
    t_max: float = 100.0
    h: float | None = None
    plateau_fraction: float = 0.2
    root_tol: float = 1e-12

    def step(self, record: ParameterRecord) -> float:
        return default_step(record.probe, record.noise) if self.h is None else self.h


@dataclass(frozen=True)
class SweepGrid:
    axis: str
    values: tuple
    fixed: ParameterRecord = ParameterRecord()

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("sweep values must be nonempty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)
        for v in vals:
            if self.axis == "t" and v <= 0:
                raise ValueError("encoding times must be positive")
            self.fixed.with_axis(self.axis, v)


@dataclass
class SweepResult:
    """A rectangular table plus the solver settings that produced it."""

    columns: tuple
    rows: list
    settings: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def to_csv(self, digits: int = 17) -> str:
        return write_table(self.columns, self.rows, digits)


class BetaOptimum(NamedTuple):
    beta: float
    value: float
    flat: bool = False


class OptimizationError(ArithmeticError):
    pass


def optimize_beta(
    objective: Callable[[float], float],
    N: float,
    lo: float = 1e-6,
    hi: float = 0.5 - 1e-6,
    coarse: int = 64,
    xtol: float = 1e-10,
) -> BetaOptimum:
    """Minimise ``objective(beta)`` on ``[lo, hi]``.

    A geometric 64-point scan picks the best grid cell, which is then
    narrowed by golden-section search. A constant objective yields the
    interval midpoint with ``flat=True``.
    """
    if N <= 0:
        raise ValueError("N must be > 0")

    def f(b):
        v = float(objective(b))
        if not math.isfinite(v):
            raise OptimizationError(f"objective is not finite at beta = {b!r}")
        return v

    grid = np.geomspace(lo, hi, coarse)
    vals = np.array([f(b) for b in grid])
    if np.ptp(vals) <= 1e-14 * max(abs(vals).max(), 1e-300):
        mid = 0.5 * (lo + hi)
        return BetaOptimum(mid, f(mid), True)
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, coarse - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol * max(1.0, abs(a)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    if vals[i] < fx:
        return BetaOptimum(float(grid[i]), float(vals[i]))
    return BetaOptimum(float(x), fx)


def existence_crossover(record: ParameterRecord, axis: str, lo: float, hi: float, rtol: float = 1e-9) -> float:
    """Bisect the bound-state flag along ``omega_c`` or ``eta`` between ``lo`` and ``hi``."""
    if axis not in ("omega_c", "eta"):
        raise ValueError("crossover search runs along omega_c or eta")

    def flag(v):
        rec = record.with_axis(axis, v)
        return bound_state_exists(rec.probe, rec.noise)

    if flag(lo) or not flag(hi):
        raise ValueError("the bound-state flag must be off at lo and on at hi")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if flag(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=8)
def _trajectory(probe: ProbeSpec, noise: NoiseSpec, t_max: float, h: float):
    return solve_sensitivity(probe, noise, t_max, h)


SWEEP_COLUMNS = (
    "value",
    "bound_state",
    "varpi_b",
    "Z",
    "plateau_abs_c",
    "plateau_std",
    "t_min",
    "min_delta_gamma",
    "predicted_delta_gamma",
    "N",
    "beta",
    "h",
    "t_max",
    "root_tol",
)


def _nearest_minimum(minima, t_target):
    if not minima:
        return math.nan, math.nan
    times = np.array([m[0] for m in minima])
    i = int(np.argmin(np.abs(times - t_target)))
    return minima[i]


def _evaluate(axis: str, value: float, fixed: ParameterRecord, settings: SolverSettings) -> tuple:
    rec = fixed.with_axis(axis, value)
    h = settings.step(rec)
    t_max = settings.t_max
    t_target = t_max
    if axis == "t":
        t_target = value
        t_max = max(t_max, value + 2.0 * math.pi / rec.probe.omega0)
    bound = find_bound_state(rec.probe, rec.noise, tol=settings.root_tol)
    traj = _trajectory(rec.probe, rec.noise, t_max, h)
    pl_mean, pl_std = plateau(traj, settings.plateau_fraction)
    state = rec.state()
    series = delta_gamma_series(state, traj)
    t_min, dg_min = _nearest_minimum(series.local_minima, t_target)
    predicted = math.nan
    if bound is not None and math.isfinite(t_min) and t_min > 0:
        predicted = asymptotic_min_delta_gamma(state.N, state.beta, bound.Z, t_min)
    return (
        value,
        bound is not None,
        bound.varpi_b if bound else math.nan,
        bound.Z if bound else math.nan,
        pl_mean,
        pl_std,
        t_min,
        dg_min,
        predicted,
        state.N,
        state.beta,
        h,
        t_max,
        settings.root_tol,
    )


def _evaluate_star(args):
    return _evaluate(*args)


def default_workers() -> int:
    env = os.environ.get("ZM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(grid: SweepGrid, settings: SolverSettings = SolverSettings(), workers: int = 1) -> SweepResult:
    """Evaluate every grid point; rows keep axis order whatever the completion order."""
    jobs = [(grid.axis, v, grid.fixed, settings) for v in grid.values]
    # N and t sweeps share one trajectory, so they stay in-process to reuse the cache
    if workers > 1 and grid.axis in ("omega_c", "eta") and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_star, jobs))
    else:
        rows = [_evaluate(*job) for job in jobs]
    cols = (grid.axis,) + SWEEP_COLUMNS[1:]
    meta = asdict(settings)
    meta["axis"] = grid.axis
    return SweepResult(columns=cols, rows=rows, settings=meta)


def _fig_record(**kw) -> ParameterRecord:
    return ParameterRecord(
        probe=ProbeSpec(1.0, math.pi),
        noise=NoiseSpec(kw.get("eta", 0.02), kw.get("omega_c", 300.0), kw.get("s", 1.0)),
        N=kw.get("N", 100.0),
        beta=None,
    )


def reproduce_fig1b(
    settings: SolverSettings = SolverSettings(), omega_c: Sequence[float] = FIG1_OMEGA_C, workers: int = 1
) -> SweepResult:
    """Plateau |c| against the residue Z across the existence threshold in omega_c."""
    return run_sweep(SweepGrid("omega_c", tuple(omega_c), _fig_record()), settings, workers)


def reproduce_fig3(
    settings: SolverSettings = SolverSettings(),
    eta: Sequence[float] = FIG3_ETA,
    omega_c: float = 300.0,
    workers: int = 1,
) -> SweepResult:
    """Bound-state data and long-time precision across the threshold in eta."""
    return run_sweep(SweepGrid("eta", tuple(eta), _fig_record(omega_c=omega_c)), settings, workers)


FIG2_COLUMNS = ("panel", "series", "omega_c", "N", "t", "delta_gamma", "predicted_delta_gamma")


def reproduce_fig2(
    settings: SolverSettings = SolverSettings(),
    omega_c: Sequence[float] = FIG2_OMEGA_C,
    N_values: Sequence[float] = FIG2_N,
    panel_a_omega_c: Sequence[float] = (100.0, 300.0),
    t_panel_c: float = 10.0,
    sample_dt: float = 0.02,
) -> SweepResult:
    """Long-format table for the three precision panels.

    ``a``: delta_gamma(t) sampled every ``sample_dt`` plus its local minima;
    ``b``: local minima against time (N = 100); ``c``: the minimum nearest
    ``t_panel_c`` against N, with the SNL and ZL reference curves.
    """
    rows = []
    base = _fig_record()
    meta = asdict(settings)

    def series_for(wc, N):
        rec = replace(base, noise=replace(base.noise, omega_c=wc), N=N)
        traj = _trajectory(rec.probe, rec.noise, max(settings.t_max, t_panel_c + 2 * math.pi), settings.step(rec))
        state = rec.state()
        bound = find_bound_state(rec.probe, rec.noise, tol=settings.root_tol)
        return state, bound, delta_gamma_series(state, traj)

    def predicted(state, bound, t):
        if bound is None or not t > 0:
            return math.nan
        return asymptotic_min_delta_gamma(state.N, state.beta, bound.Z, t)

    for wc in panel_a_omega_c:
        state, bound, ser = series_for(wc, base.N)
        stride = max(1, int(round(sample_dt / (ser.times[1] - ser.times[0]))))
        for t, dg in zip(ser.times[::stride], ser.delta_gamma[::stride]):
            rows.append(("a", "delta_gamma", wc, state.N, t, dg, math.nan))
        for t, dg in ser.local_minima:
            rows.append(("a", "local_minimum", wc, state.N, t, dg, predicted(state, bound, t)))

    for wc in omega_c:
        state, bound, ser = series_for(wc, base.N)
        for t, dg in ser.local_minima:
            if t <= settings.t_max:
                rows.append(("b", "local_minimum", wc, state.N, t, dg, predicted(state, bound, t)))

    for N in N_values:
        rows.append(("c", "SNL", math.nan, N, t_panel_c, shot_noise_limit(N, t_panel_c), math.nan))
        rows.append(("c", "ZL", math.nan, N, t_panel_c, zeno_limit(N, t_panel_c), math.nan))
    for wc in omega_c:
        for N in N_values:
            state, bound, ser = series_for(wc, N)
            t, dg = _nearest_minimum(ser.local_minima, t_panel_c)
            rows.append(("c", "local_minimum", wc, N, t, dg, predicted(state, bound, t)))

    meta["t_panel_c"] = t_panel_c
    return SweepResult(columns=FIG2_COLUMNS, rows=rows, settings=meta)
