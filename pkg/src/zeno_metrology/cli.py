"""Command-line front end.

Usage::

    zeno-metrology SUBCOMMAND [TARGET] [--key value ...] [--config FILE] [--save-config FILE]

Subcommands: ``spectrum``, ``dynamics``, ``precision``, ``sweep`` and
``reproduce {fig1b,fig2,fig3}``. Units are fixed by ``omega0 = 1``.
Configuration precedence is flags > config file > defaults; the environment
variable ``ZM_THREADS`` overrides ``threads``.

Exit codes: 0 success, 2 configuration or output-path error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields

import numpy as np

from . import experiments as ex
from .dynamics import SolverDivergence, solve_c, solve_sensitivity
from .metrology import asymptotic_min_delta_gamma, delta_gamma_series
from .spectral import NoiseSpec, ProbeSpec
from .spectrum import BracketError, find_bound_state, y_function, y_samples

__all__ = ["ConfigError", "RunConfig", "parse_config", "format_config", "run_subcommand", "main"]

SUBCOMMANDS = ("spectrum", "dynamics", "precision", "sweep", "reproduce")
TARGETS = ("fig1b", "fig2", "fig3")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


def _float(raw):
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError("not a finite number")
    return v


def _positive(raw):
    v = _float(raw)
    if v <= 0:
        raise ValueError("must be > 0")
    return v


def _nonneg(raw):
    v = _float(raw)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _gamma(raw):
    v = _float(raw)
    if v <= -1.0:
        raise ValueError("omega0 + gamma must stay positive (gamma > -1)")
    return v


def _beta(raw):
    if raw.strip().lower() == "auto":
        return None
    v = _float(raw)
    if not 0 <= v < 0.5:
        raise ValueError("beta must lie in [0, 0.5) or be 'auto' (beta = 1/2 is degenerate)")
    return v


def _step(raw):
    return None if raw.strip().lower() == "auto" else _positive(raw)


def _fraction(raw):
    v = _float(raw)
    if not 0 < v <= 1:
        raise ValueError("must lie in (0, 1]")
    return v


def _int_range(lo, hi):
    def parse(raw):
        v = int(raw)
        if not lo <= v <= hi:
            raise ValueError(f"must lie in [{lo}, {hi}]")
        return v

    return parse


def _axis(raw):
    raw = raw.strip()
    if raw not in ex.AXES:
        raise ValueError(f"must be one of {', '.join(ex.AXES)}")
    return raw


def _values(raw):
    """Comma list, ``start:stop:num`` (linear) or ``log:start:stop:num`` (geometric)."""
    raw = raw.strip()
    if not raw:
        return ()
    parts = raw.split(":")
    if parts[0] == "log" and len(parts) == 4:
        vals = np.geomspace(_positive(parts[1]), _positive(parts[2]), int(parts[3]))
    elif len(parts) == 3:
        vals = np.linspace(_float(parts[0]), _float(parts[1]), int(parts[2]))
    elif len(parts) == 1:
        vals = [_float(p) for p in raw.split(",")]
    else:
        raise ValueError("expected a comma list, start:stop:num or log:start:stop:num")
    vals = tuple(float(v) for v in vals)
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValueError("values must be strictly increasing")
    return vals


# key -> (parser, default, help)
KEYS = {
    "gamma": (_gamma, repr(math.pi), "encoded frequency gamma in units of omega0"),
    "eta": (_nonneg, "0.02", "coupling constant eta"),
    "omega_c": (_positive, "300", "cutoff frequency omega_c / omega0"),
    "s": (_positive, "1", "Ohmicity exponent s"),
    "N": (_positive, "100", "total mean photon number"),
    "beta": (_beta, "auto", "squeezed fraction, or 'auto' for (2 sqrt N)^-1"),
    "phi_coh": (_float, "0", "coherent-state phase"),
    "phi_sq": (_float, "0", "squeezing phase"),
    "h": (_step, "auto", "time step, or 'auto' for min(0.02, 0.2/omega_c)"),
    "t_max": (_positive, "100", "final time in units of 1/omega0"),
    "root_tol": (_positive, "1e-12", "bound-state bisection tolerance"),
    "plateau_fraction": (_fraction, "0.2", "trailing window fraction used for the plateau |c|"),
    "output": (str, "-", "output CSV path ('-' for stdout)"),
    "digits": (_int_range(1, 17), "17", "significant digits in the CSV"),
    "threads": (_int_range(1, 4096), str(os.cpu_count() or 1), "parallel sweep workers"),
    "axis": (_axis, "omega_c", "sweep axis: omega_c, eta, N or t"),
    "values": (_values, "", "sweep values: a,b,c | start:stop:num | log:start:stop:num"),
    "stride": (_int_range(1, 10**9), "1", "write every stride-th time step (dynamics, precision)"),
    "y_samples": (_int_range(0, 10**6), "0", "append this many y(varpi) samples to the spectrum output"),
}


@dataclass(frozen=True)
class RunConfig:
    gamma: float
    eta: float
    omega_c: float
    s: float
    N: float
    beta: float | None
    phi_coh: float
    phi_sq: float
    h: float | None
    t_max: float
    root_tol: float
    plateau_fraction: float
    output: str
    digits: int
    threads: int
    axis: str
    values: tuple
    stride: int
    y_samples: int

    @property
    def probe(self) -> ProbeSpec:
        return ProbeSpec(1.0, self.gamma)

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.eta, self.omega_c, self.s)

    @property
    def record(self) -> ex.ParameterRecord:
        return ex.ParameterRecord(self.probe, self.noise, self.N, self.beta, self.phi_coh, self.phi_sq)

    @property
    def settings(self) -> ex.SolverSettings:
        return ex.SolverSettings(self.t_max, self.h, self.plateau_fraction, self.root_tol)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _key_parser() -> argparse.ArgumentParser:
    p = _Parser(add_help=False, allow_abbrev=False)
    p.add_argument("--config", dest="_config")
    p.add_argument("--save-config", dest="_save_config")
    for key, (_, _, help_) in KEYS.items():
        flags = {f"--{key}", f"--{key.replace('_', '-')}"}
        p.add_argument(*sorted(flags), dest=key, default=None, help=help_)
    return p


def _read_config_text(text: str, source: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in body.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        out[key] = (value, f"{source}:{lineno}")
    return out


def parse_config(tokens, file_text: str | None = None, file_name: str = "<config>") -> RunConfig:
    """Build a :class:`RunConfig` from ``--key value`` tokens and optional ``key = value`` text."""
    ns = _key_parser().parse_args(list(tokens))
    raw = {key: (default, "default") for key, (_, default, _) in KEYS.items()}
    if ns._config is not None:
        try:
            with open(ns._config, encoding="utf-8") as fh:
                raw.update(_read_config_text(fh.read(), ns._config))
        except OSError as err:
            raise ConfigError(f"cannot read config file: {err}") from None
    if file_text is not None:
        raw.update(_read_config_text(file_text, file_name))
    for key in KEYS:
        val = getattr(ns, key)
        if val is not None:
            raw[key] = (val, f"--{key.replace('_', '-')}")
    env = os.environ.get("ZM_THREADS")
    if env:
        raw["threads"] = (env, "ZM_THREADS")

    parsed = {}
    for key, (value, source) in raw.items():
        try:
            parsed[key] = KEYS[key][0](value)
        except ValueError as err:
            raise ConfigError(f"{key} = {value!r} ({source}): {err}") from None
    cfg = RunConfig(**parsed)
    try:
        cfg.record
    except ValueError as err:
        raise ConfigError(str(err)) from None
    return cfg


def _format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    """``key = value`` lines that :func:`parse_config` reads back to an equal config."""
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"


def _table(columns, rows, digits) -> str:
    return ex.write_table(columns, rows, digits)


def run_subcommand(name: str, cfg: RunConfig, target: str | None = None) -> str:
    """Compute the CSV text for one subcommand."""
    if name == "spectrum":
        bound = find_bound_state(cfg.probe, cfg.noise, tol=cfg.root_tol)
        y0 = y_function(cfg.probe, cfg.noise, 0.0)
        row = (
            bound is not None,
            bound.varpi_b if bound else math.nan,
            bound.Z if bound else math.nan,
            y0,
            bound.residual if bound else math.nan,
        )
        text = _table(("exists", "varpi_b", "Z", "y0", "residual"), [row], cfg.digits)
        if cfg.y_samples:
            lo = min(bound.varpi_b if bound else 0.0, -cfg.probe.frequency) * 2.0
            grid = np.linspace(lo, 0.0, cfg.y_samples)
            text += "\n" + _table(("varpi", "y"), zip(grid, y_samples(cfg.probe, cfg.noise, grid)), cfg.digits)
        return text
    if name == "dynamics":
        traj = solve_c(cfg.probe, cfg.noise, cfg.t_max, cfg.h)
        sl = slice(None, None, cfg.stride)
        c = traj.c[sl]
        return _table(("t", "re_c", "im_c", "abs_c"), zip(traj.times[sl], c.real, c.imag, np.abs(c)), cfg.digits)
    if name == "precision":
        traj = solve_sensitivity(cfg.probe, cfg.noise, cfg.t_max, cfg.h)
        state = cfg.record.state()
        ser = delta_gamma_series(state, traj)
        sl = slice(None, None, cfg.stride)
        text = _table(
            ("t", "mean_M", "delta_M", "delta_gamma"),
            zip(ser.times[sl], ser.mean_M[sl], ser.delta_M[sl], ser.delta_gamma[sl]),
            cfg.digits,
        )
        bound = find_bound_state(cfg.probe, cfg.noise, tol=cfg.root_tol)
        minima = [
            (t, dg, asymptotic_min_delta_gamma(state.N, state.beta, bound.Z, t) if bound else math.nan)
            for t, dg in ser.local_minima
        ]
        return text + "\n" + _table(("t_min", "delta_gamma_min", "predicted_delta_gamma"), minima, cfg.digits)
    if name == "sweep":
        if not cfg.values:
            raise ConfigError("sweep needs --values")
        try:
            grid = ex.SweepGrid(cfg.axis, cfg.values, cfg.record)
        except ValueError as err:
            raise ConfigError(f"values: {err}") from None
        result = ex.run_sweep(grid, cfg.settings, cfg.threads)
        return _table(result.columns, result.rows, cfg.digits)
    if name == "reproduce":
        if target == "fig1b":
            result = ex.reproduce_fig1b(cfg.settings, workers=cfg.threads)
        elif target == "fig2":
            result = ex.reproduce_fig2(cfg.settings)
        elif target == "fig3":
            result = ex.reproduce_fig3(cfg.settings, omega_c=cfg.omega_c, workers=cfg.threads)
        else:
            raise ConfigError(f"reproduce target must be one of {', '.join(TARGETS)}")
        return _table(result.columns, result.rows, cfg.digits)
    raise ConfigError(f"unknown subcommand '{name}'")


def _write_atomic(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _usage() -> str:
    return (__doc__ or "") + "\nConfiguration keys:\n" + "\n".join(
        f"  --{k.replace('_', '-'):<18} {h} (default: {d or 'none'})" for k, (_, d, h) in KEYS.items()
    ) + "\n"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        sys.stdout.write(_usage())
        return EXIT_OK if argv else EXIT_CONFIG
    name, rest = argv[0], argv[1:]
    target = None
    try:
        if name not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand '{name}' (choose from {', '.join(SUBCOMMANDS)})")
        if name == "reproduce":
            if not rest or rest[0] not in TARGETS:
                raise ConfigError(f"reproduce needs a target: {', '.join(TARGETS)}")
            target, rest = rest[0], rest[1:]
        cfg = parse_config(rest)
        save = _key_parser().parse_args(rest)._save_config
        text = run_subcommand(name, cfg, target)
        _write_atomic(cfg.output, text)
        if save:
            _write_atomic(save, format_config(cfg))
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverDivergence, BracketError, ArithmeticError, ValueError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"error: cannot write output: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK
