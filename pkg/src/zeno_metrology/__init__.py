"""Noisy Mach-Zehnder metrology with exact non-Markovian photon loss."""
from .dynamics import (
    MarkovianParams,
    SolverDivergence,
    Trajectory,
    asymptotic_c,
    default_step,
    markovian_c,
    markovian_params,
    plateau,
    solve_c,
    solve_sensitivity,
)
from .metrology import (
    InputState,
    PrecisionSeries,
    asymptotic_min_delta_gamma,
    delta_gamma_series,
    find_local_minima,
    ideal_min_delta_gamma,
    ideal_statistics,
    markovian_min_delta_gamma,
    markovian_optimal_delta_gamma,
    noisy_statistics,
    shot_noise_limit,
    zeno_asymptotic_min_delta_gamma,
    zeno_limit,
)
from .spectral import (
    NoiseSpec,
    ProbeSpec,
    dispersion_integral,
    kernel_primitive,
    memory_kernel,
    principal_value_shift,
    second_dispersion_integral,
    spectral_density,
)
from .spectrum import (
    BoundState,
    bound_state_exists,
    bound_state_gamma_sensitivity,
    find_bound_state,
    y_function,
)

__version__ = "0.1.0"
