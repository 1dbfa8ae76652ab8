"""Numerical laboratory for stochastic fractional scalar conservation laws.

The package integrates periodic scalar conservation laws driven by
multiplicative Wiener and compensated-jump noise, regularized by viscosity
and/or a fractional Laplacian, and ships the estimator and experiment layers
used to measure convergence rates, continuous dependence, and entropy
residuals.

Module map
----------
``grid``
    Periodic cell-centered grids, field containers, norms, binary/CSV I/O.
``fractional``
    The fractional Laplacian: spectral application, principal-value
    quadrature with far-field tail, Riesz inversion.
``fluxes``
    Polynomial fluxes with exact monotone (Engquist-Osher) splittings,
    entropy approximations, companion fluxes, entropy-residual functionals.
``noise``
    Wiener mode stacks and compensated jump specifications with seeded,
    lattice-refinable sampling.
``solver``
    IMEX and semi-implicit time steppers, trajectory recording, reference
    (refined) runs, initial-data helpers.
``estimators``
    Monte Carlo expectation, coupled coarse/reference error estimates,
    rate fitting, structural noise/measure gap computations.
``config``
    Declarative YAML experiment configurations with strict validation.
``experiments``
    Drivers for the operator battery, path simulation, rate studies, and
    continuous-dependence studies.
``cli``
    The ``fracshock`` command-line tool wrapping the drivers.
"""

from .config import ExperimentConfig, config_hash, dump_config, load_config
from .estimators import (
    McEstimate,
    RateFit,
    RunSetup,
    coupled_l1_error,
    fit_rate,
    mc_expect,
    measure_gap,
    noise_gap_eta,
    noise_gap_sigma,
)
from .fluxes import (
    PSI_BATTERY,
    EntropyApprox,
    Flux,
    PsiBump,
    burgers_flux,
    entropy_flux_fbeta,
    entropy_residual,
    kruzkov_flux,
    linear_flux,
    numerical_flux_eo,
    polynomial_flux,
    zeta_fbeta,
)
from .fractional import (
    FracParams,
    apply_pv_inner,
    apply_quadrature,
    apply_spectral,
    apply_tail,
    bilinear_form,
    c_lambda,
    riesz_inverse,
)
from .grid import (
    Field,
    Grid,
    h_lambda_seminorm_sq,
    l1_norm,
    l2_norm_sq,
    mass,
    tv_norm,
)
from .noise import (
    JumpSpec,
    NoisePath,
    WienerSpec,
    discrete_jumps,
    jump_drive,
    sample_jumps,
    sample_wiener_increment,
    stable_jumps,
    wiener_drive,
)
from .solver import (
    CflViolation,
    PicardNonConvergence,
    SchemeConfig,
    StabilityGateError,
    Trajectory,
    load_trajectory,
    lowpass,
    make_bump,
    make_riemann,
    make_sinusoid,
    refine_config,
    restrict_to_coarse,
    run_path,
    run_reference,
    save_trajectory,
)

__version__ = "0.1.0"
