"""Monte Carlo expectation machinery, coupled error metrics, rate fits,
and the perturbation functionals of the continuous-dependence estimates.

Sample evaluations are embarrassingly parallel; the reduction is always
performed in ascending sample order so the reported numbers do not depend
on worker scheduling.  Difference estimators couple their two runs through
common random numbers by default; pass independent=True to decouple the
reference stream and watch the variance inflate.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .fluxes import Flux
from .grid import Field, Grid, l1_norm
from .noise import JumpSpec, WienerSpec
from .solver import SchemeConfig, Trajectory, restrict_to_coarse, run_path

__all__ = [
    "McEstimate",
    "RateFit",
    "mc_expect",
    "RunSetup",
    "coupled_l1_error",
    "fit_rate",
    "noise_gap_sigma",
    "noise_gap_eta",
    "noise_gap_eta_quad",
    "measure_gap",
]


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with a normal-approximation confidence halfwidth."""

    mean: float
    std_error: float
    n_samples: int

    @property
    def ci95_halfwidth(self) -> float:
        return 1.96 * self.std_error


def _reduce(values: np.ndarray) -> McEstimate:
    n = len(values)
    mean = float(np.mean(values))
    if n > 1:
        se = float(np.std(values, ddof=1) / math.sqrt(n))
    else:
        se = 0.0
    return McEstimate(mean=mean, std_error=se, n_samples=n)


def _eval_functional(args):
    functional, master_seed, index = args
    try:
        return functional(master_seed, index)
    except Exception as exc:
        raise RuntimeError(f"sample {index} failed: {exc}") from exc


def mc_expect(functional, n_samples: int, master_seed: int, jobs: int = 1) -> McEstimate:
    """Mean and standard error of functional(master_seed, i) over samples.

    The functional owns its randomness through the (master_seed, sample)
    splitting contract, so doubling n_samples extends the sample set
    instead of reshuffling it.  With jobs > 1 the functional must be
    picklable; results are reduced in ascending sample order either way.
    """
    if n_samples < 2:
        raise ValueError(f"need at least two samples, got {n_samples}")
    values = np.empty(n_samples)
    if jobs > 1:
        work = [(functional, master_seed, i) for i in range(n_samples)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, v in enumerate(pool.map(_eval_functional, work)):
                values[i] = v
    else:
        for i in range(n_samples):
            values[i] = _eval_functional((functional, master_seed, i))
    return _reduce(values)


# ---------------------------------------------------------------------------
# coupled runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSetup:
    """Everything needed to integrate one experiment's sample paths."""

    cfg: SchemeConfig
    grid: Grid
    flux: Flux
    wiener: WienerSpec | None
    jumps: JumpSpec | None
    u0: Field

    def run(
        self, master_seed: int, sample_index: int, substeps: int = 1, stream: int = 0
    ) -> Trajectory:
        return run_path(
            self.cfg,
            self.grid,
            self.flux,
            self.wiener,
            self.jumps,
            self.u0,
            master_seed,
            sample_index,
            substeps=substeps,
            stream=stream,
        )


def _coupling_ratio(coarse: RunSetup, reference: RunSetup) -> int:
    if reference.grid.length != coarse.grid.length:
        raise ValueError("setups must share the domain")
    ratio, rem = divmod(reference.grid.n_cells, coarse.grid.n_cells)
    if rem != 0:
        raise ValueError("reference grid must be an integer refinement")
    substeps = coarse.cfg.dt / reference.cfg.dt
    if abs(substeps - round(substeps)) > 1e-9 or round(substeps) < 1:
        raise ValueError("coarse dt must be an integer multiple of reference dt")
    if abs(coarse.cfg.t_final - reference.cfg.t_final) > min(
        coarse.cfg.dt, reference.cfg.dt
    ):
        raise ValueError("setups must share the final time")
    return int(round(substeps))


@dataclass(frozen=True)
class _CoupledSample:
    """Picklable per-sample functional behind coupled_l1_error."""

    coarse: RunSetup
    reference: RunSetup
    substeps: int
    independent: bool

    def __call__(self, master_seed: int, index: int) -> float:
        ref_stream = 1 if self.independent else 0
        traj_c = self.coarse.run(master_seed, index, substeps=self.substeps, stream=0)
        traj_r = self.reference.run(master_seed, index, substeps=1, stream=ref_stream)
        fine_at_coarse = restrict_to_coarse(traj_r.final, self.coarse.grid)
        diff = traj_c.final.values - fine_at_coarse.values
        return l1_norm(Field(self.coarse.grid, diff))


def coupled_l1_error(
    coarse: RunSetup,
    reference: RunSetup,
    t: float,
    n_samples: int,
    master_seed: int,
    jobs: int = 1,
    independent: bool = False,
) -> McEstimate:
    """E[l1 distance at time t] between a run and its refined reference.

    Per sample both solvers read the same fine noise lattice (common random
    numbers); the reference is cell-averaged onto the coarse grid before the
    distance is taken.  independent=True moves the reference onto its own
    noise stream instead.
    """
    if abs(t - coarse.cfg.t_final) > coarse.cfg.dt:
        raise ValueError("evaluation time must be the configured final time")
    substeps = _coupling_ratio(coarse, reference)
    sampler = _CoupledSample(
        coarse=coarse, reference=reference, substeps=substeps, independent=independent
    )
    return mc_expect(sampler, n_samples, master_seed, jobs=jobs)


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log err against log eps."""

    points: tuple
    slope: float
    intercept: float
    r_squared: float


def fit_rate(series) -> RateFit:
    """Least squares on (log eps, log err); needs >= 3 positive points."""
    pts = tuple((float(e), float(v)) for e, v in series)
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if any(e <= 0.0 or v <= 0.0 for e, v in pts):
        raise ValueError("rate fits need strictly positive epsilons and errors")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    xbar = x.mean()
    ybar = y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:
        raise ValueError("epsilons must not all coincide")
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    sstot = float(np.sum((y - ybar) ** 2))
    if sstot == 0.0:
        r2 = 1.0
    else:
        r2 = 1.0 - float(np.sum(resid**2)) / sstot
    return RateFit(points=pts, slope=slope, intercept=float(intercept), r_squared=min(max(r2, 0.0), 1.0))


# ---------------------------------------------------------------------------
# continuous-dependence functionals
# ---------------------------------------------------------------------------


def noise_gap_sigma(
    spec_a: WienerSpec, spec_b: WienerSpec, state_sup: float = 2.0
) -> float:
    """sqrt(sum_k sup_xi |g_k(xi) - g~_k(xi)|^2 / xi^2) over a probe grid.

    The probe grid is 500 log-spaced magnitudes (both signs) up to
    state_sup, which resolves the sup exactly for the u-homogeneous linear
    family and to probe resolution otherwise.
    """
    if spec_a.n_modes != spec_b.n_modes:
        raise ValueError("specs must share the mode count")
    mags = np.logspace(-6, math.log10(state_sup), 500)
    probes = np.concatenate((-mags[::-1], mags))
    ga = spec_a.amplitudes[:, None] * spec_a.profile(probes)[None, :]
    gb = spec_b.amplitudes[:, None] * spec_b.profile(probes)[None, :]
    ratios = np.abs(ga - gb) / np.abs(probes)[None, :]
    per_mode = ratios.max(axis=1)
    return float(np.sqrt(np.sum(per_mode**2)))


def _require_common_measure(spec_a: JumpSpec, spec_b: JumpSpec) -> None:
    same = (
        spec_a.alpha == spec_b.alpha
        and spec_a.c_mu == spec_b.c_mu
        and spec_a.z_max == spec_b.z_max
        and spec_a.delta_jump == spec_b.delta_jump
        and spec_a.atoms == spec_b.atoms
    )
    if not same:
        raise ValueError("jump-amplitude gaps are defined against a common measure")


def noise_gap_eta(spec_a: JumpSpec, spec_b: JumpSpec) -> float:
    """sup_u int |eta_a(u;z) - eta_b(u;z)|^2 / u^2 mu(dz), closed form.

    For the canonical u-homogeneous amplitudes the sup collapses and the
    value is (lam_a - lam_b)^2 int h^2 dmu.
    """
    _require_common_measure(spec_a, spec_b)
    return (spec_a.lam_star - spec_b.lam_star) ** 2 * spec_a.h2_mass


def noise_gap_eta_quad(spec_a: JumpSpec, spec_b: JumpSpec) -> float:
    """Quadrature cross-check of noise_gap_eta against the stable density."""
    _require_common_measure(spec_a, spec_b)
    dl2 = (spec_a.lam_star - spec_b.lam_star) ** 2
    if spec_a.atoms is not None:
        return noise_gap_eta(spec_a, spec_b)
    a, c, lo, hi = spec_a.alpha, spec_a.c_mu, spec_a.delta_jump, spec_a.z_max

    def integrand(z):
        return min(1.0, z * z) * c * z ** (-1.0 - a)

    pts = [1.0] if lo < 1.0 < hi else None
    val, _ = quad(integrand, lo, hi, epsabs=1e-12, limit=200, points=pts)
    return dl2 * 2.0 * val


def measure_gap(lam: float, kappa: float, r1: float) -> tuple:
    """Second-moment (inside r1) and total-mass (outside r1) distances
    between the order-lam and order-kappa kernels |z|^{-1-2 order}.

    Returns the pair of integrals of |K_lam - K_kappa| against |z|^2 inside
    and against 1 outside, both over the full (two-sided) line.
    """
    for v in (lam, kappa):
        if not 0.0 < v < 1.0:
            raise ValueError(f"orders must lie in (0,1), got {v}")
    if not r1 > 0.0:
        raise ValueError(f"split radius must be positive, got {r1}")
    if lam == kappa:
        return 0.0, 0.0

    def kdiff(z):
        return abs(z ** (-1.0 - 2.0 * lam) - z ** (-1.0 - 2.0 * kappa))

    def second(z):
        return z * z * kdiff(z)

    pts = [1.0] if r1 > 1.0 else None
    inner, _ = quad(second, 0.0, r1, epsabs=1e-12, limit=200, points=pts)
    mid_hi = max(r1, 1.0)
    outer = 0.0
    if r1 < 1.0:
        part, _ = quad(kdiff, r1, 1.0, epsabs=1e-12, limit=200)
        outer += part
    tail, _ = quad(kdiff, mid_hi, np.inf, epsabs=1e-12, limit=200)
    outer += tail
    return 2.0 * inner, 2.0 * outer
