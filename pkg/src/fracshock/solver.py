"""Time integration of the regularized nonlocal conservation law.

Two schemes share the convective discretization (Engquist-Osher differences)
and the exact Fourier treatment of the linear operators:

* ImexSpectral: explicit monotone flux, implicit viscosity + nonlocal term.
  Runs under a CFL gate and survives the vanishing-regularization regimes.
* SemiImplicitPicard: the flux is also inside the implicit solve, by Picard
  iteration with lagged flux divergence.  Requires dt < 2 eps_visc / lip^2,
  so it only exists at genuinely positive viscosity.

Noise enters explicitly, evaluated at the step's starting state.  Every
trajectory is a deterministic function of (master_seed, sample_index) via
the NoisePath splitting contract, and a coarse run aggregates the same fine
noise lattice its refined reference reads, which is what couples the pair.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .fluxes import Flux
from .fractional import FracParams
from .grid import Field, Grid, h_lambda_seminorm_sq, l1_norm, l2_norm_sq, mass, save_field_binary, tv_norm
from .noise import JumpSpec, NoisePath, WienerSpec, jump_drive, wiener_drive

__all__ = [
    "SchemeConfig",
    "Trajectory",
    "CflViolation",
    "StabilityGateError",
    "PicardNonConvergence",
    "eo_divergence",
    "step_imex",
    "step_semi_implicit",
    "run_path",
    "run_reference",
    "restrict_to_coarse",
    "save_trajectory",
    "load_trajectory",
    "make_bump",
    "make_riemann",
    "make_sinusoid",
    "lowpass",
]


class CflViolation(RuntimeError):
    """Explicit convective step too large for the grid."""


class StabilityGateError(RuntimeError):
    """SemiImplicitPicard needs dt < 2 eps_visc / lipschitz^2."""


class PicardNonConvergence(RuntimeError):
    """Inner iteration stalled; carries the successive-difference trace."""

    def __init__(self, message: str, trace):
        super().__init__(message)
        self.trace = list(trace)


_SCHEMES = ("imex", "semi_implicit_picard")


@dataclass(frozen=True)
class SchemeConfig:
    """Everything the stepper needs besides grid, flux, noise and data."""

    lam: float
    eps_visc: float
    eps_nl: float
    dt: float
    t_final: float
    scheme: str = "imex"
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    snapshot_stride: int = 1
    split_r: float = 0.5  # forwarded to entropy diagnostics
    xi: float = 0.05  # forwarded to entropy diagnostics

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"order must lie in (0,1), got {self.lam}")
        if self.eps_visc < 0.0 or self.eps_nl < 0.0:
            raise ValueError("regularization coefficients must be nonnegative")
        if not self.dt > 0.0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.t_final < 0.0:
            raise ValueError(f"final time must be nonnegative, got {self.t_final}")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot stride must be >= 1")
        n = self.n_steps
        if abs(n * self.dt - self.t_final) > self.dt:
            raise ValueError("t_final must equal n_steps * dt within one step")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Snapshots on a stride plus per-step diagnostic series."""

    snapshot_times: np.ndarray
    snapshots: list
    diagnostics: dict = field(repr=False)

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


def _check_gates(cfg: SchemeConfig, grid: Grid, flux: Flux) -> None:
    lip = flux.lipschitz
    if cfg.scheme == "imex":
        if cfg.dt * lip / grid.h > 0.9:
            raise CflViolation(
                f"dt*lip/h = {cfg.dt * lip / grid.h:.3f} exceeds the 0.9 CFL gate"
            )
    else:
        if lip > 0.0 and not cfg.dt < 2.0 * cfg.eps_visc / lip**2:
            raise StabilityGateError(
                f"need dt < 2*eps_visc/lip^2 = {2.0 * cfg.eps_visc / lip**2:.3e}, "
                f"got dt = {cfg.dt:.3e}"
            )


def _symbol_divisor(cfg: SchemeConfig, grid: Grid) -> np.ndarray | None:
    """Fourier symbol of (I + dt (eps_visc A + eps_nl L_lam)); None if identity."""
    if cfg.eps_visc == 0.0 and cfg.eps_nl == 0.0:
        return None
    w = grid.omega
    return 1.0 + cfg.dt * (cfg.eps_visc * w**2 + cfg.eps_nl * w ** (2.0 * cfg.lam))


def eo_divergence(u: np.ndarray, flux: Flux, h: float) -> np.ndarray:
    """(F_{j+1/2} - F_{j-1/2}) / h with the EO interface flux, periodic."""
    f_half = flux.eo_plus(u) + flux.eo_minus(np.roll(u, -1))
    return (f_half - np.roll(f_half, 1)) / h


def _noise_rhs(
    u: Field,
    wiener: WienerSpec | None,
    jumps: JumpSpec | None,
    noise_step,
    dt: float,
) -> np.ndarray:
    rhs = np.zeros(u.grid.n_cells)
    if wiener is not None:
        rhs += wiener_drive(u, wiener, noise_step.d_wiener).values
    if jumps is not None:
        rhs += jump_drive(u, jumps, noise_step.marks, dt).values
    return rhs


def step_imex(
    u: Field,
    cfg: SchemeConfig,
    flux: Flux,
    divisor: np.ndarray | None,
    noise_rhs: np.ndarray,
) -> Field:
    """Explicit EO convection and noise, implicit linear operators."""
    g = u.grid
    star = u.values - cfg.dt * eo_divergence(u.values, flux, g.h) + noise_rhs
    if divisor is None:
        return Field(g, star)
    return Field(g, np.fft.irfft(np.fft.rfft(star) / divisor, g.n_cells))


def step_semi_implicit(
    u: Field,
    cfg: SchemeConfig,
    flux: Flux,
    divisor: np.ndarray | None,
    noise_rhs: np.ndarray,
) -> Field:
    """Picard iteration on (I + dt A_lin) v = u - dt div f(v) + noise.

    The linear solve is an exact Fourier division; the flux divergence is
    lagged one inner pass.  Iterates from v = u until the successive l2
    difference drops below picard_tol.
    """
    g = u.grid
    base = u.values + noise_rhs
    v = u.values
    trace = []
    for _ in range(cfg.picard_max_iters):
        rhs = base - cfg.dt * eo_divergence(v, flux, g.h)
        if divisor is None:
            v_next = rhs
        else:
            v_next = np.fft.irfft(np.fft.rfft(rhs) / divisor, g.n_cells)
        diff = math.sqrt(g.h * float(np.sum((v_next - v) ** 2)))
        trace.append(diff)
        v = v_next
        if diff < cfg.picard_tol:
            return Field(g, v)
    raise PicardNonConvergence(
        f"picard stalled after {cfg.picard_max_iters} iterations "
        f"(last diff {trace[-1]:.3e})",
        trace,
    )


_STEPPERS = {"imex": step_imex, "semi_implicit_picard": step_semi_implicit}


def run_path(
    cfg: SchemeConfig,
    grid: Grid,
    flux: Flux,
    wiener: WienerSpec | None,
    jumps: JumpSpec | None,
    u0: Field,
    master_seed: int,
    sample_index: int,
    substeps: int = 1,
    stream: int = 0,
) -> Trajectory:
    """Integrate one sample path; bit-reproducible given (seed, sample)."""
    if u0.grid != grid:
        raise ValueError("initial data must live on the run grid")
    _check_gates(cfg, grid, flux)
    divisor = _symbol_divisor(cfg, grid)
    stepper = _STEPPERS[cfg.scheme]
    n_steps = cfg.n_steps

    noise = None
    if wiener is not None or jumps is not None:
        noise = NoisePath(
            master_seed=master_seed,
            sample_index=sample_index,
            stream=stream,
            substeps=substeps,
        )

    diag = {
        key: np.empty(n_steps + 1)
        for key in ("t", "l1", "l2_sq", "tv", "hlam_sq", "mass")
    }

    def record(i: int, f: Field) -> None:
        diag["t"][i] = i * cfg.dt
        diag["l1"][i] = l1_norm(f)
        diag["l2_sq"][i] = l2_norm_sq(f)
        diag["tv"][i] = tv_norm(f)
        diag["hlam_sq"][i] = h_lambda_seminorm_sq(f, cfg.lam)
        diag["mass"][i] = mass(f)

    u = u0
    record(0, u)
    snap_times = [0.0]
    snaps = [u]
    for step in range(n_steps):
        if noise is not None:
            step_noise = noise.step_noise(wiener, jumps, cfg.dt, step)
            rhs = _noise_rhs(u, wiener, jumps, step_noise, cfg.dt)
        else:
            rhs = 0.0
        u = stepper(u, cfg, flux, divisor, rhs)
        record(step + 1, u)
        if (step + 1) % cfg.snapshot_stride == 0:
            snap_times.append((step + 1) * cfg.dt)
            snaps.append(u)
    return Trajectory(
        snapshot_times=np.asarray(snap_times), snapshots=snaps, diagnostics=diag
    )


def refine_config(cfg: SchemeConfig, refine: int) -> SchemeConfig:
    """The reference configuration: dt and snapshot stride scaled together."""
    return SchemeConfig(
        lam=cfg.lam,
        eps_visc=cfg.eps_visc,
        eps_nl=cfg.eps_nl,
        dt=cfg.dt / refine,
        t_final=cfg.t_final,
        scheme=cfg.scheme,
        picard_tol=cfg.picard_tol,
        picard_max_iters=cfg.picard_max_iters,
        snapshot_stride=cfg.snapshot_stride * refine,
        split_r=cfg.split_r,
        xi=cfg.xi,
    )


def run_reference(
    cfg: SchemeConfig,
    grid: Grid,
    flux: Flux,
    wiener: WienerSpec | None,
    jumps: JumpSpec | None,
    u0_fine: Field,
    master_seed: int,
    sample_index: int,
    refine: int = 8,
    stream: int = 0,
) -> Trajectory:
    """Fine surrogate run: refine x in space and time, same noise lattice.

    The reference integrates on the fine step directly (substeps=1); a
    coarse companion run passes substeps=refine so both realize the same
    underlying increments (common random numbers).  refine=1 is run_path.
    """
    if refine < 1:
        raise ValueError("refinement factor must be >= 1")
    fine_grid = Grid(grid.length, grid.n_cells * refine)
    if u0_fine.grid != fine_grid:
        raise ValueError("reference initial data must live on the refined grid")
    return run_path(
        refine_config(cfg, refine),
        fine_grid,
        flux,
        wiener,
        jumps,
        u0_fine,
        master_seed,
        sample_index,
        substeps=1,
        stream=stream,
    )


def restrict_to_coarse(fine: Field, coarse_grid: Grid) -> Field:
    """Conservative cell averaging onto a nested coarser grid."""
    ratio, rem = divmod(fine.grid.n_cells, coarse_grid.n_cells)
    if rem != 0 or fine.grid.length != coarse_grid.length:
        raise ValueError("grids are not nested")
    vals = fine.values.reshape(coarse_grid.n_cells, ratio).mean(axis=1)
    return Field(coarse_grid, vals)


# ---------------------------------------------------------------------------
# trajectory persistence
# ---------------------------------------------------------------------------


def save_trajectory(traj: Trajectory, out_dir: str, config_echo: dict, seed: int) -> str:
    """Write snapshots in the binary field format plus a JSON manifest."""
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for i, snap in enumerate(traj.snapshots):
        name = f"snap_{i:05d}.bin"
        save_field_binary(snap, os.path.join(out_dir, name))
        names.append(name)
    manifest = {
        "seed": seed,
        "config": config_echo,
        "snapshot_times": [float(t) for t in traj.snapshot_times],
        "snapshots": names,
        "diagnostics": {k: [float(v) for v in series] for k, series in traj.diagnostics.items()},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


def load_trajectory(out_dir: str) -> Trajectory:
    from .grid import load_field_binary

    with open(os.path.join(out_dir, "manifest.json")) as fh:
        manifest = json.load(fh)
    snaps = [load_field_binary(os.path.join(out_dir, n)) for n in manifest["snapshots"]]
    return Trajectory(
        snapshot_times=np.asarray(manifest["snapshot_times"], dtype=np.float64),
        snapshots=snaps,
        diagnostics={k: np.asarray(v) for k, v in manifest["diagnostics"].items()},
    )


# ---------------------------------------------------------------------------
# initial data library
# ---------------------------------------------------------------------------


def make_bump(
    grid: Grid, center_frac: float = 0.5, width_frac: float = 0.25, amplitude: float = 1.0
) -> Field:
    """Compactly supported C-infinity bump exp(1 - 1/(1-s^2))."""
    L = grid.length
    s = (np.mod(grid.x - center_frac * L + 0.5 * L, L) - 0.5 * L) / (0.5 * width_frac * L)
    vals = np.zeros(grid.n_cells)
    inside = np.abs(s) < 1.0
    vals[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return Field(grid, vals)


def make_riemann(
    grid: Grid,
    left: float,
    right: float,
    jump_frac: float = 0.5,
    ramp_cells: int = 2,
) -> Field:
    """Step from `left` to `right` at jump_frac*L, smoothed over ramp_cells*h.

    Only the interior transition is smoothed; the periodic wrap at x=0
    keeps the complementary jump, as any periodic step function must.
    """
    xj = jump_frac * grid.length
    w = ramp_cells * grid.h
    s = np.clip((grid.x - xj) / w + 0.5, 0.0, 1.0)
    ramp = 0.5 * (1.0 - np.cos(np.pi * s))
    return Field(grid, left + (right - left) * ramp)


def make_sinusoid(
    grid: Grid, amplitude: float = 1.0, mode: int = 1, offset: float = 0.0, phase: float = 0.0
) -> Field:
    k = 2.0 * np.pi * mode / grid.length
    return Field(grid, offset + amplitude * np.sin(k * grid.x + phase))


def lowpass(u: Field, max_mode: int) -> Field:
    """Spectral cutoff: zero all modes above max_mode (grid-Nyquist capped)."""
    uh = np.fft.rfft(u.values)
    uh[max_mode + 1 :] = 0.0
    return Field(u.grid, np.fft.irfft(uh, u.grid.n_cells))
