"""Driving noise: truncated cylindrical Wiener modes and compensated jumps.

The Wiener part acts through scalar coefficient maps g_k(u) = a_k s(u) with
a summable amplitude ladder a_k and a profile s that is either the identity
or a bounded-Lipschitz library entry.  The jump part uses the canonical
amplitude eta(u; z) = lam_star * u * h(z), h(z) = min(1, |z|), against a
truncated symmetric alpha-stable measure (or a finite discrete one).  Every
measure integral the solver needs (intensity, compensator, h^2 mass) has a
closed form and is cached on the specification object.

Reproducibility contract: the noise on fine time step j of sample i is
drawn from Philox keyed by SeedSequence(master_seed, spawn_key=(stream, i,
j)), with a fixed draw order (Wiener normals, then the Poisson count, then
jump magnitudes, then jump signs).  Stream 0 carries the coupled/common
paths; stream 1 is reserved for independently seeded reference runs.
Coarser solvers aggregate whole fine steps, so two discretizations sharing
a master seed see the same underlying path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import Field

__all__ = [
    "WienerSpec",
    "JumpSpec",
    "stable_jumps",
    "discrete_jumps",
    "jump_h",
    "sample_wiener_increment",
    "wiener_drive",
    "sample_jumps",
    "jump_drive",
    "StepNoise",
    "NoisePath",
]


# ---------------------------------------------------------------------------
# Wiener part
# ---------------------------------------------------------------------------

_PROFILES = ("linear", "tanh")


@dataclass(frozen=True)
class WienerSpec:
    """K truncated Wiener modes with coefficients g_k(u) = a_k s(u).

    a_k = sigma0 / k keeps sum a_k^2 finite; s is the identity ("linear")
    or tanh ("tanh", bounded with unit Lipschitz constant).  Both choices
    satisfy g_k(0) = 0 and |s(u)| <= |u|.
    """

    n_modes: int
    sigma0: float
    kind: str = "linear"

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"need at least one mode, got {self.n_modes}")
        if self.sigma0 < 0.0:
            raise ValueError(f"amplitude must be nonnegative, got {self.sigma0}")
        if self.kind not in _PROFILES:
            raise ValueError(f"unknown coefficient profile {self.kind!r}")

    @cached_property
    def amplitudes(self) -> np.ndarray:
        return self.sigma0 / np.arange(1, self.n_modes + 1, dtype=np.float64)

    @cached_property
    def lipschitz_bound(self) -> float:
        """sqrt(sum_k Lip(g_k)^2); both profiles have unit Lipschitz factor."""
        return float(np.sqrt(np.sum(self.amplitudes**2)))

    def profile(self, u):
        u = np.asarray(u, dtype=np.float64)
        return u if self.kind == "linear" else np.tanh(u)

    def coeff_maps(self) -> list:
        return [lambda u, a=a, s=self.profile: a * s(u) for a in self.amplitudes]

    def g_squared(self, u):
        """G^2(u) = sum_k g_k(u)^2 <= lipschitz_bound^2 * u^2."""
        return float(np.sum(self.amplitudes**2)) * self.profile(u) ** 2

    def drive(self, u_values: np.ndarray, increments: np.ndarray) -> np.ndarray:
        if len(increments) != self.n_modes:
            raise ValueError("increment vector length must match the mode count")
        return self.profile(u_values) * float(self.amplitudes @ increments)


def sample_wiener_increment(spec: WienerSpec, dt: float, rng: np.random.Generator):
    """K independent normals, mean 0 and variance dt each."""
    if dt < 0.0:
        raise ValueError(f"time step must be nonnegative, got {dt}")
    return rng.normal(0.0, math.sqrt(dt), spec.n_modes)


def wiener_drive(u: Field, spec: WienerSpec, increments) -> Field:
    """x -> sum_k g_k(u(x)) dbeta_k."""
    return Field(u.grid, spec.drive(u.values, np.asarray(increments, dtype=np.float64)))


# ---------------------------------------------------------------------------
# jump part
# ---------------------------------------------------------------------------


def jump_h(z):
    """Canonical jump shape h(z) = min(1, |z|), values in [0, 1]."""
    return np.minimum(1.0, np.abs(np.asarray(z, dtype=np.float64)))


def _stable_piece(lo: float, hi: float, alpha: float, power: int) -> float:
    """int_lo^hi min(1, z^power) z^{-1-alpha} dz for one side, lo >= 0."""
    if hi <= lo:
        return 0.0
    total = 0.0
    knee = min(max(lo, 1.0), hi)
    if lo < knee:  # z^power part, exponent power-1-alpha
        e = power - alpha
        if abs(e) < 1e-14:
            total += math.log(knee / lo)
        else:
            total += (knee**e - lo**e) / e
    if knee < hi:  # flat part, integrand z^{-1-alpha}
        total += (knee**-alpha - hi**-alpha) / alpha
    return total


@dataclass(frozen=True)
class JumpSpec:
    """Compensated-jump specification with amplitude lam_star * u * h(z).

    The mark measure is either a truncated symmetric alpha-stable density
    c_mu |z|^{-1-alpha} on delta_jump < |z| <= z_max, or a finite list of
    atoms (z, weight) with the same delta_jump truncation.  All the measure
    integrals the solver and the perturbation estimates need are evaluated
    in closed form and cached.
    """

    lam_star: float
    delta_jump: float
    alpha: float | None = None
    c_mu: float | None = None
    z_max: float | None = None
    atoms: tuple | None = None

    def __post_init__(self):
        if not 0.0 < self.lam_star < 1.0:
            raise ValueError(f"jump contraction must lie in (0,1), got {self.lam_star}")
        if not self.delta_jump > 0.0:
            raise ValueError("small-jump cutoff must be positive (finite activity)")
        stable = self.alpha is not None
        if stable == (self.atoms is not None):
            raise ValueError("give either a stable density or discrete atoms")
        if stable:
            if not 0.0 < self.alpha < 2.0:
                raise ValueError(f"stable exponent must lie in (0,2), got {self.alpha}")
            if self.c_mu is None or self.c_mu < 0.0:
                raise ValueError("stable density needs a nonnegative c_mu")
            if self.z_max is None or self.z_max <= 0.0:
                raise ValueError("stable density needs a positive z_max")
        else:
            for z, w in self.atoms:
                if z == 0.0 or w < 0.0:
                    raise ValueError("atoms need nonzero locations and weights >= 0")
        self.h2_mass  # cache the A.5 square-integral up front

    @cached_property
    def _live_atoms(self) -> tuple:
        z = np.array([a[0] for a in self.atoms], dtype=np.float64)
        w = np.array([a[1] for a in self.atoms], dtype=np.float64)
        keep = np.abs(z) > self.delta_jump
        return z[keep], w[keep]

    @cached_property
    def intensity(self) -> float:
        """Total mass of the truncated measure: the Poisson rate per unit time."""
        if self.atoms is not None:
            return float(self._live_atoms[1].sum())
        if self.delta_jump >= self.z_max:
            return 0.0
        a = self.alpha
        return 2.0 * self.c_mu * (self.delta_jump**-a - self.z_max**-a) / a

    @cached_property
    def comp_coeff(self) -> float:
        """int_{|z|>delta} h(z) mu(dz): the compensator drift per unit u."""
        if self.atoms is not None:
            z, w = self._live_atoms
            return float(np.sum(jump_h(z) * w))
        return 2.0 * self.c_mu * _stable_piece(self.delta_jump, self.z_max, self.alpha, 1)

    @cached_property
    def h2_mass(self) -> float:
        """int_{|z|>delta} h(z)^2 mu(dz), finite by construction."""
        if self.atoms is not None:
            z, w = self._live_atoms
            return float(np.sum(jump_h(z) ** 2 * w))
        return 2.0 * self.c_mu * _stable_piece(self.delta_jump, self.z_max, self.alpha, 2)

    @cached_property
    def discarded_h2_mass(self) -> float:
        """int_{|z|<=delta} h^2 dmu: variance lost to the small-jump cutoff.

        Reported as a diagnostic so experiments can check the truncation
        sits below their statistical resolution.
        """
        if self.atoms is not None:
            z = np.array([a[0] for a in self.atoms], dtype=np.float64)
            w = np.array([a[1] for a in self.atoms], dtype=np.float64)
            keep = np.abs(z) <= self.delta_jump
            return float(np.sum(jump_h(z[keep]) ** 2 * w[keep]))
        return 2.0 * self.c_mu * _stable_piece(0.0, min(self.delta_jump, self.z_max), self.alpha, 2)

    def eta(self, u, z):
        """Amplitude map lam_star * u * h(z); vanishes at u = 0."""
        return self.lam_star * np.asarray(u, dtype=np.float64) * jump_h(z)

    def sample_marks(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """count marks from the truncated measure, magnitude then sign draws."""
        if count == 0:
            return np.empty(0)
        if self.atoms is not None:
            z, w = self._live_atoms
            idx = rng.choice(len(z), size=count, p=w / w.sum())
            return z[idx]
        a = self.alpha
        lo, hi = self.delta_jump**-a, self.z_max**-a
        mag = (lo - rng.random(count) * (lo - hi)) ** (-1.0 / a)
        sign = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        return sign * mag


def stable_jumps(
    lam_star: float, alpha: float, c_mu: float, delta_jump: float, z_max: float
) -> JumpSpec:
    return JumpSpec(
        lam_star=lam_star, delta_jump=delta_jump, alpha=alpha, c_mu=c_mu, z_max=z_max
    )


def discrete_jumps(lam_star: float, atoms, delta_jump: float = 1e-12) -> JumpSpec:
    return JumpSpec(
        lam_star=lam_star, delta_jump=delta_jump, atoms=tuple((float(z), float(w)) for z, w in atoms)
    )


def sample_jumps(spec: JumpSpec, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson(intensity * dt)-many marks from the truncated measure."""
    if dt < 0.0:
        raise ValueError(f"time step must be nonnegative, got {dt}")
    count = int(rng.poisson(spec.intensity * dt))
    return spec.sample_marks(count, rng)


def jump_drive(u: Field, spec: JumpSpec, marks, dt: float) -> Field:
    """Jumps minus compensator over one step:
    sum_i eta(u; z_i) - dt int_{|z|>delta} eta(u; z) mu(dz).

    For the canonical amplitude both pieces factor through u, so the whole
    drive is u times a scalar.
    """
    marks = np.asarray(marks, dtype=np.float64)
    jump_sum = float(np.sum(jump_h(marks))) if marks.size else 0.0
    scale = spec.lam_star * (jump_sum - dt * spec.comp_coeff)
    return Field(u.grid, scale * u.values)


# ---------------------------------------------------------------------------
# per-step noise streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepNoise:
    """One solver step's worth of noise."""

    d_wiener: np.ndarray
    marks: np.ndarray


@dataclass(frozen=True)
class NoisePath:
    """Deterministic noise stream for one sample path.

    The path is defined on a fine time lattice; a solver taking steps of
    substeps fine increments receives their aggregate (Wiener increments
    summed, marks concatenated), which is how a coarse run and its
    refined reference share one realization.
    """

    master_seed: int
    sample_index: int
    stream: int = 0
    substeps: int = 1

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")

    def rng_for(self, fine_step: int) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(self.stream, self.sample_index, fine_step),
        )
        return np.random.Generator(np.random.Philox(seq))

    def step_noise(
        self,
        wiener: WienerSpec | None,
        jumps: JumpSpec | None,
        dt: float,
        step: int,
    ) -> StepNoise:
        """Noise for solver step `step` of size dt (= substeps fine steps)."""
        fine_dt = dt / self.substeps
        n_modes = wiener.n_modes if wiener is not None else 0
        d_w = np.zeros(n_modes)
        marks = []
        for j in range(self.substeps):
            rng = self.rng_for(step * self.substeps + j)
            if wiener is not None:
                d_w += sample_wiener_increment(wiener, fine_dt, rng)
            if jumps is not None:
                marks.append(sample_jumps(jumps, fine_dt, rng))
        gathered = np.concatenate(marks) if marks else np.empty(0)
        return StepNoise(d_wiener=d_w, marks=gathered)
