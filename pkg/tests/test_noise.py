"""Wiener mode ladder, compensated jump measures, and the seeded noise paths."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from fracshock.grid import Field, Grid
from fracshock.noise import (
    JumpSpec,
    NoisePath,
    WienerSpec,
    discrete_jumps,
    jump_drive,
    jump_h,
    sample_jumps,
    sample_wiener_increment,
    stable_jumps,
    wiener_drive,
)


class TestWienerSpec:
    def test_amplitude_ladder(self):
        spec = WienerSpec(n_modes=4, sigma0=0.2)
        assert np.allclose(spec.amplitudes, [0.2, 0.1, 0.2 / 3, 0.05])

    def test_lipschitz_bound_closed_form(self):
        spec = WienerSpec(n_modes=8, sigma0=0.1)
        want = 0.1 * math.sqrt(sum(1.0 / k**2 for k in range(1, 9)))
        assert np.isclose(spec.lipschitz_bound, want, rtol=0, atol=1e-15)
        assert np.isclose(spec.lipschitz_bound, 0.12358891747054811, atol=1e-15)

    def test_g_squared_bound(self):
        spec = WienerSpec(n_modes=6, sigma0=0.3, kind="tanh")
        for u in (-2.0, -0.3, 0.0, 1.7):
            assert spec.g_squared(u) <= spec.lipschitz_bound**2 * u**2 + 1e-15
        assert spec.g_squared(0.0) == 0.0

    def test_drive_is_linear_in_increments(self):
        spec = WienerSpec(n_modes=3, sigma0=0.5)
        u = np.array([0.0, 1.0, -2.0])
        d1 = np.array([0.1, 0.0, -0.2])
        d2 = np.array([0.0, 0.3, 0.1])
        lhs = spec.drive(u, d1 + d2)
        rhs = spec.drive(u, d1) + spec.drive(u, d2)
        assert np.allclose(lhs, rhs, atol=1e-15)

    def test_drive_spatial_shape_follows_profile(self):
        spec = WienerSpec(n_modes=2, sigma0=1.0, kind="tanh")
        u = np.linspace(-2, 2, 11)
        dw = np.array([0.4, -0.1])
        scalar = float(spec.amplitudes @ dw)
        assert np.allclose(spec.drive(u, dw), np.tanh(u) * scalar)

    def test_mode_count_mismatch(self):
        spec = WienerSpec(n_modes=4, sigma0=0.1)
        with pytest.raises(ValueError):
            spec.drive(np.zeros(3), np.zeros(5))

    def test_wiener_drive_returns_field(self):
        grid = Grid(length=1.0, n_cells=8)
        u = Field(grid, np.linspace(-1, 1, 8))
        out = wiener_drive(u, WienerSpec(n_modes=2, sigma0=0.1), [0.3, 0.2])
        assert out.grid is grid
        assert np.allclose(out.values, u.values * (0.1 * 0.3 + 0.05 * 0.2))

    def test_increment_sampling_stats(self):
        spec = WienerSpec(n_modes=5, sigma0=0.1)
        rng = np.random.default_rng(77)
        draws = np.array([sample_wiener_increment(spec, 0.25, rng) for _ in range(4000)])
        assert draws.shape == (4000, 5)
        assert np.all(np.abs(draws.mean(axis=0)) < 5 * 0.5 / math.sqrt(4000))
        assert np.allclose(draws.var(axis=0), 0.25, atol=0.03)

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            sample_wiener_increment(WienerSpec(2, 0.1), -0.1, np.random.default_rng(0))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_modes": 0, "sigma0": 0.1},
            {"n_modes": 3, "sigma0": -0.5},
            {"n_modes": 3, "sigma0": 0.1, "kind": "cubic"},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            WienerSpec(**kwargs)


class TestJumpShape:
    def test_h_values(self):
        assert jump_h(0.5) == 0.5
        assert jump_h(-0.25) == 0.25
        assert jump_h(3.0) == 1.0
        assert np.allclose(jump_h([-2.0, 0.1, 0.0]), [1.0, 0.1, 0.0])


class TestStableJumpSpec:
    SPEC = dict(lam_star=0.3, alpha=0.8, c_mu=0.2, delta_jump=0.05, z_max=2.0)

    def _quad_moment(self, power, lo, hi, alpha, c_mu):
        val, _ = quad(
            lambda z: min(1.0, z) ** power * c_mu * z ** (-1.0 - alpha),
            lo,
            hi,
            points=[1.0] if lo < 1.0 < hi else None,
            epsabs=1e-13,
            epsrel=1e-13,
        )
        return 2.0 * val  # symmetric measure: both signs

    def test_frozen_values(self):
        spec = stable_jumps(**self.SPEC)
        assert np.isclose(spec.intensity, 5.20562812778133, atol=1e-12)
        assert np.isclose(spec.comp_coeff, 1.1142648679446239, atol=1e-12)
        assert np.isclose(spec.h2_mass, 0.537004073389857, atol=1e-12)
        assert np.isclose(spec.discarded_h2_mass, 0.00915467119421765, atol=1e-12)

    def test_closed_forms_match_quadrature(self):
        spec = stable_jumps(**self.SPEC)
        lo, hi, a, c = 0.05, 2.0, 0.8, 0.2
        assert np.isclose(spec.intensity, self._quad_moment(0, lo, hi, a, c), atol=1e-10)
        assert np.isclose(spec.comp_coeff, self._quad_moment(1, lo, hi, a, c), atol=1e-10)
        assert np.isclose(spec.h2_mass, self._quad_moment(2, lo, hi, a, c), atol=1e-10)
        assert np.isclose(
            spec.discarded_h2_mass, self._quad_moment(2, 0.0, lo, a, c), atol=1e-10
        )

    def test_alpha_one_log_branch(self):
        spec = stable_jumps(0.3, 1.0, 0.2, 0.05, 2.0)
        want = 2.0 * 0.2 * (math.log(1.0 / 0.05) + 0.5)
        assert np.isclose(spec.comp_coeff, want, atol=1e-12)
        assert np.isclose(
            spec.comp_coeff, self._quad_moment(1, 0.05, 2.0, 1.0, 0.2), atol=1e-10
        )

    def test_cutoff_above_zmax_is_inert(self):
        spec = stable_jumps(0.3, 0.8, 0.2, 3.0, 2.0)
        assert spec.intensity == 0.0

    def test_eta_scales_with_state(self):
        spec = stable_jumps(**self.SPEC)
        assert np.isclose(spec.eta(2.0, 0.5), 0.3 * 2.0 * 0.5)
        assert spec.eta(0.0, 1.4) == 0.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(lam_star=1.5, alpha=0.8, c_mu=0.2, delta_jump=0.05, z_max=2.0),
            dict(lam_star=0.3, alpha=0.8, c_mu=0.2, delta_jump=0.0, z_max=2.0),
            dict(lam_star=0.3, alpha=2.5, c_mu=0.2, delta_jump=0.05, z_max=2.0),
            dict(lam_star=0.3, alpha=0.8, c_mu=-0.1, delta_jump=0.05, z_max=2.0),
            dict(lam_star=0.3, alpha=0.8, c_mu=0.2, delta_jump=0.05, z_max=None),
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            stable_jumps(
                kwargs["lam_star"],
                kwargs["alpha"],
                kwargs["c_mu"],
                kwargs["delta_jump"],
                kwargs["z_max"],
            )

    def test_density_and_atoms_exclusive(self):
        with pytest.raises(ValueError):
            JumpSpec(lam_star=0.3, delta_jump=0.05)
        with pytest.raises(ValueError):
            JumpSpec(
                lam_star=0.3,
                delta_jump=0.05,
                alpha=0.8,
                c_mu=0.2,
                z_max=2.0,
                atoms=((1.0, 1.0),),
            )


class TestDiscreteJumpSpec:
    def test_exact_moments(self):
        spec = discrete_jumps(0.4, [(1.0, 2.0), (-0.5, 1.0)])
        assert spec.intensity == 3.0
        assert spec.comp_coeff == 2.0 * 1.0 + 1.0 * 0.5
        assert spec.h2_mass == 2.0 * 1.0 + 1.0 * 0.25

    def test_cutoff_drops_small_atoms(self):
        spec = discrete_jumps(0.4, [(0.01, 5.0), (1.0, 2.0)], delta_jump=0.05)
        assert spec.intensity == 2.0
        assert np.isclose(spec.discarded_h2_mass, 0.01**2 * 5.0)

    def test_zero_atom_rejected(self):
        with pytest.raises(ValueError):
            discrete_jumps(0.4, [(0.0, 1.0)])

    def test_atom_sampling_respects_weights(self):
        spec = discrete_jumps(0.4, [(1.0, 3.0), (-0.5, 1.0)])
        rng = np.random.default_rng(5)
        marks = spec.sample_marks(8000, rng)
        frac_plus = np.mean(marks == 1.0)
        assert abs(frac_plus - 0.75) < 5 * math.sqrt(0.75 * 0.25 / 8000)


class TestJumpSampling:
    SPEC = stable_jumps(0.3, 0.8, 0.2, 0.05, 2.0)

    def test_counts_match_poisson_rate(self):
        rng = np.random.default_rng(31)
        dt = 0.1
        counts = [len(sample_jumps(self.SPEC, dt, rng)) for _ in range(3000)]
        rate = self.SPEC.intensity * dt
        se = math.sqrt(rate / 3000)
        assert abs(np.mean(counts) - rate) < 5 * se

    def test_marks_live_in_truncated_band(self):
        rng = np.random.default_rng(32)
        marks = self.SPEC.sample_marks(5000, rng)
        mags = np.abs(marks)
        assert np.all(mags > self.SPEC.delta_jump)
        assert np.all(mags <= self.SPEC.z_max)
        # symmetric measure: empirical sign split near 1/2
        assert abs(np.mean(marks > 0) - 0.5) < 5 * math.sqrt(0.25 / 5000)

    def test_mark_h2_moment_matches_measure(self):
        rng = np.random.default_rng(33)
        marks = self.SPEC.sample_marks(40000, rng)
        want = self.SPEC.h2_mass / self.SPEC.intensity
        got = np.mean(jump_h(marks) ** 2)
        assert abs(got - want) < 5 * np.std(jump_h(marks) ** 2) / math.sqrt(40000)

    def test_zero_count_gives_empty(self):
        assert self.SPEC.sample_marks(0, np.random.default_rng(0)).size == 0

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            sample_jumps(self.SPEC, -1e-3, np.random.default_rng(0))


class TestJumpDrive:
    def test_scale_formula(self):
        grid = Grid(length=1.0, n_cells=4)
        u = Field(grid, np.array([1.0, -1.0, 2.0, 0.0]))
        spec = discrete_jumps(0.4, [(1.0, 2.0), (-0.5, 1.0)])
        marks = np.array([0.5, 2.0])
        dt = 0.01
        scale = 0.4 * ((0.5 + 1.0) - dt * spec.comp_coeff)
        out = jump_drive(u, spec, marks, dt)
        assert np.allclose(out.values, scale * u.values, atol=1e-15)

    def test_vanishes_on_zero_state(self):
        grid = Grid(length=1.0, n_cells=4)
        u = Field(grid, np.zeros(4))
        spec = discrete_jumps(0.4, [(1.0, 2.0)])
        out = jump_drive(u, spec, np.array([1.0, 1.0]), 0.05)
        assert np.all(out.values == 0.0)

    def test_compensation_centers_the_drive(self):
        # E[sum h(z_i)] = dt * comp_coeff, so the scalar factor has mean ~ 0
        spec = stable_jumps(0.3, 0.8, 0.2, 0.05, 2.0)
        rng = np.random.default_rng(40)
        dt = 0.05
        n = 20000
        sums = np.array([np.sum(jump_h(sample_jumps(spec, dt, rng))) for _ in range(n)])
        centered = sums - dt * spec.comp_coeff
        se = np.std(sums) / math.sqrt(n)
        assert abs(np.mean(centered)) < 5 * se


class TestNoisePath:
    WIENER = WienerSpec(n_modes=3, sigma0=0.2)
    JUMPS = stable_jumps(0.3, 0.8, 0.5, 0.05, 2.0)

    def test_reproducible(self):
        a = NoisePath(master_seed=123, sample_index=4)
        b = NoisePath(master_seed=123, sample_index=4)
        na = a.step_noise(self.WIENER, self.JUMPS, 0.1, step=7)
        nb = b.step_noise(self.WIENER, self.JUMPS, 0.1, step=7)
        assert np.array_equal(na.d_wiener, nb.d_wiener)
        assert np.array_equal(na.marks, nb.marks)

    def test_streams_and_samples_decorrelate(self):
        base = NoisePath(master_seed=123, sample_index=4)
        other_stream = NoisePath(master_seed=123, sample_index=4, stream=1)
        other_sample = NoisePath(master_seed=123, sample_index=5)
        n0 = base.step_noise(self.WIENER, None, 0.1, step=0)
        n1 = other_stream.step_noise(self.WIENER, None, 0.1, step=0)
        n2 = other_sample.step_noise(self.WIENER, None, 0.1, step=0)
        assert not np.array_equal(n0.d_wiener, n1.d_wiener)
        assert not np.array_equal(n0.d_wiener, n2.d_wiener)

    def test_substep_aggregation_identity(self):
        # a coarse step of 2 fine increments equals the two fine steps summed
        fine = NoisePath(master_seed=9, sample_index=0, substeps=1)
        coarse = NoisePath(master_seed=9, sample_index=0, substeps=2)
        dt = 0.08
        agg = coarse.step_noise(self.WIENER, self.JUMPS, dt, step=3)
        f0 = fine.step_noise(self.WIENER, self.JUMPS, dt / 2, step=6)
        f1 = fine.step_noise(self.WIENER, self.JUMPS, dt / 2, step=7)
        assert np.allclose(agg.d_wiener, f0.d_wiener + f1.d_wiener, atol=1e-15)
        assert np.array_equal(agg.marks, np.concatenate([f0.marks, f1.marks]))

    def test_wiener_only_and_jump_only(self):
        path = NoisePath(master_seed=2, sample_index=0)
        nw = path.step_noise(self.WIENER, None, 0.1, step=0)
        assert nw.marks.size == 0
        nj = path.step_noise(None, self.JUMPS, 0.1, step=0)
        assert nj.d_wiener.size == 0

    def test_substeps_validated(self):
        with pytest.raises(ValueError):
            NoisePath(master_seed=1, sample_index=0, substeps=0)
