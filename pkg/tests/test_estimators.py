"""Monte Carlo reduction, coupled error estimates, rate fits, perturbation gaps."""

import math

import numpy as np
import pytest

from fracshock.estimators import (
    McEstimate,
    RunSetup,
    coupled_l1_error,
    fit_rate,
    mc_expect,
    measure_gap,
    noise_gap_eta,
    noise_gap_eta_quad,
    noise_gap_sigma,
)
from fracshock.fluxes import burgers_flux
from fracshock.grid import Grid
from fracshock.noise import WienerSpec, discrete_jumps, stable_jumps
from fracshock.solver import SchemeConfig, make_sinusoid, refine_config, run_path

L = 2.0 * np.pi


def _index_affine(master_seed, index):
    return float(master_seed % 5) + 0.5 * index


def _explodes_at_three(master_seed, index):
    if index == 3:
        raise ValueError("boom")
    return 1.0


def _setup(n_cells=32, dt=0.01, t_final=0.1, sigma0=0.3, **cfg_kw):
    grid = Grid(length=L, n_cells=n_cells)
    cfg = SchemeConfig(lam=0.5, eps_visc=0.05, eps_nl=0.0, dt=dt, t_final=t_final, **cfg_kw)
    return RunSetup(
        cfg=cfg,
        grid=grid,
        flux=burgers_flux(),
        wiener=WienerSpec(n_modes=4, sigma0=sigma0),
        jumps=None,
        u0=make_sinusoid(grid, amplitude=0.5, offset=0.2),
    )


class TestMcExpect:
    def test_mean_and_se(self):
        est = mc_expect(_index_affine, 12, master_seed=13)
        vals = 3.0 + 0.5 * np.arange(12)
        assert est.mean == np.mean(vals)
        assert np.isclose(est.std_error, np.std(vals, ddof=1) / math.sqrt(12))
        assert est.n_samples == 12
        assert np.isclose(est.ci95_halfwidth, 1.96 * est.std_error)

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            mc_expect(_index_affine, 1, master_seed=0)

    def test_parallel_matches_serial(self):
        serial = mc_expect(_index_affine, 16, master_seed=4, jobs=1)
        parallel = mc_expect(_index_affine, 16, master_seed=4, jobs=2)
        assert serial.mean == parallel.mean
        assert serial.std_error == parallel.std_error

    def test_failed_sample_is_identified(self):
        with pytest.raises(RuntimeError, match="sample 3 failed"):
            mc_expect(_explodes_at_three, 8, master_seed=0)


class TestRunSetup:
    def test_run_delegates_to_solver(self):
        s = _setup()
        a = s.run(21, 5)
        b = run_path(s.cfg, s.grid, s.flux, s.wiener, s.jumps, s.u0, 21, 5)
        assert np.array_equal(a.final.values, b.final.values)


class TestCoupledError:
    def test_identical_setups_give_zero(self):
        s = _setup()
        est = coupled_l1_error(s, s, t=0.1, n_samples=4, master_seed=1)
        assert est.mean == 0.0
        assert est.std_error == 0.0

    def test_common_noise_beats_independent(self):
        coarse = _setup(n_cells=32, dt=0.01)
        fine_grid = Grid(length=L, n_cells=64)
        ref = RunSetup(
            cfg=refine_config(coarse.cfg, 2),
            grid=fine_grid,
            flux=coarse.flux,
            wiener=coarse.wiener,
            jumps=coarse.jumps,
            u0=make_sinusoid(fine_grid, amplitude=0.5, offset=0.2),
        )
        common = coupled_l1_error(coarse, ref, t=0.1, n_samples=8, master_seed=3)
        indep = coupled_l1_error(
            coarse, ref, t=0.1, n_samples=8, master_seed=3, independent=True
        )
        assert common.mean < 0.5 * indep.mean

    def test_time_must_match_configuration(self):
        s = _setup()
        with pytest.raises(ValueError):
            coupled_l1_error(s, s, t=0.5, n_samples=2, master_seed=0)

    def test_grids_must_nest(self):
        coarse = _setup(n_cells=64)
        bad = _setup(n_cells=32)  # reference coarser than the run itself
        with pytest.raises(ValueError):
            coupled_l1_error(coarse, bad, t=0.1, n_samples=2, master_seed=0)

    def test_dt_must_divide(self):
        coarse = _setup(n_cells=32, dt=0.01)
        ref = _setup(n_cells=64, dt=0.004)
        with pytest.raises(ValueError):
            coupled_l1_error(coarse, ref, t=0.1, n_samples=2, master_seed=0)


class TestRateFit:
    def test_recovers_planted_power_law(self):
        eps = [2.0**-k for k in range(2, 8)]
        fit = fit_rate([(e, 2.7 * e**0.85) for e in eps])
        assert abs(fit.slope - 0.85) < 1e-12
        assert abs(fit.intercept - math.log(2.7)) < 1e-12
        assert fit.r_squared > 1.0 - 1e-12

    def test_log_corrected_rate(self):
        # err = eps |log eps| over 2^-3 .. 2^-8 fits a slope a bit below 1
        eps = np.array([2.0**-k for k in range(3, 9)])
        errs = eps * np.abs(np.log(eps))
        fit = fit_rate(zip(eps, errs))
        slope_np = np.polyfit(np.log(eps), np.log(errs), 1)[0]
        assert abs(fit.slope - slope_np) < 1e-10
        assert abs(fit.slope - 0.7211346666171196) < 1e-12
        assert abs(fit.r_squared - 0.9969398714678999) < 1e-12

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 0.2), (0.05, 0.1)])

    def test_rejects_nonpositive_values(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 0.2), (0.05, 0.0), (0.025, 0.1)])
        with pytest.raises(ValueError):
            fit_rate([(-0.1, 0.2), (0.05, 0.3), (0.025, 0.1)])

    def test_rejects_degenerate_abscissa(self):
        with pytest.raises(ValueError):
            fit_rate([(0.1, 0.2), (0.1, 0.3), (0.1, 0.4)])

    def test_r_squared_clamped_to_unit_interval(self):
        rng = np.random.default_rng(6)
        eps = [2.0**-k for k in range(1, 7)]
        errs = [e * math.exp(rng.normal(0.0, 0.5)) for e in eps]
        fit = fit_rate(zip(eps, errs))
        assert 0.0 <= fit.r_squared <= 1.0


class TestNoiseGaps:
    def test_sigma_gap_closed_form(self):
        a = WienerSpec(n_modes=8, sigma0=0.1)
        b = WienerSpec(n_modes=8, sigma0=0.1 * 1.1)
        want = 0.1 * 0.1 * math.sqrt(sum(1.0 / k**2 for k in range(1, 9)))
        assert np.isclose(noise_gap_sigma(a, b), want, atol=1e-14)
        assert noise_gap_sigma(a, a) == 0.0

    def test_sigma_gap_mode_count_guard(self):
        with pytest.raises(ValueError):
            noise_gap_sigma(WienerSpec(4, 0.1), WienerSpec(8, 0.1))

    def test_eta_gap_closed_form_and_quadrature(self):
        a = stable_jumps(0.3, 0.8, 0.2, 0.05, 2.0)
        b = stable_jumps(0.45, 0.8, 0.2, 0.05, 2.0)
        want = (0.3 - 0.45) ** 2 * a.h2_mass
        assert np.isclose(noise_gap_eta(a, b), want, atol=1e-15)
        assert abs(noise_gap_eta(a, b) - noise_gap_eta_quad(a, b)) < 1e-10
        assert noise_gap_eta(a, a) == 0.0

    def test_eta_gap_discrete_measure(self):
        a = discrete_jumps(0.2, [(1.0, 2.0), (-0.5, 1.0)])
        b = discrete_jumps(0.5, [(1.0, 2.0), (-0.5, 1.0)])
        assert np.isclose(noise_gap_eta(a, b), 0.09 * 2.25, atol=1e-15)

    def test_eta_gap_requires_common_measure(self):
        a = stable_jumps(0.3, 0.8, 0.2, 0.05, 2.0)
        b = stable_jumps(0.3, 0.9, 0.2, 0.05, 2.0)
        with pytest.raises(ValueError):
            noise_gap_eta(a, b)


class TestMeasureGap:
    def test_closed_form_at_unit_radius(self):
        # orders 1/4 and 3/4 with r1 = 1: both pieces integrate to 8/3
        inner, outer = measure_gap(0.25, 0.75, 1.0)
        assert abs(inner - 8.0 / 3.0) < 1e-8
        assert abs(outer - 8.0 / 3.0) < 1e-8

    def test_equal_orders_vanish(self):
        assert measure_gap(0.5, 0.5, 1.0) == (0.0, 0.0)

    def test_shrinks_with_order_gap(self):
        gaps = [sum(measure_gap(0.5, 0.5 + d, 0.7)) for d in (0.2, 0.1, 0.05)]
        assert gaps[0] > gaps[1] > gaps[2] > 0.0

    @pytest.mark.parametrize("lam,kappa,r1", [(0.0, 0.5, 1.0), (0.5, 1.0, 1.0), (0.3, 0.5, 0.0)])
    def test_validation(self, lam, kappa, r1):
        with pytest.raises(ValueError):
            measure_gap(lam, kappa, r1)


class TestMcEstimateShape:
    def test_ci_halfwidth_factor(self):
        est = McEstimate(mean=1.0, std_error=0.25, n_samples=10)
        assert est.ci95_halfwidth == 1.96 * 0.25
