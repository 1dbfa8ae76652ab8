"""Experiment drivers behind the command-line interface.

Each driver consumes a validated :class:`~fracshock.config.ExperimentConfig`,
runs its study, writes plot-ready CSV/JSON files, and returns an
:class:`ExperimentResult` whose ``gates`` dict records every pass/fail
decision.  Every CSV row carries the master seed and the config hash, and all
numeric columns are formatted with ``repr`` so a re-run with the same pair is
byte-identical regardless of worker count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_flux,
    build_grid,
    build_initial,
    build_jumps,
    build_scheme,
    build_wiener,
    config_hash,
)
from .estimators import (
    McEstimate,
    RunSetup,
    coupled_l1_error,
    fit_rate,
    mc_expect,
    measure_gap,
    noise_gap_sigma,
)
from .fluxes import PSI_BATTERY, entropy_residual, polynomial_flux
from .fractional import FracParams, apply_quadrature, apply_spectral, c_lambda
from .fractional import riesz_inverse
from .grid import Field, Grid, l1_norm, l2_norm_sq
from .noise import WienerSpec
from .solver import lowpass, restrict_to_coarse, save_trajectory

# ---------------------------------------------------------------------------
# output plumbing
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    """repr for floats (shortest round-trip form), str otherwise."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def _json_default(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"
    )
    return path


@dataclass
class ExperimentResult:
    """Driver outcome: summary payload, named gates, files written."""

    summary: dict
    gates: dict
    outputs: list
    rows: list | None = None

    @property
    def passed(self) -> bool:
        return all(self.gates.values())

    def failures(self) -> list:
        return [name for name, ok in self.gates.items() if not ok]


def build_setup(cfg: ExperimentConfig, **scheme_overrides) -> RunSetup:
    """Assemble the solver inputs a configuration describes."""
    grid = build_grid(cfg)
    return RunSetup(
        cfg=build_scheme(cfg, **scheme_overrides),
        grid=grid,
        flux=build_flux(cfg),
        wiener=build_wiener(cfg),
        jumps=build_jumps(cfg),
        u0=build_initial(cfg, grid),
    )


def _expect_kind(cfg: ExperimentConfig, kind: str) -> None:
    got = cfg.experiment["kind"]
    if got != kind:
        raise ConfigError(f"experiment.kind: expected '{kind}', got '{got}'")


def _master_seed(cfg: ExperimentConfig, seed_override: int | None) -> int:
    return cfg.experiment["master_seed"] if seed_override is None else int(seed_override)


def _linear_fit_r2(x, y) -> tuple:
    """Plain least-squares line through (x, y); returns (slope, intercept, r2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:
        raise ValueError("degenerate fit: all abscissae equal")
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    intercept = ybar - slope * xbar
    resid = y - (slope * x + intercept)
    sstot = float(np.sum((y - ybar) ** 2))
    r2 = 1.0 if sstot == 0.0 else 1.0 - float(np.sum(resid**2)) / sstot
    return slope, float(intercept), min(max(r2, 0.0), 1.0)


# ---------------------------------------------------------------------------
# operator validation battery
# ---------------------------------------------------------------------------

OPERATOR_LAMBDAS = (0.1, 0.25, 0.5, 0.75, 0.9)
#: the orders whose quadrature must match the spectral answer within 5%;
#: outside this window the truncated-core error is intrinsically large and
#: the battery reports the error without gating it.
GATED_LAMBDAS = (0.25, 0.5, 0.75)
OPERATOR_HEADER = (
    "lambda",
    "n_cells",
    "r",
    "rel_l2_error_vs_spectral",
    "selfadjointness_defect",
    "master_seed",
    "config_hash",
)


def _rel_l2(got: np.ndarray, want: np.ndarray) -> float:
    scale = float(np.linalg.norm(want))
    return float(np.linalg.norm(got - want)) / scale


def operator_battery(
    lambdas=OPERATOR_LAMBDAS,
    n_ladder=(256, 512, 1024),
    r: float = 0.5,
    length: float = 2.0 * np.pi,
    master_seed: int = 0,
    cfg_hash: str = "direct",
    corrupt_factor: float = 1.0,
) -> ExperimentResult:
    """Quadrature-vs-spectral battery with all operator acceptance gates.

    ``corrupt_factor`` scales the quadrature output and exists only so the
    negative-control path (a deliberately wrong kernel constant) can be seen
    to trip the symbol-match gate.
    """
    n_ladder = tuple(sorted(n_ladder))
    n_max = n_ladder[-1]
    rows = []
    gates = {"c_lambda_halfpoint": abs(c_lambda(0.5) * np.pi - 1.0) <= 1e-12}
    errors = {}
    defects = []

    for lam in lambdas:
        for n in n_ladder:
            grid = Grid(length=length, n_cells=n)
            params = FracParams(lam=lam, r=r)
            probe = Field(grid, np.sin(2.0 * np.pi * grid.x / length))
            quad = apply_quadrature(probe, params).values * corrupt_factor
            ref = apply_spectral(probe, lam).values
            rel = _rel_l2(quad, ref)
            errors[(lam, n)] = rel

            rng = np.random.default_rng((master_seed, int(round(lam * 1000)), n))
            v = lowpass(Field(grid, rng.normal(size=n)), n // 8)
            w = lowpass(Field(grid, rng.normal(size=n)), n // 8)
            lv = apply_quadrature(v, params).values
            lw = apply_quadrature(w, params).values
            ip_vw = grid.h * float(lv @ w.values)
            ip_wv = grid.h * float(v.values @ lw)
            defect = abs(ip_vw - ip_wv) / max(abs(ip_vw), abs(ip_wv), 1e-300)
            defects.append(defect)
            rows.append((lam, n, r, rel, defect, master_seed, cfg_hash))

        # The symbol gate is a roundoff-exactness statement: FFT noise in the
        # input leaks into high modes and is amplified by (n/2)^(2 lam), so
        # the probe grid stays small enough that amplified roundoff sits well
        # below the 1e-12 gate even at the battery's largest order.
        sym_grid = Grid(length=length, n_cells=min(128, n_max))
        for mode in (1, 3):
            wave = Field(
                sym_grid, np.cos(mode * 2.0 * np.pi * sym_grid.x / length + 0.3)
            )
            symbol = (2.0 * np.pi * mode / length) ** (2.0 * lam)
            rel = _rel_l2(apply_spectral(wave, lam).values, symbol * wave.values)
            gates.setdefault(f"symbol_lam{lam}", True)
            gates[f"symbol_lam{lam}"] &= rel <= 1e-12

        grid = Grid(length=length, n_cells=n_max)

        phi = Field(
            grid,
            np.sin(2.0 * 2.0 * np.pi * grid.x / length)
            + 0.3 * np.sin(5.0 * 2.0 * np.pi * grid.x / length),
        )
        back = riesz_inverse(apply_spectral(phi, lam), lam)
        gates[f"riesz_lam{lam}"] = _rel_l2(back.values, phi.values) <= 1e-11

    gates["selfadjointness_1e10"] = max(defects) <= 1e-10

    for lam in GATED_LAMBDAS:
        if lam not in lambdas:
            continue
        ladder = [errors[(lam, n)] for n in n_ladder]
        gates[f"quadrature_5pct_lam{lam}"] = ladder[-1] <= 0.05
        gates[f"quadrature_monotone_lam{lam}"] = all(
            ladder[i + 1] < ladder[i] for i in range(len(ladder) - 1)
        )

    if 0.5 in lambdas:
        grid = Grid(length=length, n_cells=n_max)
        probe = Field(grid, np.sin(2.0 * np.pi * grid.x / length))
        lo = apply_quadrature(probe, FracParams(lam=0.5, r=0.3)).values
        hi = apply_quadrature(probe, FracParams(lam=0.5, r=0.7)).values
        gates["split_independence"] = _rel_l2(lo, hi) <= 1e-2

    summary = {
        "n_ladder": list(n_ladder),
        "lambdas": list(lambdas),
        "r": r,
        "max_selfadjointness_defect": max(defects),
        "rel_l2_at_finest": {repr(lam): errors[(lam, n_max)] for lam in lambdas},
    }
    return ExperimentResult(summary=summary, gates=gates, outputs=[], rows=rows)


def run_operator_test(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    jobs: int = 1,
    seed_override: int | None = None,
) -> ExperimentResult:
    _expect_kind(cfg, "operator_test")
    exp = cfg.experiment
    seed = _master_seed(cfg, seed_override)
    chash = config_hash(cfg)
    corrupt = 1.2 if exp.get("corrupt_clambda") else 1.0
    result = operator_battery(
        lambdas=tuple(exp.get("lambdas", OPERATOR_LAMBDAS)),
        n_ladder=tuple(exp.get("n_ladder", (256, 512, 1024))),
        r=exp.get("split_r", cfg.scheme["split_r"]),
        length=cfg.grid["length"],
        master_seed=seed,
        cfg_hash=chash,
        corrupt_factor=corrupt,
    )
    out = Path(out_dir)
    csv_path = write_csv(out / "operator_test.csv", OPERATOR_HEADER, result.rows)
    json_path = write_json(
        out / "operator_summary.json",
        {
            "summary": result.summary,
            "gates": result.gates,
            "master_seed": seed,
            "config_hash": chash,
        },
    )
    result.outputs = [str(csv_path), str(json_path)]
    return result


# ---------------------------------------------------------------------------
# single-path simulation
# ---------------------------------------------------------------------------

DIAG_HEADER = (
    "t",
    "l1",
    "l2_sq",
    "tv",
    "hlam_sq",
    "mass",
    "master_seed",
    "config_hash",
)
RESIDUAL_HEADER = ("psi_id", "xi", "r", "residual", "master_seed", "config_hash")


def residual_battery(
    times,
    snapshots,
    flux,
    lam: float,
    xi_values,
    r_values,
    nonlocal_coeff: float,
) -> list:
    """Entropy residual for every test function in the battery."""
    rows = []
    grid = snapshots[0].grid
    for r in r_values:
        params = FracParams(lam=lam, r=r)
        for xi in xi_values:
            for psi in PSI_BATTERY:
                value = entropy_residual(
                    times,
                    snapshots,
                    psi,
                    xi,
                    params,
                    flux,
                    nonlocal_coeff=nonlocal_coeff,
                )
                rows.append((psi.psi_id, xi, r, value))
    return rows


def run_simulate(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    jobs: int = 1,
    seed_override: int | None = None,
) -> ExperimentResult:
    _expect_kind(cfg, "simulate")
    seed = _master_seed(cfg, seed_override)
    chash = config_hash(cfg)
    setup = build_setup(cfg)
    traj = setup.run(seed, 0)

    out = Path(out_dir)
    traj_dir = out / "trajectory"
    save_trajectory(traj, str(traj_dir), config_echo=cfg.as_dict(), seed=seed)

    diag = traj.diagnostics
    diag_rows = [
        (
            float(diag["t"][i]),
            float(diag["l1"][i]),
            float(diag["l2_sq"][i]),
            float(diag["tv"][i]),
            float(diag["hlam_sq"][i]),
            float(diag["mass"][i]),
            seed,
            chash,
        )
        for i in range(len(diag["t"]))
    ]
    csv_path = write_csv(out / "diagnostics.csv", DIAG_HEADER, diag_rows)

    res_rows = residual_battery(
        traj.snapshot_times,
        traj.snapshots,
        setup.flux,
        cfg.scheme["lam"],
        xi_values=(cfg.scheme["xi"],),
        r_values=(cfg.scheme["split_r"],),
        nonlocal_coeff=cfg.scheme["eps_nl"],
    )
    res_path = write_csv(
        out / "residuals.csv",
        RESIDUAL_HEADER,
        [row + (seed, chash) for row in res_rows],
    )

    final = traj.final
    summary = {
        "n_steps": len(diag["t"]) - 1,
        "n_snapshots": len(traj.snapshots),
        "final": {
            "t": float(diag["t"][-1]),
            "l1": l1_norm(final),
            "l2_sq": l2_norm_sq(final),
            "tv": float(diag["tv"][-1]),
            "mass": float(diag["mass"][-1]),
        },
        "mass_drift": float(diag["mass"][-1] - diag["mass"][0]),
        "min_residual": min((row[3] for row in res_rows), default=0.0),
        "master_seed": seed,
        "config_hash": chash,
    }
    json_path = write_json(out / "summary.json", summary)
    return ExperimentResult(
        summary=summary,
        gates={},
        outputs=[str(traj_dir), str(csv_path), str(res_path), str(json_path)],
    )


# ---------------------------------------------------------------------------
# convergence-rate studies
# ---------------------------------------------------------------------------

RATE_HEADER = (
    "experiment",
    "epsilon",
    "lambda",
    "n_cells",
    "dt",
    "n_samples",
    "t_final",
    "error_mean",
    "ci95",
    "seed",
    "config_hash",
)

VISC_DEFAULT_LADDER = tuple(2.0**-k for k in range(3, 8))
NONLOCAL_DEFAULT_LADDER = tuple(2.0**-k for k in range(4, 9))
NONLOCAL_SLOPE_GATES = {0.25: 0.8, 0.5: 0.7, 0.75: 0.52}


def _det_coupled_error(coarse: RunSetup, reference: RunSetup, master_seed: int) -> McEstimate:
    """Noise-free coupled error: a single run of each side settles it."""
    ratio = max(1, int(round(coarse.cfg.dt / reference.cfg.dt)))
    traj_c = coarse.run(master_seed, 0, substeps=ratio, stream=0)
    traj_r = reference.run(master_seed, 0, substeps=1, stream=0)
    fine = restrict_to_coarse(traj_r.final, coarse.grid)
    value = l1_norm(Field(coarse.grid, traj_c.final.values - fine.values))
    return McEstimate(mean=value, std_error=0.0, n_samples=1)


def _refined_setup(cfg: ExperimentConfig, refine: int, **scheme_overrides) -> RunSetup:
    """The reference side of a coupled pair: refine× grid and time step."""
    base = build_scheme(cfg, **scheme_overrides)
    if refine == 1:
        grid = build_grid(cfg)
        ref_cfg = base
    else:
        grid = Grid(length=cfg.grid["length"], n_cells=cfg.grid["n_cells"] * refine)
        ref_cfg = replace(
            base,
            dt=base.dt / refine,
            snapshot_stride=base.snapshot_stride * refine,
        )
    return RunSetup(
        cfg=ref_cfg,
        grid=grid,
        flux=build_flux(cfg),
        wiener=build_wiener(cfg),
        jumps=build_jumps(cfg),
        u0=build_initial(cfg, grid),
    )


def _rate_gates(prefix: str, fit, estimates, slope_gate: float) -> dict:
    """slope / r^2 / CI-slack monotonicity gates shared by both rate studies."""
    means = [est.mean for est in estimates]
    cis = [est.ci95_halfwidth for est in estimates]
    monotone = all(
        means[i + 1] <= means[i] + cis[i] + cis[i + 1] for i in range(len(means) - 1)
    )
    return {
        f"{prefix}_slope": fit.slope >= slope_gate,
        f"{prefix}_r2": fit.r_squared >= 0.9,
        f"{prefix}_monotone": monotone,
    }


def run_rate_visc(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    jobs: int = 1,
    seed_override: int | None = None,
    independent: bool = False,
) -> ExperimentResult:
    """Coupled vanishing-viscosity ladder against the zero-viscosity reference."""
    _expect_kind(cfg, "rate_visc")
    exp = cfg.experiment
    seed = _master_seed(cfg, seed_override)
    chash = config_hash(cfg)
    ladder = sorted(exp.get("epsilons", VISC_DEFAULT_LADDER), reverse=True)
    if len(ladder) < 4:
        raise ConfigError("experiment.epsilons: viscosity ladder needs >= 4 rungs")
    n_samples = exp.get("n_samples", 64)
    refine = exp.get("refine", 8)
    lam = cfg.scheme["lam"]
    n_cells = cfg.grid["n_cells"]
    t_final = cfg.scheme["t_final"]
    synthetic = exp.get("synthetic_rate")

    estimates = []
    if synthetic is not None:
        # plumbing-only mode: inject an exact known rate, no solving
        estimates = [
            McEstimate(mean=float(eps) ** synthetic, std_error=0.0, n_samples=n_samples)
            for eps in ladder
        ]
    else:
        reference = _refined_setup(cfg, refine, eps_visc=0.0)
        for eps in ladder:
            coarse = build_setup(cfg, eps_visc=float(eps))
            estimates.append(
                coupled_l1_error(
                    coarse,
                    reference,
                    t=t_final,
                    n_samples=n_samples,
                    master_seed=seed,
                    jobs=jobs,
                    independent=independent,
                )
            )

    rows = [
        (
            "rate_visc",
            float(eps),
            lam,
            n_cells,
            cfg.scheme["dt"],
            est.n_samples,
            t_final,
            est.mean,
            est.ci95_halfwidth,
            seed,
            chash,
        )
        for eps, est in zip(ladder, estimates)
    ]
    fit = fit_rate(list(zip(ladder, [est.mean for est in estimates])))
    gates = _rate_gates("rate_visc", fit, estimates, slope_gate=0.35)

    out = Path(out_dir)
    csv_path = write_csv(out / "rate_visc.csv", RATE_HEADER, rows)
    summary = {
        "experiment": "rate_visc",
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "points": [
            {
                "epsilon": float(eps),
                "error_mean": est.mean,
                "ci95": est.ci95_halfwidth,
                "n_samples": est.n_samples,
            }
            for eps, est in zip(ladder, estimates)
        ],
        "gates": gates,
        "master_seed": seed,
        "config_hash": chash,
        "synthetic_rate": synthetic,
    }
    json_path = write_json(out / "rate_visc_fit.json", summary)
    return ExperimentResult(
        summary=summary, gates=gates, outputs=[str(csv_path), str(json_path)]
    )


def run_rate_nonlocal(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    jobs: int = 1,
    seed_override: int | None = None,
    independent: bool = False,
) -> ExperimentResult:
    """Vanishing nonlocal-regularization ladders across the order regimes."""
    _expect_kind(cfg, "rate_nonlocal")
    exp = cfg.experiment
    seed = _master_seed(cfg, seed_override)
    chash = config_hash(cfg)
    ladder = sorted(exp.get("epsilons", NONLOCAL_DEFAULT_LADDER), reverse=True)
    if len(ladder) < 4:
        raise ConfigError("experiment.epsilons: nonlocal ladder needs >= 4 rungs")
    lambdas = list(exp.get("lambdas", sorted(NONLOCAL_SLOPE_GATES)))
    n_samples = exp.get("n_samples", 32)
    refine = exp.get("refine", 1)
    n_cells = cfg.grid["n_cells"]
    t_final = cfg.scheme["t_final"]

    has_noise = cfg.noise["wiener"] != "off" or cfg.noise["jumps"] != "off"
    variants = ["det"] + (["noisy"] if has_noise else [])

    rows = []
    fits = {}
    gates = {}
    for variant in variants:
        noisy = variant == "noisy"
        for lam in lambdas:
            reference = _refined_setup(cfg, refine, lam=lam, eps_nl=0.0, eps_visc=0.0)
            if not noisy:
                reference = replace(reference, wiener=None, jumps=None)
            estimates = []
            for eps in ladder:
                coarse = build_setup(cfg, lam=lam, eps_nl=float(eps), eps_visc=0.0)
                if not noisy:
                    coarse = replace(coarse, wiener=None, jumps=None)
                    est = _det_coupled_error(coarse, reference, seed)
                else:
                    est = coupled_l1_error(
                        coarse,
                        reference,
                        t=t_final,
                        n_samples=n_samples,
                        master_seed=seed,
                        jobs=jobs,
                        independent=independent,
                    )
                estimates.append(est)
                rows.append(
                    (
                        f"rate_nonlocal_{variant}",
                        float(eps),
                        lam,
                        n_cells,
                        cfg.scheme["dt"],
                        est.n_samples,
                        t_final,
                        est.mean,
                        est.ci95_halfwidth,
                        seed,
                        chash,
                    )
                )
            fit = fit_rate(list(zip(ladder, [est.mean for est in estimates])))
            slope_gate = NONLOCAL_SLOPE_GATES.get(lam)
            key = f"rate_nonlocal_{variant}_lam{lam}"
            if slope_gate is not None:
                gates.update(_rate_gates(key, fit, estimates, slope_gate))
            fits[key] = {
                "slope": fit.slope,
                "intercept": fit.intercept,
                "r_squared": fit.r_squared,
                "points": [
                    {
                        "epsilon": float(eps),
                        "error_mean": est.mean,
                        "ci95": est.ci95_halfwidth,
                        "n_samples": est.n_samples,
                    }
                    for eps, est in zip(ladder, estimates)
                ],
            }

    out = Path(out_dir)
    csv_path = write_csv(out / "rate_nonlocal.csv", RATE_HEADER, rows)
    summary = {
        "experiment": "rate_nonlocal",
        "fits": fits,
        "gates": gates,
        "master_seed": seed,
        "config_hash": chash,
    }
    json_path = write_json(out / "rate_nonlocal_fits.json", summary)
    return ExperimentResult(
        summary=summary, gates=gates, outputs=[str(csv_path), str(json_path)]
    )


# ---------------------------------------------------------------------------
# continuous dependence on the data
# ---------------------------------------------------------------------------

CONTDEP_FAMILIES = ("sigma", "flux", "kappa")


@dataclass(frozen=True)
class _PairSample:
    """Picklable sample functional: L1 gap between two coupled runs.

    Both runs consume the identical noise path (same seed, stream, and
    substep lattice), so the gap isolates the structural perturbation.
    """

    base: RunSetup
    pert: RunSetup
    snap_index: int

    def __call__(self, master_seed: int, index: int) -> float:
        traj_a = self.base.run(master_seed, index)
        traj_b = self.pert.run(master_seed, index)
        grid = self.base.grid
        diff = (
            traj_a.snapshots[self.snap_index].values
            - traj_b.snapshots[self.snap_index].values
        )
        return l1_norm(Field(grid, diff))


def _perturbed_setup(cfg: ExperimentConfig, family: str, delta: float) -> RunSetup:
    """Build the perturbed twin for one continuous-dependence family."""
    if family == "sigma":
        setup = build_setup(cfg)
        wiener = setup.wiener
        if wiener is None:
            raise ConfigError(
                "noise.wiener: sigma-scaling family needs Wiener noise enabled"
            )
        scaled = WienerSpec(
            n_modes=wiener.n_modes,
            sigma0=wiener.sigma0 * (1.0 + delta),
            kind=wiener.kind,
        )
        return replace(setup, wiener=scaled)
    if family == "flux":
        setup = build_setup(cfg)
        base_flux = setup.flux
        shifted = list(base_flux.poly) + [0.0] * max(0, 2 - len(base_flux.poly))
        shifted[1] += delta
        flux = polynomial_flux(shifted, state_interval=base_flux.state_interval)
        return replace(setup, flux=flux)
    if family == "kappa":
        return build_setup(cfg, lam=cfg.scheme["lam"] + delta)
    raise ConfigError(f"experiment.family: unknown family '{family}'")


CONTDEP_HEADER = (
    "experiment",
    "epsilon",
    "lambda",
    "n_cells",
    "dt",
    "n_samples",
    "t_final",
    "error_mean",
    "ci95",
    "seed",
    "config_hash",
)


def run_contdep(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    jobs: int = 1,
    seed_override: int | None = None,
    independent: bool = False,
) -> ExperimentResult:
    """Distance-vs-perturbation study for the three data families."""
    _expect_kind(cfg, "contdep")
    exp = cfg.experiment
    seed = _master_seed(cfg, seed_override)
    chash = config_hash(cfg)
    deltas = list(exp.get("deltas", (0.05, 0.1, 0.2)))
    n_samples = exp.get("n_samples", 32)
    families = [exp["family"]] if "family" in exp else list(CONTDEP_FAMILIES)
    lam = cfg.scheme["lam"]
    n_cells = cfg.grid["n_cells"]
    t_final = cfg.scheme["t_final"]

    base = build_setup(cfg)
    n_steps = base.cfg.n_steps
    if base.cfg.snapshot_stride != 1:
        base = replace(base, cfg=replace(base.cfg, snapshot_stride=1))
    quarter_indices = sorted({max(1, (n_steps * k) // 4) for k in (1, 2, 3, 4)})

    rows = []
    gates = {}
    report = {}
    for family in families:
        snap_indices = quarter_indices if family == "flux" else [n_steps]
        dist = {}
        ci = {}
        for delta in deltas:
            pert = _perturbed_setup(cfg, family, delta)
            pert = replace(pert, cfg=replace(pert.cfg, snapshot_stride=1))
            for idx in snap_indices:
                sampler = _PairSample(base=base, pert=pert, snap_index=idx)
                est = mc_expect(sampler, n_samples=n_samples, master_seed=seed, jobs=jobs)
                t_k = idx * cfg.scheme["dt"]
                dist[(delta, idx)] = est.mean
                ci[(delta, idx)] = est.ci95_halfwidth
                rows.append(
                    (
                        f"contdep_{family}",
                        float(delta),
                        lam,
                        n_cells,
                        cfg.scheme["dt"],
                        est.n_samples,
                        t_k,
                        est.mean,
                        est.ci95_halfwidth,
                        seed,
                        chash,
                    )
                )

        if family == "sigma":
            finals = [dist[(d, n_steps)] for d in deltas]
            slope, intercept, r2 = _linear_fit_r2(deltas, finals)
            wiener = base.wiener
            ingredients = {
                repr(float(d)): noise_gap_sigma(
                    wiener,
                    WienerSpec(wiener.n_modes, wiener.sigma0 * (1.0 + d), wiener.kind),
                )
                * np.sqrt(t_final)
                for d in deltas
            }
            gates["contdep_sigma_r2"] = r2 >= 0.9
            report["sigma"] = {
                "slope": slope,
                "intercept": intercept,
                "r_squared": r2,
                "noise_gap_sigma_sqrt_t": ingredients,
            }
        elif family == "flux":
            in_t = all(
                dist[(d, snap_indices[i + 1])]
                >= dist[(d, snap_indices[i])]
                - ci[(d, snap_indices[i])]
                - ci[(d, snap_indices[i + 1])]
                for d in deltas
                for i in range(len(snap_indices) - 1)
            )
            in_delta = all(
                dist[(deltas[j + 1], idx)]
                >= dist[(deltas[j], idx)] - ci[(deltas[j], idx)] - ci[(deltas[j + 1], idx)]
                for idx in snap_indices
                for j in range(len(deltas) - 1)
            )
            gates["contdep_flux_monotone_t"] = in_t
            gates["contdep_flux_monotone_delta"] = in_delta
            report["flux"] = {
                "bound_term_t_sup_df_gap": {
                    repr(float(d)): {
                        repr(idx * cfg.scheme["dt"]): d * idx * cfg.scheme["dt"]
                        for idx in snap_indices
                    }
                    for d in deltas
                },
            }
        elif family == "kappa":
            report["kappa"] = {
                repr(float(d)): dict(
                    zip(
                        ("measure_gap_inner", "measure_gap_outer"),
                        measure_gap(lam, lam + d, base.cfg.split_r),
                    )
                )
                for d in deltas
            }

    out = Path(out_dir)
    csv_path = write_csv(out / "contdep.csv", CONTDEP_HEADER, rows)
    summary = {
        "experiment": "contdep",
        "families": report,
        "gates": gates,
        "master_seed": seed,
        "config_hash": chash,
    }
    json_path = write_json(out / "contdep_summary.json", summary)
    return ExperimentResult(
        summary=summary, gates=gates, outputs=[str(csv_path), str(json_path)]
    )
