"""YAML configuration loading, builders, and the command-line drivers."""

import copy
import json

import numpy as np
import pytest
import yaml

from fracshock.cli import main
from fracshock.config import (
    ConfigError,
    build_flux,
    build_grid,
    build_initial,
    build_jumps,
    build_scheme,
    build_wiener,
    config_hash,
    dump_config,
    load_config,
    parse_config,
)
from fracshock.noise import JumpSpec, WienerSpec
from fracshock.solver import load_trajectory

BASE = {
    "grid": {"length": 6.283185307179586, "n_cells": 128},
    "scheme": {
        "lam": 0.5,
        "eps_visc": 0.01,
        "eps_nl": 0.0,
        "dt": 0.02,
        "t_final": 0.4,
    },
    "flux": {"kind": "burgers", "state_interval": [-1.5, 1.5]},
    "initial": {"kind": "sinusoid", "amplitude": 1.0, "mode": 1, "offset": 0.0},
    "noise": {
        "wiener": {"n_modes": 4, "sigma0": 0.1, "kind": "linear"},
        "jumps": {
            "lam_star": 0.3,
            "alpha": 0.8,
            "c_mu": 0.2,
            "delta_jump": 0.05,
            "z_max": 2.0,
        },
    },
    "experiment": {"kind": "simulate", "master_seed": 42, "out_dir": "results"},
}


def make_raw(**patches):
    raw = copy.deepcopy(BASE)
    for dotted, value in patches.items():
        keys = dotted.split("__")
        node = raw
        for k in keys[:-1]:
            node = node[k]
        if value is ...:
            del node[keys[-1]]
        else:
            node[keys[-1]] = value
    return raw


def write_config(tmp_path, raw, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


class TestConfigParsing:
    def test_round_trip_is_identity(self, tmp_path):
        cfg = parse_config(make_raw())
        text = dump_config(cfg, tmp_path / "echo.yaml")
        again = load_config(tmp_path / "echo.yaml")
        assert again.as_dict() == cfg.as_dict()
        assert config_hash(again) == config_hash(cfg)
        assert yaml.safe_load(text) == cfg.as_dict()

    def test_round_trip_with_atoms_and_off_noise(self, tmp_path):
        raw = make_raw(
            noise__wiener="off",
            noise__jumps={"lam_star": 0.2, "atoms": [[1.0, 2.0], [-0.5, 1.0]]},
        )
        cfg = parse_config(raw)
        dump_config(cfg, tmp_path / "echo.yaml")
        again = load_config(tmp_path / "echo.yaml")
        assert again.as_dict() == cfg.as_dict()
        assert build_wiener(cfg) is None
        assert isinstance(build_jumps(cfg), JumpSpec)

    def test_missing_noise_block_means_off(self):
        raw = make_raw()
        del raw["noise"]
        cfg = parse_config(raw)
        assert cfg.noise == {"wiener": "off", "jumps": "off"}
        assert build_wiener(cfg) is None
        assert build_jumps(cfg) is None

    def test_scheme_defaults_filled(self):
        cfg = parse_config(make_raw())
        assert cfg.scheme["scheme"] == "imex"
        assert cfg.scheme["snapshot_stride"] == 1
        assert cfg.scheme["xi"] == 0.05
        assert cfg.scheme["split_r"] == 0.5

    def test_hash_tracks_content(self):
        a = parse_config(make_raw())
        b = parse_config(make_raw(experiment__master_seed=43))
        c = parse_config(make_raw())
        assert config_hash(a) != config_hash(b)
        assert config_hash(a) == config_hash(c)
        assert len(config_hash(a)) == 16

    @pytest.mark.parametrize(
        "patches,needle",
        [
            ({"grid__n_cells": ...}, "grid.n_cells"),
            ({"grid__n_cells": 100}, "grid.n_cells"),
            ({"scheme__lam": 1.5}, "scheme.lam"),
            ({"scheme__dt": -0.1}, "scheme.dt"),
            ({"flux__kind": "cubic"}, "flux.kind"),
            ({"flux__state_interval": [2.0, 1.0]}, "flux.state_interval"),
            ({"initial__kind": "spike"}, "initial.kind"),
            ({"noise__wiener__sigma0": -1.0}, "noise.wiener.sigma0"),
            ({"noise__jumps__alpha": 2.5}, "noise.jumps.alpha"),
            ({"experiment__kind": "benchmark"}, "experiment.kind"),
            ({"experiment__master_seed": ...}, "experiment.master_seed"),
            ({"experiment__master_seed": -3}, "experiment.master_seed"),
            ({"experiment__bogus_knob": 1}, "experiment.bogus_knob"),
        ],
    )
    def test_errors_name_the_field(self, patches, needle):
        with pytest.raises(ConfigError, match=needle.replace(".", r"\.")):
            parse_config(make_raw(**patches))

    def test_unknown_top_level_block(self):
        raw = make_raw()
        raw["solver"] = {}
        with pytest.raises(ConfigError, match="solver"):
            parse_config(raw)

    def test_jumps_need_exactly_one_measure(self):
        raw = make_raw()
        raw["noise"]["jumps"]["atoms"] = [[1.0, 1.0]]
        with pytest.raises(ConfigError, match="noise.jumps"):
            parse_config(raw)

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")

    def test_invalid_yaml_is_config_error(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("grid: [unclosed\n")
        with pytest.raises(ConfigError, match="invalid YAML"):
            load_config(path)


class TestBuilders:
    def test_grid_and_scheme(self):
        cfg = parse_config(make_raw())
        grid = build_grid(cfg)
        assert grid.n_cells == 128
        assert np.isclose(grid.length, 2.0 * np.pi)
        scheme = build_scheme(cfg, dt=0.01, t_final=0.1)
        assert scheme.dt == 0.01
        assert scheme.lam == 0.5

    def test_flux_kinds(self):
        burgers = build_flux(parse_config(make_raw()))
        assert np.isclose(burgers.lipschitz, 1.5)  # sup |u| over [-1.5, 1.5]
        lin = build_flux(parse_config(make_raw(flux__kind="linear", flux__speed=-2.0)))
        assert lin.df(0.7) == -2.0
        poly = build_flux(
            parse_config(
                make_raw(flux__kind="polynomial", flux__coefficients=[0.0, 1.0, -1.0])
            )
        )
        assert poly.f(2.0) == -2.0

    def test_noise_specs(self):
        cfg = parse_config(make_raw())
        wiener = build_wiener(cfg)
        assert isinstance(wiener, WienerSpec)
        assert wiener.n_modes == 4
        jumps = build_jumps(cfg)
        assert isinstance(jumps, JumpSpec)
        assert np.isclose(jumps.intensity, 5.20562812778133)

    def test_initial_kinds(self):
        grid = build_grid(parse_config(make_raw()))
        zero = build_initial(parse_config(make_raw(initial={"kind": "zero"})), grid)
        assert np.all(zero.values == 0.0)
        rie = build_initial(
            parse_config(make_raw(initial={"kind": "riemann", "left": 1.0, "right": 0.0})),
            grid,
        )
        assert rie.values[0] == 1.0 and rie.values[-1] == 0.0
        bump = build_initial(
            parse_config(
                make_raw(initial={"kind": "bump", "amplitude": 0.8, "center": 0.5, "width": 0.2})
            ),
            grid,
        )
        assert np.max(bump.values) > 0.7
        assert np.min(bump.values) == 0.0
        sine = build_initial(
            parse_config(make_raw(initial={"kind": "sinusoid", "offset": 0.3})), grid
        )
        assert np.isclose(np.mean(sine.values), 0.3)


class TestCliSimulate:
    def test_zero_state_run_and_outputs(self, tmp_path, capsys):
        raw = make_raw(initial={"kind": "zero"})
        cfg_path = write_config(tmp_path, raw)
        out = tmp_path / "out"
        code = main(["simulate", "--config", cfg_path, "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr()
        assert "wrote" in captured.out
        assert (out / "diagnostics.csv").exists()
        assert (out / "residuals.csv").exists()
        assert (out / "summary.json").exists()
        traj = load_trajectory(str(out / "trajectory"))
        for snap in traj.snapshots:
            assert np.all(snap.values == 0.0)

    def test_deterministic_burgers_is_tvd(self, tmp_path, capsys):
        raw = make_raw(noise="off")
        cfg_path = write_config(tmp_path, raw)
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg_path, "--out", str(out)]) == 0
        capsys.readouterr()
        table = np.genfromtxt(out / "diagnostics.csv", delimiter=",", names=True)
        assert np.all(np.diff(table["tv"]) <= 1e-12)
        assert np.all(table["master_seed"] == 42)

    def test_seed_override_lands_in_outputs(self, tmp_path, capsys):
        raw = make_raw(initial={"kind": "zero"})
        cfg_path = write_config(tmp_path, raw)
        out = tmp_path / "out"
        code = main(["simulate", "--config", cfg_path, "--out", str(out), "--seed", "777"])
        assert code == 0
        capsys.readouterr()
        table = np.genfromtxt(out / "diagnostics.csv", delimiter=",", names=True)
        assert np.all(table["master_seed"] == 777)

    def test_missing_field_exits_two(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, make_raw(experiment__master_seed=...))
        code = main(["simulate", "--config", cfg_path])
        assert code == 2
        assert "experiment.master_seed" in capsys.readouterr().err

    def test_absent_config_file_exits_two(self, tmp_path, capsys):
        code = main(["simulate", "--config", str(tmp_path / "nope.yaml")])
        assert code == 2
        assert "cannot read" in capsys.readouterr().err

    def test_cfl_violation_exits_three(self, tmp_path, capsys):
        raw = make_raw(scheme__dt=0.5, scheme__t_final=1.0, noise="off")
        cfg_path = write_config(tmp_path, raw)
        code = main(["simulate", "--config", cfg_path, "--out", str(tmp_path / "o")])
        assert code == 3
        assert "solver error" in capsys.readouterr().err

    def test_kind_mismatch_exits_two(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, make_raw())  # kind: simulate
        code = main(["rate-visc", "--config", cfg_path, "--out", str(tmp_path / "o")])
        assert code == 2
        capsys.readouterr()

    def test_bad_jobs_exits_two(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path, make_raw(initial={"kind": "zero"}))
        code = main(["simulate", "--config", cfg_path, "--jobs", "0"])
        assert code == 2
        capsys.readouterr()


class TestCliOperator:
    def _config(self, tmp_path, **extra):
        raw = make_raw(
            experiment={
                "kind": "operator_test",
                "master_seed": 7,
                "lambdas": [0.5],
                "n_ladder": [64, 128],
                **extra,
            }
        )
        return write_config(tmp_path, raw)

    def test_clean_battery_passes(self, tmp_path, capsys):
        cfg_path = self._config(tmp_path)
        out = tmp_path / "op"
        assert main(["operator-test", "--config", cfg_path, "--out", str(out)]) == 0
        captured = capsys.readouterr()
        assert "gate c_lambda_halfpoint: pass" in captured.out
        assert (out / "operator_test.csv").exists()

    def test_corrupted_constant_fails_gate(self, tmp_path, capsys):
        cfg_path = self._config(tmp_path, corrupt_clambda=True)
        out = tmp_path / "op"
        code = main(["operator-test", "--config", cfg_path, "--out", str(out)])
        assert code == 1
        assert "FAILED gates" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        cfg_path = self._config(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["operator-test", "--config", cfg_path, "--out", str(out_a)]) == 0
        assert main(["operator-test", "--config", cfg_path, "--out", str(out_b)]) == 0
        capsys.readouterr()
        csv_a = (out_a / "operator_test.csv").read_bytes()
        csv_b = (out_b / "operator_test.csv").read_bytes()
        assert csv_a == csv_b


class TestCliSyntheticRate:
    def test_planted_rate_recovered_exactly(self, tmp_path, capsys):
        raw = make_raw(
            experiment={
                "kind": "rate_visc",
                "master_seed": 11,
                "synthetic_rate": 0.5,
            }
        )
        cfg_path = write_config(tmp_path, raw)
        out = tmp_path / "rv"
        assert main(["rate-visc", "--config", cfg_path, "--out", str(out)]) == 0
        capsys.readouterr()
        fit = json.loads((out / "rate_visc_fit.json").read_text())
        assert abs(fit["slope"] - 0.5) < 1e-6
        assert fit["r_squared"] > 1.0 - 1e-9

    def test_short_ladder_rejected(self, tmp_path, capsys):
        raw = make_raw(
            experiment={
                "kind": "rate_visc",
                "master_seed": 11,
                "synthetic_rate": 0.5,
                "epsilons": [0.125, 0.0625, 0.03125],
            }
        )
        cfg_path = write_config(tmp_path, raw)
        code = main(["rate-visc", "--config", cfg_path, "--out", str(tmp_path / "o")])
        assert code == 2
        assert "epsilons" in capsys.readouterr().err
