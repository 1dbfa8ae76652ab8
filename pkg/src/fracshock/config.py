"""Experiment configuration: YAML files -> validated objects -> solver inputs.

A configuration file has five blocks::

    grid:       length, n_cells
    scheme:     lam, eps_visc, eps_nl, dt, t_final, scheme, ...
    flux:       kind (burgers | linear | polynomial), state_interval, ...
    initial:    kind (sinusoid | bump | riemann | zero), parameters
    noise:      wiener: {...} | "off",  jumps: {...} | "off"
    experiment: kind, master_seed, out_dir, and per-experiment knobs

``load_config`` validates every field and raises :class:`ConfigError` whose
message starts with the dotted path of the offending field, so callers can
surface precise diagnostics.  ``dump_config`` emits canonical YAML; a dumped
config parses back to an identical object.  ``config_hash`` is a short stable
digest of the canonical form, stamped into every output row so results can be
traced back to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .fluxes import Flux, burgers_flux, linear_flux, polynomial_flux
from .grid import Field, Grid
from .noise import JumpSpec, WienerSpec, discrete_jumps, stable_jumps
from .solver import SchemeConfig, make_bump, make_riemann, make_sinusoid


class ConfigError(ValueError):
    """A configuration file is malformed; the message names the field path."""


# ---------------------------------------------------------------------------
# schema helpers
# ---------------------------------------------------------------------------


def _require(block: dict, path: str, key: str):
    if key not in block:
        raise ConfigError(f"{path}.{key}: missing required field")
    return block[key]


def _as_float(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return int(value)


def _as_str(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    return value


def _as_block(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {value!r}")
    return value


def _check_keys(block: dict, path: str, allowed: set[str]) -> None:
    for key in block:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field")


def _noise_off(value) -> bool:
    return value is None or value == "off" or value is False


# ---------------------------------------------------------------------------
# block normalizers: fill defaults, validate types and ranges
# ---------------------------------------------------------------------------


def _norm_grid(raw: dict) -> dict:
    _check_keys(raw, "grid", {"length", "n_cells"})
    length = _as_float(_require(raw, "grid", "length"), "grid.length")
    n_cells = _as_int(_require(raw, "grid", "n_cells"), "grid.n_cells")
    if length <= 0:
        raise ConfigError("grid.length: must be positive")
    if n_cells < 2 or n_cells & (n_cells - 1):
        raise ConfigError("grid.n_cells: must be a power of two >= 2")
    return {"length": length, "n_cells": n_cells}


_SCHEME_DEFAULTS = {
    "scheme": "imex",
    "picard_tol": 1e-10,
    "picard_max_iters": 50,
    "snapshot_stride": 1,
    "split_r": 0.5,
    "xi": 0.05,
}


def _norm_scheme(raw: dict) -> dict:
    allowed = {"lam", "eps_visc", "eps_nl", "dt", "t_final"} | set(_SCHEME_DEFAULTS)
    _check_keys(raw, "scheme", allowed)
    out = {}
    out["lam"] = _as_float(_require(raw, "scheme", "lam"), "scheme.lam")
    if not 0.0 < out["lam"] < 1.0:
        raise ConfigError("scheme.lam: must lie in (0, 1)")
    for key in ("eps_visc", "eps_nl"):
        out[key] = _as_float(_require(raw, "scheme", key), f"scheme.{key}")
        if out[key] < 0:
            raise ConfigError(f"scheme.{key}: must be nonnegative")
    out["dt"] = _as_float(_require(raw, "scheme", "dt"), "scheme.dt")
    if out["dt"] <= 0:
        raise ConfigError("scheme.dt: must be positive")
    out["t_final"] = _as_float(_require(raw, "scheme", "t_final"), "scheme.t_final")
    if out["t_final"] < 0:
        raise ConfigError("scheme.t_final: must be nonnegative")
    for key, default in _SCHEME_DEFAULTS.items():
        value = raw.get(key, default)
        if key == "scheme":
            value = _as_str(value, "scheme.scheme")
            if value not in ("imex", "semi_implicit_picard"):
                raise ConfigError(
                    "scheme.scheme: must be 'imex' or 'semi_implicit_picard'"
                )
        elif key in ("picard_max_iters", "snapshot_stride"):
            value = _as_int(value, f"scheme.{key}")
            if value < 1:
                raise ConfigError(f"scheme.{key}: must be >= 1")
        else:
            value = _as_float(value, f"scheme.{key}")
            if value <= 0:
                raise ConfigError(f"scheme.{key}: must be positive")
        out[key] = value
    return out


def _norm_flux(raw: dict) -> dict:
    _check_keys(raw, "flux", {"kind", "state_interval", "speed", "coefficients"})
    kind = _as_str(_require(raw, "flux", "kind"), "flux.kind")
    if kind not in ("burgers", "linear", "polynomial"):
        raise ConfigError("flux.kind: must be burgers, linear, or polynomial")
    interval = raw.get("state_interval", [-1.5, 1.5])
    if (
        not isinstance(interval, (list, tuple))
        or len(interval) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in interval)
    ):
        raise ConfigError("flux.state_interval: expected [lo, hi]")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ConfigError("flux.state_interval: lo must be < hi")
    out = {"kind": kind, "state_interval": [lo, hi]}
    if kind == "linear":
        out["speed"] = _as_float(_require(raw, "flux", "speed"), "flux.speed")
    elif kind == "polynomial":
        coeffs = _require(raw, "flux", "coefficients")
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError("flux.coefficients: expected a nonempty list")
        out["coefficients"] = [
            _as_float(c, f"flux.coefficients[{i}]") for i, c in enumerate(coeffs)
        ]
        if out["coefficients"][0] != 0.0:
            raise ConfigError("flux.coefficients[0]: constant term must be 0")
    return out


def _norm_initial(raw: dict) -> dict:
    _check_keys(
        raw,
        "initial",
        {"kind", "amplitude", "mode", "offset", "center", "width", "left", "right"},
    )
    kind = _as_str(_require(raw, "initial", "kind"), "initial.kind")
    if kind not in ("sinusoid", "bump", "riemann", "zero"):
        raise ConfigError("initial.kind: must be sinusoid, bump, riemann, or zero")
    out = {"kind": kind}
    if kind == "sinusoid":
        out["amplitude"] = _as_float(raw.get("amplitude", 0.5), "initial.amplitude")
        out["mode"] = _as_int(raw.get("mode", 1), "initial.mode")
        out["offset"] = _as_float(raw.get("offset", 0.0), "initial.offset")
    elif kind == "bump":
        out["amplitude"] = _as_float(raw.get("amplitude", 1.0), "initial.amplitude")
        out["center"] = _as_float(raw.get("center", 0.5), "initial.center")
        out["width"] = _as_float(raw.get("width", 0.2), "initial.width")
        if not 0 < out["width"] <= 0.5:
            raise ConfigError("initial.width: must lie in (0, 0.5]")
    elif kind == "riemann":
        out["left"] = _as_float(raw.get("left", 1.0), "initial.left")
        out["right"] = _as_float(raw.get("right", 0.0), "initial.right")
    return out


def _norm_wiener(raw) -> dict | str:
    if _noise_off(raw):
        return "off"
    raw = _as_block(raw, "noise.wiener")
    _check_keys(raw, "noise.wiener", {"n_modes", "sigma0", "kind"})
    n_modes = _as_int(_require(raw, "noise.wiener", "n_modes"), "noise.wiener.n_modes")
    if n_modes < 1:
        raise ConfigError("noise.wiener.n_modes: must be >= 1")
    sigma0 = _as_float(_require(raw, "noise.wiener", "sigma0"), "noise.wiener.sigma0")
    if sigma0 < 0:
        raise ConfigError("noise.wiener.sigma0: must be nonnegative")
    kind = _as_str(raw.get("kind", "linear"), "noise.wiener.kind")
    if kind not in ("linear", "tanh"):
        raise ConfigError("noise.wiener.kind: must be 'linear' or 'tanh'")
    return {"n_modes": n_modes, "sigma0": sigma0, "kind": kind}


def _norm_jumps(raw) -> dict | str:
    if _noise_off(raw):
        return "off"
    raw = _as_block(raw, "noise.jumps")
    _check_keys(
        raw,
        "noise.jumps",
        {"lam_star", "delta_jump", "alpha", "c_mu", "z_max", "atoms"},
    )
    lam_star = _as_float(_require(raw, "noise.jumps", "lam_star"), "noise.jumps.lam_star")
    if not 0.0 < lam_star < 1.0:
        raise ConfigError("noise.jumps.lam_star: must lie in (0, 1)")
    delta_jump = _as_float(
        raw.get("delta_jump", 0.05), "noise.jumps.delta_jump"
    )
    if delta_jump <= 0:
        raise ConfigError("noise.jumps.delta_jump: must be positive")
    out = {"lam_star": lam_star, "delta_jump": delta_jump}
    has_stable = "alpha" in raw or "c_mu" in raw or "z_max" in raw
    has_atoms = "atoms" in raw
    if has_stable == has_atoms:
        raise ConfigError(
            "noise.jumps: provide either (alpha, c_mu, z_max) or atoms, not both"
        )
    if has_stable:
        out["alpha"] = _as_float(_require(raw, "noise.jumps", "alpha"), "noise.jumps.alpha")
        if not 0.0 < out["alpha"] < 2.0:
            raise ConfigError("noise.jumps.alpha: must lie in (0, 2)")
        out["c_mu"] = _as_float(_require(raw, "noise.jumps", "c_mu"), "noise.jumps.c_mu")
        if out["c_mu"] < 0:
            raise ConfigError("noise.jumps.c_mu: must be nonnegative")
        out["z_max"] = _as_float(_require(raw, "noise.jumps", "z_max"), "noise.jumps.z_max")
        if out["z_max"] <= delta_jump:
            raise ConfigError("noise.jumps.z_max: must exceed delta_jump")
    else:
        atoms = raw["atoms"]
        if not isinstance(atoms, list) or not atoms:
            raise ConfigError("noise.jumps.atoms: expected a nonempty list")
        norm_atoms = []
        for i, atom in enumerate(atoms):
            if not isinstance(atom, (list, tuple)) or len(atom) != 2:
                raise ConfigError(f"noise.jumps.atoms[{i}]: expected [location, weight]")
            z = _as_float(atom[0], f"noise.jumps.atoms[{i}][0]")
            w = _as_float(atom[1], f"noise.jumps.atoms[{i}][1]")
            if z == 0:
                raise ConfigError(f"noise.jumps.atoms[{i}][0]: location must be nonzero")
            if w < 0:
                raise ConfigError(f"noise.jumps.atoms[{i}][1]: weight must be nonnegative")
            norm_atoms.append([z, w])
        out["atoms"] = norm_atoms
    return out


def _norm_noise(raw) -> dict:
    if _noise_off(raw):
        return {"wiener": "off", "jumps": "off"}
    raw = _as_block(raw, "noise")
    _check_keys(raw, "noise", {"wiener", "jumps"})
    return {
        "wiener": _norm_wiener(raw.get("wiener")),
        "jumps": _norm_jumps(raw.get("jumps")),
    }


_EXPERIMENT_KINDS = ("simulate", "rate_visc", "rate_nonlocal", "contdep", "operator_test")

_EXPERIMENT_OPTIONAL = {
    "epsilons": list,
    "lambdas": list,
    "deltas": list,
    "n_samples": int,
    "refine": int,
    "t_eval": float,
    "n_ladder": list,
    "split_r": float,
    "synthetic_rate": float,
    "corrupt_clambda": bool,
    "family": str,
}


def _norm_experiment(raw: dict) -> dict:
    allowed = {"kind", "master_seed", "out_dir"} | set(_EXPERIMENT_OPTIONAL)
    _check_keys(raw, "experiment", allowed)
    kind = _as_str(_require(raw, "experiment", "kind"), "experiment.kind")
    if kind not in _EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment.kind: must be one of {', '.join(_EXPERIMENT_KINDS)}"
        )
    master_seed = _as_int(
        _require(raw, "experiment", "master_seed"), "experiment.master_seed"
    )
    if master_seed < 0:
        raise ConfigError("experiment.master_seed: must be nonnegative")
    out = {
        "kind": kind,
        "master_seed": master_seed,
        "out_dir": _as_str(raw.get("out_dir", "results"), "experiment.out_dir"),
    }
    for key, typ in _EXPERIMENT_OPTIONAL.items():
        if key not in raw:
            continue
        value = raw[key]
        path = f"experiment.{key}"
        if typ is int:
            value = _as_int(value, path)
        elif typ is float:
            value = _as_float(value, path)
        elif typ is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{path}: expected true or false")
        elif typ is str:
            value = _as_str(value, path)
        elif typ is list:
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}: expected a nonempty list")
            if key == "n_ladder":
                value = [_as_int(v, f"{path}[{i}]") for i, v in enumerate(value)]
            else:
                value = [_as_float(v, f"{path}[{i}]") for i, v in enumerate(value)]
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# the configuration object
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated configuration, one attribute per file block."""

    grid: dict = field(default_factory=dict)
    scheme: dict = field(default_factory=dict)
    flux: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "grid": self.grid,
            "scheme": self.scheme,
            "flux": self.flux,
            "initial": self.initial,
            "noise": self.noise,
            "experiment": self.experiment,
        }


_TOP_BLOCKS = ("grid", "scheme", "flux", "initial", "noise", "experiment")


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a raw mapping (already parsed from YAML) into a config."""
    data = _as_block(data, "config")
    _check_keys(data, "config", set(_TOP_BLOCKS))
    for block in ("grid", "scheme", "flux", "initial", "experiment"):
        if block not in data:
            raise ConfigError(f"{block}: missing required block")
    cfg = ExperimentConfig(
        grid=_norm_grid(_as_block(data["grid"], "grid")),
        scheme=_norm_scheme(_as_block(data["scheme"], "scheme")),
        flux=_norm_flux(_as_block(data["flux"], "flux")),
        initial=_norm_initial(_as_block(data["initial"], "initial")),
        noise=_norm_noise(data.get("noise")),
        experiment=_norm_experiment(_as_block(data["experiment"], "experiment")),
    )
    # Cross-block sanity: constructing the objects surfaces any remaining
    # inconsistency (e.g. split_r vs grid size) at load time, not mid-run.
    build_grid(cfg)
    build_flux(cfg)
    build_wiener(cfg)
    build_jumps(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a YAML configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc})") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: invalid YAML ({exc})") from exc
    if data is None:
        raise ConfigError("config: file is empty")
    return parse_config(data)


def dump_config(cfg: ExperimentConfig, path: str | Path | None = None) -> str:
    """Emit canonical YAML; ``load_config`` on the output reproduces ``cfg``."""
    text = yaml.safe_dump(cfg.as_dict(), sort_keys=True, default_flow_style=None)
    if path is not None:
        Path(path).write_text(text)
    return text


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the canonical configuration."""
    payload = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(payload.encode(), digest_size=8).hexdigest()


# ---------------------------------------------------------------------------
# builders: config blocks -> solver objects
# ---------------------------------------------------------------------------


def build_grid(cfg: ExperimentConfig) -> Grid:
    return Grid(length=cfg.grid["length"], n_cells=cfg.grid["n_cells"])


def build_scheme(cfg: ExperimentConfig, **overrides) -> SchemeConfig:
    kwargs = dict(cfg.scheme)
    kwargs.update(overrides)
    return SchemeConfig(**kwargs)


def build_flux(cfg: ExperimentConfig) -> Flux:
    block = cfg.flux
    interval = tuple(block["state_interval"])
    if block["kind"] == "burgers":
        return burgers_flux(state_interval=interval)
    if block["kind"] == "linear":
        return linear_flux(block["speed"], state_interval=interval)
    return polynomial_flux(block["coefficients"], state_interval=interval)


def build_wiener(cfg: ExperimentConfig) -> WienerSpec | None:
    block = cfg.noise["wiener"]
    if block == "off":
        return None
    return WienerSpec(
        n_modes=block["n_modes"], sigma0=block["sigma0"], kind=block["kind"]
    )


def build_jumps(cfg: ExperimentConfig) -> JumpSpec | None:
    block = cfg.noise["jumps"]
    if block == "off":
        return None
    if "atoms" in block:
        return discrete_jumps(
            lam_star=block["lam_star"],
            atoms=[tuple(a) for a in block["atoms"]],
            delta_jump=block["delta_jump"],
        )
    return stable_jumps(
        lam_star=block["lam_star"],
        alpha=block["alpha"],
        c_mu=block["c_mu"],
        delta_jump=block["delta_jump"],
        z_max=block["z_max"],
    )


def build_initial(cfg: ExperimentConfig, grid: Grid | None = None) -> Field:
    if grid is None:
        grid = build_grid(cfg)
    block = cfg.initial
    kind = block["kind"]
    if kind == "sinusoid":
        return make_sinusoid(
            grid,
            amplitude=block["amplitude"],
            mode=block["mode"],
            offset=block["offset"],
        )
    if kind == "bump":
        return make_bump(
            grid,
            amplitude=block["amplitude"],
            center_frac=block["center"],
            width_frac=block["width"],
        )
    if kind == "riemann":
        return make_riemann(grid, left=block["left"], right=block["right"])
    return Field(grid, np.zeros(grid.n_cells))
