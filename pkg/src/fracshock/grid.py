"""Periodic 1-D grids, grid functions, and the norms behind every diagnostic.

Everything lives on the torus [0, L): cell centers x_j = (j + 1/2) h with
h = L / n_cells, wavenumbers 2*pi*k/L.  n_cells is required to be a power of
two so the spectral paths stay fast.  Quadrature of grid functions is plain
midpoint, which is spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "l1_norm",
    "l2_norm_sq",
    "tv_norm",
    "mass",
    "h_lambda_seminorm_sq",
    "save_field_binary",
    "load_field_binary",
    "save_field_csv",
    "load_field_csv",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh on [0, length)."""

    length: float
    n_cells: int

    def __post_init__(self):
        if not (self.length > 0.0):
            raise ValueError(f"grid length must be positive, got {self.length}")
        n = self.n_cells
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"n_cells must be a power of two >= 2, got {n}")
        if abs(self.h * n - self.length) > 1e-14 * self.length:
            raise ValueError("h * n_cells does not reproduce length")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        """Cell centers x_j = (j + 1/2) h."""
        return (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def omega(self) -> np.ndarray:
        """Nonnegative physical wavenumbers 2*pi*k/L matching rfft layout."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_cells, d=self.h)

    @property
    def spectral_weights(self) -> np.ndarray:
        """Multiplicity of each rfft mode in a full-spectrum Parseval sum."""
        w = np.full(self.n_cells // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0  # Nyquist mode is its own conjugate
        return w


@dataclass(frozen=True)
class Field:
    """One sample path's state u(t, .) as nodal values on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(
                f"values shape {v.shape} does not match grid ({self.grid.n_cells},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)


def l1_norm(u: Field) -> float:
    return u.grid.h * float(np.abs(u.values).sum())


def l2_norm_sq(u: Field) -> float:
    v = u.values
    return u.grid.h * float(np.dot(v, v))


def tv_norm(u: Field) -> float:
    """Periodic total variation sum_j |u_{j+1} - u_j|."""
    v = u.values
    return float(np.abs(np.roll(v, -1) - v).sum())


def mass(u: Field) -> float:
    return u.grid.h * float(u.values.sum())


def h_lambda_seminorm_sq(u: Field, lam: float) -> float:
    """Fractional seminorm |u|^2 via the spectrum: sum_k |2 pi k/L|^{2 lam} |u_k|^2.

    Normalized so the value equals the variational pairing of the order-lam
    operator with u itself (and hence l2_norm_sq when the symbol is 1).
    """
    g = u.grid
    uh = np.fft.rfft(u.values) / g.n_cells
    sym = g.omega ** (2.0 * lam)
    return g.length * float(np.sum(g.spectral_weights * sym * np.abs(uh) ** 2))


# ---------------------------------------------------------------------------
# serialization: flat binary snapshots and plot-ready CSV
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<dQ")  # length as f64, n_cells as u64


def save_field_binary(u: Field, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(u.grid.length, u.grid.n_cells))
        fh.write(u.values.astype("<f8").tobytes())


def load_field_binary(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    length, n = _HEADER.unpack_from(raw, 0)
    values = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size)
    return Field(Grid(length, int(n)), values.copy())


def save_field_csv(u: Field, path) -> None:
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for x, v in zip(u.grid.x, u.values):
            # repr of a builtin float is the shortest round-trip form
            fh.write(f"{float(x)!r},{float(v)!r}\n")


def load_field_csv(path) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    x, v = data[:, 0], data[:, 1]
    h = 2.0 * x[0]  # first center sits at h/2
    return Field(Grid(h * len(x), len(x)), v)
