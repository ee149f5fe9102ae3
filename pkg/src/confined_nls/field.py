"""The state u(t, x, y) on the tensor grid and every norm built from it.

Physical data has shape ``(N_x,) + (N_y,) * (d - 1)``. Spectral data replaces the
x-axis by ``n_modes`` eigen-coefficients and the y-axes by discrete Fourier
coefficients, scaled so that ``sum |c|^2`` is the L^2 mass (Parseval without
weights).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .eigenbasis import EigenBasis, analyze_x, synthesize_x
from .errors import ConfigurationError


class Representation(str, enum.Enum):
    PHYSICAL = "physical"
    SPECTRAL = "spectral"


@dataclass(frozen=True)
class YGrid:
    """Periodic transverse box ``[-L_y, L_y)^(d-1)`` with ``N_y`` points per direction."""

    d: int
    L_y: float
    N_y: int

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigurationError(f"d must be 2 or 3, got {self.d}")
        if not self.L_y > 0:
            raise ConfigurationError(f"L_y must be > 0, got {self.L_y}")
        n = int(self.N_y)
        if n != self.N_y or n < 2 or n & (n - 1):
            raise ConfigurationError(f"N_y must be a power of two, got {self.N_y}")
        object.__setattr__(self, "N_y", n)

    @property
    def dim(self) -> int:
        return self.d - 1

    @property
    def dy(self) -> float:
        return 2.0 * self.L_y / self.N_y

    @property
    def ys(self) -> np.ndarray:
        return -self.L_y + self.dy * np.arange(self.N_y)

    @property
    def etas(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N_y, d=self.dy)

    @property
    def shape(self) -> tuple:
        return (self.N_y,) * self.dim

    @property
    def cell(self) -> float:
        return self.dy**self.dim

    @property
    def measure(self) -> float:
        return (2.0 * self.L_y) ** self.dim

    @property
    def axes(self) -> tuple:
        """Data axes carrying y, for arrays with a leading x-axis."""
        return tuple(range(1, self.d))

    def coords(self) -> list[np.ndarray]:
        """Per-direction coordinate arrays broadcastable to :attr:`shape`."""
        grids = np.meshgrid(*([self.ys] * self.dim), indexing="ij", sparse=True)
        return list(grids)

    def frequencies(self) -> list[np.ndarray]:
        grids = np.meshgrid(*([self.etas] * self.dim), indexing="ij", sparse=True)
        return list(grids)

    def radius_sq(self) -> np.ndarray:
        return sum(c**2 for c in self.coords())

    def eta_sq(self) -> np.ndarray:
        return sum(e**2 for e in self.frequencies())

    @property
    def max_group_velocity(self) -> float:
        return np.pi / self.dy


@dataclass(frozen=True, eq=False)
class Field:
    basis: EigenBasis
    ygrid: YGrid
    data: np.ndarray
    rep: Representation = Representation.PHYSICAL
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rep", Representation(self.rep))
        lead = self.basis.grid.N_x if self.rep is Representation.PHYSICAL else self.basis.n_modes
        expected = (lead,) + self.ygrid.shape
        if self.data.shape != expected:
            raise ConfigurationError(
                f"{self.rep.value} data must have shape {expected}, got {self.data.shape}"
            )

    @property
    def xgrid(self):
        return self.basis.grid

    @property
    def cell(self) -> float:
        return self.xgrid.dx * self.ygrid.cell

    def replace(self, data=None, rep=None, t=None) -> "Field":
        return Field(
            self.basis,
            self.ygrid,
            self.data if data is None else data,
            self.rep if rep is None else rep,
            self.t if t is None else t,
        )

    def zeros_like(self) -> "Field":
        return self.replace(data=np.zeros_like(self.data))

    def compatible(self, other: "Field") -> bool:
        return other.basis is self.basis and other.ygrid == self.ygrid

    def _aligned(self, other):
        if not self.compatible(other):
            raise ConfigurationError("fields live on different grids or bases")
        return _convert(other, self.rep).data

    def __add__(self, other):
        return self.replace(data=self.data + self._aligned(other))

    def __sub__(self, other):
        return self.replace(data=self.data - self._aligned(other))

    def __mul__(self, scalar):
        return self.replace(data=self.data * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True)
class NormReport:
    mass: float
    sqrtM_norm: float
    grad_y_norm: float
    y_moment: float
    Z_norm: float
    Ztilde_norm: float
    energy: float
    t: float

    def as_row(self) -> dict:
        return {
            "t": self.t,
            "mass": self.mass,
            "energy": self.energy,
            "Z_norm": self.Z_norm,
            "Ztilde_norm": self.Ztilde_norm,
            "sqrtM_norm": self.sqrtM_norm,
            "grad_y_norm": self.grad_y_norm,
            "y_moment": self.y_moment,
        }


def _y_forward(values, yg: YGrid):
    return sfft.fftn(values, axes=yg.axes, norm="ortho") * np.sqrt(yg.cell)


def _y_inverse(values, yg: YGrid):
    return sfft.ifftn(values, axes=yg.axes, norm="ortho") / np.sqrt(yg.cell)


def _convert(f: Field, rep: Representation) -> Field:
    rep = Representation(rep)
    if f.rep is rep:
        return f
    return to_spectral(f) if rep is Representation.SPECTRAL else to_physical(f)


def to_spectral(f: Field) -> Field:
    """Eigen-coefficients in x composed with the discrete Fourier transform in y."""
    if f.rep is Representation.SPECTRAL:
        raise ConfigurationError("field is already spectral")
    c = analyze_x(f.basis, f.data)
    return f.replace(data=_y_forward(c, f.ygrid), rep=Representation.SPECTRAL)


def to_physical(f: Field) -> Field:
    if f.rep is Representation.PHYSICAL:
        raise ConfigurationError("field is already physical")
    c = _y_inverse(f.data, f.ygrid)
    return f.replace(data=synthesize_x(f.basis, c), rep=Representation.PHYSICAL)


def as_physical(f: Field) -> Field:
    return _convert(f, Representation.PHYSICAL)


def as_spectral(f: Field) -> Field:
    return _convert(f, Representation.SPECTRAL)


def mass(f: Field) -> float:
    if f.rep is Representation.SPECTRAL:
        return float(np.sum(np.abs(f.data) ** 2))
    return float(np.sum(np.abs(f.data) ** 2) * f.cell)


def norms(f: Field, sigma: float | None = None) -> NormReport:
    """All norms of ``f`` plus the conserved mass and energy.

    ``sigma`` is the nonlinearity power; without it the energy is reported as NaN.
    The confined part of the energy, ``1/2||d_x u||^2 + int V|u|^2``, is taken from
    the spectral quadratic form as ``||M_x^{1/2} u||^2 - C0 * mass``.
    """
    phys = as_physical(f)
    spec = as_spectral(f)
    yg = f.ygrid
    dens = np.abs(phys.data) ** 2
    m = float(np.sum(dens) * phys.cell)
    coef2 = np.abs(spec.data) ** 2
    lam = f.basis.eigenvalues.reshape((-1,) + (1,) * yg.dim)
    sqrtm2 = float(np.sum(lam * coef2))
    grad2 = float(np.sum(yg.eta_sq() * coef2))
    ymom2 = float(np.sum(yg.radius_sq() * dens) * phys.cell)
    z2 = m + sqrtm2 + grad2
    if sigma is None:
        energy = float("nan")
    else:
        pot = float(np.sum(dens ** (sigma + 1)) * phys.cell) / (sigma + 1)
        energy = 0.5 * grad2 + (sqrtm2 - f.basis.C0 * m) + pot
    return NormReport(
        mass=m,
        sqrtM_norm=np.sqrt(sqrtm2),
        grad_y_norm=np.sqrt(grad2),
        y_moment=np.sqrt(ymom2),
        Z_norm=np.sqrt(z2),
        Ztilde_norm=np.sqrt(z2 + ymom2),
        energy=energy,
        t=f.t,
    )


def z_norm(f: Field) -> float:
    """``||f||_Z`` from the spectral representation alone (mass included)."""
    spec = as_spectral(f)
    coef2 = np.abs(spec.data) ** 2
    lam = f.basis.eigenvalues.reshape((-1,) + (1,) * f.ygrid.dim)
    return float(np.sqrt(np.sum((1.0 + lam + f.ygrid.eta_sq()) * coef2)))


def lebesgue_norm(f: Field, r: float) -> float:
    """Discrete L^r_{xy} norm by the rectangle rule; ``r = inf`` gives the grid max."""
    if not (r >= 1):
        raise ConfigurationError(f"r must be >= 1, got {r}")
    a = np.abs(as_physical(f).data)
    if np.isinf(r):
        return float(a.max(initial=0.0))
    return float((np.sum(a**r) * f.cell) ** (1.0 / r))


def mixed_norm_LkyLinfx(f: Field, k: float) -> float:
    """``|| ||u(., y)||_{L^inf_x} ||_{L^k_y}`` using the grid max in x."""
    if not (k >= 1):
        raise ConfigurationError(f"k must be >= 1, got {k}")
    line_max = np.abs(as_physical(f).data).max(axis=0)
    if np.isinf(k):
        return float(line_max.max(initial=0.0))
    return float((np.sum(line_max**k) * f.ygrid.cell) ** (1.0 / k))


def gaussian_field(
    basis: EigenBasis,
    ygrid: YGrid,
    amplitude=1.0,
    x0=0.0,
    y0=0.0,
    wx=1.0,
    wy=1.0,
    momentum=0.0,
    t=0.0,
) -> Field:
    """``amplitude`` times an L^2-normalized (continuum) Gaussian, in physical form.

    ``y0`` and ``momentum`` may be scalars (applied to every transverse direction)
    or sequences of length ``d - 1``.
    """
    dim = ygrid.dim
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), (dim,))
    p = np.broadcast_to(np.asarray(momentum, dtype=float), (dim,))
    xs = basis.grid.xs
    gx = np.exp(-((xs - x0) ** 2) / (2 * wx**2))
    gy = np.ones(ygrid.shape, dtype=complex)
    for c, c0, pk in zip(ygrid.coords(), y0, p):
        gy = gy * np.exp(-((c - c0) ** 2) / (2 * wy**2) + 1j * pk * c)
    norm = np.pi ** (-ygrid.d / 4) * (wx * wy**dim) ** -0.5
    data = amplitude * norm * gx.reshape((-1,) + (1,) * dim) * gy[None]
    return Field(basis, ygrid, np.ascontiguousarray(data), Representation.PHYSICAL, t)


def tensor_mode_field(basis: EigenBasis, ygrid: YGrid, n: int, k=0, amplitude=1.0) -> Field:
    """``amplitude * phi_n(x) * exp(i eta_k . y)`` with ``k`` an integer lattice index."""
    k = np.broadcast_to(np.asarray(k, dtype=int), (ygrid.dim,))
    wave = np.ones(ygrid.shape, dtype=complex)
    for c, kk in zip(ygrid.coords(), k):
        wave = wave * np.exp(1j * np.pi * kk / ygrid.L_y * c)
    data = amplitude * basis.phi[:, n].reshape((-1,) + (1,) * ygrid.dim) * wave[None]
    return Field(basis, ygrid, np.ascontiguousarray(data), Representation.PHYSICAL)


def write_snapshot(f: Field, stem, dtype="complex128") -> tuple[Path, Path]:
    """Raw little-endian array ``stem.bin`` plus a JSON sidecar ``stem.json``."""
    stem = Path(stem)
    dt = np.dtype(dtype).newbyteorder("<")
    if dt.kind != "c":
        raise ConfigurationError("snapshot dtype must be complex64 or complex128")
    bin_path, meta_path = stem.with_suffix(".bin"), stem.with_suffix(".json")
    bin_path.write_bytes(np.ascontiguousarray(f.data, dtype=dt).tobytes())
    meta = {
        "shape": list(f.data.shape),
        "dtype": dt.name,
        "byteorder": "little",
        "representation": f.rep.value,
        "t": f.t,
        "xgrid": {"L_x": f.xgrid.L_x, "N_x": f.xgrid.N_x, "dx": f.xgrid.dx, "n_modes": f.basis.n_modes},
        "ygrid": {"d": f.ygrid.d, "L_y": f.ygrid.L_y, "N_y": f.ygrid.N_y, "dy": f.ygrid.dy},
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return bin_path, meta_path


def read_snapshot(stem, basis: EigenBasis, ygrid: YGrid) -> Field:
    stem = Path(stem)
    meta_path = stem.with_suffix(".json")
    if not meta_path.exists():
        raise ConfigurationError(f"snapshot sidecar not found: {meta_path}")
    meta = json.loads(meta_path.read_text())
    xg = meta["xgrid"]
    if (xg["N_x"], xg["L_x"], xg["n_modes"]) != (basis.grid.N_x, basis.grid.L_x, basis.n_modes):
        raise ConfigurationError(f"{stem}: x-grid does not match the basis")
    yg = meta["ygrid"]
    if YGrid(yg["d"], yg["L_y"], yg["N_y"]) != ygrid:
        raise ConfigurationError(f"{stem}: y-grid does not match")
    dt = np.dtype(meta["dtype"]).newbyteorder("<")
    data = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype=dt)
    data = data.astype(np.complex128).reshape(meta["shape"])
    return Field(basis, ygrid, data, Representation(meta["representation"]), float(meta["t"]))
