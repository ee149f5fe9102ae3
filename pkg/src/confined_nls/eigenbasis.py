"""Discrete spectral decomposition of the confined operator M_x = -1/2 d^2/dx^2 + V + C0.

M_x is discretized by second-order finite differences on the interior points of
``[-L_x, L_x]`` with homogeneous Dirichlet walls. The resulting real symmetric
tridiagonal matrix is diagonalized once; every x-direction operation afterwards
(projection, M_x^{1/2}, the linear phase) is diagonal in that basis.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import ConfigurationError, NLSWarning, NumericalError
from .potential import PotentialSpec, eval_potential, lower_bound_constant

_MAGIC = b"MXEB"
_HEADER = struct.Struct("<4sHHd")  # magic, N_x, n_modes, dx: 16 bytes little-endian


@dataclass(frozen=True)
class XGrid:
    L_x: float
    N_x: int

    def __post_init__(self):
        if not self.L_x > 0:
            raise ConfigurationError(f"L_x must be > 0, got {self.L_x}")
        if int(self.N_x) != self.N_x or self.N_x < 16:
            raise ConfigurationError(f"N_x must be an integer >= 16, got {self.N_x}")
        object.__setattr__(self, "N_x", int(self.N_x))

    @property
    def dx(self) -> float:
        return 2.0 * self.L_x / (self.N_x + 1)

    @property
    def xs(self) -> np.ndarray:
        # centred index form keeps the points exactly symmetric about 0
        return self.dx * (np.arange(1, self.N_x + 1) - (self.N_x + 1) / 2.0)


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Lowest ``n_modes`` eigenpairs of the discrete M_x.

    ``vectors`` holds Euclidean-orthonormal columns; the L^2-normalized
    eigenfunctions are ``phi = vectors / sqrt(dx)``.
    """

    grid: XGrid
    eigenvalues: np.ndarray
    vectors: np.ndarray
    C0: float
    potential_values: np.ndarray
    spec: PotentialSpec | None = field(default=None, repr=False)

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def phi(self) -> np.ndarray:
        return self.vectors / np.sqrt(self.grid.dx)

    @property
    def diagonal(self) -> np.ndarray:
        return 1.0 / self.grid.dx**2 + self.potential_values + self.C0

    @property
    def off_diagonal(self) -> float:
        return -0.5 / self.grid.dx**2

    def orthonormality_defect(self) -> float:
        gram = self.vectors.T @ self.vectors
        return float(np.max(np.abs(gram - np.eye(self.n_modes))))

    def residuals(self) -> np.ndarray:
        """``||M phi_n - lambda_n phi_n||_{L^2}`` for every retained mode."""
        r = apply_M_matrix(self, self.phi) - self.phi * self.eigenvalues
        return np.sqrt(self.grid.dx * np.sum(r**2, axis=0))

    def edge_mass_fraction(self, n=-1, fraction=0.05) -> float:
        """Mass of mode ``n`` carried by the outermost ``fraction`` of the grid."""
        v = self.vectors[:, n] ** 2
        m = max(1, int(round(fraction * self.grid.N_x / 2)))
        return float((v[:m].sum() + v[-m:].sum()) / v.sum())


def build_eigenbasis(spec: PotentialSpec, grid: XGrid, n_modes: int | None = None) -> EigenBasis:
    """Diagonalize the Dirichlet finite-difference M_x on ``grid``.

    Returns the lowest ``n_modes`` eigenpairs (default ``N_x // 2``), with each
    eigenvector's first non-negligible component made positive.
    """
    if n_modes is None:
        n_modes = grid.N_x // 2
    if int(n_modes) != n_modes or n_modes < 1:
        raise ConfigurationError(f"n_modes must be a positive integer, got {n_modes}")
    n_modes = int(n_modes)
    if n_modes > grid.N_x:
        raise ConfigurationError(f"n_modes = {n_modes} exceeds N_x = {grid.N_x}")

    xs = grid.xs
    v = eval_potential(spec, xs)
    c0 = lower_bound_constant(spec, xs)
    dx = grid.dx
    diag = 1.0 / dx**2 + v + c0
    off = np.full(grid.N_x - 1, -0.5 / dx**2)
    try:
        lam, vec = eigh_tridiagonal(
            diag, off, select="i", select_range=(0, n_modes - 1), lapack_driver="stemr"
        )
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"tridiagonal eigensolver failed for N_x={grid.N_x}: {exc}") from exc

    order = np.argsort(lam, kind="stable")
    lam, vec = lam[order], vec[:, order]
    # M_x >= 0 exactly; clip round-off below zero
    lam = np.maximum(lam, 0.0)
    vec = _fix_signs(vec)
    return EigenBasis(grid, lam, np.ascontiguousarray(vec), c0, v, spec)


def _fix_signs(vec):
    scale = np.max(np.abs(vec), axis=0)
    first = np.argmax(np.abs(vec) > 1e-12 * scale, axis=0)
    signs = np.sign(vec[first, np.arange(vec.shape[1])])
    signs[signs == 0] = 1.0
    return vec * signs


def apply_M_matrix(basis: EigenBasis, values):
    """Apply the full tridiagonal M_x along axis 0 (independent of the truncation)."""
    f = np.asarray(values)
    dx = basis.grid.dx
    out = basis.diagonal.reshape((-1,) + (1,) * (f.ndim - 1)) * f
    off = -0.5 / dx**2
    out[1:] += off * f[:-1]
    out[:-1] += off * f[1:]
    return out


def quadratic_form_M(basis: EigenBasis, values, axis_sum=True):
    """``<M_x f, f>`` in the discrete L^2_x product, per trailing index or summed.

    Evaluated as ``1/2 ||D f||^2 + ((V + C0)|f|^2)`` with the forward difference
    ``D`` and zero Dirichlet values outside the grid, which is the same number as
    the tridiagonal quadratic form.
    """
    f = np.asarray(values)
    dx = basis.grid.dx
    shape = (-1,) + (1,) * (f.ndim - 1)
    kinetic = np.sum(np.abs(np.diff(f, axis=0)) ** 2, axis=0)
    kinetic = kinetic + np.abs(f[0]) ** 2 + np.abs(f[-1]) ** 2
    pot = np.sum((basis.potential_values + basis.C0).reshape(shape) * np.abs(f) ** 2, axis=0)
    q = 0.5 * kinetic / dx + dx * pot
    return float(np.sum(q)) if axis_sum else q


def _as_matrix(values):
    a = np.ascontiguousarray(values, dtype=np.complex128)
    return a, a.reshape(a.shape[0], -1)


def _real_matmul(real_mat, cplx):
    """``real_mat @ cplx`` using one real GEMM over interleaved real/imag parts."""
    m = cplx.shape[1]
    out = real_mat @ cplx.view(np.float64).reshape(cplx.shape[0], 2 * m)
    return np.ascontiguousarray(out).view(np.complex128).reshape(real_mat.shape[0], m)


def analyze_x(basis: EigenBasis, values_on_grid) -> np.ndarray:
    """Coefficients ``c_n = dx * sum_i phi_n(x_i) f_i`` along axis 0."""
    a, mat = _as_matrix(values_on_grid)
    if a.shape[0] != basis.grid.N_x:
        raise ConfigurationError(f"expected {basis.grid.N_x} x-samples, got {a.shape[0]}")
    c = _real_matmul(basis.vectors.T, mat) * np.sqrt(basis.grid.dx)
    return c.reshape((basis.n_modes,) + a.shape[1:])


def synthesize_x(basis: EigenBasis, coeffs) -> np.ndarray:
    """Grid values of ``sum_n c_n phi_n`` along axis 0."""
    a, mat = _as_matrix(coeffs)
    if a.shape[0] != basis.n_modes:
        raise ConfigurationError(f"expected {basis.n_modes} coefficients, got {a.shape[0]}")
    f = _real_matmul(basis.vectors, mat) / np.sqrt(basis.grid.dx)
    return f.reshape((basis.grid.N_x,) + a.shape[1:])


def _check_coeffs(basis, coeffs):
    c = np.asarray(coeffs)
    if c.shape[0] != basis.n_modes:
        raise ConfigurationError(f"expected {basis.n_modes} coefficients, got {c.shape[0]}")
    return c, (-1,) + (1,) * (c.ndim - 1)


def apply_sqrt_M(basis: EigenBasis, coeffs) -> np.ndarray:
    c, shape = _check_coeffs(basis, coeffs)
    return np.sqrt(basis.eigenvalues).reshape(shape) * c


def linear_phase_x(basis: EigenBasis, coeffs, t: float) -> np.ndarray:
    """Multiply by ``exp(-i t (lambda_n - C0))``, the x-factor of exp(-itH)."""
    c, shape = _check_coeffs(basis, coeffs)
    return np.exp(-1j * t * (basis.eigenvalues - basis.C0)).reshape(shape) * c


def warn_if_leaky(basis: EigenBasis, threshold=1e-6):
    """Warn when the top retained mode feels the Dirichlet walls."""
    frac = basis.edge_mass_fraction()
    if frac > threshold:
        warnings.warn(
            f"confinement leak: highest retained mode has relative mass {frac:.3g} "
            f"in the outermost 5% of the x-grid (threshold {threshold:g})",
            NLSWarning,
            stacklevel=2,
        )
    return frac


def save_eigenbasis(basis: EigenBasis, path) -> Path:
    """Binary dump: 16-byte header, then C0, eigenvalues and eigenvectors as float64.

    Header layout (little-endian): 4-byte magic ``MXEB``, uint16 ``N_x``,
    uint16 ``n_modes``, float64 ``dx``. The eigenvector block is stored
    mode-major (``n_modes`` rows of ``N_x`` Euclidean-normalized samples).
    """
    path = Path(path)
    g = basis.grid
    if g.N_x > 0xFFFF:
        raise ConfigurationError("N_x too large for the eigenbasis dump header")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.N_x, basis.n_modes, g.dx))
        fh.write(np.array([basis.C0], dtype="<f8").tobytes())
        fh.write(basis.eigenvalues.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.vectors.T).astype("<f8").tobytes())
    return path


def load_eigenbasis(path, spec: PotentialSpec, grid: XGrid, n_modes: int | None = None) -> EigenBasis:
    """Reload a dump written by :func:`save_eigenbasis` for the same configuration."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"{path}: truncated eigenbasis dump")
    magic, nx, nm, dx = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ConfigurationError(f"{path}: not an eigenbasis dump")
    if n_modes is None:
        n_modes = grid.N_x // 2
    if nx != grid.N_x or nm != n_modes or dx != grid.dx:
        raise ConfigurationError(
            f"{path}: cached basis (N_x={nx}, n_modes={nm}, dx={dx}) does not match the configuration"
        )
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 1 + nm + nm * nx:
        raise ConfigurationError(f"{path}: payload size mismatch")
    c0 = float(body[0])
    lam = body[1 : 1 + nm].astype(float)
    vec = np.ascontiguousarray(body[1 + nm :].reshape(nm, nx).T.astype(float))
    v = eval_potential(spec, grid.xs)
    if c0 != lower_bound_constant(spec, grid.xs):
        raise ConfigurationError(f"{path}: cached C0 does not match the potential")
    return EigenBasis(grid, lam, vec, c0, v, spec)
