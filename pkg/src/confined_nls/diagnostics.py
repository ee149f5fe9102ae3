"""Morawetz-type functionals, transverse decay and discrete space-time norms.

The weights ``a(y) = |y|`` and ``a(y) = <y>`` depend on y only, so every
functional reduces to x-marginals: the mass marginal ``R(y) = int |u|^2 dx`` and
the current marginal ``J(y) = int Im(conj(u) grad_y u) dx``. Differences
``y - y'`` are taken between sawtooth coordinates without wrapping, because the
weights are not periodic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.signal import fftconvolve

from .errors import ConfigurationError
from .field import Field, YGrid, as_physical, lebesgue_norm, norms


class Weight(str, enum.Enum):
    ABS = "abs"
    JAPANESE = "japanese"


@dataclass(frozen=True)
class MarginalDensity:
    R: np.ndarray
    ygrid: YGrid
    t: float = 0.0

    def integral(self) -> float:
        return float(np.sum(self.R) * self.ygrid.cell)


def marginal_density(f: Field) -> MarginalDensity:
    p = as_physical(f)
    dens = p.data.real**2 + p.data.imag**2
    return MarginalDensity(p.xgrid.dx * dens.sum(axis=0), f.ygrid, f.t)


def current_marginal(f: Field) -> list[np.ndarray]:
    """``int Im(conj(u) d_k u) dx`` for each transverse direction ``k``."""
    p = as_physical(f)
    yg = f.ygrid
    hat = sfft.fftn(p.data, axes=yg.axes)
    out = []
    # the Nyquist mode is dropped so real data carry exactly zero current
    nyq = np.abs(yg.etas) >= np.pi / yg.dy * (1 - 1e-12)
    for eta in yg.frequencies():
        eta = np.where(np.broadcast_to(nyq.reshape(eta.shape), eta.shape), 0.0, eta)
        grad = sfft.ifftn(1j * eta[None] * hat, axes=yg.axes)
        out.append(p.xgrid.dx * np.imag(np.conj(p.data) * grad).sum(axis=0))
    return out


def fractional_y_norm(R: MarginalDensity, order: float) -> float:
    """``|| |grad_y|^order R ||_{L^2_y}`` via the discrete Fourier multiplier."""
    if order < 0:
        raise ConfigurationError(f"order must be >= 0, got {order}")
    yg = R.ygrid
    if order == 0:
        return float(math.sqrt(np.sum(R.R**2) * yg.cell))
    hat = sfft.fftn(R.R, norm="ortho") * math.sqrt(yg.cell)
    mult = yg.eta_sq() ** (order / 2)
    return float(math.sqrt(np.sum(np.abs(mult * hat) ** 2)))


def cube_mass_sup(f: Field, mu: float) -> float:
    """Largest mass in ``[x0 - mu, x0 + mu] x prod [y0 - mu, y0 + mu]`` over grid centres.

    Windows are clipped at the x walls and wrap periodically in y; a box filter
    built from prefix sums makes the cost linear in the grid size.
    """
    dx, dy = f.xgrid.dx, f.ygrid.dy
    if not 2 * mu >= max(dx, dy) * (1 - 1e-12):
        raise ConfigurationError(f"cube half-width mu = {mu:g} is below half a grid cell")
    p = as_physical(f)
    dens = (p.data.real**2 + p.data.imag**2) * p.cell
    hx = int(math.floor(mu / dx + 1e-12))
    hy = int(math.floor(mu / dy + 1e-12))
    out = _window_sum(dens, 0, hx, periodic=False)
    for ax in range(1, dens.ndim):
        out = _window_sum(out, ax, hy, periodic=True)
    return float(out.max())


def _window_sum(a: np.ndarray, axis: int, h: int, periodic: bool) -> np.ndarray:
    n = a.shape[axis]
    if periodic and 2 * h + 1 >= n:
        total = a.sum(axis=axis, keepdims=True)
        return np.broadcast_to(total, a.shape).copy()
    if periodic:
        a = np.concatenate([np.take(a, range(n - h, n), axis=axis), a, np.take(a, range(h), axis=axis)], axis=axis)
    else:
        pad = [(0, 0)] * a.ndim
        pad[axis] = (h, h)
        a = np.pad(a, pad)
    c = np.cumsum(a, axis=axis)
    zshape = list(c.shape)
    zshape[axis] = 1
    c = np.concatenate([np.zeros(zshape), c], axis=axis)
    hi = np.take(c, range(2 * h + 1, 2 * h + 1 + n), axis=axis)
    lo = np.take(c, range(0, n), axis=axis)
    return hi - lo


def _grad_weight(weight: Weight, diffs: list[np.ndarray]) -> list[np.ndarray]:
    r2 = sum(d * d for d in diffs)
    if weight is Weight.ABS:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(r2 > 0, 1 / np.sqrt(r2), 0.0)
    else:
        inv = 1 / np.sqrt(1 + r2)
    return [d * inv for d in diffs]


@lru_cache(maxsize=8)
def _kernel_1d(weight: Weight, L: float, N: int) -> np.ndarray:
    ys = -L + (2 * L / N) * np.arange(N)
    return _grad_weight(weight, [ys[:, None] - ys[None, :]])[0]


@lru_cache(maxsize=4)
def _kernel_nd(weight: Weight, L: float, N: int, dim: int):
    dy = 2 * L / N
    offs = dy * np.arange(-(N - 1), N)
    diffs = np.meshgrid(*([offs] * dim), indexing="ij")
    return tuple(_grad_weight(weight, diffs))


def morawetz_action(f: Field, weight) -> float:
    """``M = iint R(y') grad a(y - y') . J(y) dy' dy`` for ``a`` in {|y|, <y>}.

    ``grad a(0) = 0`` for the absolute weight. One transverse dimension uses a
    direct double sum; two use a zero-padded FFT convolution per component.
    """
    weight = Weight(weight)
    yg = f.ygrid
    R = marginal_density(f).R
    J = current_marginal(f)
    if yg.dim == 1:
        K = _kernel_1d(weight, yg.L_y, yg.N_y)
        conv = [K @ R]
    else:
        kernels = _kernel_nd(weight, yg.L_y, yg.N_y, yg.dim)
        conv = [fftconvolve(k, R, mode="valid") for k in kernels]
    return float(sum(np.sum(c * j) for c, j in zip(conv, J)) * yg.cell**2)


def morawetz_bound(f: Field) -> float:
    """``mass^{3/2} ||grad_y u||_{L^2}``, which dominates ``|M|`` for both weights."""
    rep = norms(f)
    return rep.mass**1.5 * rep.grad_y_norm


@dataclass
class MorawetzSeries:
    weight: Weight
    times: np.ndarray
    M_values: np.ndarray
    frac_norm_accum: float
    cube_accum: float
    mu: float
    bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    frac_accum_series: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cube_accum_series: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def scale(self) -> float:
        """``mass^{3/2} max_t ||grad_y u(t)||``; mass is conserved along the run."""
        return float(np.max(self.bounds)) if len(self.bounds) else 0.0


def _cumtrapz(t, y):
    out = np.zeros_like(y)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def morawetz_series(snapshots, weight, sigma: float, mu: float = 1.0) -> MorawetzSeries:
    """Morawetz action, its bound and both space-time accumulators along ``snapshots``."""
    snaps = list(snapshots)
    if not snaps:
        raise ConfigurationError("no snapshots")
    weight = Weight(weight)
    order = (4 - snaps[0].ygrid.d) / 2
    t = np.array([s.t for s in snaps], dtype=float)
    M = np.array([morawetz_action(s, weight) for s in snaps])
    bounds = np.array([morawetz_bound(s) for s in snaps])
    frac = np.array([fractional_y_norm(marginal_density(s), order) ** 2 for s in snaps])
    cube = np.array([cube_mass_sup(s, mu) ** (sigma + 2) for s in snaps])
    fa, ca = _cumtrapz(t, frac), _cumtrapz(t, cube)
    return MorawetzSeries(weight, t, M, float(fa[-1]), float(ca[-1]), mu, bounds, fa, ca)


def morawetz_monotonicity(series: MorawetzSeries, tol: float) -> bool:
    """True iff ``M(t_{k+1}) >= M(t_k) - tol * scale`` for every consecutive pair."""
    M = np.asarray(series.M_values)
    if len(M) < 2:
        raise ConfigurationError("monotonicity needs at least two samples")
    return bool(np.all(np.diff(M) >= -tol * series.scale))


@dataclass(frozen=True)
class SpacetimeNorm:
    value: float
    q: float
    r: float
    admissible: bool

    def __float__(self):
        return self.value


def is_admissible(q: float, r: float, dim: int, tol=1e-12) -> bool:
    """``2/q + dim/r = dim/2`` with ``dim`` the number of transverse directions."""
    return abs(2 / q + dim / r - dim / 2) <= tol


def _snapshots(trajectory):
    snaps = getattr(trajectory, "snapshots", trajectory)
    snaps = list(snaps)
    if not snaps:
        raise ConfigurationError("trajectory holds no snapshots")
    return snaps


def spacetime_norm(trajectory, q: float, r: float) -> SpacetimeNorm:
    """Discrete ``L^q_t L^r_y L^2_x`` norm over the snapshots (trapezoid in t)."""
    if q < 1 or r < 1:
        raise ConfigurationError("q and r must be >= 1")
    snaps = _snapshots(trajectory)
    yg = snaps[0].ygrid
    vals = []
    for s in snaps:
        line = np.sqrt(marginal_density(s).R)
        vals.append(float(line.max()) if np.isinf(r) else float((np.sum(line**r) * yg.cell) ** (1 / r)))
    vals = np.array(vals)
    if np.isinf(q):
        value = float(vals.max())
    else:
        t = np.array([s.t for s in snaps])
        value = float(_cumtrapz(t, vals**q)[-1] ** (1 / q)) if len(t) > 1 else 0.0
    return SpacetimeNorm(value, q, r, is_admissible(q, r, yg.dim))


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    times: np.ndarray
    values: np.ndarray
    expected_rate: float


def decay_tracker(trajectory, r: float, window=None) -> DecayFit:
    """Least-squares slope of ``log ||u(t)||_{L^r_{xy}}`` against ``log t`` over ``window``."""
    snaps = _snapshots(trajectory)
    d = snaps[0].ygrid.d
    upper = math.inf if d <= 2 else 2 * d / (d - 2)
    if not 2 < r < upper:
        raise ConfigurationError(f"r must lie in the open range (2, {upper:g}), got {r}")
    if window is not None:
        lo, hi = window
        snaps = [s for s in snaps if lo - 1e-9 <= s.t <= hi + 1e-9]
    t = np.array([s.t for s in snaps], dtype=float)
    if len(t) < 2:
        raise ConfigurationError("decay fit needs at least two snapshots in the window")
    if np.any(t <= 0):
        raise ConfigurationError("decay fit window contains non-positive times")
    v = np.array([lebesgue_norm(s, r) for s in snaps])
    slope, intercept = np.polyfit(np.log(t), np.log(v), 1)
    return DecayFit(float(slope), float(intercept), t, v, (d - 1) * (0.5 - 1 / r))
