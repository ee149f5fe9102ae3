"""Empirical checks of the anisotropic embeddings over seeded random ensembles.

All norms here are evaluated on the full grid, never through the truncated
eigenbasis: the confined quadratic form is the tridiagonal one, y-derivatives use
the FFT, and x-Sobolev weights use the discrete sine transform of the Dirichlet
box with frequencies ``xi_k = k pi / (2 L_x)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.fft as sfft

from .eigenbasis import EigenBasis, quadratic_form_M
from .errors import ConfigurationError, InequalityViolation
from .field import Field, Representation, YGrid, as_physical

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class InequalityParams:
    k: float
    s: float
    gamma: float
    epsilon: float | None = None
    d: int = 2
    delta: float = field(init=False)

    def __post_init__(self):
        dim = self.d - 1
        if not self.s > 0.5:
            raise ConfigurationError(f"s must exceed 1/2, got {self.s}")
        if not (self.k > 0 and self.gamma > 0):
            raise ConfigurationError("k and gamma must be positive")
        lower = 0.5 - self.gamma / dim
        if not 0.5 > 1 / self.k > lower > 0:
            raise ConfigurationError(
                f"need 1/2 > 1/k > 1/2 - gamma/(d-1) > 0, got 1/k = {1 / self.k:g}, 1/2 - gamma/(d-1) = {lower:g}"
            )
        object.__setattr__(self, "delta", dim * (0.5 - 1 / self.k) / self.gamma)

    @classmethod
    def from_epsilon(cls, k: float, epsilon: float, d: int = 2) -> "InequalityParams":
        if not 0 < epsilon < 0.5:
            raise ConfigurationError(f"epsilon must lie in (0, 1/2), got {epsilon}")
        return cls(k=k, s=0.5 + epsilon, gamma=0.5 - epsilon, epsilon=epsilon, d=d)

    @classmethod
    def from_mapping(cls, cfg: dict, d: int = 2) -> "InequalityParams":
        cfg = dict(cfg)
        if "s" not in cfg and "epsilon" in cfg:
            return cls.from_epsilon(float(cfg["k"]), float(cfg["epsilon"]), int(cfg.get("d", d)))
        try:
            return cls(
                k=float(cfg["k"]),
                s=float(cfg["s"]),
                gamma=float(cfg["gamma"]),
                epsilon=None if cfg.get("epsilon") is None else float(cfg["epsilon"]),
                d=int(cfg.get("d", d)),
            )
        except KeyError as exc:
            raise ConfigurationError(f"inequality parameters need {exc.args[0]!r}") from None


class Generator(str, enum.Enum):
    GAUSSIAN_RANDOM_FIELD = "GaussianRandomField"
    EIGENMODE_MIXTURE = "EigenmodeMixture"
    TRANSLATES = "Translates"


@dataclass(frozen=True)
class EnsembleSpec:
    """``count`` seeded members; member ``i`` draws from ``default_rng([seed, i])``.

    Options per generator:

    * GaussianRandomField: ``corr_x``, ``corr_y`` (correlation lengths). Members
      are finite sums over the continuum lattice of Dirichlet sine modes in x and
      Fourier modes in y, so the same member is obtained on every fine enough grid.
    * EigenmodeMixture: ``max_mode`` (x eigenmode index), ``max_wave`` (y lattice index).
    * Translates: ``width_x``, ``width_y`` of a Gaussian base profile, shifted at random.
    """

    count: int
    seed: int = 0
    generator: Generator = Generator.GAUSSIAN_RANDOM_FIELD
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ConfigurationError(f"ensemble count must be an integer >= 1, got {self.count}")
        try:
            object.__setattr__(self, "generator", Generator(self.generator))
        except ValueError:
            names = ", ".join(g.value for g in Generator)
            raise ConfigurationError(f"unknown generator {self.generator!r}; use one of {names}") from None

    @classmethod
    def from_mapping(cls, cfg: dict) -> "EnsembleSpec":
        cfg = dict(cfg)
        try:
            count = cfg.pop("count")
        except KeyError:
            raise ConfigurationError("ensemble needs 'count'") from None
        seed = int(cfg.pop("seed", 0))
        gen = cfg.pop("generator", Generator.GAUSSIAN_RANDOM_FIELD.value)
        opts = dict(cfg.pop("options", {}))
        opts.update(cfg)
        return cls(int(count), seed, gen, opts)


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / SQRT2


def _grf(rng, basis: EigenBasis, yg: YGrid, corr_x=1.0, corr_y=2.0):
    L_x = basis.grid.L_x
    xs = basis.grid.xs
    cut = math.sqrt(4 * math.log(1e8))
    kmax = max(1, int(cut / corr_x * 2 * L_x / math.pi))
    mmax = max(1, int(cut / corr_y * yg.L_y / math.pi))
    ks = np.arange(1, kmax + 1)
    xi = ks * math.pi / (2 * L_x)
    sx = np.sin(np.outer(xs + L_x, xi))
    if kmax > basis.grid.N_x or 2 * mmax + 1 > yg.N_y:
        raise ConfigurationError("grid too coarse for the requested correlation lengths")
    ms = np.arange(-mmax, mmax + 1)
    eta = ms * math.pi / yg.L_y
    shape = (kmax,) + (len(ms),) * yg.dim
    env = np.exp(-(xi * corr_x) ** 2 / 4).reshape((-1,) + (1,) * yg.dim)
    for ax in range(yg.dim):
        sh = [1] * (yg.dim + 1)
        sh[ax + 1] = -1
        env = env * np.exp(-(eta * corr_y) ** 2 / 4).reshape(sh)
    coef = _complex_normal(rng, shape) * env
    out = np.tensordot(sx, coef, axes=(1, 0))
    for ax in range(yg.dim):
        wave = np.exp(1j * np.outer(ms, yg.ys) * math.pi / yg.L_y)
        out = np.moveaxis(np.tensordot(out, wave, axes=(1 + ax, 0)), -1, 1 + ax)
    return out


def _mixture(rng, basis: EigenBasis, yg: YGrid, max_mode=8, max_wave=8):
    nmax = min(int(max_mode), basis.n_modes - 1)
    ms = np.arange(-int(max_wave), int(max_wave) + 1)
    coef = _complex_normal(rng, (nmax + 1,) + (len(ms),) * yg.dim)
    out = np.tensordot(basis.phi[:, : nmax + 1], coef, axes=(1, 0))
    for ax in range(yg.dim):
        wave = np.exp(1j * np.outer(ms, yg.ys) * math.pi / yg.L_y)
        out = np.moveaxis(np.tensordot(out, wave, axes=(1 + ax, 0)), -1, 1 + ax)
    return out


def _translate(rng, basis: EigenBasis, yg: YGrid, width_x=1.0, width_y=2.0):
    x0 = rng.uniform(-0.5, 0.5) * basis.grid.L_x
    g = np.exp(-((basis.grid.xs - x0) ** 2) / (2 * width_x**2))
    gy = np.ones(yg.shape, dtype=complex)
    for c in yg.coords():
        y0 = rng.uniform(-0.5, 0.5) * yg.L_y
        gy = gy * np.exp(-((c - y0) ** 2) / (2 * width_y**2) + 1j * rng.normal() * c)
    amp = complex(*rng.standard_normal(2))
    return amp * g.reshape((-1,) + (1,) * yg.dim) * gy[None]


_GENERATORS = {
    Generator.GAUSSIAN_RANDOM_FIELD: _grf,
    Generator.EIGENMODE_MIXTURE: _mixture,
    Generator.TRANSLATES: _translate,
}


def ensemble_fields(spec: EnsembleSpec, basis: EigenBasis, ygrid: YGrid) -> Iterator[Field]:
    gen = _GENERATORS[spec.generator]
    for i in range(spec.count):
        rng = np.random.default_rng([spec.seed, i])
        data = gen(rng, basis, ygrid, **spec.options)
        yield Field(basis, ygrid, np.ascontiguousarray(data, dtype=complex), Representation.PHYSICAL)


def _members(ensemble, basis=None, ygrid=None):
    if isinstance(ensemble, EnsembleSpec):
        if basis is None or ygrid is None:
            raise ConfigurationError("an EnsembleSpec needs a basis and a y-grid")
        return ensemble_fields(ensemble, basis, ygrid)
    return iter(ensemble)


# full-grid norms


def _l2sq(u, cell):
    return float(np.sum(u.real**2 + u.imag**2) * cell)


def h1x_l2y_norm(f: Field) -> float:
    """``(||u||^2 + ||d_x u||^2)^{1/2}`` with the Dirichlet forward difference."""
    u = as_physical(f).data
    dx = f.xgrid.dx
    du = np.diff(u, axis=0)
    kin = np.sum(np.abs(du) ** 2) + np.sum(np.abs(u[0]) ** 2) + np.sum(np.abs(u[-1]) ** 2)
    return math.sqrt(_l2sq(u, f.cell) + float(kin) / dx * f.ygrid.cell)


def bx_l2y_norm(f: Field) -> float:
    """``(||u||^2 + <M_x u, u>)^{1/2}`` with the full tridiagonal quadratic form."""
    u = as_physical(f).data
    return math.sqrt(_l2sq(u, f.cell) + quadratic_form_M(f.basis, u) * f.ygrid.cell)


def z_norm_full(f: Field) -> float:
    u = as_physical(f).data
    yg = f.ygrid
    hat = sfft.fftn(u, axes=yg.axes, norm="ortho")
    grad2 = float(np.sum(yg.eta_sq()[None] * np.abs(hat) ** 2) * f.cell)
    return math.sqrt(bx_l2y_norm(f) ** 2 + grad2)


def _full_spectrum(f: Field):
    """``|u_hat(xi_k, eta)|^2`` with Plancherel weights, plus the frequency grids."""
    u = as_physical(f).data
    yg = f.ygrid
    c = sfft.dst(u, type=1, axis=0, norm="ortho")
    c = sfft.fftn(c, axes=yg.axes, norm="ortho")
    power = np.abs(c) ** 2 * f.cell
    xi = np.arange(1, f.xgrid.N_x + 1) * math.pi / (2 * f.xgrid.L_x)
    return power, xi, yg.eta_sq()


def anisotropic_norm(f: Field, gamma: float, s: float, homogeneous=False) -> float:
    """``H^gamma_y H^s_x`` norm, or its ``|eta|^gamma`` homogeneous version."""
    power, xi, eta2 = _full_spectrum(f)
    wx = (1 + xi**2) ** s
    wy = eta2**gamma if homogeneous else (1 + eta2) ** gamma
    return math.sqrt(float(np.sum(wx.reshape((-1,) + (1,) * f.ygrid.dim) * wy[None] * power)))


def mixed_norm_full(f: Field, k: float) -> float:
    line = np.abs(as_physical(f).data).max(axis=0)
    return float((np.sum(line**k) * f.ygrid.cell) ** (1 / k))


# checks


@dataclass
class EnsembleReport:
    max_ratio: float
    argmax: int
    ratios: np.ndarray
    skipped: int = 0
    seed: int | None = None

    @property
    def argmax_seed(self):
        """``[seed, index]`` of the maximizing member, the key of its generator stream."""
        return [self.seed, self.argmax]


def _report(ratios, skipped, ensemble) -> EnsembleReport:
    r = np.array(ratios, dtype=float)
    seed = ensemble.seed if isinstance(ensemble, EnsembleSpec) else None
    valid = np.where(np.isnan(r), -np.inf, r)
    if len(r) == 0 or np.all(np.isnan(r)):
        return EnsembleReport(0.0, -1, r, skipped, seed)
    i = int(np.argmax(valid))
    return EnsembleReport(float(r[i]), i, r, skipped, seed)


def check_B_embedding(ensemble, basis=None, ygrid=None) -> EnsembleReport:
    """``||u||_{H^1_x L^2_y} / ||u||_{L^2_y B_x}`` per member; asserts ``<= sqrt(2)(1 + 1e-8)``."""
    ratios, skipped = [], 0
    for f in _members(ensemble, basis, ygrid):
        den = bx_l2y_norm(f)
        if den == 0:
            ratios.append(np.nan)
            skipped += 1
            continue
        ratios.append(h1x_l2y_norm(f) / den)
    rep = _report(ratios, skipped, ensemble)
    if rep.max_ratio > SQRT2 * (1 + 1e-8):
        raise InequalityViolation(f"H^1_x / B_x ratio {rep.max_ratio:.12g} exceeds sqrt(2)")
    return rep


def check_H_gamma_s_embedding(ensemble, epsilon: float, basis=None, ygrid=None) -> EnsembleReport:
    """``||u||_{H^gamma_y H^s_x} / ||u||_Z`` with ``s = 1/2 + epsilon``, ``gamma = 1/2 - epsilon``."""
    if not 0 < epsilon < 0.5:
        raise ConfigurationError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    s, gamma = 0.5 + epsilon, 0.5 - epsilon
    ratios, skipped = [], 0
    for f in _members(ensemble, basis, ygrid):
        den = z_norm_full(f)
        if den == 0:
            ratios.append(np.nan)
            skipped += 1
            continue
        ratios.append(anisotropic_norm(f, gamma, s) / den)
    rep = _report(ratios, skipped, ensemble)
    if not math.isfinite(rep.max_ratio):
        raise InequalityViolation("H^gamma_y H^s_x / Z ratio is not finite")
    return rep


def gn_ratio(f: Field, params: InequalityParams) -> float:
    """``||u||_{L^k_y L^inf_x} / (||u||_{L^2_y H^s_x}^{1-delta} ||u||_{Hdot^gamma_y H^s_x}^delta)``; NaN if degenerate."""
    hom = anisotropic_norm(f, params.gamma, params.s, homogeneous=True)
    if hom == 0:
        return math.nan
    base = anisotropic_norm(f, 0.0, params.s)
    return mixed_norm_full(f, params.k) / (base ** (1 - params.delta) * hom**params.delta)


def check_anisotropic_GN(ensemble, params: InequalityParams, basis=None, ygrid=None) -> EnsembleReport:
    """GN ratio per member; members constant in y are skipped and counted.

    The maximizing member is re-evaluated at ``3 u``, and
    :class:`InequalityViolation` is raised if the ratio moves by more than 1e-12.
    """
    ratios, skipped, best = [], 0, None
    for f in _members(ensemble, basis, ygrid):
        if f.ygrid.d != params.d:
            raise ConfigurationError(f"params are for d = {params.d}, field has d = {f.ygrid.d}")
        r = gn_ratio(f, params)
        if math.isnan(r):
            skipped += 1
        elif best is None or r > best[0]:
            best = (r, f)
        ratios.append(r)
    rep = _report(ratios, skipped, ensemble)
    if best is not None:
        r3 = gn_ratio(best[1] * 3.0, params)
        if abs(r3 - best[0]) > 1e-12 * best[0]:
            raise InequalityViolation(f"GN ratio not scale invariant: {best[0]!r} vs {r3!r}")
    return rep


def z_embedding_range(d: int) -> tuple[float, float]:
    return 2.0, (math.inf if d == 2 else 2.0 * (d - 1) / (d - 2))


def check_Z_embedding(ensemble, k: float, basis=None, ygrid=None, d: int | None = None) -> EnsembleReport:
    """``||u||_{L^k_y L^inf_x} / ||u||_Z`` per member, for ``2 < k < 2(d-1)/(d-2)_+``."""
    ratios, skipped = [], 0
    checked = False
    if d is not None:
        _check_k(k, d)
        checked = True
    for f in _members(ensemble, basis, ygrid):
        if not checked:
            _check_k(k, f.ygrid.d)
            checked = True
        den = z_norm_full(f)
        if den == 0:
            ratios.append(np.nan)
            skipped += 1
            continue
        ratios.append(mixed_norm_full(f, k) / den)
    rep = _report(ratios, skipped, ensemble)
    if not math.isfinite(rep.max_ratio):
        raise InequalityViolation("L^k_y L^inf_x / Z ratio is not finite")
    return rep


def _check_k(k, d):
    lo, hi = z_embedding_range(d)
    if not lo < k < hi:
        raise ConfigurationError(f"k must lie in ({lo:g}, {hi:g}) for d = {d}, got {k}")
