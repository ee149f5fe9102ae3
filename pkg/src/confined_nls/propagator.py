"""Strang splitting between the exact linear group exp(-itH) and the exact nonlinear flow.

H = -1/2 Laplacian + V(x) is diagonal in the mixed spectral representation:
coefficient ``(n, eta)`` evolves by ``exp(-i t (lambda_n - C0 + |eta|^2 / 2))``. The
nonlinear sub-problem ``i u_t = |u|^{2 sigma} u`` conserves ``|u|`` pointwise and is
solved exactly by a phase rotation in physical space.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .eigenbasis import EigenBasis, XGrid, build_eigenbasis, warn_if_leaky
from .errors import BlowUpError, ConfigurationError, NLSWarning
from .field import (
    Field,
    YGrid,
    as_physical,
    as_spectral,
    gaussian_field,
    lebesgue_norm,
    norms,
)
from .potential import PotentialSpec


@dataclass(frozen=True)
class SimConfig:
    d: int = 2
    sigma: float = 3.0
    dt: float = 0.01
    t_end: float = 1.0
    potential: PotentialSpec = field(default_factory=PotentialSpec.harmonic)
    xgrid: XGrid = field(default_factory=lambda: XGrid(10.0, 512))
    ygrid: YGrid = field(default_factory=lambda: YGrid(2, 64.0, 1024))
    n_modes: int | None = None
    output_every: int = 10
    seed: int = 0
    nonlinear: bool = True
    datum: dict = field(default_factory=lambda: {"kind": "gaussian", "amplitude": 0.3})

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ConfigurationError(f"d must be 2 or 3, got {self.d}")
        if self.ygrid.d != self.d:
            raise ConfigurationError(f"y-grid dimension {self.ygrid.d} does not match d = {self.d}")
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be > 0, got {self.sigma}")
        if self.d == 3 and not self.sigma < 2:
            raise ConfigurationError(f"sigma must be < 2/(d-2) = 2 for d = 3, got {self.sigma}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be a positive number, got {self.dt}")
        if not math.isfinite(self.t_end):
            raise ConfigurationError("t_end must be finite")
        if int(self.output_every) != self.output_every or self.output_every < 1:
            raise ConfigurationError(f"output_every must be an integer >= 1, got {self.output_every}")
        if self.n_modes is not None and not 1 <= self.n_modes <= self.xgrid.N_x:
            raise ConfigurationError(f"n_modes must lie in [1, N_x], got {self.n_modes}")

    @property
    def modes(self) -> int:
        return self.xgrid.N_x // 2 if self.n_modes is None else int(self.n_modes)

    def build_basis(self) -> EigenBasis:
        return build_eigenbasis(self.potential, self.xgrid, self.modes)

    def initial_field(self, basis: EigenBasis) -> Field:
        datum = dict(self.datum)
        kind = datum.pop("kind", "gaussian")
        if kind == "gaussian":
            allowed = {"amplitude", "x0", "y0", "wx", "wy", "momentum"}
            unknown = set(datum) - allowed
            if unknown:
                raise ConfigurationError(f"unknown gaussian datum keys: {sorted(unknown)}")
            return gaussian_field(basis, self.ygrid, **datum)
        if kind == "zero":
            return gaussian_field(basis, self.ygrid, amplitude=0.0)
        raise ConfigurationError(f"unknown datum kind {kind!r}")

    def advisories(self, basis: EigenBasis | None = None) -> list[str]:
        notes = []
        if self.sigma <= 2.0 / (self.d - 1):
            notes.append(
                f"sigma = {self.sigma:g} <= 2/(d-1) = {2.0 / (self.d - 1):g}: "
                "outside the short-range regime, no scattering guarantee"
            )
        if basis is not None:
            phase = self.dt * max_phase_rate(basis, self.ygrid)
            if phase >= np.pi:
                notes.append(
                    f"dt * max spectral phase rate = {phase:.3g} >= pi (time aliasing of the stiffest modes)"
                )
        return notes

    @classmethod
    def from_mapping(cls, cfg: dict, base_dir=None) -> "SimConfig":
        cfg = dict(cfg)
        known = {
            "d", "sigma", "dt", "t_end", "potential", "x", "y", "n_modes",
            "output_every", "seed", "nonlinear", "datum",
        }
        unknown = set(cfg) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        d = int(cfg.get("d", 2))
        x = dict(cfg.get("x", {}))
        y = dict(cfg.get("y", {}))
        kwargs = {k: cfg[k] for k in ("sigma", "dt", "t_end", "n_modes", "output_every", "seed", "nonlinear") if k in cfg}
        for key in ("sigma", "dt", "t_end"):
            if key in kwargs:
                kwargs[key] = float(kwargs[key])
        datum = dict(cfg.get("datum", {"kind": "gaussian", "amplitude": 0.3}))
        datum.setdefault("kind", "gaussian")
        try:
            return cls(
                d=d,
                potential=PotentialSpec.from_config(cfg.get("potential", {"kind": "harmonic"}), base_dir),
                xgrid=XGrid(float(x.get("L", 10.0)), int(x.get("N", 512))),
                ygrid=YGrid(d, float(y.get("L", 64.0)), int(y.get("N", 1024))),
                datum=datum,
                **kwargs,
            )
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_mapping(self) -> dict:
        return {
            "d": self.d,
            "sigma": self.sigma,
            "dt": self.dt,
            "t_end": self.t_end,
            "n_modes": self.modes,
            "output_every": int(self.output_every),
            "seed": self.seed,
            "nonlinear": bool(self.nonlinear),
            "potential": self.potential.to_config(),
            "x": {"L": self.xgrid.L_x, "N": self.xgrid.N_x},
            "y": {"L": self.ygrid.L_y, "N": self.ygrid.N_y},
            "datum": dict(self.datum),
        }


def max_phase_rate(basis: EigenBasis, ygrid: YGrid) -> float:
    lam = basis.eigenvalues - basis.C0
    return float(np.max(np.abs(lam)) + np.max(ygrid.eta_sq()) / 2)


def grid_horizon(ygrid: YGrid) -> float:
    """``L_y / v_max`` with ``v_max = pi / dy``, the fastest resolvable group velocity."""
    return ygrid.L_y / ygrid.max_group_velocity


def dispersion_horizon(u0: Field, sigma: float | None = None) -> float:
    """Time at which the free-flow RMS transverse radius of ``u0`` reaches ``L_y / 2``.

    Uses the exact free-flow moment law ``<|y|^2>(t) = A + 2 t B + t^2 K`` with
    ``A = ||y u||^2``, ``B = int y . Im(conj(u) grad_y u)`` and ``K = ||grad_y u||^2``.
    With ``sigma`` given, ``K`` is enlarged by ``(2 + 2 (d-1) sigma)/(sigma+1) ||u||^{2 sigma+2}``,
    an allowance for nonlinear energy released into transverse motion.
    """
    phys = as_physical(u0)
    spec = as_spectral(u0)
    yg = u0.ygrid
    m = float(np.sum(np.abs(phys.data) ** 2) * phys.cell)
    if m == 0:
        return math.inf
    a = float(np.sum(yg.radius_sq() * np.abs(phys.data) ** 2) * phys.cell)
    k = float(np.sum(yg.eta_sq() * np.abs(spec.data) ** 2))
    b = 0.0
    for c, grad in zip(yg.coords(), _grad_y(phys)):
        b += float(np.sum(c * np.imag(np.conj(phys.data) * grad)) * phys.cell)
    if sigma is not None:
        pot = float(np.sum(np.abs(phys.data) ** (2 * sigma + 2)) * phys.cell)
        k += (2 + 2 * (yg.dim) * sigma) / (sigma + 1) * pot
    target = m * (yg.L_y / 2) ** 2
    if a >= target:
        return 0.0
    if k == 0:
        return math.inf
    return float((-b + math.sqrt(b * b + k * (target - a))) / k)


def _grad_y(phys: Field):
    import scipy.fft as sfft

    yg = phys.ygrid
    hat = sfft.fftn(phys.data, axes=yg.axes)
    return [sfft.ifftn(1j * eta[None] * hat, axes=yg.axes) for eta in yg.frequencies()]


def linear_phases(basis: EigenBasis, ygrid: YGrid, tau: float):
    """Separable factors of exp(-i tau H) in the spectral representation."""
    px = np.exp(-1j * tau * (basis.eigenvalues - basis.C0))
    py = np.exp(-0.5j * tau * ygrid.eta_sq())
    return px.reshape((-1,) + (1,) * ygrid.dim), py[None]


def linear_step(f: Field, tau: float) -> Field:
    """Exact linear flow exp(-i tau H); returns a spectral field at time ``t + tau``."""
    spec = as_spectral(f)
    if tau == 0:
        return spec
    px, py = linear_phases(f.basis, f.ygrid, tau)
    return spec.replace(data=spec.data * px * py, t=f.t + tau)


def nonlinear_phase(values: np.ndarray, tau: float, sigma: float) -> np.ndarray:
    dens = values.real**2 + values.imag**2
    p = dens ** int(sigma) if float(sigma).is_integer() else dens**sigma
    return values * np.exp(-1j * tau * p)


def nonlinear_step(f: Field, tau: float, sigma: float) -> Field:
    """Exact flow of ``i u_t = |u|^{2 sigma} u`` over ``tau``; returns a physical field."""
    phys = as_physical(f)
    return phys.replace(data=nonlinear_phase(phys.data, tau, sigma), t=f.t + tau)


def strang_step(f: Field, dt: float, sigma: float, nonlinear: bool = True) -> Field:
    """``L(dt/2) N(dt) L(dt/2)``; with ``nonlinear=False`` this is ``L(dt)`` exactly."""
    if not nonlinear:
        return linear_step(f, dt)
    half = linear_step(f, dt / 2)
    mid = nonlinear_step(half, dt, sigma)
    out = linear_step(mid.replace(t=half.t), dt / 2)
    return out.replace(t=f.t + dt)


Observer = Callable[[int, Field], "dict | None"]


@dataclass
class TrajectoryRecord:
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: Field | None = None
    steps: int = 0
    warnings: list = field(default_factory=list)

    def column(self, name) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    def to_csv(self, path) -> Path:
        path = Path(path)
        keys = []
        for row in self.rows:
            keys.extend(k for k in row if k not in keys)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(keys)
            for row in self.rows:
                w.writerow([_fmt(row.get(k, "")) for k in keys])
        return path


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating, int, np.integer)) else v


def diagnostics_row(f: Field, sigma: float) -> dict:
    rep = norms(f, sigma)
    row = {
        "t": f.t,
        "mass": rep.mass,
        "energy": rep.energy,
        "Z_norm": rep.Z_norm,
        "L4_norm": lebesgue_norm(f, 4),
    }
    row.update(
        Ztilde_norm=rep.Ztilde_norm,
        sqrtM_norm=rep.sqrtM_norm,
        grad_y_norm=rep.grad_y_norm,
        y_moment=rep.y_moment,
    )
    return row


def evolve(
    f: Field,
    cfg: SimConfig,
    observers: Sequence[Observer] = (),
    keep_snapshots: bool = False,
    record: bool = True,
) -> TrajectoryRecord:
    """Advance ``f`` from ``f.t`` to ``cfg.t_end`` by Strang steps of size ``cfg.dt``.

    Every ``cfg.output_every`` steps (and at both ends) a diagnostics row is
    recorded and each observer is called with ``(step, field)``; a returned dict
    is merged into that row. The last step is shortened to land on ``t_end``.
    """
    if f.ygrid != cfg.ygrid or f.xgrid != cfg.xgrid:
        raise ConfigurationError("field grids do not match the configuration")
    t0 = f.t
    span = cfg.t_end - t0
    if span < -1e-12 * max(1.0, abs(t0)):
        raise ConfigurationError(f"t_end = {cfg.t_end} precedes the field time {t0}")
    n_full = int(math.floor(span / cfg.dt + 1e-9)) if span > 0 else 0
    tail = span - n_full * cfg.dt
    n_steps = n_full + (1 if tail > 1e-9 * cfg.dt else 0)

    out = TrajectoryRecord()
    cur = as_spectral(f) if n_steps else f

    def emit(step, fld):
        if record:
            row = diagnostics_row(fld, cfg.sigma)
            for obs in observers:
                extra = obs(step, fld)
                if extra:
                    row.update(extra)
            out.times.append(fld.t)
            out.rows.append(row)
        elif observers:
            for obs in observers:
                obs(step, fld)
        if keep_snapshots:
            out.snapshots.append(fld)

    emit(0, cur)
    for step in range(1, n_steps + 1):
        h = cfg.dt if step <= n_full else tail
        cur = strang_step(cur, h, cfg.sigma, cfg.nonlinear)
        cur = cur.replace(t=cfg.t_end if step == n_steps else t0 + step * cfg.dt)
        if not np.isfinite(cur.data).all():
            raise BlowUpError(cur.t)
        if step % cfg.output_every == 0 or step == n_steps:
            emit(step, cur)
    out.final = cur
    out.steps = n_steps
    return out


def run_config(cfg: SimConfig, keep_snapshots=False):
    """Build the basis and datum for ``cfg`` and evolve; advisories become warnings."""
    basis = cfg.build_basis()
    warn_if_leaky(basis)
    for note in cfg.advisories(basis):
        warnings.warn(note, NLSWarning, stacklevel=2)
    u0 = cfg.initial_field(basis)
    return basis, u0, evolve(u0, cfg, keep_snapshots=keep_snapshots)


def with_t_end(cfg: SimConfig, t_end: float) -> SimConfig:
    return replace(cfg, t_end=float(t_end))
