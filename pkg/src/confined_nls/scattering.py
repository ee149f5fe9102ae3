"""Asymptotic states from a checkpoint ladder, and wave operators by Picard iteration.

Both work in the interaction picture ``v(t) = exp(itH) u(t)``, where the linear
flow is the identity and only the nonlinearity moves the state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceError, HorizonError, NLSWarning
from .field import Field, Representation, as_physical, as_spectral, norms
from .propagator import (
    SimConfig,
    dispersion_horizon,
    evolve,
    grid_horizon,
    linear_step,
    with_t_end,
)


def interaction_picture(f: Field) -> Field:
    """``exp(i t H) f`` for a field at time ``t``; the result carries ``t = 0``."""
    return linear_step(f, -f.t).replace(t=0.0)


def _norm(f: Field, kind: str) -> float:
    rep = norms(f)
    if kind == "Z":
        return rep.Z_norm
    if kind == "Ztilde":
        return rep.Ztilde_norm
    if kind == "L2":
        return math.sqrt(rep.mass)
    raise ConfigurationError(f"unknown norm {kind!r}; use 'Z', 'Ztilde' or 'L2'")


def _check_horizon(u: Field, sigma, t_span: float, what: str):
    horizon = dispersion_horizon(u, sigma)
    if t_span > horizon * (1 + 1e-12):
        raise HorizonError(
            f"{what} spans {t_span:g}, beyond the dispersion horizon {horizon:.4g} of this datum",
            horizon,
        )
    gh = grid_horizon(u.ygrid)
    if t_span > gh:
        warnings.warn(
            f"{what} spans {t_span:g}, beyond the grid horizon L_y/v_max = {gh:.4g}; "
            "unresolved high frequencies may wrap around the periodic box",
            NLSWarning,
            stacklevel=3,
        )
    return horizon


@dataclass
class ScatterReport:
    times: np.ndarray
    increments: np.ndarray
    tail_estimate: float
    u_plus: Field
    converged: bool
    norm: str = "Z"
    horizon: float = math.inf
    masses: dict = field(default_factory=dict)

    def rows(self):
        """``(t_{k+1}, increment)`` pairs, the increment ending at each checkpoint."""
        return [(float(t), float(a)) for t, a in zip(self.times[1:], self.increments)]


def _geometric_tail(incs: np.ndarray, floor: float = 0.0) -> float:
    """``a_n q / (1 - q)``; increments at or below ``floor`` count as zero."""
    if len(incs) == 0:
        return 0.0
    last = float(incs[-1])
    if last <= floor:
        return 0.0
    if len(incs) < 2 or incs[-2] == 0:
        return math.inf
    q = last / float(incs[-2])
    return last * q / (1 - q) if q < 1 else math.inf


def detect_asymptotic_state(cfg: SimConfig, u0: Field, checkpoints, tol=1e-3, norm="Z") -> ScatterReport:
    """Evolve ``u0`` through increasing ``checkpoints`` and measure the Cauchy increments of ``v``.

    Converged means the last increment and the geometric tail extrapolation
    ``a_n q / (1 - q)``, ``q = a_n / a_{n-1}``, are both below ``tol``. A last
    increment within a thousand ulps of ``||u0||`` has no usable ratio and gives
    a zero tail.
    """
    ts = np.asarray(checkpoints, dtype=float)
    if ts.ndim != 1 or len(ts) == 0:
        raise ConfigurationError("checkpoints must be a non-empty 1-d sequence")
    if np.any(np.diff(ts) <= 0) or ts[0] <= u0.t:
        raise ConfigurationError("checkpoints must be strictly increasing and later than the datum time")
    _norm(u0, norm)
    if cfg.nonlinear and cfg.sigma <= 2.0 / (cfg.d - 1):
        warnings.warn(
            f"sigma = {cfg.sigma:g} <= 2/(d-1): asymptotic completeness is not expected to hold",
            NLSWarning,
            stacklevel=2,
        )
    horizon = _check_horizon(u0, cfg.sigma if cfg.nonlinear else None, ts[-1] - u0.t, "checkpoint ladder")

    cur = as_spectral(u0)
    vs = []
    for tk in ts:
        cur = evolve(cur, with_t_end(cfg, tk), record=False).final
        vs.append(interaction_picture(cur))
    incs = np.array([_norm(b - a, norm) for a, b in zip(vs[:-1], vs[1:])])
    # differences this small are rounding noise of the unitary steps
    floor = 1e3 * np.finfo(float).eps * _norm(u0, norm)
    tail = _geometric_tail(incs, floor)
    last = float(incs[-1]) if len(incs) else 0.0
    converged = bool(last < tol and tail < tol)
    masses = {"u0": norms(u0).mass, "u_plus": norms(vs[-1]).mass}
    return ScatterReport(ts, incs, tail, vs[-1], converged, norm, horizon, masses)


@dataclass
class WaveOpResult:
    u_at_minus_T: Field
    picard_residuals: np.ndarray
    iterations: int
    oracle_discrepancy: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def contraction_ratios(self) -> np.ndarray:
        r = self.picard_residuals
        with np.errstate(divide="ignore", invalid="ignore"):
            return r[1:] / r[:-1]


def _slab_sweep(slab, u_minus, times, dt, basis, ygrid, sigma):
    """One Picard sweep, in place; returns the max L^2 change over the slab.

    ``slab[k]`` holds ``w(t_k) = exp(i t_k H) u(t_k)`` in spectral form, and the
    update is ``w(t_k) = u_minus - i int_{t_0}^{t_k} exp(i s H) N(exp(-i s H) w(s)) ds``
    with the trapezoid rule; sample ``k`` of the integrand only needs the old
    ``w(t_k)``, so a running sum allows overwriting the slab as it is swept.
    """
    acc = np.zeros_like(u_minus)
    prev = None
    worst = 0.0
    for k, tk in enumerate(times):
        w = Field(basis, ygrid, slab[k], Representation.SPECTRAL, 0.0)
        u = as_physical(linear_step(w, tk))
        dens = u.data.real**2 + u.data.imag**2
        p = dens ** int(sigma) if float(sigma).is_integer() else dens**sigma
        g = linear_step(u.replace(data=p * u.data), -tk).data
        if prev is not None:
            acc += (0.5 * dt) * (prev + g)
        prev = g
        new = u_minus - 1j * acc
        worst = max(worst, math.sqrt(float(np.sum(np.abs(new - slab[k]) ** 2))))
        slab[k] = new
    return worst


def wave_operator(
    u_minus: Field,
    T_far: float,
    T_near: float,
    dt: float,
    max_iter: int = 50,
    tol: float = 1e-11,
    *,
    sigma: float = 3.0,
    nonlinear: bool = True,
    oracle: bool = True,
    memory_limit: float = 3.0e9,
) -> WaveOpResult:
    """Fixed point of the negative-time Duhamel map on the slab ``[-T_far, -T_near]``.

    Picard iterates start from the free flow ``exp(-itH) u_minus``; the residual of
    a sweep is the max over slab times of the L^2 change. ``oracle_discrepancy``
    compares ``u(-T_near)`` with a direct Strang run seeded at ``-T_far`` with
    ``exp(i T_far H) u_minus`` (NaN when ``oracle=False``).

    Raises :class:`ConvergenceError` after ``max_iter`` sweeps; its ``reason`` is
    ``"stagnation"`` when the residuals stopped contracting above ``tol``
    (quadrature grid too coarse for ``tol``) and ``"max_iter"`` otherwise. A
    residual that overflows or grows a thousandfold raises at once with
    ``reason="divergence"``.
    """
    if not T_far > T_near > 0:
        raise ConfigurationError(f"need T_far > T_near > 0, got T_far={T_far}, T_near={T_near}")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if max_iter < 1:
        raise ConfigurationError("max_iter must be >= 1")
    n = (T_far - T_near) / dt
    K = int(round(n))
    if abs(n - K) > 1e-6 * max(1.0, n) or K < 1:
        raise ConfigurationError(f"(T_far - T_near) / dt = {n:g} must be a positive integer")
    d = u_minus.ygrid.d
    if nonlinear and sigma < 2.0 / (d - 1):
        warnings.warn(
            f"sigma = {sigma:g} < 2/(d-1): outside the regime where wave operators exist in Z",
            NLSWarning,
            stacklevel=2,
        )
    _check_horizon(u_minus, sigma if nonlinear else None, T_far, "wave-operator slab")
    spec0 = as_spectral(u_minus.replace(t=0.0))
    nbytes = (K + 1) * spec0.data.nbytes
    if nbytes > memory_limit:
        raise ConfigurationError(
            f"time slab needs {nbytes / 1e9:.2f} GB (> {memory_limit / 1e9:.2f} GB); coarsen the grids or dt"
        )

    times = -T_far + dt * np.arange(K + 1)
    times[-1] = -T_near
    basis, ygrid = u_minus.basis, u_minus.ygrid
    um = np.ascontiguousarray(spec0.data)
    slab = np.empty((K + 1,) + um.shape, dtype=complex)
    slab[:] = um

    residuals = []
    if not nonlinear or not np.any(um):
        residuals.append(0.0)
    else:
        for _ in range(max_iter):
            with np.errstate(over="ignore", invalid="ignore"):
                residuals.append(_slab_sweep(slab, um, times, dt, basis, ygrid, sigma))
            if residuals[-1] <= tol:
                break
            if not math.isfinite(residuals[-1]) or residuals[-1] > 1e3 * max(residuals[0], tol):
                raise ConvergenceError(
                    f"Picard iteration diverged after {len(residuals)} sweeps; the datum is too large "
                    "for the slab to be a contraction",
                    np.array(residuals),
                    "divergence",
                )
        else:
            r = np.array(residuals)
            tail = r[-4:]
            stalled = len(tail) >= 3 and np.all(tail[1:] / tail[:-1] > 0.9)
            raise ConvergenceError(
                f"Picard iteration did not reach tol={tol:g} in {max_iter} sweeps (last residual {r[-1]:.3g})",
                r,
                "stagnation" if stalled else "max_iter",
            )

    w_near = Field(basis, ygrid, slab[-1].copy(), spec0.rep, 0.0)
    u_near = linear_step(w_near, -T_near)
    del slab

    discrepancy = math.nan
    if oracle:
        cfg = SimConfig(
            d=d,
            sigma=sigma,
            dt=dt,
            t_end=-T_near,
            potential=basis.spec,
            xgrid=basis.grid,
            ygrid=ygrid,
            n_modes=basis.n_modes,
            output_every=max(K, 1),
            nonlinear=nonlinear,
        )
        start = linear_step(spec0, -T_far)
        direct = evolve(start, cfg, record=False).final
        discrepancy = math.sqrt(norms(u_near - direct).mass)
    return WaveOpResult(u_near, np.array(residuals), len(residuals), discrepancy, times[[0, -1]])
