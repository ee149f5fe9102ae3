import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confined_nls import ConfigurationError, PotentialSpec, XGrid, YGrid, build_eigenbasis, gaussian_field
from confined_nls.diagnostics import (
    MarginalDensity,
    MorawetzSeries,
    Weight,
    cube_mass_sup,
    current_marginal,
    decay_tracker,
    fractional_y_norm,
    is_admissible,
    marginal_density,
    morawetz_action,
    morawetz_bound,
    morawetz_monotonicity,
    morawetz_series,
    spacetime_norm,
)
from confined_nls.field import Field, mass
from confined_nls.propagator import linear_step


@pytest.fixture(scope="module")
def tiny_basis():
    return build_eigenbasis(PotentialSpec.harmonic(), XGrid(4.0, 32), 16)


def _random_phys(basis, ygrid, rng):
    shape = (basis.grid.N_x,) + ygrid.shape
    return Field(basis, ygrid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _direct_morawetz(f, weight):
    # O(N^2) double sum over transverse grid points
    yg = f.ygrid
    R = marginal_density(f).R.ravel()
    J = [j.ravel() for j in current_marginal(f)]
    pts = np.stack([np.broadcast_to(c, yg.shape).ravel() for c in yg.coords()], axis=1)
    diff = pts[:, None, :] - pts[None, :, :]
    r = np.sqrt(np.sum(diff**2, axis=-1))
    if weight == "abs":
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(r[..., None] > 0, diff / r[..., None], 0.0)
    else:
        g = diff / np.sqrt(1 + r**2)[..., None]
    total = sum(np.sum(g[..., k] * R[None, :] * J[k][:, None]) for k in range(yg.dim))
    return total * yg.cell**2


def test_marginal_integrates_to_mass(gaussian_small):
    assert marginal_density(gaussian_small).integral() == pytest.approx(mass(gaussian_small), rel=1e-12)


def test_current_of_boost(harmonic_small, ygrid_small):
    f = gaussian_field(harmonic_small, ygrid_small, amplitude=0.7, wy=2.0, momentum=0.5)
    (J,) = current_marginal(f)
    np.testing.assert_allclose(J, 0.5 * marginal_density(f).R, atol=1e-10)


@pytest.mark.parametrize("order", [0.5, 1.0, 1.5])
def test_fractional_norm_of_cosine(order):
    yg = YGrid(2, 5.0, 64)
    eta0 = 3 * math.pi / yg.L_y
    R = MarginalDensity(np.cos(eta0 * yg.ys), yg)
    expected = math.sqrt(yg.measure / 2) * eta0**order
    assert fractional_y_norm(R, order) == pytest.approx(expected, rel=1e-12)


def test_fractional_norm_zero_order_and_errors(gaussian_small):
    R = marginal_density(gaussian_small)
    assert fractional_y_norm(R, 0) == pytest.approx(math.sqrt(np.sum(R.R**2) * R.ygrid.cell))
    with pytest.raises(ConfigurationError):
        fractional_y_norm(R, -0.5)


@pytest.mark.parametrize("mu", [0.25, 0.6, 1.0, 3.0])
def test_cube_mass_brute_force(tiny_basis, rng, mu):
    yg = YGrid(2, 4.0, 32)
    f = _random_phys(tiny_basis, yg, rng)
    dens = np.abs(f.data) ** 2 * f.cell
    xs, ys = tiny_basis.grid.xs, yg.ys
    best = 0.0
    for i0 in range(len(xs)):
        xm = np.abs(xs - xs[i0]) <= mu + 1e-12
        for j0 in range(len(ys)):
            dyw = np.abs((ys - ys[j0] + yg.L_y) % (2 * yg.L_y) - yg.L_y)
            ym = dyw <= mu + 1e-12
            best = max(best, dens[np.ix_(xm, ym)].sum())
    assert cube_mass_sup(f, mu) == pytest.approx(best, rel=1e-12)


def test_cube_mass_3d_and_limits(tiny_basis, ygrid_3d, rng):
    f = _random_phys(tiny_basis, ygrid_3d, rng)
    assert cube_mass_sup(f, 100.0) == pytest.approx(mass(f), rel=1e-12)
    with pytest.raises(ConfigurationError):
        cube_mass_sup(f, 0.1)


def test_real_field_has_no_action(tiny_basis, rng):
    f = _random_phys(tiny_basis, YGrid(2, 4.0, 32), rng)
    real = f.replace(data=f.data.real.astype(complex))
    for w in Weight:
        assert abs(morawetz_action(real, w)) < 1e-14 * morawetz_bound(real)


@pytest.mark.parametrize("weight", ["abs", "japanese"])
def test_boost_has_no_action(harmonic_small, ygrid_small, weight):
    # J = p R and grad a is odd, so the double integral cancels
    f = gaussian_field(harmonic_small, ygrid_small, amplitude=0.7, wy=2.0, momentum=0.8)
    assert abs(morawetz_action(f, weight)) < 1e-12 * morawetz_bound(f)


@pytest.mark.parametrize("weight", ["abs", "japanese"])
@pytest.mark.parametrize("d", [2, 3])
def test_action_matches_double_sum(tiny_basis, rng, weight, d):
    yg = YGrid(d, 3.0, 16 if d == 2 else 8)
    f = _random_phys(tiny_basis, yg, rng)
    assert morawetz_action(f, weight) == pytest.approx(_direct_morawetz(f, weight), rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(list(Weight)), st.sampled_from([2, 3]))
def test_action_bounded(seed, weight, d):
    basis = _tiny()
    yg = YGrid(d, 3.0, 16 if d == 2 else 8)
    f = _random_phys(basis, yg, np.random.default_rng(seed))
    assert abs(morawetz_action(f, weight)) <= morawetz_bound(f)


_CACHE = {}


def _tiny():
    if "b" not in _CACHE:
        _CACHE["b"] = build_eigenbasis(PotentialSpec.harmonic(), XGrid(4.0, 16), 8)
    return _CACHE["b"]


def _series(values):
    t = np.arange(len(values), dtype=float)
    return MorawetzSeries(Weight.ABS, t, np.array(values), 0.0, 0.0, 1.0, np.ones(len(values)))


def test_monotonicity_rule():
    assert morawetz_monotonicity(_series([0.0, 0.1, 0.1, 0.3]), 1e-6)
    assert not morawetz_monotonicity(_series([0.0, 0.1, 0.05]), 1e-6)
    assert morawetz_monotonicity(_series([0.0, 0.1, 0.0999]), 1e-3)
    with pytest.raises(ConfigurationError):
        morawetz_monotonicity(_series([0.0]), 1e-6)


def test_series_on_free_flow(harmonic_small, ygrid_small):
    u = gaussian_field(harmonic_small, ygrid_small, amplitude=0.4, wy=1.5)
    snaps = [linear_step(u, t) for t in np.linspace(0, 2, 5)]
    s = morawetz_series(snaps, "abs", sigma=3.0)
    assert s.M_values[0] == pytest.approx(0.0, abs=1e-14)
    assert morawetz_monotonicity(s, 1e-10)
    assert s.frac_accum_series[0] == 0 and np.all(np.diff(s.frac_accum_series) > 0)
    assert s.cube_accum == s.cube_accum_series[-1]
    assert s.scale == pytest.approx(max(morawetz_bound(x) for x in snaps))
    with pytest.raises(ConfigurationError):
        morawetz_series([], "abs", 3.0)


@pytest.mark.parametrize("q,r,dim,ok", [(8, 4, 1, True), (4, 4, 1, False), (float("inf"), 2, 1, True), (4, 4, 2, True), (2, 4, 2, False)])
def test_admissibility(q, r, dim, ok):
    assert is_admissible(q, r, dim) is ok


def test_spacetime_norm_constant_profile(fine_gauss):
    snaps = [fine_gauss.replace(t=t) for t in np.linspace(0, 3, 7)]
    r = 4.0
    line = math.pi ** -0.25 * (2 * math.pi / r) ** (1 / (2 * r))
    out = spacetime_norm(snaps, 8, r)
    assert out.admissible
    assert float(out) == pytest.approx(3 ** (1 / 8) * line, rel=1e-10)
    sup = spacetime_norm(snaps, math.inf, 2)
    assert sup.value == pytest.approx(1.0, rel=1e-10)
    assert spacetime_norm(snaps[:1], 8, r).value == 0.0
    with pytest.raises(ConfigurationError):
        spacetime_norm([], 8, 4)
    with pytest.raises(ConfigurationError):
        spacetime_norm(snaps, 0.5, 4)


@pytest.fixture(scope="module")
def fine_gauss():
    basis = build_eigenbasis(PotentialSpec.harmonic(), XGrid(8.0, 128), 16)
    return gaussian_field(basis, YGrid(2, 64.0, 512))


def test_decay_rate_of_free_gaussian(fine_gauss):
    # ground state in x so only the transverse Gaussian evolves
    b, yg = fine_gauss.basis, fine_gauss.ygrid
    gy = math.pi**-0.25 * np.exp(-(yg.ys**2) / 2)
    u = Field(b, yg, (b.phi[:, 0][:, None] * gy[None]).astype(complex))
    snaps = [linear_step(u, t) for t in np.linspace(10, 20, 6)]
    fit = decay_tracker(snaps, 4.0)
    # |u(t)| is a Gaussian of width sqrt(1 + t^2), so the slope tends to -(1/2 - 1/r)
    t = fit.times
    w = np.sqrt(1 + t**2)
    exact = np.polyfit(np.log(t), -0.25 * np.log(w), 1)[0]
    assert fit.slope == pytest.approx(exact, abs=1e-6)
    assert fit.expected_rate == pytest.approx(0.25)


def test_decay_argument_checks(fine_gauss, ygrid_3d, tiny_basis):
    snaps = [fine_gauss.replace(t=t) for t in (0.0, 1.0, 2.0)]
    with pytest.raises(ConfigurationError):
        decay_tracker(snaps, 2.0)
    with pytest.raises(ConfigurationError):
        decay_tracker(snaps, 4.0)
    with pytest.raises(ConfigurationError):
        decay_tracker(snaps, 4.0, window=(5.0, 6.0))
    assert decay_tracker(snaps, 4.0, window=(1.0, 2.0)).slope == pytest.approx(0.0, abs=1e-12)
    g3 = gaussian_field(tiny_basis, ygrid_3d)
    with pytest.raises(ConfigurationError):
        decay_tracker([g3.replace(t=1.0), g3.replace(t=2.0)], 6.0)
