import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confined_nls import ConfigurationError, PotentialSpec, XGrid, YGrid, build_eigenbasis
from confined_nls.field import Field
from confined_nls.inequalities import (
    EnsembleSpec,
    Generator,
    InequalityParams,
    anisotropic_norm,
    bx_l2y_norm,
    check_anisotropic_GN,
    check_B_embedding,
    check_H_gamma_s_embedding,
    check_Z_embedding,
    ensemble_fields,
    gn_ratio,
    h1x_l2y_norm,
    z_embedding_range,
    z_norm_full,
)


@pytest.fixture(scope="module")
def free_basis():
    return build_eigenbasis(PotentialSpec.zero(), XGrid(4.0, 63), 16)


@pytest.fixture(scope="module")
def yg():
    return YGrid(2, 8.0, 32)


def _sine_mode(basis, yg, k, m):
    L = basis.grid.L_x
    sx = np.sin(k * np.pi * (basis.grid.xs + L) / (2 * L))
    wave = np.exp(1j * m * np.pi * yg.ys / yg.L_y)
    return Field(basis, yg, sx[:, None] * wave[None])


@pytest.mark.parametrize("k", [1, 3, 10, 40])
def test_B_ratio_closed_form_for_free_box(free_basis, yg, k):
    # sine modes diagonalise the stencil: ||D u||^2 = 2 lam ||u||^2
    f = _sine_mode(free_basis, yg, k, 2)
    N, dx = free_basis.grid.N_x, free_basis.grid.dx
    lam = (1 - math.cos(k * math.pi / (N + 1))) / dx**2
    rep = check_B_embedding([f])
    assert rep.max_ratio == pytest.approx(math.sqrt((1 + 2 * lam) / (1 + lam)), rel=1e-12)
    assert h1x_l2y_norm(f) ** 2 == pytest.approx((1 + 2 * lam) * bx_l2y_norm(f) ** 2 / (1 + lam), rel=1e-12)


def test_anisotropic_norm_of_sine_mode(free_basis, yg):
    k, m, s, gamma = 5, 3, 0.7, 0.3
    f = _sine_mode(free_basis, yg, k, m)
    l2 = math.sqrt(np.sum(np.abs(f.data) ** 2) * f.cell)
    xi = k * math.pi / (2 * free_basis.grid.L_x)
    eta = m * math.pi / yg.L_y
    expected = (1 + xi**2) ** (s / 2) * (1 + eta**2) ** (gamma / 2) * l2
    assert anisotropic_norm(f, gamma, s) == pytest.approx(expected, rel=1e-12)
    hom = anisotropic_norm(f, gamma, s, homogeneous=True)
    assert hom == pytest.approx((1 + xi**2) ** (s / 2) * eta**gamma * l2, rel=1e-12)


def test_z_norm_full_of_sine_mode(free_basis, yg):
    f = _sine_mode(free_basis, yg, 2, 1)
    eta = math.pi / yg.L_y
    l2sq = np.sum(np.abs(f.data) ** 2) * f.cell
    assert z_norm_full(f) ** 2 == pytest.approx(bx_l2y_norm(f) ** 2 + eta**2 * l2sq, rel=1e-12)


def test_params_delta_and_validation():
    p = InequalityParams.from_epsilon(4, 0.1)
    assert (p.s, p.gamma) == pytest.approx((0.6, 0.4))
    assert p.delta == pytest.approx(0.625)
    assert InequalityParams(k=4, s=0.6, gamma=0.8, d=3).delta == pytest.approx(2 * 0.25 / 0.8)
    for kw in (dict(k=4, s=0.5, gamma=0.4), dict(k=2, s=0.6, gamma=0.4), dict(k=20, s=0.6, gamma=0.4),
               dict(k=4, s=0.6, gamma=0.6)):
        with pytest.raises(ConfigurationError):
            InequalityParams(**kw)
    with pytest.raises(ConfigurationError):
        InequalityParams.from_epsilon(4, 0.5)
    assert InequalityParams.from_mapping({"k": 4, "epsilon": 0.1}) == p
    with pytest.raises(ConfigurationError):
        InequalityParams.from_mapping({"k": 4, "s": 0.6})


def test_z_embedding_range():
    assert z_embedding_range(2) == (2.0, math.inf)
    assert z_embedding_range(3) == (2.0, 4.0)


def test_ensemble_spec_validation():
    with pytest.raises(ConfigurationError):
        EnsembleSpec(0)
    with pytest.raises(ConfigurationError):
        EnsembleSpec(3, generator="Brownian")
    with pytest.raises(ConfigurationError):
        EnsembleSpec.from_mapping({"seed": 2})
    spec = EnsembleSpec.from_mapping({"count": 4, "seed": 2, "generator": "Translates", "width_y": 1.0})
    assert spec.generator is Generator.TRANSLATES and spec.options == {"width_y": 1.0}


@pytest.mark.parametrize("gen", list(Generator))
def test_ensembles_are_deterministic(harmonic_small, yg, gen):
    spec = EnsembleSpec(3, seed=11, generator=gen)
    a = [f.data for f in ensemble_fields(spec, harmonic_small, yg)]
    b = [f.data for f in ensemble_fields(spec, harmonic_small, yg)]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a[0], a[1])


def test_grf_does_not_depend_on_resolution():
    coarse_b = build_eigenbasis(PotentialSpec.harmonic(), XGrid(6.0, 63), 8)
    fine_b = build_eigenbasis(PotentialSpec.harmonic(), XGrid(6.0, 127), 8)
    spec = EnsembleSpec(2, seed=5)
    coarse = list(ensemble_fields(spec, coarse_b, YGrid(2, 16.0, 64)))
    fine = list(ensemble_fields(spec, fine_b, YGrid(2, 16.0, 128)))
    for c, f in zip(coarse, fine):
        np.testing.assert_allclose(f.data[1::2, ::2], c.data, atol=1e-12)


def test_grf_too_coarse(harmonic_small):
    with pytest.raises(ConfigurationError):
        list(ensemble_fields(EnsembleSpec(1, options={"corr_y": 0.05}), harmonic_small, YGrid(2, 8.0, 16)))


def test_B_ratio_below_sqrt2(harmonic_small, yg):
    rep = check_B_embedding(EnsembleSpec(8, seed=3), harmonic_small, yg)
    # the potential term can make B_x the larger norm, so only the upper bound holds
    assert 0 < rep.max_ratio <= math.sqrt(2)
    assert rep.argmax_seed == [3, rep.argmax]
    with pytest.raises(ConfigurationError):
        check_B_embedding(EnsembleSpec(2))


def test_zero_members_are_skipped(harmonic_small, yg):
    z = Field(harmonic_small, yg, np.zeros((harmonic_small.grid.N_x,) + yg.shape, complex))
    rep = check_B_embedding([z, z])
    assert rep.skipped == 2 and rep.argmax == -1
    assert check_Z_embedding([z], 4.0).skipped == 1


def test_union_max(harmonic_small, yg):
    a = list(ensemble_fields(EnsembleSpec(4, seed=1), harmonic_small, yg))
    b = list(ensemble_fields(EnsembleSpec(4, seed=2, generator="Translates"), harmonic_small, yg))
    for check in (lambda e: check_B_embedding(e), lambda e: check_H_gamma_s_embedding(e, 0.2),
                  lambda e: check_Z_embedding(e, 6.0)):
        assert check(a + b).max_ratio == max(check(a).max_ratio, check(b).max_ratio)


def test_gn_skips_constant_in_y(harmonic_small, yg):
    p = InequalityParams.from_epsilon(4, 0.1)
    flat = Field(harmonic_small, yg, np.repeat(harmonic_small.phi[:, :1], yg.N_y, axis=1).astype(complex))
    assert math.isnan(gn_ratio(flat, p))
    members = [flat] + list(ensemble_fields(EnsembleSpec(3), harmonic_small, yg))
    rep = check_anisotropic_GN(members, p)
    assert rep.skipped == 1 and rep.argmax != 0
    with pytest.raises(ConfigurationError):
        check_anisotropic_GN(members, InequalityParams.from_epsilon(4, 0.1, d=3))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 10.0))
def test_gn_ratio_scale_invariant(seed, c):
    basis, yg = _small()
    p = InequalityParams.from_epsilon(4, 0.2)
    f = next(ensemble_fields(EnsembleSpec(1, seed=seed, generator="EigenmodeMixture"), basis, yg))
    assert gn_ratio(f * c, p) == pytest.approx(gn_ratio(f, p), rel=1e-12)


_CACHE = {}


def _small():
    if not _CACHE:
        _CACHE["v"] = (build_eigenbasis(PotentialSpec.harmonic(), XGrid(6.0, 48), 16), YGrid(2, 8.0, 32))
    return _CACHE["v"]


def test_z_embedding_k_range(harmonic_small, ygrid_3d):
    with pytest.raises(ConfigurationError):
        check_Z_embedding([], 2.0, d=2)
    with pytest.raises(ConfigurationError):
        check_Z_embedding(EnsembleSpec(1), 5.0, harmonic_small, ygrid_3d)
    rep = check_Z_embedding(EnsembleSpec(2, options={"corr_y": 4.0}), 3.0, harmonic_small, ygrid_3d)
    assert np.all(np.isfinite(rep.ratios))


def test_ratios_stable_under_refinement():
    coarse = (build_eigenbasis(PotentialSpec.harmonic(), XGrid(8.0, 127), 16), YGrid(2, 16.0, 128))
    fine = (build_eigenbasis(PotentialSpec.harmonic(), XGrid(8.0, 255), 16), YGrid(2, 16.0, 256))
    spec = EnsembleSpec(4, seed=9)
    for check in (lambda b, y: check_Z_embedding(spec, 6.0, b, y), lambda b, y: check_H_gamma_s_embedding(spec, 0.2, b, y)):
        r0, r1 = check(*coarse).max_ratio, check(*fine).max_ratio
        assert r1 == pytest.approx(r0, rel=1e-2)
