import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confined_nls import ConfigurationError, PotentialKind, PotentialSpec, eval_potential, lower_bound_constant
from confined_nls.potential import load_tabulated


@pytest.mark.parametrize(
    "spec, x, expected",
    [
        (PotentialSpec.harmonic(1.0), 2.0, 2.0),
        (PotentialSpec.harmonic(3.0), 1.0, 1.5),
        (PotentialSpec.zero(), 7.3, 0.0),
        (PotentialSpec.exponential(1.0), 0.0, 1.0),
        (PotentialSpec.exponential(2.0), -1.0, np.exp(2.0)),
        (PotentialSpec.power_law(4, 0.5), 2.0, 8.0),
        (PotentialSpec.bounded_well(-3.0, 1.0), 0.5, -3.0),
        (PotentialSpec.bounded_well(-3.0, 1.0), 2.0, 0.0),
    ],
)
def test_closed_form_values(spec, x, expected):
    xs = np.array([x - 1.0, x]) if x > -1 else np.array([x, x + 1.0])
    val = eval_potential(spec, xs)[1 if x > -1 else 0]
    assert val == pytest.approx(expected, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize(
    "spec, expected",
    [
        (PotentialSpec.harmonic(1.0), 0.0),
        (PotentialSpec.bounded_well(-3.0, 1.0), 3.0),
        (PotentialSpec.tabulated([1.0, 5.0, 2.0]), 0.0),
        (PotentialSpec.tabulated([-1.0, 5.0, -2.5]), 2.5),
    ],
)
def test_lower_bound_constant(spec, expected):
    xs = np.linspace(-2, 2, 3)
    assert lower_bound_constant(spec, xs) == expected


def test_tabulated_length_mismatch():
    with pytest.raises(ConfigurationError):
        eval_potential(PotentialSpec.tabulated([1.0, 2.0]), np.linspace(0, 1, 3))


@pytest.mark.parametrize("xs", [np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0]), np.array([0.0, np.nan])])
def test_grid_must_be_finite_and_increasing(xs):
    with pytest.raises(ConfigurationError):
        eval_potential(PotentialSpec.harmonic(), xs)


@pytest.mark.parametrize(
    "factory",
    [
        lambda: PotentialSpec.harmonic(0.0),
        lambda: PotentialSpec.power_law(3),
        lambda: PotentialSpec.exponential(-1.0),
        lambda: PotentialSpec.bounded_well(1.0, 0.0),
        lambda: PotentialSpec.tabulated([1.0, np.inf]),
    ],
)
def test_invalid_parameters(factory):
    with pytest.raises(ConfigurationError):
        factory()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40))
def test_shift_makes_potential_nonnegative(samples):
    xs = np.arange(len(samples), dtype=float)
    spec = PotentialSpec.tabulated(samples)
    v = eval_potential(spec, xs)
    assert np.all(v + lower_bound_constant(spec, xs) >= 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40), st.floats(0, 1e3))
def test_downward_shift_raises_constant(samples, c):
    xs = np.arange(len(samples), dtype=float)
    base = lower_bound_constant(PotentialSpec.tabulated(samples), xs)
    shifted = lower_bound_constant(PotentialSpec.tabulated([s - c for s in samples]), xs)
    if base > 0:
        assert shifted == pytest.approx(base + c, rel=1e-12, abs=1e-9)


def test_config_round_trip(tmp_path):
    for spec in [
        PotentialSpec.harmonic(2.0),
        PotentialSpec.power_law(6, 0.1),
        PotentialSpec.exponential(0.5),
        PotentialSpec.bounded_well(-1.0, 2.0),
        PotentialSpec.zero(),
        PotentialSpec.tabulated([0.0, 1.0, 4.0]),
    ]:
        assert PotentialSpec.from_config(spec.to_config()) == spec


def test_tabulated_from_file(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("1.0\n5.0\n2.0\n")
    spec = PotentialSpec.from_config({"kind": "tabulated", "file": "v.txt"}, tmp_path)
    assert spec.kind is PotentialKind.TABULATED
    np.testing.assert_array_equal(load_tabulated(path), [1.0, 5.0, 2.0])
    np.testing.assert_array_equal(eval_potential(spec, np.array([0.0, 1.0, 2.0])), [1.0, 5.0, 2.0])


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        PotentialSpec.from_config({"kind": "coulomb"})
