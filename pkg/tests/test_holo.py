import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nullforge.errors import FitError, PeriodObstructionError
from nullforge.holo import LaurentMap, QuadratureWarning, fit_map, random_map
from nullforge.domain import annulus, make_circular_domain

RING = annulus(0.5, 2.0)
TWO = make_circular_domain((0.0, 3.0), [(-1.0, 0.3), (1.0, 0.3)])


def test_eval_examples(ring, catenoid):
    c = LaurentMap.constant(ring, np.array([1.0, 2j, 3.0]))
    assert np.allclose(c.eval(np.array([0.7, 1.5j])), [[1, 2j, 3]] * 2)
    f = LaurentMap.from_terms(ring, 3, {(0, 1): [1, 0, 0], (1, -1): [0, 1, 0]})
    assert np.allclose(f(2.0), [2, 0.5, 0])
    assert np.allclose(catenoid(1.0), [0, 1j, 1], atol=1e-15)


def test_derivative_examples(ring):
    c = LaurentMap.constant(ring, np.array([1.0, 1, 1]))
    assert not np.any(c.differentiate().poly) and not np.any(c.differentiate().principal)
    z2 = LaurentMap.from_terms(ring, 1, {(0, 2): [1]})
    z = np.array([0.7 + 0.2j, -1.3])
    assert np.allclose(z2.differentiate()(z)[:, 0], 2 * z)
    inv = LaurentMap.from_terms(ring, 1, {(1, -1): [1]})
    assert np.allclose(inv.differentiate()(z)[:, 0], -1 / z**2)


def test_antiderivative_examples(disc, ring):
    f = LaurentMap.from_terms(disc, 3, {(0, 0): [0.5, 0.5j, 0], (0, 2): [-0.5, 0.5j, 0], (0, 1): [0, 0, 1]})
    F = f.antidifferentiate()
    z = np.linspace(-0.9, 0.9, 7) + 0.1j
    want = np.stack([z / 2 - z**3 / 6, 1j * (z / 2 + z**3 / 6), z**2 / 2], -1)
    assert np.allclose(F(z), want, atol=1e-15)
    zero = LaurentMap.zeros(ring, 3)
    assert not np.any(zero.antidifferentiate().poly)
    with pytest.raises(PeriodObstructionError) as err:
        LaurentMap.from_terms(ring, 3, {(1, -1): [1, 0, 0]}).antidifferentiate()
    assert err.value.hole == 1 and err.value.component == 1
    assert "hole 1, component 1" in str(err.value)


def test_period_examples(ring, catenoid):
    assert np.allclose(LaurentMap.constant(ring, np.array([1.0, 2, 3])).periods(), 0)
    c = np.array([1.0, -2j, 0.5])
    f = LaurentMap.from_terms(ring, 3, {(1, -1): c})
    assert np.allclose(f.periods(), 2j * np.pi * c)
    assert np.allclose(catenoid.periods(), [[0, 0, 2j * np.pi]])
    assert np.allclose(catenoid.periods("quadrature"), [[0, 0, 2j * np.pi]], atol=1e-13)


@pytest.mark.parametrize("seed", range(20))
def test_exact_matches_quadrature_random(seed):
    rng = np.random.default_rng(seed)
    f = random_map(TWO, 3, 16, rng)
    ex = f.periods()
    qu = f.periods("quadrature")
    assert np.max(np.abs(ex - qu)) < 1e-12


def test_cross_hole_terms_have_zero_period():
    # a double pole at hole 2 integrates to zero around loop 1 and loop 2 alike
    f = LaurentMap.from_terms(TWO, 1, {(2, -2): [1.0], (2, -5): [3.0]})
    assert np.max(np.abs(f.periods("quadrature"))) < 1e-13
    assert not np.any(f.periods())


def test_quadrature_warning():
    f = LaurentMap.from_terms(TWO, 1, {(1, -60): [1.0]})
    with pytest.warns(QuadratureWarning):
        f.periods("quadrature", N=32)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        LaurentMap.from_terms(TWO, 1, {(1, -3): [1.0]}).periods("quadrature")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), D=st.integers(0, 12))
def test_stokes_and_roundtrip(seed, D):
    rng = np.random.default_rng(seed)
    F = random_map(TWO, 2, D, rng)
    dF = F.differentiate()
    assert np.max(np.abs(dF.periods())) == 0
    assert np.max(np.abs(dF.periods("quadrature", warn_tol=None))) < 1e-10 * max(1, np.abs(dF.poly).max())
    f = F.drop_residues()
    back = f.antidifferentiate().differentiate()
    D2 = max(back.D, f.D)
    assert np.allclose(back.padded(D2).poly, f.padded(D2).poly, rtol=1e-14, atol=1e-15)
    assert np.allclose(back.padded(D2).principal, f.padded(D2).principal, rtol=1e-14, atol=1e-15)


def test_fit_examples(ring):
    z = np.exp(2j * np.pi * np.arange(64) / 64)
    f = fit_map(z, (z + 1 / z)[:, None], ring, D=2)
    assert f.fit_residual < 1e-13
    assert np.allclose(f.poly[:, 0], [0, 1, 0], atol=1e-13)
    assert np.allclose(f.principal[0, :, 0], [1, 0], atol=1e-13)
    c = fit_map(z, np.full((64, 2), 3 - 1j), ring, D=4)
    assert np.allclose(c.poly[0], [3 - 1j, 3 - 1j]) and np.allclose(c.poly[1:], 0, atol=1e-13)
    with pytest.raises(FitError):
        fit_map(z[:3], np.ones((3, 1)), ring, D=5)


def test_fit_recovers_random_map():
    rng = np.random.default_rng(99)
    f = random_map(TWO, 3, 16, rng)
    z = TWO.check_nodes(128)
    g = fit_map(z, f(z), TWO, D=16)
    assert np.max(np.abs(g.poly - f.poly)) < 1e-10 * np.abs(f.poly).max()
    assert np.max(np.abs(g.principal - f.principal)) < 1e-10 * np.abs(f.principal).max()


def test_arithmetic_and_components(ring, catenoid):
    z = np.array([0.9, 1.4j])
    assert np.allclose((2 * catenoid - catenoid)(z), catenoid(z))
    k3 = catenoid.component(3)
    assert k3.n == 1 and np.allclose(k3(z)[:, 0], 1 / z)
    swapped = LaurentMap.zeros(ring, 3).with_component(3, catenoid)
    assert np.allclose(swapped(z)[:, 2], 1 / z) and np.allclose(swapped(z)[:, :2], 0)


def test_json_roundtrip(catenoid, ring):
    back = LaurentMap.from_json(catenoid.to_json(), ring)
    assert np.array_equal(back.poly, catenoid.poly)
    assert np.array_equal(back.principal, catenoid.principal)
