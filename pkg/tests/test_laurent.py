import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laxtower.errors import DegreeOverflow, ModeOverflow, NonzeroMeanInNonlocalTail, NotInvertible
from laxtower.laurent import (
    AlgebraContext,
    FourierField as F,
    LaurentElement as LE,
    bracket_minus_one,
    d_lambda,
    d_x,
    distance,
    dumps,
    invert,
    loads,
    multiply,
    pairing,
    power,
    trace,
)

seeds = st.integers(0, 2**32 - 1)
SIN = F.sin(1)


def rand(seed, degrees=range(-2, 3), bw=2, amp=0.5):
    return LE.random(np.random.default_rng(seed), degrees, bw, amp)


def test_fourier_basics():
    f = F.cos(2, 3.0)
    assert f.amplitude(2) == pytest.approx(1.5)
    assert f.amplitude(-2) == pytest.approx(1.5)
    x = np.linspace(0, 1, 7, endpoint=False)
    assert np.allclose(f(x), 3 * np.cos(4 * np.pi * x))
    assert np.allclose(F.sin(1)(x), np.sin(2 * np.pi * x))
    assert F.constant(2.0).mean() == 2.0


def test_fourier_hermitian_random():
    f = F.random(np.random.default_rng(3), 4, 1.0)
    assert f.is_hermitian()
    assert np.allclose(f.grid(16).imag if np.iscomplexobj(f.grid(16)) else 0.0, 0.0)


def test_fourier_grid_roundtrip():
    x = np.arange(64) / 64
    vals = 1 + np.cos(2 * np.pi * x) + 0.5 * np.sin(6 * np.pi * x)
    f = F.from_grid(vals, 8)
    assert np.allclose(f.grid(64), vals)
    assert f.bandwidth == 3


def test_fourier_dx_matches_grid_fd():
    f = F.random(np.random.default_rng(1), 3, 1.0)
    n, h = 64, 1e-3
    x = np.arange(n) / n
    # sixth-order central stencil
    w = {1: 45.0, 2: -9.0, 3: 1.0}
    fd = sum(c * (f(x + j * h) - f(x - j * h)) for j, c in w.items()) / (60 * h)
    assert np.max(np.abs(f.dx()(x) - fd)) < 1e-8


def test_antiderivative_inverts_dx():
    f = F.random(np.random.default_rng(2), 3, 1.0, mean=0.0)
    assert (f.antiderivative().dx() - f).norm() < 1e-14
    with pytest.raises(NonzeroMeanInNonlocalTail):
        (f + 1.0).antiderivative()


def test_reciprocal():
    f = F.constant(2.0) + F.cos(1, 0.5)
    r = f.reciprocal()
    x = np.arange(50) / 50
    assert np.max(np.abs(r(x) - 1 / f(x))) < 1e-13
    with pytest.raises(NotInvertible):
        F.cos(1).reciprocal()


def test_monomial_product():
    u = multiply(LE.monomial(1, SIN), LE.monomial(-1))
    assert u.degrees == range(0, 1)
    assert (u.coeff(0) - SIN).norm() < 1e-15


def test_unit_law():
    u = rand(4)
    assert distance(multiply(LE.one(), u), u) == 0.0


def test_product_matches_pointwise_grid_oracle():
    u, v = rand(5), rand(6)
    w = multiply(u, v)
    n = 64
    for d in w.degrees:
        want = np.zeros(n)
        for i in u.degrees:
            if d - i in v.degrees:
                want = want + u.coeff(i).grid(n) * v.coeff(d - i).grid(n)
        assert np.max(np.abs(w.coeff(d).grid(n) - want)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_ring_laws(seed):
    u, v, w = rand(seed), rand(seed + 1), rand(seed + 2)
    assert distance(multiply(u, v), multiply(v, u)) < 1e-12
    assert distance(multiply(multiply(u, v), w), multiply(u, multiply(v, w))) < 1e-12
    assert distance(multiply(u, v + w), multiply(u, v) + multiply(u, w)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_leibniz_rules(seed):
    u, v = rand(seed), rand(seed + 7)
    uv = multiply(u, v)
    assert distance(d_x(uv), multiply(d_x(u), v) + multiply(u, d_x(v))) < 1e-11
    assert distance(d_lambda(uv), multiply(d_lambda(u), v) + multiply(u, d_lambda(v))) < 1e-11


def test_derivative_monomials():
    assert distance(d_lambda(LE.monomial(2)), LE.monomial(1, 2.0)) == 0.0
    assert d_x(LE.monomial(3, 5.0)).is_zero()


def test_traces():
    assert trace(LE.monomial(-1)) == 1.0
    assert trace(LE.monomial(0, SIN)) == 0.0
    u1 = F.constant(0.7) + F.sin(2)
    L = LE.from_fields({1: u1, 0: F.constant(3.0) + F.cos(1), -1: u1})
    assert trace(L, "zero") == pytest.approx(3.0)


def test_pairing_examples():
    assert pairing(LE.monomial(1), LE.monomial(-2)) == 1.0
    u, v = rand(8), rand(9)
    for variant in ("minus_one", "zero"):
        assert pairing(u, v, variant) == pytest.approx(pairing(v, u, variant), abs=1e-14)
        assert pairing(u, v, variant) == pytest.approx(trace(multiply(u, v), variant), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_pairing_invariance(seed):
    X, Y, Z = rand(seed), rand(seed + 1), rand(seed + 2)
    assert abs(pairing(multiply(X, Y), Z) - pairing(X, multiply(Y, Z))) < 1e-12


def test_pairing_nondegenerate():
    u = rand(11)
    best = max(abs(pairing(u, LE.monomial(-1 - d, F.cos(k) if k else 1.0)))
               for d in u.degrees for k in range(3))
    assert best > 1e-14


def test_power_examples():
    L = LE.from_fields({1: 1.0, -1: SIN})
    assert distance(power(L, 0), LE.one()) == 0.0
    assert distance(power(L, 1), L) == 0.0
    want = LE.from_fields({2: 1.0, 0: SIN * 2.0, -2: SIN * SIN})
    assert distance(power(L, 2), want) < 1e-15


def test_invert_examples():
    M, res = invert(LE.monomial(1), 4, return_residual=True)
    assert distance(M, LE.monomial(-1)) == 0.0 and res == 0.0
    assert distance(invert(LE.one(), 4), LE.one()) == 0.0
    L = LE.from_fields({1: 1.0, 0: F.sin(1, 0.1)})
    M, res = invert(L, 6, return_residual=True)
    assert res < 2 * 0.1 ** 6
    assert res > 0


def test_trace_of_bracket_vanishes():
    u, v = rand(12), rand(13)
    assert abs(trace(bracket_minus_one(u, v))) < 1e-11


def test_caps_raise():
    ctx = AlgebraContext(mode_cap=2, dmin=-2, dmax=2)
    with pytest.raises(ModeOverflow):
        multiply(LE.monomial(0, F.cos(2)), LE.monomial(0, F.cos(1)), ctx)
    with pytest.raises(DegreeOverflow):
        multiply(LE.monomial(2), LE.monomial(1), ctx)


def test_context_variant_consistency():
    assert AlgebraContext.for_rmatrix("dtoda").pairing_variant == "zero"
    assert AlgebraContext.for_rmatrix("benny").pairing_variant == "minus_one"
    with pytest.raises(ValueError):
        AlgebraContext(bracket_variant="zero", pairing_variant="minus_one")


def test_serialization_roundtrip():
    u = rand(14)
    assert distance(loads(dumps(u)), u) == 0.0
