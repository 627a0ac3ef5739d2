import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laxtower import tower as T
from laxtower.laurent import (
    AlgebraContext,
    FourierField as F,
    LaurentElement as LE,
    distance,
    multiply,
    pairing,
    power,
)
from laxtower.lie import lie_bracket, r_apply, rmatrix_spec

NAMES = ("benny", "dtoda", "dkp", "dmkp", "ddym")
seeds = st.integers(0, 2**32 - 1)


def ctx_for(name):
    return AlgebraContext.for_rmatrix(name).widened(mode_cap=64, dmin=-64, dmax=48)


def sample(name, seed):
    ctx = ctx_for(name)
    rng = np.random.default_rng(seed)
    L = T.random_point(rng, ctx)
    return ctx, L, [T.random_linear(rng, ctx) for _ in range(3)]


@pytest.mark.parametrize("name", NAMES)
def test_gradients_match_finite_differences(name):
    ctx, L, (F1, _, _) = sample(name, 0)
    E = LE.random(np.random.default_rng(1), [-1, 0, 1], 1, 0.3)
    for fn in (F1, T.trace_monomial(3, ctx), T.coordinate(-1, 1, "re", ctx),
               T.coordinate(0, 2, "im", ctx)):
        assert T.gradient_defect(fn, L, E, ctx) < 1e-6


def test_trace_monomial_gradient_is_ad_invariant():
    ctx, L, _ = sample("benny", 2)
    g = T.trace_monomial(3, ctx).grad(L)
    assert lie_bracket(g, L, ctx.bracket_variant).norm() < 1e-13


@pytest.mark.parametrize("name", NAMES)
def test_bracket_antisymmetry_and_unit(name):
    ctx, L, (F1, H, _) = sample(name, 3)
    for n in (-1, 0, 1, 2, 3):
        assert abs(T.bracket_n(F1, F1, L, n, ctx)) < 1e-14
        assert abs(T.bracket_n(F1, H, L, n, ctx) + T.bracket_n(H, F1, L, n, ctx)) < 1e-14
        assert abs(T.bracket_n(F1, H, LE.one(), n, ctx)) < 1e-14


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from(NAMES), st.integers(-1, 3))
def test_field_bracket_duality(seed, name, n):
    ctx, L, (F1, H, _) = sample(name, seed)
    X = T.ham_field(H, L, n, ctx)
    b = T.bracket_n(F1, H, L, n, ctx)
    assert abs(pairing(F1.grad(L), X, ctx.pairing_variant) - b) <= 1e-10 * max(1.0, abs(b))


def test_ham_field_of_casimir_at_unit_vanishes():
    ctx = ctx_for("benny")
    assert T.ham_field(T.trace_monomial(2, ctx), LE.one(), 0, ctx).norm() < 1e-15


def test_benny_quarter_square_flow():
    ctx = ctx_for("benny")
    L = LE.from_fields({1: 1.0, 0: F.sin(1, 0.1), -1: F.constant(1.0) + F.cos(1, 0.1)})
    H = T.trace_monomial(3, ctx)  # dH = L^2
    X = T.ham_field(H, L, -1, ctx)
    want = lie_bracket(r_apply(power(L, 2) * 0.25, rmatrix_spec("benny")), L, "minus_one")
    assert distance(X * 0.5, want) < 1e-14


def test_virasoro_fields():
    L = LE.from_fields({1: 1.0, -1: F.sin(1)})
    assert distance(T.virasoro_field(L, -1), LE.one()) == 0.0
    assert distance(T.virasoro_field(L, 0), L) == 0.0
    assert distance(T.virasoro_field(L, 2), multiply(multiply(L, L), L)) < 1e-15


@pytest.mark.parametrize("m,n", [(1, 1), (-1, 1), (1, 2), (0, 3), (-1, 3)])
def test_virasoro_commutator(m, n):
    ctx, L, _ = sample("benny", 4)
    assert T.virasoro_commutator_defect(m, n, L, ctx) < 1e-11


@pytest.mark.parametrize("m,n", [(2, 2), (0, 1), (1, 0), (-1, 2)])
def test_lie_derivative_identity(m, n):
    ctx, L, (F1, H, _) = sample("benny", 5)
    assert T.lie_derivative_defect(m, n, F1, H, L, ctx) < 1e-6
    if (m, n) == (1, 0):
        t2, t3 = T.trace_monomial(2, ctx), T.trace_monomial(3, ctx)
        assert T.lie_derivative_defect(m, n, t2, t3, L, ctx) < 1e-6


@pytest.mark.parametrize("name", ["benny", "dtoda"])
def test_jacobi_and_compatibility(name):
    ctx, L, (F1, G, H) = sample(name, 6)
    assert T.jacobi_defect(1, F1, F1, H, L, ctx) < 1e-8
    for n in (-1, 0, 1, 2):
        assert T.jacobi_defect(n, F1, G, H, L, ctx) < 1e-5
    assert T.compatibility_defect(0, 2, F1, G, H, L, ctx) < 1e-5


def test_involution_examples():
    ctx, L, _ = sample("benny", 7)
    assert T.involution_defect(2, 2, 0, L, ctx) == 0.0
    assert T.involution_defect(2, 3, 0, L, ctx) < 1e-11
    ctx, L, _ = sample("dtoda", 7)
    assert T.involution_defect(1, 3, 1, L, ctx) < 1e-11


@pytest.mark.parametrize("name", NAMES)
def test_lax_form(name):
    ctx, L, _ = sample(name, 8)
    for n in (-1, 0, 2):
        assert T.lax_form_defect(T.trace_monomial(3, ctx), L, n, ctx) < 1e-12


def test_multiplicativity_examples():
    ctx, L1, (F1, H, _) = sample("dkp", 9)
    L2 = T.random_point(np.random.default_rng(10), ctx)
    assert T.multiplicativity_defect(F1, H, L1, LE.one(), ctx) < 1e-14
    assert T.multiplicativity_defect(F1, H, L1, L2, ctx) < 1e-10
    t2, t3 = T.trace_monomial(2, ctx), T.trace_monomial(3, ctx)
    assert T.multiplicativity_defect(t2, t3, L1, L2, ctx) < 1e-10


def test_inversion_examples():
    ctx = AlgebraContext.for_rmatrix("benny").widened(mode_cap=1024, dmin=-160, dmax=48)
    rng = np.random.default_rng(11)
    F1, H = T.random_linear(rng, ctx), T.random_linear(rng, ctx)
    assert T.inversion_defect(F1, H, LE.monomial(1), 0, ctx) < 1e-10
    L = LE.from_fields({1: F.constant(1.0) + F.sin(1, 0.1)})
    assert T.inversion_defect(F1, H, L, 0, ctx) < 1e-6
    assert T.inversion_defect(F1, H, L, 1, ctx) < 1e-5
    with pytest.raises(ValueError):
        T.inversion_defect(F1, H, L, -1, ctx)


def test_commuting_flows_examples():
    ctx, L, _ = sample("benny", 12)
    sq = lambda M: power(M, 2)
    assert T.commuting_flows_defect(sq, sq, L, ctx) == 0.0
    assert T.commuting_flows_defect(lambda M: M, sq, L, ctx) < 1e-5
    assert T.degree1_invariant_defect(1, 2, L, ctx) < 1e-5


def test_virasoro_transport_and_second_derivative():
    ctx, L, _ = sample("dtoda", 13)
    assert T.virasoro_lax_transport_defect(2, 1, L, ctx) < 1e-5
    assert T.second_lie_derivative_defect(2, 1, L, ctx) < 1e-5


def test_lax_field_jacobian_matches_finite_difference():
    ctx, L, _ = sample("benny", 14)
    W = LE.random(np.random.default_rng(15), [-1, 0, 1], 1, 0.3)
    field = T.lax_basic_field(3, ctx)
    fd = T.directional_derivative(field, L, W, ctx.fd_step)
    assert distance(T.lax_field_jacobian(3, L, W, ctx), fd) < 1e-8


def test_linearization_at_unit_is_r_bracket():
    rng = np.random.default_rng(16)
    a, b, E = (LE.random(rng, [-2, -1, 0, 1], 1, 0.3) for _ in range(3))
    for name in ("benny", "dtoda"):
        assert T.r_bracket_linearization_defect(a, b, E, 1, ctx_for(name)) < 1e-9


def test_negative_bracket_is_antisymmetric():
    ctx = AlgebraContext.for_rmatrix("benny").widened(mode_cap=1024, dmin=-160, dmax=48)
    rng = np.random.default_rng(17)
    L = T.random_point(rng, ctx)
    F1, H = T.random_linear(rng, ctx), T.random_linear(rng, ctx)
    a = T.negative_bracket(F1, H, L, 2, ctx)
    assert abs(a + T.negative_bracket(H, F1, L, 2, ctx)) < 1e-14


def test_richardson_stages_are_exact_for_polynomials():
    L = LE.monomial(0, 0.5)
    V = LE.monomial(0, 1.0)
    f = lambda M: M.coeff(0).mean() ** 6  # degree 6 along the line
    want = 6 * 0.5 ** 5
    assert abs(T.directional_derivative(f, L, V, 0.1, richardson=2) - want) < 1e-13
    assert abs(T.directional_derivative(f, L, V, 0.1, richardson=1) - want) > 1e-6


def test_commuting_flows_fd_matches_exact_jacobians():
    ctx, L, _ = sample("dtoda", 18)
    X, Y = T.lax_basic_field(2, ctx)(L), T.lax_basic_field(3, ctx)(L)
    exact = T.lax_field_jacobian(3, L, X, ctx) - T.lax_field_jacobian(2, L, Y, ctx)
    assert exact.norm() < 1e-10
    assert T.commuting_flows_defect(lambda M: power(M, 2), lambda M: power(M, 3), L, ctx) < 1e-8


def test_random_invertible_point():
    ctx = ctx_for("dtoda")
    rng = np.random.default_rng(19)
    for _ in range(10):
        L = T.random_invertible_point(rng, ctx)
        assert np.min(np.abs(L.coeff(L.dmax).grid(256))) >= 0.5
