"""The compatible family of Poisson brackets built from an r-matrix.

For ``n >= -1`` the bracket of two smooth functionals at ``L`` is

    {F, H}_n(L) = 1/2 (L, [R(L^{n+1} dF), dH] + [dF, R(L^{n+1} dH)])

and for ``n <= -2`` the same formula is used on invertible elements with
``L^{n+1}`` taken from a truncated inverse.  Every structural identity of the
family (Jacobi, compatibility, Virasoro action, involution, multiplicativity,
inversion, commuting Lax flows) is exposed as a ``*_defect`` function that
returns a nonnegative number which vanishes when the identity holds.

Identities involving derivatives of composite functionals are checked with
centred finite differences plus one Richardson step, never with hand-derived
second variations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NotInvertible
from .laurent import (
    AlgebraContext,
    FourierField,
    LaurentElement,
    distance,
    invert,
    multiply,
    pairing,
    power,
    trace,
)
from .lie import lie_bracket, r_adjoint_apply, r_apply, r_bracket, rmatrix_spec

HALF = 0.5  # every bracket and Hamiltonian field carries the factor 1/2


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Functional:
    """Scalar function on the algebra with an optional gradient rule.

    ``grad(L)`` is the element ``dF(L)`` with ``d/dt F(L + tE) = (dF(L), E)``.
    Composite functionals built inside the defect checks have no gradient;
    brackets involving them are evaluated as directional derivatives along
    the partner's Hamiltonian field.
    """

    value: Callable[[LaurentElement], float]
    grad: Callable[[LaurentElement], LaurentElement] | None
    kind: str
    label: str = ""

    def __call__(self, L: LaurentElement) -> float:
        return self.value(L)


def linear(a: LaurentElement, ctx: AlgebraContext) -> Functional:
    variant = ctx.pairing_variant
    return Functional(lambda L: pairing(a, L, variant), lambda L: a, "linear", "linear")


def trace_monomial(k: int, ctx: AlgebraContext) -> Functional:
    """``tr(L^k)/k``; its gradient ``L^{k-1}`` commutes with ``L``."""
    if k < 1:
        raise ValueError("trace monomials need k >= 1")
    variant = ctx.pairing_variant
    return Functional(lambda L: trace(power(L, k), variant) / k,
                      lambda L: power(L, k - 1), "trace_monomial", f"tr L^{k}/{k}")


def coordinate(d: int, k: int, part: str, ctx: AlgebraContext) -> Functional:
    """Real or imaginary part of the amplitude of ``lam^d e^{2 pi i k x}``."""
    shift = 1 if ctx.pairing_variant == "minus_one" else 0
    partner = -shift - d
    # Re u_hat(k) = int u cos(2 pi k x), Im u_hat(k) = -int u sin(2 pi k x)
    if part == "re":
        g = FourierField.cos(abs(k))
        value = lambda L: L.amplitude(d, k).real
    elif part == "im":
        g = FourierField.sin(abs(k), -float(np.sign(k)))
        value = lambda L: L.amplitude(d, k).imag
    else:
        raise ValueError("part must be 're' or 'im'")
    a = LaurentElement.monomial(partner, g)
    return Functional(value, lambda L: a, "coordinate", f"coord({d},{k},{part})")


def composite(value: Callable[[LaurentElement], float],
              grad: Callable[[LaurentElement], LaurentElement] | None = None,
              label: str = "composite") -> Functional:
    return Functional(value, grad, "composite", label)


def gradient_defect(F: Functional, L: LaurentElement, E: LaurentElement,
                    ctx: AlgebraContext) -> float:
    """Relative mismatch between ``(dF, E)`` and a finite difference of ``F``."""
    exact = pairing(F.grad(L), E, ctx.pairing_variant)
    fd = directional_derivative(F.value, L, E, ctx.fd_step)
    return abs(exact - fd) / max(1.0, abs(exact))


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def directional_derivative(f, L: LaurentElement, V: LaurentElement, h: float = 1e-5,
                           richardson: int = 1):
    """Centred difference of ``f`` at ``L`` along ``V``.

    The step is taken along ``V/|V|`` and the result rescaled, so ``h`` is an
    absolute step on a unit direction.  ``richardson`` counts extrapolation
    stages on halved steps; ``s`` stages make the result exact for
    polynomials of degree ``2 s + 2`` along the line.  ``f`` may be scalar-
    or element-valued.
    """
    nv = V.l2()
    if nv == 0.0:
        return 0.0 * f(L)
    unit = V / nv

    def central(s):
        return (f(L + unit * s) - f(L - unit * s)) / (2.0 * s)

    table = [central(h / 2 ** i) for i in range(int(richardson) + 1)]
    for j in range(1, len(table)):
        w = 4.0 ** j
        table = [(table[i + 1] * w - table[i]) / (w - 1.0) for i in range(len(table) - 1)]
    return table[0] * nv


# ---------------------------------------------------------------------------
# Brackets and Hamiltonian fields
# ---------------------------------------------------------------------------


def lax_power(L: LaurentElement, p: int, ctx: AlgebraContext | None = None,
              order: int | None = None) -> LaurentElement:
    """``L^p``; negative ``p`` uses the truncated inverse of the given order."""
    if p >= 0:
        return power(L, p, ctx)
    if order is None:
        raise ValueError("negative powers need an inversion order")
    return power(invert(L, order), -p, ctx)


def _bracket_from_grads(a, b, L, n, ctx, order=None) -> float:
    spec = rmatrix_spec(ctx)
    P = lax_power(L, n + 1, ctx, order)
    v = ctx.bracket_variant
    inner = (lie_bracket(r_apply(multiply(P, a, ctx), spec), b, v)
             + lie_bracket(a, r_apply(multiply(P, b, ctx), spec), v))
    return HALF * pairing(L, inner, ctx.pairing_variant)


def ham_field_from_grad(a: LaurentElement, L: LaurentElement, n: int, ctx: AlgebraContext,
                        order: int | None = None) -> LaurentElement:
    """``1/2 ([R(L^{n+1} a), L] + L^{n+1} R*([a, L]))``."""
    spec = rmatrix_spec(ctx)
    v = ctx.bracket_variant
    P = lax_power(L, n + 1, ctx, order)
    first = lie_bracket(r_apply(multiply(P, a, ctx), spec), L, v, ctx)
    second = multiply(P, r_adjoint_apply(lie_bracket(a, L, v), spec), ctx)
    return (first + second) * HALF


def ham_field(H: Functional, L: LaurentElement, n: int, ctx: AlgebraContext,
              order: int | None = None) -> LaurentElement:
    """Hamiltonian vector field of ``H`` for the n-th bracket.

    Satisfies ``(dF(L), ham_field(H, L, n)) = bracket_n(F, H, L, n)``.
    """
    if H.grad is None:
        raise ValueError("Hamiltonian field needs a functional with a gradient")
    return ham_field_from_grad(H.grad(L), L, n, ctx, order)


def bracket_n(F: Functional, H: Functional, L: LaurentElement, n: int,
              ctx: AlgebraContext, order: int | None = None) -> float:
    if n < -1 and order is None:
        raise ValueError("brackets with n <= -2 need an inversion order")
    if F.grad is not None and H.grad is not None:
        return _bracket_from_grads(F.grad(L), H.grad(L), L, n, ctx, order)
    if H.grad is not None:
        X = ham_field(H, L, n, ctx, order)
        return directional_derivative(F.value, L, X, ctx.fd_step)
    if F.grad is not None:
        X = ham_field(F, L, n, ctx, order)
        return -directional_derivative(H.value, L, X, ctx.fd_step)
    raise ValueError("at least one functional needs a gradient")


def negative_bracket(F: Functional, H: Functional, L: LaurentElement, n: int,
                     ctx: AlgebraContext, order: int = 8) -> float:
    """``{F, H}_{-n}`` for ``n >= 2`` on invertible ``L``."""
    if n < 2:
        raise ValueError("negative brackets are indexed by n >= 2")
    return bracket_n(F, H, L, -n, ctx, order)


def r_bracket_linearization_defect(a: LaurentElement, b: LaurentElement, E: LaurentElement,
                                   n: int, ctx: AlgebraContext) -> float:
    """At ``L = 1`` the linear part of ``{F_a, F_b}_n`` is ``(E, [a, b]_R)``."""
    Fa, Fb = linear(a, ctx), linear(b, ctx)
    one = LaurentElement.one()
    at_one = bracket_n(Fa, Fb, one, n, ctx)
    slope = directional_derivative(lambda M: bracket_n(Fa, Fb, M, n, ctx), one, E, ctx.fd_step)
    expected = pairing(E, r_bracket(a, b, rmatrix_spec(ctx)), ctx.pairing_variant)
    return max(abs(at_one), abs(slope - expected))


# ---------------------------------------------------------------------------
# Virasoro fields
# ---------------------------------------------------------------------------


def virasoro_field(L: LaurentElement, m: int, ctx: AlgebraContext | None = None) -> LaurentElement:
    if m < -1:
        raise ValueError("Virasoro fields are indexed by m >= -1")
    return power(L, m + 1, ctx)


def virasoro_commutator_defect(m: int, n: int, L: LaurentElement,
                               ctx: AlgebraContext | None = None) -> float:
    """``|(dV_n . V_m - dV_m . V_n)(L) - (n - m) L^{m+n+1}|`` with ``dV_n . W = (n+1) L^n W``."""
    def dV(k, W):
        if k + 1 == 0:
            return LaurentElement.zero()
        return multiply(power(L, k, ctx), W, ctx) * (k + 1)

    lhs = dV(n, virasoro_field(L, m, ctx)) - dV(m, virasoro_field(L, n, ctx))
    if m + n + 1 >= 0:
        rhs = power(L, m + n + 1, ctx) * (n - m)
    else:
        rhs = LaurentElement.zero()  # only m = n = -1, where n - m = 0
    return distance(lhs, rhs)


def virasoro_action(F: Functional, m: int, ctx: AlgebraContext) -> Functional:
    """``V_m F : L -> (dF(L), L^{m+1})``; gradient left to finite differences."""
    return composite(lambda L: pairing(F.grad(L), power(L, m + 1), ctx.pairing_variant),
                     label=f"V_{m} {F.label}")


def lie_derivative_defect(m: int, n: int, F: Functional, H: Functional, L: LaurentElement,
                          ctx: AlgebraContext) -> float:
    """Residual of ``V_m{F,H}_n - {V_m F, H}_n - {F, V_m H}_n = (n-m){F,H}_{m+n}``."""
    h = ctx.fd_step
    along = virasoro_field(L, m, ctx)
    lhs = directional_derivative(lambda M: bracket_n(F, H, M, n, ctx), L, along, h)
    VF, VH = virasoro_action(F, m, ctx), virasoro_action(H, m, ctx)
    lhs -= bracket_n(VF, H, L, n, ctx)
    lhs -= bracket_n(F, VH, L, n, ctx)
    rhs = (n - m) * bracket_n(F, H, L, m + n, ctx) if n != m else 0.0
    return abs(lhs - rhs)


# ---------------------------------------------------------------------------
# Jacobi and compatibility
# ---------------------------------------------------------------------------


def _cyclic_defect(ns: Sequence[int], F, G, H, L, ctx) -> float:
    """Cyclic sum for the bracket ``sum_{n in ns} {.,.}_n``.

    ``{{A, B}, C}(L)`` is the derivative of ``{A, B}`` along the field of ``C``.
    """
    def br(A, B, M):
        return sum(bracket_n(A, B, M, n, ctx) for n in ns)

    def field(C):
        X = LaurentElement.zero()
        for n in ns:
            X = X + ham_field(C, L, n, ctx)
        return X

    total = 0.0
    for A, B, C in ((F, G, H), (G, H, F), (H, F, G)):
        total += directional_derivative(lambda M: br(A, B, M), L, field(C), ctx.fd_step)
    return abs(total)


def jacobi_defect(n: int, F, G, H, L, ctx: AlgebraContext) -> float:
    return _cyclic_defect((n,), F, G, H, L, ctx)


def compatibility_defect(m: int, n: int, F, G, H, L, ctx: AlgebraContext) -> float:
    """Jacobi defect of the sum of the m-th and n-th brackets."""
    return _cyclic_defect((m, n), F, G, H, L, ctx)


# ---------------------------------------------------------------------------
# Involution, multiplicativity, inversion
# ---------------------------------------------------------------------------


def involution_defect(j: int, k: int, n: int, L: LaurentElement, ctx: AlgebraContext) -> float:
    return abs(bracket_n(trace_monomial(j, ctx), trace_monomial(k, ctx), L, n, ctx))


def lax_form_defect(H: Functional, L: LaurentElement, n: int, ctx: AlgebraContext) -> float:
    """For ad-invariant ``H`` the field must equal ``1/2 [R(L^{n+1} dH), L]``."""
    spec = rmatrix_spec(ctx)
    X = ham_field(H, L, n, ctx)
    lax = lie_bracket(r_apply(multiply(power(L, n + 1), H.grad(L)), spec), L,
                      ctx.bracket_variant) * HALF
    return distance(X, lax)


def multiplicativity_defect(F: Functional, H: Functional, L1: LaurentElement,
                            L2: LaurentElement, ctx: AlgebraContext) -> float:
    """Multiplication ``A x A -> A`` is Poisson for the n = 0 bracket."""
    L = multiply(L1, L2, ctx)
    a, b = F.grad(L), H.grad(L)
    lhs = (_bracket_from_grads(multiply(L2, a), multiply(L2, b), L1, 0, ctx)
           + _bracket_from_grads(multiply(L1, a), multiply(L1, b), L2, 0, ctx))
    rhs = _bracket_from_grads(a, b, L, 0, ctx)
    return abs(lhs - rhs)


def inverted(F: Functional, order: int, ctx: AlgebraContext) -> Functional:
    """``F o inv`` with gradient ``-L^{-2} dF(L^{-1})``."""
    def value(L):
        return F.value(invert(L, order))

    def grad(L):
        M = invert(L, order)
        return -multiply(multiply(M, M, ctx), F.grad(M), ctx)

    return composite(value, grad, label=f"{F.label} o inv")


def inversion_defect(F: Functional, H: Functional, L: LaurentElement, n: int,
                     ctx: AlgebraContext, order: int = 8) -> float:
    """``|{F o inv, H o inv}_n(L) + {F, H}_{-n}(L^{-1})|`` for ``n >= 0``."""
    if n < 0:
        raise ValueError("inversion identity is stated for n >= 0")
    lhs = bracket_n(inverted(F, order, ctx), inverted(H, order, ctx), L, n, ctx)
    M = invert(L, order)
    rhs = bracket_n(F, H, M, -n, ctx, order)
    return abs(lhs + rhs)


# ---------------------------------------------------------------------------
# Lax flows and their Virasoro invariants
# ---------------------------------------------------------------------------


def lax_vector_field(X: Callable[[LaurentElement], LaurentElement], ctx: AlgebraContext):
    """``L -> [R(X(L)), L]``."""
    spec = rmatrix_spec(ctx)

    def field(L):
        return lie_bracket(r_apply(X(L), spec), L, ctx.bracket_variant)

    return field


def lie_bracket_of_fields(V, W, L: LaurentElement, h: float,
                          richardson: int = 1) -> LaurentElement:
    """``[V, W](L) = dW(L).V(L) - dV(L).W(L)`` by finite differences."""
    return (directional_derivative(W, L, V(L), h, richardson)
            - directional_derivative(V, L, W(L), h, richardson))


# The Lax and Virasoro fields compared below are polynomials in L of degree
# <= 6, so two extrapolation stages leave no truncation error and the step
# can be large; round-off in the derivative scales like |X| |Y| / h.
FLOW_FD_STEP = 0.1
FLOW_RICHARDSON = 2


def commuting_flows_defect(X, Y, L: LaurentElement, ctx: AlgebraContext,
                           h: float = FLOW_FD_STEP, richardson: int = FLOW_RICHARDSON) -> float:
    """Norm of the commutator of two Lax vector fields at ``L``.

    The default step and extrapolation depth assume polynomial flows of
    degree at most 6 along a line.
    """
    Xt, Yt = lax_vector_field(X, ctx), lax_vector_field(Y, ctx)
    return lie_bracket_of_fields(Xt, Yt, L, h, richardson).norm()


def lax_basic_field(n: int, ctx: AlgebraContext):
    """``Z_n(L) = [R(L^n), L]``."""
    return lax_vector_field(lambda L: power(L, n), ctx)


def degree1_invariant_defect(m: int, n: int, L: LaurentElement, ctx: AlgebraContext) -> float:
    """Residual of ``L_{V_m} Z_n = n Z_{m+n}``."""
    V = lambda M: virasoro_field(M, m)
    lhs = lie_bracket_of_fields(V, lax_basic_field(n, ctx), L, FLOW_FD_STEP, FLOW_RICHARDSON)
    if n == 0:
        return lhs.norm()
    rhs = lax_basic_field(m + n, ctx)(L) * n
    return distance(lhs, rhs)


def virasoro_lax_transport_defect(k: int, m: int, L: LaurentElement, ctx: AlgebraContext) -> float:
    """``L_{V_m} X~ = Y~`` with ``X(L) = L^k`` and ``Y(L) = dX(L).V_m(L) = k L^{k+m}``."""
    V = lambda M: virasoro_field(M, m)
    Xt = lax_basic_field(k, ctx)
    lhs = lie_bracket_of_fields(V, Xt, L, FLOW_FD_STEP, FLOW_RICHARDSON)
    rhs = lax_vector_field(lambda M: power(M, k + m) * k, ctx)(L)
    return distance(lhs, rhs)


def lax_field_jacobian(k: int, L: LaurentElement, W: LaurentElement,
                       ctx: AlgebraContext) -> LaurentElement:
    """Derivative of ``L -> [R(L^k), L]`` along ``W``.

    The algebra is commutative, so ``d(L^k).W = k L^{k-1} W``.
    """
    spec = rmatrix_spec(ctx)
    v = ctx.bracket_variant
    out = lie_bracket(r_apply(power(L, k), spec), W, v)
    if k > 0:
        dP = multiply(power(L, k - 1), W) * k
        out = out + lie_bracket(r_apply(dP, spec), L, v)
    return out


def second_lie_derivative_defect(k: int, n: int, L: LaurentElement, ctx: AlgebraContext) -> float:
    """``L_{X~}^2 V_n`` for the Lax field of ``X(L) = L^k``.

    The inner Lie derivative uses exact Jacobians of the two polynomial
    fields; only the outer one is a finite difference.
    """
    Xt = lax_basic_field(k, ctx)

    def inner(M):
        Vn = virasoro_field(M, n)
        dV = (multiply(power(M, n), Xt(M)) * (n + 1)) if n + 1 else LaurentElement.zero()
        return dV - lax_field_jacobian(k, M, Vn, ctx)

    return lie_bracket_of_fields(Xt, inner, L, FLOW_FD_STEP, FLOW_RICHARDSON).norm()


# ---------------------------------------------------------------------------
# Probe generators
# ---------------------------------------------------------------------------


def random_point(rng: np.random.Generator, ctx: AlgebraContext, bandwidth: int = 1,
                 amplitude: float = 0.2) -> LaurentElement:
    """Random ``L`` near a Lax operator of the context's hierarchy."""
    one = {"benny": {1: 1.0}, "dtoda": {1: 1.0, -1: 1.0}, "dkp": {1: 1.0},
           "dmkp": {1: 1.0}, "ddym": {1: 1.0}}[ctx.rmatrix]
    L = LaurentElement.from_fields(one)
    if ctx.rmatrix == "dtoda":
        u1 = FourierField.random(rng, bandwidth, amplitude, mean=0.0)
        jitter = LaurentElement.from_fields({1: u1, -1: u1})
        return L + jitter + LaurentElement.random(rng, [-1, 0, 1], bandwidth, amplitude)
    return L + LaurentElement.random(rng, [-1, 0, 1], bandwidth, amplitude)


def random_invertible_point(rng: np.random.Generator, ctx: AlgebraContext, bandwidth: int = 1,
                            amplitude: float = 0.2, floor: float = 0.5,
                            tries: int = 1000) -> LaurentElement:
    """``random_point`` conditioned on a dominant coefficient with ``|c| >= floor`` on the circle."""
    for _ in range(tries):
        L = random_point(rng, ctx, bandwidth, amplitude)
        if np.min(np.abs(L.coeff(L.dmax).grid(256))) >= floor:
            return L
    raise NotInvertible(f"no draw with dominant coefficient above {floor} in {tries} tries")


def random_linear(rng: np.random.Generator, ctx: AlgebraContext, bandwidth: int = 1,
                  amplitude: float = 0.1) -> Functional:
    return linear(LaurentElement.random(rng, [-2, -1, 0, 1], bandwidth, amplitude), ctx)
