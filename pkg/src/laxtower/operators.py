"""Hamiltonian operators of hydrodynamic type, with optional nonlocal tails.

An operator acts on covector tuples ``xi`` as

    (B xi)_i = sum_j g_ij(u) D xi_j + c_ij(u, u_x) xi_j
               + sum_alpha s_alpha wl_i D^{-1}(sum_j wr_j xi_j)

with coefficients stored as sympy polynomials in the fields and their first
x-derivatives.  Operators are also assembled into real matrices over the
orthonormal basis ``1, sqrt2 cos(2 pi k x), sqrt2 sin(2 pi k x)``, ``k <= M``,
in which the L2 pairing is the Euclidean dot product.  Dirac reduction,
recursion operators and Casimir kernels are computed on those matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.linalg import null_space

from .errors import IllPosedReduction, SectorViolation, UnknownOperator
from .hierarchies import hierarchy
from .laurent import AlgebraContext, FourierField, LaurentElement, power
from .tower import ham_field_from_grad

FAMILY_FIELDS = {"benny": ("u0", "um1"), "dtoda": ("u0", "u1")}
SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def _symbols(fields):
    out = {}
    for f in fields:
        out[f] = sp.Symbol(f)
        out[f + "_x"] = sp.Symbol(f + "_x")
    return out


def _total_dx(expr, fields):
    syms = _symbols(fields)
    return sum(sp.diff(expr, syms[f]) * syms[f + "_x"] for f in fields)


def _parse(rows, fields) -> sp.Matrix:
    """Strings to a sympy matrix; ``dx(e)`` is the total x-derivative of ``e``."""
    syms = _symbols(fields)
    dx = sp.Function("dx")
    loc = dict(syms, dx=dx)

    def one(s):
        e = sp.sympify(s, locals=loc)
        return sp.expand(e.replace(dx, lambda a: _total_dx(a, fields)))

    return sp.Matrix([[one(s) for s in row] for row in rows])


@dataclass(frozen=True)
class HydroOperator:
    name: str
    fields: tuple
    g: sp.Matrix
    c: sp.Matrix
    tail: tuple = ()  # (sign, wl column, wr row)

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    def b(self, k: int) -> sp.Matrix:
        """Matrix multiplying the x-derivative of the k-th field."""
        s = sp.Symbol(self.fields[k] + "_x")
        return self.c.applyfunc(lambda e: sp.diff(e, s))

    def skew_symbolic_defect(self) -> sp.Matrix:
        """``c + c^T - g_x``; zero for a formally skew-adjoint local part."""
        gx = self.g.applyfunc(lambda e: _total_dx(e, self.fields))
        return (self.c + self.c.T - gx).applyfunc(sp.expand)


def make_operator(name, fields, g_rows, c_rows, tail=()) -> HydroOperator:
    parsed_tail = tuple(
        (float(sign), tuple(_parse([wl], fields)), tuple(_parse([wr], fields)))
        for sign, wl, wr in tail
    )
    return HydroOperator(name, tuple(fields), _parse(g_rows, fields), _parse(c_rows, fields),
                         parsed_tail)


# Tables as printed, keyed by operator name.  Two printed entries fail the
# skew-adjointness test c + c^T = g_x and are replaced in the corrected set.
_BENNY, _TODA = FAMILY_FIELDS["benny"], FAMILY_FIELDS["dtoda"]

_TABLES = {
    "benny:B-1": (_BENNY, [["0", "1"], ["1", "0"]], [["0", "0"], ["0", "0"]]),
    "benny:B0": (_BENNY, [["2", "u0"], ["u0", "2*um1"]],
                 [["0", "u0_x"], ["um1_x", "0"]]),
    "benny:B1": (_BENNY, [["4*u0", "u0**2 + 4*um1"], ["u0**2 + 4*um1", "4*u0*um1"]],
                 [["2*u0_x", "2*u0*u0_x + 2*um1_x"], ["2*um1_x", "2*um1*u0_x + 2*u0*um1_x"]]),
    "benny:ext0": (_BENNY,
                   [["1", "u0", "um1"], ["u0", "2*um1", "0"], ["um1", "0", "-um1**2"]],
                   [["0", "u0_x", "um1_x"], ["0", "um1_x", "0"], ["0", "0", "-um1*um1_x"]]),
    "benny:ext1": (_BENNY,
                   [["2*u0", "u0**2 + 3*um1", "2*u0*um1", "um1**2"],
                    ["u0**2 + 3*um1", "4*u0*um1", "um1**2", "0"],
                    ["2*u0*um1", "um1**2", "-2*u0*um1**2", "-um1**3"],
                    ["um1**2", "0", "-um1**3", "0"]],
                   [["u0_x", "2*u0*u0_x + 2*um1_x", "2*u0*um1_x + 2*um1*u0_x", "2*um1*um1_x"],
                    ["um1_x", "12*um1*u0_x + 2*u0*um1_x", "2*um1*um1_x", "0"],
                    ["0", "0", "-2*u0*um1*um1_x - um1**2*u0_x", "-2*um1**2*um1_x"],
                    ["0", "0", "-um1**2*um1_x", "0"]]),
    "dtoda:B-1": (_TODA, [["0", "u1"], ["u1", "0"]], [["0", "u1_x"], ["0", "0"]]),
    "dtoda:B0": (_TODA, [["4*u1**2", "u0*u1"], ["u0*u1", "u1**2"]],
                 [["4*u1*u1_x", "u0*u1_x"], ["u1*u0_x", "u1*u1_x"]]),
    "dtoda:B1": (_TODA,
                 [["8*u0*u1**2", "4*u1**3 + u0**2*u1"], ["4*u1**3 + u0**2*u1", "2*u0*u1**2"]],
                 [["4*u1**2*u0_x + 8*u0*u1*u1_x", "(u0**2 + 8*u1**2)*u1_x"],
                  ["2*u0*u1*u0_x + 4*u1**2*u1_x", "u1**2*u0_x + 2*u0*u1*u1_x"]]),
    "dtoda:ext2": (_TODA,
                   [["12*u1**4 + 12*u0**2*u1**2", "u0**3*u1 + 12*u0*u1**3", "2*u1**4"],
                    ["u0**3*u1 + 12*u0*u1**3", "4*u1**4 + 3*u0**2*u1**2", "0"],
                    ["2*u1**4", "0", "-u1**4"]],
                   [["6*dx(u1**4 + u0**2*u1**2)",
                     "6*u1**3*u0_x + 24*u0*u1**2*u1_x + u0**3*u1_x", "8*u1**3*u1_x"],
                    ["u1*dx(u0**3 + 6*u0*u1**2)",
                     "3*u0*u1**2*u0_x + (8*u1**3 + 3*u0**2*u1)*u1_x", "u1**3*u0_x"],
                    ["0", "-u1**3*u0_x", "-2*u1**3*u1_x"]]),
    "dtoda:B2": (_TODA,
                 [["16*u1**4 + 12*u0**2*u1**2", "12*u0*u1**3 + u0**3*u1"],
                  ["12*u0*u1**3 + u0**3*u1", "4*u1**4 + 3*u0**2*u1**2"]],
                 [["12*u0*u1**2*u0_x + (32*u1**3 + 12*u0**2*u1)*u1_x",
                   "4*u1**3*u0_x + (24*u0*u1**2 + u0**3)*u1_x"],
                  ["(3*u0**2*u1 + 8*u1**3)*u0_x + 12*u0*u1**2*u1_x",
                   "3*u0*u1**2*u0_x + (8*u1**3 + 3*u0**2*u1)*u1_x"]]),
}

_TAILS = {
    "dtoda:B2": ((-1.0, ["4*u1*u1_x", "u1*u0_x"], ["4*u1*u1_x", "u1*u0_x"]),),
}

# (name, row, col) -> corrected c entry
_CORRECTIONS = {
    ("benny:B0", 1, 0): "0",
    ("benny:B0", 1, 1): "um1_x",
    ("benny:ext1", 1, 1): "2*um1*u0_x + 2*u0*um1_x",
}

OPERATOR_NAMES = tuple(_TABLES)


@lru_cache(maxsize=None)
def builtin_operator(name: str, variant: str = "corrected") -> HydroOperator:
    """Closed-form operators; ``variant="printed"`` keeps two known misprints.

    The printed b-term of the Benny second structure and entry (2, 2) of the
    Benny n = 1 extended table fail skew-adjointness; the corrected variant
    (default) is what the Dirac reduction and the generated operators produce.
    """
    if name not in _TABLES:
        raise UnknownOperator(name)
    if variant not in ("corrected", "printed"):
        raise ValueError("variant must be 'corrected' or 'printed'")
    fields, g_rows, c_rows = _TABLES[name]
    c_rows = [list(r) for r in c_rows]
    if variant == "corrected":
        for (n, i, j), s in _CORRECTIONS.items():
            if n == name:
                c_rows[i][j] = s
    return make_operator(name, fields, g_rows, c_rows, _TAILS.get(name, ()))


def table_discrepancies() -> list[tuple]:
    """``(operator, row, col, printed, corrected)`` for every corrected entry (1-based)."""
    out = []
    for (name, i, j), s in sorted(_CORRECTIONS.items()):
        out.append((name, i + 1, j + 1, _TABLES[name][2][i][j], s))
    return out


# ---------------------------------------------------------------------------
# Spectral evaluation
# ---------------------------------------------------------------------------


def _field_values(fields_names, state) -> dict:
    vals = {}
    for name, f in zip(fields_names, state):
        vals[name] = f
        vals[name + "_x"] = f.dx()
    return vals


@lru_cache(maxsize=4096)
def _terms(expr) -> tuple:
    """``(names, exponents, coefficient)`` monomials of a polynomial expression."""
    expr = sp.expand(expr)
    syms = sorted(expr.free_symbols, key=lambda s: s.name)
    if not syms:
        return ((), (), float(expr)),
    names = tuple(s.name for s in syms)
    return tuple((names, exps, float(coef)) for exps, coef in sp.Poly(expr, *syms).terms())


def eval_coefficient(expr, values: dict) -> FourierField:
    """Exact Fourier coefficients of a polynomial in the fields and derivatives."""
    out = FourierField.zero()
    for names, exps, coef in _terms(expr):
        if coef == 0.0:
            continue
        term = FourierField.constant(coef)
        for name, e in zip(names, exps):
            if e:
                term = term * values[name] ** e
        out = out + term
    return out


@dataclass
class _Evaluated:
    G: list
    C: list
    tail: list


def _evaluate(B: HydroOperator, state) -> _Evaluated:
    vals = _field_values(B.fields, state)
    n = B.dim
    G = [[eval_coefficient(B.g[i, j], vals) for j in range(n)] for i in range(n)]
    C = [[eval_coefficient(B.c[i, j], vals) for j in range(n)] for i in range(n)]
    tail = [(s, [eval_coefficient(e, vals) for e in wl], [eval_coefficient(e, vals) for e in wr])
            for s, wl, wr in B.tail]
    return _Evaluated(G, C, tail)


def apply_operator(B: HydroOperator, state, xi) -> tuple:
    """``B(u) xi`` with exact products; ``D^{-1}`` needs zero-mean arguments."""
    ev = _evaluate(B, state)
    n = B.dim
    if len(xi) != n:
        raise ValueError(f"{B.name} acts on {n} components")
    dxi = [x.dx() for x in xi]
    out = []
    for i in range(n):
        acc = FourierField.zero()
        for j in range(n):
            acc = acc + ev.G[i][j] * dxi[j] + ev.C[i][j] * xi[j]
        out.append(acc)
    for s, wl, wr in ev.tail:
        inner = FourierField.zero()
        for j in range(n):
            inner = inner + wr[j] * xi[j]
        prim = inner.antiderivative()
        out = [o + wl[i] * prim * s for i, o in enumerate(out)]
    return tuple(out)


def tail_constraint(B: HydroOperator, state, M: int) -> np.ndarray:
    """Rows ``r`` with ``r @ xi = int wr . xi``; the tails need these to vanish."""
    ev = _evaluate(B, state)
    if not ev.tail:
        return np.zeros((0, B.dim * (2 * M + 1)))
    return np.array([stack_real(tuple(wr), M) for _, _, wr in ev.tail])


# ---------------------------------------------------------------------------
# Real Fourier basis
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _unitary(M: int) -> np.ndarray:
    """Maps complex amplitudes on ``-M..M`` to real coordinates."""
    U = np.zeros((2 * M + 1, 2 * M + 1), dtype=complex)
    U[0, M] = 1.0
    for k in range(1, M + 1):
        U[2 * k - 1, M + k] = U[2 * k - 1, M - k] = 1 / SQRT2
        U[2 * k, M + k] = 1j / SQRT2
        U[2 * k, M - k] = -1j / SQRT2
    return U


def to_real(f: FourierField, M: int) -> np.ndarray:
    """Coordinates ``(mean, sqrt2 Re f_1, -sqrt2 Im f_1, ...)``."""
    return (_unitary(M) @ f.padded(M)).real


def from_real(r: np.ndarray, M: int) -> FourierField:
    return FourierField(_unitary(M).conj().T @ np.asarray(r, dtype=complex))


def basis_field(a: int, M: int) -> FourierField:
    e = np.zeros(2 * M + 1)
    e[a] = 1.0
    return from_real(e, M)


def stack_real(xi, M: int) -> np.ndarray:
    return np.concatenate([to_real(x, M) for x in xi])


def split_real(v: np.ndarray, M: int) -> tuple:
    n = 2 * M + 1
    return tuple(from_real(v[i * n:(i + 1) * n], M) for i in range(len(v) // n))


@dataclass
class OperatorMatrix:
    """Real Galerkin matrix of an operator on ``dim`` components, ``M`` modes each."""

    A: np.ndarray
    dim: int
    M: int
    label: str = ""

    @property
    def block_size(self) -> int:
        return 2 * self.M + 1

    def block(self, rows, cols) -> np.ndarray:
        n = self.block_size
        ri = np.concatenate([np.arange(i * n, (i + 1) * n) for i in rows])
        ci = np.concatenate([np.arange(j * n, (j + 1) * n) for j in cols])
        return self.A[np.ix_(ri, ci)]

    def apply(self, xi) -> tuple:
        return split_real(self.A @ stack_real(xi, self.M), self.M)

    def skew_defect(self) -> float:
        return float(np.max(np.abs(self.A + self.A.T)) / max(1.0, np.max(np.abs(self.A))))

    def kernel(self, rcond: float = 1e-9) -> np.ndarray:
        return null_space(self.A, rcond=rcond)


def _toeplitz(f: FourierField, rows: int, cols: int) -> np.ndarray:
    """Multiplication by ``f`` from modes ``|l| <= cols`` to modes ``|k| <= rows``."""
    b = f.bandwidth
    ks = np.arange(-rows, rows + 1)[:, None]
    ls = np.arange(-cols, cols + 1)[None, :]
    d = ks - ls
    out = np.zeros(d.shape, dtype=complex)
    inside = np.abs(d) <= b
    out[inside] = f.modes[d[inside] + b]
    return out


def assemble_matrix(B: HydroOperator, state, M: int) -> OperatorMatrix:
    """Exact compression ``P B P`` onto ``M`` modes per component."""
    ev = _evaluate(B, state)
    n, N = B.dim, 2 * M + 1
    Dk = np.diag(2j * np.pi * np.arange(-M, M + 1))
    Bc = np.zeros((n * N, n * N), dtype=complex)
    for i in range(n):
        for j in range(n):
            blk = _toeplitz(ev.G[i][j], M, M) @ Dk + _toeplitz(ev.C[i][j], M, M)
            Bc[i * N:(i + 1) * N, j * N:(j + 1) * N] += blk
    for s, wl, wr in ev.tail:
        P = M + max(w.bandwidth for w in wr)
        ks = np.arange(-P, P + 1).astype(float)
        inv = np.zeros_like(ks, dtype=complex)
        nz = ks != 0
        inv[nz] = 1.0 / (2j * np.pi * ks[nz])
        for i in range(n):
            left = _toeplitz(wl[i], M, P) * inv[None, :]
            for j in range(n):
                Bc[i * N:(i + 1) * N, j * N:(j + 1) * N] += s * left @ _toeplitz(wr[j], P, M)
    U = np.kron(np.eye(n), _unitary(M))
    A = U @ Bc @ U.conj().T
    return OperatorMatrix(A.real, n, M, B.name)


def assemble_action(action, dim: int, M: int, label: str = "") -> OperatorMatrix:
    """Matrix of a linear map on covector tuples, column by column."""
    N = 2 * M + 1
    A = np.zeros((dim * N, dim * N))
    zero = FourierField.zero()
    for j in range(dim):
        for a in range(N):
            xi = [zero] * dim
            xi[j] = basis_field(a, M)
            A[:, j * N + a] = stack_real(action(tuple(xi)), M)
    return OperatorMatrix(A, dim, M, label)


# ---------------------------------------------------------------------------
# Operators generated from the bracket tower
# ---------------------------------------------------------------------------


def _family_lax(family: str, state) -> LaurentElement:
    from .hierarchies import lax_element

    return lax_element(hierarchy(family), state)


def extended_degrees(family: str, n: int) -> tuple:
    """Lambda-degrees of the coordinates on the manifold where the n-th field lies."""
    if family == "benny":
        return tuple(range(0, -n - 3, -1))
    if family == "dtoda":
        return tuple(range(0, max(1, n) + 1))
    raise UnknownOperator(family)


def extended_action(family: str, n: int, state):
    """Covector tuple -> coordinates of ``ham_field`` at the family's Lax operator.

    Benny pairs ``u_d`` with the ``lam^{-1-d}`` slot of ``dH``.  dToda pairs
    ``u_0`` with the ``lam^0`` slot and ``u_d`` with the sum of the ``lam^{+-d}``
    slots; putting the whole covector on ``lam^d`` is enough because the
    field is insensitive to the split.
    """
    L = _family_lax(family, state)
    degs = extended_degrees(family, n)
    ctx = AlgebraContext.for_rmatrix(family).widened(mode_cap=4096, dmin=-256, dmax=256)
    slot = (lambda d: -1 - d) if family == "benny" else (lambda d: d)

    def action(xi):
        a = LaurentElement.from_fields({slot(d): x for d, x in zip(degs, xi)})
        X = ham_field_from_grad(a, L, n, ctx)
        return tuple(X.coeff(d) for d in degs)

    return action


def build_extended_operator(family: str, n: int, state, M: int) -> OperatorMatrix:
    dim = len(extended_degrees(family, n))
    return assemble_action(extended_action(family, n, state), dim, M, f"{family}:gen{n}")


def entrywise_defect(action, B: HydroOperator, state, kmax: int = 3) -> np.ndarray:
    """``max |action(e_j phi)_i - B_ij phi|`` over trig monomials ``phi``, ``k <= kmax``."""
    n = B.dim
    out = np.zeros((n, n))
    zero = FourierField.zero()
    probes = [FourierField.constant(1.0)]
    for k in range(1, kmax + 1):
        probes += [FourierField.cos(k), FourierField.sin(k)]
    for j in range(n):
        for phi in probes:
            xi = [zero] * n
            xi[j] = phi
            xi = tuple(xi)
            got, want = action(xi), apply_operator(B, state, xi)
            for i in range(n):
                out[i, j] = max(out[i, j], (got[i] - want[i]).norm())
    return out


# ---------------------------------------------------------------------------
# Dirac reduction
# ---------------------------------------------------------------------------


@dataclass
class DiracReduction:
    """``B_kk - B_kc pinv(B_cc) B_ck`` with the data that qualifies it.

    ``kernel`` spans the numerical kernel of ``B_cc``.  The reduced action is
    well defined on covectors with ``constraint @ xi = 0`` and is unique up to
    ``span(ambiguity)``, the image of that kernel under ``B_kc``.
    """

    matrix: np.ndarray
    kernel: np.ndarray
    ambiguity: np.ndarray
    constraint: np.ndarray
    dim: int
    M: int

    def kernel_independence_defect(self) -> float:
        if self.ambiguity.size == 0:
            return 0.0
        return float(np.max(np.linalg.norm(self.ambiguity, axis=0)))

    def sector_basis(self) -> np.ndarray:
        if self.constraint.size == 0:
            return np.eye(self.matrix.shape[1])
        return null_space(self.constraint)

    def project_to_sector(self, v: np.ndarray) -> np.ndarray:
        S = self.sector_basis()
        return S @ (S.T @ v)

    def apply_vector(self, v: np.ndarray, tol: float = 1e-8) -> np.ndarray:
        if self.constraint.size and np.linalg.norm(self.constraint @ v) > tol * max(1.0, np.linalg.norm(v)):
            raise IllPosedReduction("covector leaves the range of the constrained block")
        return self.matrix @ v

    def apply(self, xi, tol: float = 1e-8) -> tuple:
        return split_real(self.apply_vector(stack_real(xi, self.M), tol), self.M)


def dirac_reduce(ext: OperatorMatrix, keep, constrain, rcond: float = 1e-9) -> DiracReduction:
    keep, constrain = list(keep), list(constrain)
    Bkk = ext.block(keep, keep)
    if not constrain:
        n = Bkk.shape[1]
        return DiracReduction(Bkk, np.zeros((0, 0)), np.zeros((Bkk.shape[0], 0)),
                              np.zeros((0, n)), len(keep), ext.M)
    Bkc, Bcc, Bck = ext.block(keep, constrain), ext.block(constrain, constrain), ext.block(constrain, keep)
    U, s, Vt = np.linalg.svd(Bcc)
    r = int(np.sum(s > rcond * s[0]))
    pinv = (Vt[:r].T / s[:r]) @ U[:, :r].T
    Z_right = Vt[r:].T  # kernel of Bcc
    Z_left = U[:, r:]   # cokernel: range test for Bck xi
    red = Bkk - Bkc @ pinv @ Bck
    return DiracReduction(red, Z_right, Bkc @ Z_right, Z_left.T @ Bck, len(keep), ext.M)


def distance_modulo(v: np.ndarray, span: np.ndarray) -> float:
    """Euclidean distance from ``v`` to ``span`` (columns)."""
    if span.size == 0:
        return float(np.linalg.norm(v))
    c, *_ = np.linalg.lstsq(span, v, rcond=None)
    return float(np.linalg.norm(v - span @ c))


def sector_probes(rng: np.random.Generator, constraint: np.ndarray, dim: int, M: int,
                  count: int, bandwidth: int = 3, amplitude: float = 1.0) -> list:
    """Smooth random covectors satisfying ``constraint @ xi = 0``.

    A band-limited draw is corrected along other band-limited draws, so the
    probes stay smooth and Galerkin truncation never reaches them.
    """
    def draw():
        return stack_real(tuple(FourierField.random(rng, bandwidth, amplitude)
                                for _ in range(dim)), M)

    out = []
    m = constraint.shape[0] if constraint.size else 0
    for _ in range(count):
        v = draw()
        if m:
            P = np.column_stack([draw() for _ in range(m)])
            v = v - P @ np.linalg.lstsq(constraint @ P, constraint @ v, rcond=None)[0]
        out.append(v)
    return out


def low_mode_mask(dim: int, M: int, keep: int) -> np.ndarray:
    """Boolean mask of real coordinates with wavenumber ``<= keep``."""
    k = np.concatenate([[0], np.repeat(np.arange(1, M + 1), 2)])
    return np.tile(k <= keep, dim)


# ---------------------------------------------------------------------------
# Recursion operators
# ---------------------------------------------------------------------------


@dataclass
class RecursionResult:
    raw: float
    modulo: float
    sector_dim: int


def recursion_defect(family: str, state, k: int, M: int = 24, probes: int = 10,
                     rng: np.random.Generator | None = None, rcond: float = 1e-9) -> RecursionResult:
    """``|(R^k B0 - B_k) xi|`` over random sector covectors.

    ``raw`` uses the pseudo-inverse choice throughout; ``modulo`` measures the
    distance after removing the ``B0(ker B_{-1})`` ambiguity.  Probes are
    band-limited and only wavenumbers ``<= M // 2`` are compared, away from
    the truncation edge where the pseudo-inverse of the compressed matrix
    differs from the inverse of the operator.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    mats = {j: assemble_matrix(builtin_operator(f"{family}:B{j}"), state, M).A
            for j in (-1, 0, k)}
    Am1, A0, Ak = mats[-1], mats[0], mats[k]
    if k == 0:
        return RecursionResult(0.0, 0.0, A0.shape[1])
    U, s, Vt = np.linalg.svd(Am1)
    r = int(np.sum(s > rcond * s[0]))
    pinv = (Vt[:r].T / s[:r]) @ U[:, :r].T
    coker = U[:, r:]
    amb_dirs = A0 @ Vt[r:].T
    # sector: covectors for which every intermediate argument lies in range(B_{-1})
    n = A0.shape[1]
    conds = []
    T = A0.copy()
    for step in range(k):
        conds.append(coker.T @ T)
        if step < k - 1:
            T = A0 @ pinv @ T
    constraint = np.vstack(conds)
    dim = len(FAMILY_FIELDS[family])
    mask = low_mode_mask(dim, M, M // 2)
    worst_raw = worst_mod = 0.0
    for v in sector_probes(rng, constraint, dim, M, probes):
        y = A0 @ v
        amb = np.zeros((n, 0))
        for _ in range(k):
            y = A0 @ (pinv @ y)
            amb = np.hstack([A0 @ (pinv @ amb), amb_dirs]) if amb.size else amb_dirs
        diff = (y - Ak @ v)[mask]
        amb = amb[mask]
        scale = max(1.0, np.linalg.norm(Ak @ v))
        worst_raw = max(worst_raw, float(np.linalg.norm(diff)) / scale)
        worst_mod = max(worst_mod, distance_modulo(diff, amb) / scale)
    return RecursionResult(worst_raw, worst_mod, n - np.linalg.matrix_rank(constraint, tol=1e-9))


def recursion_operator(family: str, state, M: int = 24, rcond: float = 1e-9):
    """``R = B0 pinv(B_{-1})`` on real coordinate vectors.

    Arguments must lie in the range of ``B_{-1}``, i.e. be orthogonal to its
    kernel (the Casimir gradients); otherwise ``SectorViolation``.
    """
    Am1 = assemble_matrix(builtin_operator(f"{family}:B-1"), state, M).A
    A0 = assemble_matrix(builtin_operator(f"{family}:B0"), state, M).A
    U, s, Vt = np.linalg.svd(Am1)
    r = int(np.sum(s > rcond * s[0]))
    pinv = (Vt[:r].T / s[:r]) @ U[:, :r].T
    coker = U[:, r:]

    def R(v, tol: float = 1e-8):
        v = np.asarray(v, dtype=float)
        if np.linalg.norm(coker.T @ v) > tol * max(1.0, np.linalg.norm(v)):
            raise SectorViolation("argument has a component along the Casimir directions")
        return A0 @ (pinv @ v)

    return R


def casimir_defect(family: str, state) -> float:
    """``|B_{-1} dC|`` for the Casimir gradients of the first structure."""
    B = builtin_operator(f"{family}:B-1")
    one, zero = FourierField.constant(1.0), FourierField.zero()
    if family == "benny":
        grads = [(one, zero), (zero, one)]
    else:
        grads = [(one, zero), (zero, state[1].reciprocal())]
    return max(max(o.norm() for o in apply_operator(B, state, g)) for g in grads)


def linear_bracket(B: HydroOperator, a, b):
    """``u -> int a . B(u) b`` for constant-gradient functionals."""
    def G(state):
        return float(sum((x * y).mean().real for x, y in zip(a, apply_operator(B, state, b))))

    return G


def operator_jacobi_defect(B: HydroOperator, state, a, b, c, M: int = 10,
                           step: float = 1e-6) -> float:
    """Cyclic sum ``{{F_a, F_b}, F_c} + cyc`` for linear functionals ``F_a = int a . u``.

    The inner bracket's gradient comes from centred differences over the real
    Fourier basis, so ``M`` must cover the bandwidth of that gradient.
    """
    total = 0.0
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        grad = variational_derivative(linear_bracket(B, x, y), state, M, step)
        total += sum((g * w).mean().real for g, w in zip(grad, apply_operator(B, state, z)))
    return abs(total)


# ---------------------------------------------------------------------------
# Gradients, flows and metrics
# ---------------------------------------------------------------------------


def trace_hamiltonian(family: str, k: int):
    """``state -> tr(L^k)/k`` on the family's Lax manifold."""
    from .hierarchies import conserved_quantities

    h = hierarchy(family)

    def H(state):
        return conserved_quantities(h, _family_lax(family, state), k)[-1]

    return H


def trace_gradient(family: str, state, k: int) -> tuple:
    """Analytic variational derivative of ``tr(L^k)/k`` from ``dH = L^{k-1}``."""
    P = power(_family_lax(family, state), k - 1)
    if family == "benny":
        return (P.coeff(-1), P.coeff(0))
    return (P.coeff(0), P.coeff(1) + P.coeff(-1))


def variational_derivative(H, state, M: int, step: float = 1e-6) -> tuple:
    """Centred differences along each real basis coordinate of each field."""
    out = []
    for i in range(len(state)):
        grad = np.zeros(2 * M + 1)
        for a in range(2 * M + 1):
            e = basis_field(a, M)
            plus = list(state)
            minus = list(state)
            plus[i] = state[i] + e * step
            minus[i] = state[i] - e * step
            grad[a] = (H(tuple(plus)) - H(tuple(minus))) / (2 * step)
        out.append(from_real(grad, M))
    return tuple(out)


def flow_consistency_defect(family: str, n: int, k: int, state) -> float:
    """``|B_n dH_k - ham_field(tr L^k / k)|`` in manifold coordinates.

    Meaningful where the n-th field is tangent to the family's manifold
    (Benny n = -1, 0, 1 at trace Hamiltonians; dToda n = -1, 0, 1).
    """
    from .tower import trace_monomial

    ctx = AlgebraContext.for_rmatrix(family).widened(mode_cap=256, dmin=-64, dmax=64)
    L = _family_lax(family, state)
    X = ham_field_from_grad(trace_monomial(k, ctx).grad(L), L, n, ctx)
    degs = (0, -1) if family == "benny" else (0, 1)
    Bx = apply_operator(builtin_operator(f"{family}:B{n}"), state, trace_gradient(family, state, k))
    return max((X.coeff(d) - b).norm() for d, b in zip(degs, Bx))


@dataclass(frozen=True)
class MetricReport:
    det: np.ndarray
    degenerate: bool
    min_abs_det: float
    extras: dict = field(default_factory=dict)


def _has_zero(v: np.ndarray, tol: float = 1e-12) -> bool:
    """True when ``v`` vanishes (to round-off) or changes sign on the periodic grid."""
    scale = max(1.0, float(np.max(np.abs(v))))
    s = np.sign(v)
    return bool(np.any(np.abs(v) <= tol * scale) or np.any(s != np.roll(s, 1)))


def metric_degeneracy(name: str, state, grid: int = 512) -> MetricReport:
    """Pointwise ``det g`` of an operator's leading matrix, with zero detection."""
    B = builtin_operator(name)
    syms = [sp.Symbol(f) for f in B.fields]
    det = sp.lambdify(syms, sp.factor(B.g.det()), "numpy")
    vals = [f.grid(grid) for f in state]
    d = np.broadcast_to(np.asarray(det(*vals), dtype=float), vals[0].shape).copy()
    extras = {}
    if name.startswith("benny"):
        delta = vals[0] ** 2 - 4 * vals[1]
        extras["min_abs_delta"] = float(np.min(np.abs(delta)))
    else:
        w1w2 = (vals[0] - 2 * vals[1]) * (vals[0] + 2 * vals[1])
        extras["min_abs_w1w2"] = float(np.min(np.abs(w1w2)))
        extras["min_u1"] = float(np.min(vals[1]))
    return MetricReport(d, _has_zero(d), float(np.min(np.abs(d))), extras)


def metric_determinant_expr(name: str) -> sp.Expr:
    return sp.factor(builtin_operator(name).g.det())
