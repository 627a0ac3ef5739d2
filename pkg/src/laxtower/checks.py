"""Seeded verification suites producing uniform report rows.

Each suite returns a list of ``CheckResult``; a row passes when its defect is
below ``tol`` (or above it, for rows asserting that something fails).  The
command line tool and the acceptance tests both run these suites.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import hierarchies as hz
from . import operators as ops
from . import tower as T
from .laurent import AlgebraContext, FourierField, LaurentElement, power
from .lie import RMATRICES, Subspace, r_bracket_jacobi_defect, subalgebra_closure_defect

RMATRIX_NAMES = tuple(RMATRICES)
SWEEP_CAPS = dict(mode_cap=64, dmin=-64, dmax=48)
INVERSION_CAPS = dict(mode_cap=1024, dmin=-160, dmax=48)
BRACKET_RANGE = (-1, 0, 1, 2, 3)


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    anchor: str
    params: str
    defect: float
    tol: float
    expect: str = "below"

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.defect):
            return False
        return self.defect < self.tol if self.expect == "below" else self.defect > self.tol

    def row(self) -> dict:
        return {"check_id": self.check_id, "anchor": self.anchor, "params": self.params,
                "defect": f"{self.defect:.3e}", "tol": f"{self.tol:.0e}",
                "pass": "1" if self.passed else "0"}


def _params(**kw) -> str:
    return ";".join(f"{k}={v}" for k, v in kw.items())


def sweep_context(name: str, **caps) -> AlgebraContext:
    return AlgebraContext.for_rmatrix(name).widened(**(caps or SWEEP_CAPS))


# ---------------------------------------------------------------------------
# R-matrices
# ---------------------------------------------------------------------------


def suite_rmatrix(seed: int = 0, probes: int = 50, names=RMATRIX_NAMES) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for name in names:
        worst = 0.0
        for _ in range(probes):
            X, Y, Z = (LaurentElement.random(rng, range(-3, 4), 2, 0.5) for _ in range(3))
            worst = max(worst, r_bracket_jacobi_defect(X, Y, Z, name))
        out.append(CheckResult("rbracket_jacobi", "r-bracket Jacobi identity",
                               _params(rmatrix=name, probes=probes), worst, 1e-10))
    for k in (0, 1, 2, 3):
        d = subalgebra_closure_defect(Subspace("le", k), "minus_one", rng)
        closed = k <= 2
        out.append(CheckResult("lower_closure", "closure of degree <= k-1 subspaces",
                               _params(k=k, expect="closed" if closed else "open"),
                               d, 1e-12 if closed else 1e-6, "below" if closed else "above"))
    return out


# ---------------------------------------------------------------------------
# Bracket tower
# ---------------------------------------------------------------------------


def _probe_sets(rng, ctx, probes):
    for _ in range(probes):
        L = T.random_point(rng, ctx)
        yield L, [T.random_linear(rng, ctx) for _ in range(3)]


def suite_jacobi(seed: int = 0, probes: int = 20, names=RMATRIX_NAMES, ns=BRACKET_RANGE) -> list:
    out = []
    for name in names:
        ctx = sweep_context(name)
        rng = np.random.default_rng(seed)
        worst = {n: 0.0 for n in ns}
        for L, (F, G, H) in _probe_sets(rng, ctx, probes):
            for n in ns:
                worst[n] = max(worst[n], T.jacobi_defect(n, F, G, H, L, ctx))
        out += [CheckResult("tower_jacobi", "Jacobi identity of the n-th bracket",
                            _params(rmatrix=name, n=n, probes=probes), worst[n], 1e-5)
                for n in ns]
    return out


def suite_compat(seed: int = 0, probes: int = 20, names=RMATRIX_NAMES, ns=BRACKET_RANGE) -> list:
    out = []
    pairs = list(itertools.combinations(ns, 2))
    for name in names:
        ctx = sweep_context(name)
        rng = np.random.default_rng(seed)
        worst = {p: 0.0 for p in pairs}
        for L, (F, G, H) in _probe_sets(rng, ctx, probes):
            for m, n in pairs:
                worst[m, n] = max(worst[m, n], T.compatibility_defect(m, n, F, G, H, L, ctx))
        out += [CheckResult("tower_compat", "pairwise compatibility of the brackets",
                            _params(rmatrix=name, m=m, n=n, probes=probes), worst[m, n], 1e-5)
                for m, n in pairs]
    return out


def suite_virasoro(seed: int = 0, probes: int = 20, names=("benny", "dtoda"),
                   ms=BRACKET_RANGE) -> list:
    out = []
    for name in names:
        ctx = sweep_context(name)
        rng = np.random.default_rng(seed)
        comm = {}
        lie = {}
        for L, (F, H, _) in _probe_sets(rng, ctx, probes):
            for m, n in itertools.product(ms, ms):
                comm[m, n] = max(comm.get((m, n), 0.0), T.virasoro_commutator_defect(m, n, L, ctx))
                lie[m, n] = max(lie.get((m, n), 0.0), T.lie_derivative_defect(m, n, F, H, L, ctx))
        for (m, n), d in comm.items():
            out.append(CheckResult("virasoro_commutator", "[V_m, V_n] = (n - m) V_{m+n}",
                                   _params(rmatrix=name, m=m, n=n), d, 1e-11))
        for (m, n), d in lie.items():
            out.append(CheckResult("lie_derivative", "Virasoro Lie derivative of the brackets",
                                   _params(rmatrix=name, m=m, n=n, probes=probes), d, 1e-6))
    return out


def suite_involution(seed: int = 0, probes: int = 20, names=RMATRIX_NAMES) -> list:
    out = []
    for name in names:
        ctx = sweep_context(name)
        rng = np.random.default_rng(seed)
        inv = lax = 0.0
        for _ in range(probes):
            L = T.random_point(rng, ctx)
            for n in BRACKET_RANGE:
                for j, k in itertools.combinations(range(1, 5), 2):
                    inv = max(inv, T.involution_defect(j, k, n, L, ctx))
                for k in range(1, 5):
                    lax = max(lax, T.lax_form_defect(T.trace_monomial(k, ctx), L, n, ctx))
        out.append(CheckResult("involution", "trace monomials Poisson commute",
                               _params(rmatrix=name, probes=probes), inv, 1e-11))
        out.append(CheckResult("lax_form", "Hamiltonian field of ad-invariant functionals",
                               _params(rmatrix=name, probes=probes), lax, 1e-12))
    return out


def suite_mult(seed: int = 0, probes: int = 20, names=RMATRIX_NAMES) -> list:
    out = []
    for name in names:
        ctx = sweep_context(name)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            L1, L2 = T.random_point(rng, ctx), T.random_point(rng, ctx)
            F, H = T.random_linear(rng, ctx), T.random_linear(rng, ctx)
            worst = max(worst, T.multiplicativity_defect(F, H, L1, L2, ctx))
        out.append(CheckResult("multiplicativity", "multiplication is a Poisson map",
                               _params(rmatrix=name, probes=probes), worst, 1e-10))
    return out


def suite_inversion(seed: int = 0, probes: int = 20, names=("benny", "dtoda"),
                    ns=(0, 1, 2, 3), order: int = 8) -> list:
    out = []
    for name in names:
        ctx = sweep_context(name, **INVERSION_CAPS)
        rng = np.random.default_rng(seed)
        worst = {n: 0.0 for n in ns}
        for _ in range(probes):
            L = T.random_invertible_point(rng, ctx)
            F, H = T.random_linear(rng, ctx), T.random_linear(rng, ctx)
            for n in ns:
                worst[n] = max(worst[n], T.inversion_defect(F, H, L, n, ctx, order))
        out += [CheckResult("inversion", "inversion maps the n-th bracket to the (-n)-th",
                            _params(rmatrix=name, n=n, order=order, probes=probes), worst[n], 1e-5)
                for n in ns]
    return out


def suite_flows(seed: int = 0, probes: int = 5, names=RMATRIX_NAMES) -> list:
    out = []
    for name in names:
        ctx = sweep_context(name)
        rng = np.random.default_rng(seed)
        comm = deg1 = second = 0.0
        for _ in range(probes):
            L = T.random_point(rng, ctx)
            for j, k in itertools.combinations(range(1, 5), 2):
                comm = max(comm, T.commuting_flows_defect(lambda M, j=j: power(M, j),
                                                          lambda M, k=k: power(M, k), L, ctx))
            for m, n in itertools.product((-1, 0, 1, 2), (0, 1, 2, 3)):
                deg1 = max(deg1, T.degree1_invariant_defect(m, n, L, ctx))
            for k, n in itertools.product((1, 2), (-1, 0, 1, 2)):
                second = max(second, T.second_lie_derivative_defect(k, n, L, ctx))
        out.append(CheckResult("commuting_flows", "Lax flows of powers commute",
                               _params(rmatrix=name, probes=probes), comm, 1e-5))
        out.append(CheckResult("degree1_invariance", "Virasoro transport of basic Lax fields",
                               _params(rmatrix=name, probes=probes), deg1, 1e-5))
        out.append(CheckResult("second_lie_derivative", "second Lie derivative of V_n vanishes",
                               _params(rmatrix=name, probes=probes, k="1..2"), second, 1e-5))
    return out


# ---------------------------------------------------------------------------
# Hierarchies
# ---------------------------------------------------------------------------


def displayed_rhs(family: str, state, grid: int = 256) -> tuple:
    """Grid values of the quasi-linear systems written in closed form."""
    u0, u1 = (f.grid(grid) for f in state)
    u0x, u1x = (f.dx().grid(grid) for f in state)
    if family == "benny":
        return (u0 * u0x + u1x, u1 * u0x + u0 * u1x)
    if family == "dtoda":
        return (4 * u1 * u1x, u1 * u0x)
    raise ValueError(family)


def pde_equivalence_defect(family: str, state, grid: int = 256) -> float:
    h = hz.hierarchy(family)
    m, scale = hz.DISPLAYED_FLOW_SCALE[family]
    X = hz.lax_rhs(h, hz.lax_element(h, state), m)
    degs = (0, -1) if family == "benny" else (0, 1)
    want = displayed_rhs(family, state, grid)
    return max(float(np.max(np.abs(scale * X.coeff(d).grid(grid) - w))) for d, w in zip(degs, want))


def suite_pde(seed: int = 0, probes: int = 10) -> list:
    out = []
    for family in ("benny", "dtoda"):
        h = hz.hierarchy(family)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            st = hz.random_state(h, rng)
            worst = max(worst, pde_equivalence_defect(family, st.fields))
        m, scale = hz.DISPLAYED_FLOW_SCALE[family]
        out.append(CheckResult("pde_equivalence", "Lax flow equals the quasi-linear system",
                               _params(family=family, m=m, scale=scale, probes=probes), worst, 1e-10))
    return out


EXPECTED_SUBMANIFOLDS = {
    "benny": {-1}, "dtoda": {-1, 0, 1}, "dkp": {-1, 0}, "dmkp": {-1, 0, 1},
    "ddym": {-1, 0, 1, 2, 3},
}
EXPECTED_LEAKS = {("benny", 0): (-2,), ("benny", 1): (-2, -3)}


def suite_classification(seed: int = 0, ns=range(-1, 5)) -> list:
    out = []
    for name, expected in EXPECTED_SUBMANIFOLDS.items():
        h = hz.hierarchy(name)
        found = set()
        for n in ns:
            rep = hz.poisson_submanifold_defect(h, n, np.random.default_rng(seed))
            if rep.is_poisson:
                found.add(n)
            key = (name, n)
            if key in EXPECTED_LEAKS:
                ok = tuple(sorted(rep.leak_degrees, reverse=True)) == EXPECTED_LEAKS[key]
                out.append(CheckResult("leak_degrees", "degrees leaking off the manifold",
                                       _params(family=name, n=n,
                                               leaks=" ".join(map(str, rep.leak_degrees))),
                                       0.0 if ok else 1.0, 0.5))
        out.append(CheckResult("poisson_submanifold", "brackets tangent to the Lax manifold",
                               _params(family=name, found=" ".join(map(str, sorted(found)))),
                               0.0 if found == expected else 1.0, 0.5))
    return out


def evolution_checks(family: str, T_end: float = 0.5, dt: float = 1e-3, modes: int = 32,
                     kmax: int = 5) -> list:
    """Conservation at ``dt`` and the drift ratio of the dominant invariant at ``dt / 2``."""
    h = hz.hierarchy(family)
    m, _ = hz.DISPLAYED_FLOW_SCALE[family]
    st = hz.FieldState(example_state(family))
    traj = hz.evolve(h, st, m, dt, T_end, modes=modes, kmax=kmax)
    half = hz.evolve(h, st, m, dt / 2, T_end, modes=modes, kmax=kmax)
    drift, cas = traj.drift(), traj.casimir_drift()
    p = _params(family=family, m=m, dt=dt, T=T_end, modes=modes)
    out = [CheckResult("conserved_drift", "trace invariants conserved", p + f";k=1..{kmax}",
                       float(np.max(drift)), 1e-8),
           CheckResult("casimir_drift", "Casimirs conserved", p, float(np.max(cas)), 1e-8)]
    dom = int(np.argmax(drift))
    ratio = float(drift[dom] / half.drift()[dom])
    out.append(CheckResult("drift_ratio", "fourth-order drift under dt halving",
                           p + f";k={dom + 1};ratio={ratio:.2f}", abs(ratio - 16.0), 4.0))
    return out


def example_state(family: str) -> tuple:
    """Smooth single-mode initial data used for the evolution checks."""
    if family == "benny":
        return (FourierField.sin(1, 0.1), FourierField.constant(1.0))
    return (FourierField.cos(1, 0.1), FourierField.constant(1.0))


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


def default_state(family: str) -> tuple:
    if family == "benny":
        return (FourierField.sin(1, 0.1) + FourierField.cos(2, 0.05),
                FourierField.constant(1.0) + FourierField.cos(1, 0.1))
    return (FourierField.cos(1, 0.1) + FourierField.sin(2, 0.05),
            FourierField.constant(1.0) + FourierField.sin(1, 0.1))


def random_family_state(family: str, rng: np.random.Generator, amplitude: float = 0.1) -> tuple:
    u0 = FourierField.random(rng, 2, amplitude)
    u1 = FourierField.random(rng, 2, amplitude, mean=1.0)
    return (u0, u1)


REDUCTIONS = {("benny", 0): "benny:B0", ("benny", 1): "benny:B1", ("dtoda", 2): "dtoda:B2"}
EXTENDED_TABLES = {("benny", 0): "benny:ext0", ("benny", 1): "benny:ext1", ("dtoda", 2): "dtoda:ext2"}


def reduction_checks(family: str, n: int, state, M: int = 16, probes: int = 10,
                     seed: int = 0) -> list:
    """Generated extended operator vs table, reduced operator vs closed form."""
    p = _params(family=family, n=n, modes=M)
    out = []
    ext_name = EXTENDED_TABLES[family, n]
    act = ops.extended_action(family, n, state)
    for variant in ("corrected", "printed"):
        d = float(np.max(ops.entrywise_defect(act, ops.builtin_operator(ext_name, variant), state)))
        if variant == "corrected":
            out.append(CheckResult("extended_operator", "generated operator matches the table",
                                   p + ";table=" + variant, d, 1e-9))
        elif d > 1e-9:
            out.append(CheckResult("printed_table_discrepancy",
                                   "printed table differs from the generated operator",
                                   p + ";table=printed", d, 1e-9, "above"))
    ext = ops.build_extended_operator(family, n, state, M)
    red = ops.dirac_reduce(ext, [0, 1], range(2, ext.dim))
    A = ops.assemble_matrix(ops.builtin_operator(REDUCTIONS[family, n]), state, M)
    mask = ops.low_mode_mask(2, M, M // 2)
    rng = np.random.default_rng(seed)
    for i, v in enumerate(ops.sector_probes(rng, red.constraint, 2, M, probes)):
        diff = (red.matrix @ v - A.A @ v)[mask]
        q = p + f";probe={i}"
        out.append(CheckResult("reduced_operator", "Dirac reduction reproduces the closed form",
                               q + f";kernel_dim={red.kernel.shape[1]}",
                               ops.distance_modulo(diff, red.ambiguity[mask]), 1e-8))
        out.append(CheckResult("reduced_operator_raw", "reduction with the pseudo-inverse choice",
                               q, float(np.max(np.abs(diff))), np.inf))
    out.append(CheckResult("kernel_ambiguity", "size of the kernel ambiguity B_kc ker B_cc",
                           p, red.kernel_independence_defect(), np.inf))
    return out


def recursion_checks(family: str, state, M: int = 24) -> list:
    out = []
    tol = 1e-8 if family == "benny" else 1e-7
    ks = (1,) if family == "benny" else (1, 2)
    for k in ks:
        r = ops.recursion_defect(family, state, k, M)
        p = _params(family=family, k=k, modes=M, sector_dim=r.sector_dim)
        out.append(CheckResult("recursion", "B_k = R^k B_0 with R = B_0 B_{-1}^{-1}", p, r.modulo, tol))
        out.append(CheckResult("recursion_raw", "recursion with the pseudo-inverse choice",
                               p, r.raw, np.inf))
    return out


def operator_checks(family: str, state, seed: int = 0, M: int = 16) -> list:
    rng = np.random.default_rng(seed)
    out = []
    names = [n for n in ops.OPERATOR_NAMES if n.startswith(family) and "ext" not in n]
    for name in names:
        B = ops.builtin_operator(name)
        A = ops.assemble_matrix(B, state, M)
        out.append(CheckResult("operator_skew", "assembled operator is skew-symmetric",
                               _params(operator=name, modes=M), A.skew_defect(), 1e-9))
        v = ops.sector_probes(rng, ops.tail_constraint(B, state, M), B.dim, M, 1)[0]
        xi = ops.split_real(v, M)
        direct = ops.apply_operator(B, state, xi)
        d = max((a - b).norm() for a, b in zip(A.apply(xi), direct))
        out.append(CheckResult("matrix_action", "matrix action equals direct application",
                               _params(operator=name, modes=M), d, 1e-10))
        if not B.tail:
            a, b, c = ([FourierField.random(rng, 1, 1.0) for _ in range(B.dim)] for _ in range(3))
            out.append(CheckResult("operator_jacobi", "Jacobi identity of the operator bracket",
                                   _params(operator=name),
                                   ops.operator_jacobi_defect(B, state, a, b, c), 1e-5))
    out.append(CheckResult("casimir_kernel", "first structure annihilates Casimir gradients",
                           _params(family=family), ops.casimir_defect(family, state), 1e-10))
    worst = max(ops.flow_consistency_defect(family, n, k, state)
                for n in (-1, 0, 1) for k in range(1, 5))
    out.append(CheckResult("flow_consistency", "operator flows equal Hamiltonian fields",
                           _params(family=family, n="-1..1", k="1..4"), worst, 1e-8))
    return out


def metric_checks(state_by_family: dict, grid: int = 512) -> list:
    """Determinants and degeneracy flags against their factored analytic forms."""
    out = []
    for name in ("benny:B0", "benny:B1", "dtoda:B-1", "dtoda:B0", "dtoda:B1"):
        family = name.split(":")[0]
        for st in state_by_family[family]:
            rep = ops.metric_degeneracy(name, st, grid)
            a, b = (f.grid(grid) for f in st)
            if family == "benny":
                delta = a ** 2 - 4 * b
                want = {"benny:B0": -delta, "benny:B1": -delta ** 2}[name]
                flag = bool(np.any(np.abs(delta) < 1e-12) or np.any(np.sign(delta) != np.sign(np.roll(delta, 1))))
            else:
                w12 = (a - 2 * b) * (a + 2 * b)
                want = {"dtoda:B-1": -b ** 2, "dtoda:B0": -b ** 2 * w12,
                        "dtoda:B1": -b ** 2 * w12 ** 2}[name]
                z = b ** 2 if name == "dtoda:B-1" else b ** 2 * w12
                flag = bool(np.any(np.abs(z) < 1e-12) or np.any(np.sign(z) != np.sign(np.roll(z, 1))))
            d = float(np.max(np.abs(rep.det - want)) / max(1.0, np.max(np.abs(want))))
            if rep.degenerate != flag:
                d = np.inf
            out.append(CheckResult("metric_determinant", "det g and degeneracy flag",
                                   _params(operator=name, degenerate=rep.degenerate), d, 1e-12))
    return out
