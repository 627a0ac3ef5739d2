"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL`` line with the tightest
defect, bypassing output capture so it shows in any pytest run.
"""
import numpy as np
import pytest

from laxtower import checks as C
from laxtower import hierarchies as hz
from laxtower.laurent import FourierField as F

SEED = 0


@pytest.fixture
def report(capsys):
    def emit(n: int, title: str, rows: list) -> None:
        with capsys.disabled():
            _report(n, title, rows)
    return emit


def _report(n: int, title: str, rows: list) -> None:
    assert rows, f"criterion {n} produced no checks"
    failed = [r for r in rows if not r.passed]
    graded = [r for r in rows if np.isfinite(r.tol)]
    worst = max(graded, key=lambda r: r.defect / r.tol if r.expect == "below" else r.tol / max(r.defect, 1e-300))
    status = "PASS" if not failed else "FAIL"
    print(f"\n[criterion {n}] {status} {title}: {len(rows)} checks, "
          f"tightest {worst.check_id} defect={worst.defect:.3e} tol={worst.tol:.0e}")
    for r in failed:
        print(f"    failed {r.check_id} {r.params} defect={r.defect:.3e} tol={r.tol:.0e}")
    assert not failed


def test_criterion_01_rmatrix_validity(report):
    rows = C.suite_rmatrix(SEED, probes=50)
    ids = {r.check_id for r in rows}
    assert ids == {"rbracket_jacobi", "lower_closure"}
    assert len([r for r in rows if r.check_id == "lower_closure"]) == 4
    report(1, "R-bracket Jacobi and lower half-line closure", rows)


def test_criterion_02_bracket_tower(report):
    rows = C.suite_jacobi(SEED, probes=20) + C.suite_compat(SEED, probes=20)
    assert {r.params.split(";")[0] for r in rows} == {f"rmatrix={n}" for n in C.RMATRIX_NAMES}
    report(2, "Jacobi and pairwise compatibility of the tower", rows)


def test_criterion_03_virasoro(report):
    rows = C.suite_virasoro(SEED, probes=20, names=C.RMATRIX_NAMES)
    assert len([r for r in rows if r.check_id == "lie_derivative"]) == 25 * len(C.RMATRIX_NAMES)
    report(3, "Virasoro commutators and Lie derivatives", rows)


def test_criterion_04_involution_and_lax_form(report):
    report(4, "trace monomials in involution, Lax form", C.suite_involution(SEED, probes=20))


def test_criterion_05_multiplicativity_and_inversion(report):
    rows = C.suite_mult(SEED, probes=20) + C.suite_inversion(SEED, probes=20)
    report(5, "multiplicativity and inversion", rows)


def test_criterion_06_commuting_flows(report):
    report(6, "commuting flows and degree-one invariance", C.suite_flows(SEED))


def test_criterion_07_pde_equivalence(report):
    report(7, "Lax flows reproduce the quasi-linear systems", C.suite_pde(SEED))


def test_criterion_08_submanifold_classification(report):
    rows = C.suite_classification(SEED)
    assert len([r for r in rows if r.check_id == "leak_degrees"]) == 2
    report(8, "Poisson submanifold classification and leak degrees", rows)


def test_criterion_09_operator_reproduction(report):
    rows = []
    for family, n in C.REDUCTIONS:
        rows += C.reduction_checks(family, n, C.default_state(family), M=16, probes=10, seed=SEED)
    ids = {r.check_id for r in rows}
    assert {"extended_operator", "reduced_operator"} <= ids
    report(9, "extended operators and Dirac reductions", rows)


def test_criterion_10_recursion(report):
    rows = C.recursion_checks("benny", C.default_state("benny")) + \
        C.recursion_checks("dtoda", C.default_state("dtoda"))
    assert len([r for r in rows if r.check_id == "recursion"]) == 3
    report(10, "recursion operator identities", rows)


def test_criterion_11_conservation(report):
    rows = C.evolution_checks("benny") + C.evolution_checks("dtoda")
    assert len([r for r in rows if r.check_id == "drift_ratio"]) == 2
    report(11, "conservation and fourth-order convergence", rows)


def test_criterion_12_diagnostics(report):
    rng = np.random.default_rng(SEED)
    states = {
        "benny": [C.default_state("benny"), C.random_family_state("benny", rng),
                  # u0^2 - 4 u_{-1} changes sign
                  (F.constant(2.0), F.constant(1.0) + F.cos(1, 0.5))],
        "dtoda": [C.default_state("dtoda"), C.random_family_state("dtoda", rng),
                  # w1 w2 vanishes where u0 = 2 u1
                  (F.constant(2.0) + F.cos(1, 0.5), F.constant(1.0))],
    }
    rows = C.metric_checks(states)
    flagged = [r for r in rows if "degenerate=True" in r.params]
    assert flagged and len(flagged) < len(rows)
    rep = hz.riemann_invariants(hz.FieldState(states["dtoda"][2]))
    assert rep.degenerate and rep.hyperbolic
    report(12, "metric determinants and degeneracy flags", rows)
