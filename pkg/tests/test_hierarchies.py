import numpy as np
import pytest

from laxtower import hierarchies as hz
from laxtower.errors import BlowUp, LaxTowerError, TangencyViolation
from laxtower.laurent import FourierField as F, LaurentElement as LE, distance

N = 64


def g(f):
    return f.grid(N)


def benny_state():
    return hz.FieldState((F.sin(1, 0.1) + F.cos(2, 0.05), F.constant(1.0) + F.cos(1, 0.1)))


def dtoda_state():
    return hz.FieldState((F.cos(1, 0.2), F.constant(1.0) + F.sin(1, 0.1)))


def test_lax_element_and_state_roundtrip():
    h = hz.hierarchy("dtoda")
    st = dtoda_state()
    L = hz.lax_element(h, st)
    assert (L.coeff(-1) - st.fields[1]).norm() == 0.0
    assert (L.coeff(1) - st.fields[1]).norm() == 0.0
    back = hz.state_of(h, L)
    assert all((a - b).norm() == 0.0 for a, b in zip(back.fields, st.fields))
    with pytest.raises(ValueError):
        hz.lax_element(h, st.fields[:1])
    with pytest.raises(ValueError):
        hz.hierarchy("kdv")


def test_benny_first_flow_is_translation():
    h = hz.hierarchy("benny")
    st = benny_state()
    for got, f in zip(hz.rhs_fields(h, st, 1), st.fields):
        assert (got - f.dx()).norm() < 1e-14


def test_benny_displayed_system_against_grid_oracle():
    h = hz.hierarchy("benny")
    st = benny_state()
    u0, um1 = st.fields
    m, scale = hz.DISPLAYED_FLOW_SCALE["benny"]
    a, b = hz.rhs_fields(h, st, m)
    want_a = g(u0) * g(u0.dx()) + g(um1.dx())
    want_b = g(um1) * g(u0.dx()) + g(u0) * g(um1.dx())
    assert np.max(np.abs(scale * g(a) - want_a)) < 1e-13
    assert np.max(np.abs(scale * g(b) - want_b)) < 1e-13


def test_dtoda_displayed_system_against_grid_oracle():
    h = hz.hierarchy("dtoda")
    st = dtoda_state()
    u0, u1 = st.fields
    a, b = hz.rhs_fields(h, st, 1)
    assert np.max(np.abs(g(a) - 4 * g(u1) * g(u1.dx()))) < 1e-13
    assert np.max(np.abs(g(b) - g(u1) * g(u0.dx()))) < 1e-13


@pytest.mark.parametrize("name", ["benny", "dtoda"])
def test_constant_states_are_stationary(name):
    h = hz.hierarchy(name)
    st = hz.FieldState((F.constant(0.3), F.constant(1.2)))
    for m in (1, 2, 3):
        assert all(f.norm() < 1e-15 for f in hz.rhs_fields(h, st, m))


def test_flow_index_must_be_positive():
    h = hz.hierarchy("benny")
    with pytest.raises(ValueError):
        hz.lax_rhs(h, hz.lax_element(h, benny_state()), 0)


def test_benny_conserved_quantities_against_grid_oracle():
    h = hz.hierarchy("benny")
    u0, um1 = benny_state().fields
    c = hz.conserved_quantities(h, hz.lax_element(h, benny_state()), 3)
    # coefficients of lam^-1 in L, L^2, L^3
    assert c[0] == pytest.approx(np.mean(g(um1)), abs=1e-15)
    assert c[1] == pytest.approx(np.mean(g(u0) * g(um1)), abs=1e-15)
    want3 = np.mean(g(u0) ** 2 * g(um1) + g(um1) ** 2)
    assert c[2] == pytest.approx(want3, abs=1e-14)


def test_dtoda_conserved_quantities_against_grid_oracle():
    h = hz.hierarchy("dtoda")
    u0, u1 = dtoda_state().fields
    c = hz.conserved_quantities(h, hz.lax_element(h, dtoda_state()), 2)
    assert c[0] == pytest.approx(np.mean(g(u0)), abs=1e-15)
    assert c[1] == pytest.approx(np.mean(g(u0) ** 2 + 2 * g(u1) ** 2) / 2, abs=1e-15)


def test_casimirs():
    h = hz.hierarchy("dtoda")
    c = hz.casimirs(h, dtoda_state())
    assert c[0] == pytest.approx(0.0, abs=1e-15)
    x = np.arange(4096) / 4096
    assert c[1] == pytest.approx(np.mean(np.log(1 + 0.1 * np.sin(2 * np.pi * x))), abs=1e-14)
    bad = hz.FieldState((F.zero(), F.sin(1)))
    with pytest.raises(LaxTowerError):
        hz.casimirs(h, bad)
    assert hz.casimirs(hz.hierarchy("benny"), benny_state()) == pytest.approx([0.0, 1.0])


@pytest.mark.parametrize("name", ["benny", "dtoda"])
def test_evolution_conserves_invariants(name):
    h = hz.hierarchy(name)
    st = benny_state() if name == "benny" else dtoda_state()
    m = hz.DISPLAYED_FLOW_SCALE[name][0]
    traj = hz.evolve(h, st, m, 2e-3, 0.1, modes=32, kmax=4)
    assert len(traj.states) == 51
    assert traj.times[-1] == pytest.approx(0.1)
    assert np.max(traj.drift()) < 1e-8
    assert np.max(traj.casimir_drift()) < 1e-8
    assert traj.drift_series().shape == (51, 4)


def test_dtoda_evolution_keeps_sign_of_u1():
    h = hz.hierarchy("dtoda")
    traj = hz.evolve(h, dtoda_state(), 1, 1e-2, 0.2, modes=32)
    assert all(np.all(s.fields[1].grid(256) > 0) for s in traj.states)


def test_evolve_rejects_bad_step():
    h = hz.hierarchy("benny")
    with pytest.raises(ValueError):
        hz.evolve(h, benny_state(), 1, 0.3, 1.0)
    with pytest.raises(ValueError):
        hz.evolve(h, benny_state(), 1, 0.1, 0.2, scheme="euler")


def test_shock_formation_raises_blowup():
    h = hz.hierarchy("benny")
    st = hz.FieldState((F.sin(1, 1.0), F.constant(1.0) + F.cos(1, 0.5)))
    with pytest.raises(BlowUp):
        hz.evolve(h, st, 2, 1e-3, 2.0, modes=16)


def test_plus_and_minus_forms_agree():
    h = hz.hierarchy("benny")
    L = hz.lax_element(h, benny_state())
    plus, minus = hz._both_forms(h, L, 3)
    assert distance(plus, minus) < 1e-13


def test_tangency_violation_detected():
    h = hz.hierarchy("benny")
    L = LE.from_fields({2: 1.0, 0: F.sin(1, 0.1), -1: 1.0})
    with pytest.raises(TangencyViolation):
        hz.lax_rhs(h, L, 1)


def test_riemann_invariants():
    rep = hz.riemann_invariants(dtoda_state())
    u0, u1 = dtoda_state().fields
    assert (rep.w1 - (u0 - u1 * 2.0)).norm() == 0.0
    assert (rep.w2 - (u0 + u1 * 2.0)).norm() == 0.0
    assert rep.hyperbolic and not rep.degenerate
    rep = hz.riemann_invariants(hz.FieldState((F.constant(2.0) + F.cos(1, 0.5), F.constant(1.0))))
    assert rep.hyperbolic and rep.degenerate
    rep = hz.riemann_invariants(hz.FieldState((F.constant(5.0), F.sin(1))))
    assert not rep.hyperbolic


@pytest.mark.parametrize("name,n,poisson", [
    ("benny", -1, True), ("benny", 0, False), ("benny", 1, False),
    ("dtoda", 0, True), ("dtoda", 1, True), ("dtoda", 2, False),
])
def test_submanifold_examples(name, n, poisson):
    rep = hz.poisson_submanifold_defect(hz.hierarchy(name), n, trials=3)
    assert rep.is_poisson == poisson
    if not poisson:
        assert rep.defect > 1e-6 and (rep.leak_degrees or rep.tie_defect > 1e-6)
    if (name, n) == ("benny", 0):
        assert rep.leak_degrees == (-2,)
