import pytest
from hypothesis import given, strategies as st

from weilcalc.algebroid import Representation, lie_derivative_form, tangent_algebroid
from weilcalc.funcring import Affine
from weilcalc.geometry import LinearConnection, VForm, d_nabla_form, interior
from weilcalc.weil import (
    WeilCochain, d_nabla_weil, delta, delta0, invariance_form, invariance_wedge, make_rng, random_cochain,
    random_form, random_section,
)

A1 = Affine(1)
seeds = st.integers(0, 10**6)
SAMPLE = ("am-t2", "coupling-t2-so3", "so3-space", "heisenberg-plane", "nonabelian-bundle")


def test_delta_example_on_the_line():
    tan = tangent_algebroid(A1)
    rep = Representation.trivial(tan)
    K = rep.bundle
    c = WeilCochain(rep, 0, 1, [{((), ()): VForm.from_entries(K, 1, [((0,), 0, A1.coord(0))])}])
    d = delta(c)
    assert d.frame_value(0, (0,), ()) == VForm.from_entries(K, 1, [((0,), 0, A1.const(1))])
    assert d.frame_value(1, (), (0,)) == VForm.from_entries(K, 0, [((), 0, A1.coord(0))])


@given(seeds)
def test_delta_squared_vanishes(seed):
    from weilcalc import catalog
    rng = make_rng(seed)
    for name in SAMPLE:
        rep = catalog.entries()[name].reps[0][1]
        for p in (0, 1):
            for q in (0, 1, 2):
                assert delta(delta(random_cochain(rep, p, q, rng))).is_zero()


def im_conditions(c):
    """Failures of the three compatibility conditions of an IM form, checked on frames."""
    rep, alg = c.rep, c.alg
    bad = []
    for a in range(alg.rank):
        for b in range(alg.rank):
            ea, eb = alg.frame(a), alg.frame(b)
            br = alg.bracket(ea, eb)
            if c.evaluate(0, [br]) != lie_derivative_form(rep, ea, c.evaluate(0, [eb])) \
                    - lie_derivative_form(rep, eb, c.evaluate(0, [ea])):
                bad.append(("bracket", a, b))
            if c.evaluate(1, [], [br]) != lie_derivative_form(rep, ea, c.evaluate(1, [], [eb])) \
                    - interior(alg.anchor[b], c.evaluate(0, [ea])):
                bad.append(("symbol", a, b))
            if interior(alg.anchor[b], c.evaluate(1, [], [ea])) != -interior(alg.anchor[a], c.evaluate(1, [], [eb])):
                bad.append(("anchor", a, b))
    return bad


def test_im_conditions_match_delta(entries):
    rng = make_rng("im")
    for name in SAMPLE:
        entry = entries[name]
        rep = entry.reps[0][1]
        for q in (1, 2):
            for _ in range(4):
                c = random_cochain(rep, 1, q, rng)
                assert (not im_conditions(c)) == delta(c).is_zero()
            gamma = random_form(rep.bundle, q, rng)
            assert not im_conditions(delta0(rep, gamma))
        for ce in entry.conns:
            assert not im_conditions(ce.conn.cochain)


def test_d_nabla_at_p1(entries):
    rng = make_rng("dnabla")
    entry = entries["coupling-t2-so3"]
    ce = entry.conns[0]
    rep, nabla = ce.conn.rep, ce.conn.nabla
    for q in (1, 2):
        c = random_cochain(rep, 1, q, rng)
        d = d_nabla_weil(nabla, c)
        for a in range(entry.alg.rank):
            assert d.frame_value(0, (a,), ()) == d_nabla_form(nabla, c.frame_value(0, (a,), ()))
            assert d.frame_value(1, (), (a,)) == c.frame_value(0, (a,), ()) - d_nabla_form(nabla, c.frame_value(1, (), (a,)))
    assert d_nabla_weil(nabla, WeilCochain(rep, 1, 1)).is_zero()


@given(seeds)
def test_leibniz_evaluation_is_order_independent(seed):
    from weilcalc import catalog
    rng = make_rng(seed)
    rep = catalog.entries()["coupling-t2-so3"].reps[0][1]
    alg = rep.alg
    c = random_cochain(rep, 2, 2, rng)
    a1, a2 = random_section(alg.model, alg.rank, rng), random_section(alg.model, alg.rank, rng)
    assert c.evaluate(0, [a1, a2]) == c.evaluate(0, [a1, a2], order="last")
    assert c.evaluate(0, [a1, a2]) == -c.evaluate(0, [a2, a1])


def test_invariance_form_vanishes_for_invariant_connections(entries):
    tan = tangent_algebroid(A1)
    rep = Representation.trivial(tan)
    assert invariance_form(LinearConnection.trivial(rep.bundle), rep).is_zero()
    am = entries["am-r2"]
    rep = am.reps[0][1]
    assert invariance_form(LinearConnection.trivial(rep.bundle), rep).is_zero()


def test_invariance_form_is_multiplicative(entries):
    for name in SAMPLE:
        entry = entries[name]
        for ce in entry.conns:
            tt = invariance_form(ce.conn.nabla, ce.conn.rep)
            assert delta(tt).is_zero()


@pytest.mark.parametrize("name", SAMPLE)
def test_commutator_identity(entries, name):
    entry = entries[name]
    rng = make_rng(name)
    if entry.conns:
        rep, nabla = entry.conns[0].conn.rep, entry.conns[0].conn.nabla
    else:
        rep = entry.reps[0][1]
        nabla = LinearConnection.trivial(rep.bundle)
    tt = invariance_form(nabla, rep)
    for p, q in ((0, 1), (1, 1), (1, 2), (2, 0)):
        c = random_cochain(rep, p, q, rng)
        lhs = d_nabla_weil(nabla, delta(c)) - delta(d_nabla_weil(nabla, c))
        assert lhs == invariance_wedge(tt, c)
    assert invariance_wedge(WeilCochain(tt.rep, 1, 1), random_cochain(rep, 1, 1, rng)).is_zero()


def test_delta0_of_invariant_forms(entries):
    am = entries["am-t2"]
    rep = am.reps[0][1]
    area = VForm.from_entries(rep.bundle, 2, [((0, 1), 0, am.alg.model.const(1))])
    assert not delta0(rep, area).is_zero()
    rng = make_rng("d0")
    for _ in range(5):
        g = random_form(rep.bundle, 1, rng)
        assert delta(delta0(rep, g)).is_zero()
