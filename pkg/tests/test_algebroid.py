from hypothesis import given, strategies as st

from weilcalc.algebroid import (
    AlgebroidPresentation, IdealBundle, Representation, adjoint_rep, lie_derivative, lie_derivative_form,
    make_action_algebroid, make_coupling_algebroid, tangent_algebroid, validate, vector_bracket, zero_algebroid,
)
from weilcalc import catalog
from weilcalc.catalog import so3_bracket
from weilcalc.geometry import FiberBracket, LinearConnection, SymForm, TrivBundle, VForm
from weilcalc.funcring import Affine, Torus, vector_apply
from weilcalc.weil import make_rng, random_form, random_section

A1, A2, A3, T2 = Affine(1), Affine(2), Affine(3), Torus(2)
seeds = st.integers(0, 10**6)


def almeida_molino(model, omega):
    """TM + R with bracket ((X,f),(Y,g)) -> ([X,Y], Xg - Yf + omega(X,Y)), written on frames."""
    n = model.dim
    one, zero = model.const(1), model.zero()
    anchor = [tuple(one if j == i else zero for j in range(n)) for i in range(n)] + [(zero,) * n]
    upper = {}
    for i in range(n):
        for j in range(i + 1, n):
            w = omega.get((i, j))
            if w is not None:
                upper[(i, j)] = {n: model.parse(w)}
    return AlgebroidPresentation.antisymmetric(model, n + 1, anchor, upper, "am")


def test_almeida_molino_bracket_formula():
    alg = almeida_molino(A2, {(0, 1): "1"})
    assert not validate(alg)
    assert alg.bracket(alg.frame(0), alg.frame(1)) == (A2.zero(), A2.zero(), A2.const(1))
    rng = make_rng(11)
    for _ in range(5):
        a, b = random_section(A2, 3, rng), random_section(A2, 3, rng)
        X, f = a[:2], a[2]
        Y, g = b[:2], b[2]
        got = alg.bracket(a, b)
        assert got[:2] == vector_bracket(X, Y)
        assert got[2] == vector_apply(X, g) - vector_apply(Y, f) + (X[0] * Y[1] - X[1] * Y[0])


def test_coupling_gives_opposite_sign_presentation():
    K = TrivBundle(A2, 1)
    F = VForm.from_entries(K, 2, [((0, 1), 0, A2.const(1))])
    alg, ideal, conn = make_coupling_algebroid(tangent_algebroid(A2), FiberBracket.abelian(K),
                                               LinearConnection.trivial(K), F)
    assert alg.bracket(alg.frame(0), alg.frame(1)) == (A2.zero(), A2.zero(), A2.const(-1))
    flip = lambda s: (s[0], s[1], -s[2])
    paper = almeida_molino(A2, {(0, 1): "1"})
    rng = make_rng(5)
    for _ in range(5):
        a, b = random_section(A2, 3, rng), random_section(A2, 3, rng)
        assert flip(alg.bracket(a, b)) == paper.bracket(flip(a), flip(b))


def test_validate_examples():
    assert not validate(almeida_molino(A3, {(0, 1): "1", (0, 2): "x1"}))
    bad = almeida_molino(A3, {(1, 2): "x1"})
    assert "Jacobi identity fails for (1,2,3)" in validate(bad)
    assert not validate(zero_algebroid(A2, 3))


def test_so2_action_and_leibniz_rule():
    x, y = A2.coord(0), A2.coord(1)
    alg = make_action_algebroid(A2, {}, [(-y, x)], "so2")
    assert not validate(alg)
    tan = tangent_algebroid(A2)
    e1 = tan.frame(0)
    xe2 = (A2.zero(), x)
    assert tan.bracket(e1, xe2) == (A2.zero(), A2.const(1))


def test_zero_and_translation_actions():
    alg = make_action_algebroid(A1, {}, [(A1.const(1),)], "translation")
    assert alg.anchor == tangent_algebroid(A1).anchor and alg.structure == {}
    z = A3.zero()
    bundle = make_action_algebroid(A3, {(0, 1): {2: 1}, (1, 2): {0: 1}, (2, 0): {1: 1}}, [(z, z, z)] * 3)
    assert not validate(bundle)
    assert bundle.bracket_frames(0, 1) == (z, z, A3.const(1))


def test_lie_derivative_examples():
    tan = tangent_algebroid(A1)
    rep = Representation.trivial(tan)
    K = TrivBundle(A1, 1)
    dx = VForm.from_entries(K, 1, [((0,), 0, A1.const(1))])
    assert lie_derivative_form(rep, (A1.const(1),), dx).is_zero()
    assert lie_derivative_form(rep, (A1.coord(0),), dx) == dx


@given(seeds)
def test_lie_derivative_is_flat(seed):
    rng = make_rng(seed)
    for name in ("so3-space", "coupling-t2-so3", "heisenberg-plane"):
        entry = catalog.entries()[name]
        rep = entry.reps[0][1]
        alg = rep.alg
        a, b = random_section(alg.model, alg.rank, rng), random_section(alg.model, alg.rank, rng)
        gamma = SymForm(rep.bundle, 1, 1, {(0,): random_form(rep.bundle, 1, rng), (1,): random_form(rep.bundle, 1, rng)})
        lhs = lie_derivative(rep, alg.bracket(a, b), gamma)
        rhs = lie_derivative(rep, a, lie_derivative(rep, b, gamma)) - lie_derivative(rep, b, lie_derivative(rep, a, gamma))
        assert lhs == rhs


def test_coupling_examples():
    br = so3_bracket(T2)
    alg, ideal, conn = make_coupling_algebroid(tangent_algebroid(T2), br, LinearConnection.trivial(br.bundle),
                                               VForm.zero(br.bundle, 2))
    assert not validate(alg)
    rep = adjoint_rep(alg, ideal)
    assert not rep.problems()
    # adjoint action of the ideal on itself is ad
    assert rep.table[2] == {1: {2: T2.const(1)}, 2: {1: T2.const(-1)}}


def test_abelian_adjoint_action_is_derivative():
    K = TrivBundle(A2, 1)
    F = VForm.from_entries(K, 2, [((0, 1), 0, A2.const(1))])
    alg, ideal, _ = make_coupling_algebroid(tangent_algebroid(A2), FiberBracket.abelian(K),
                                            LinearConnection.trivial(K), F)
    rep = adjoint_rep(alg, ideal)
    g = VForm.from_entries(K, 0, [((), 0, A2.parse("x1*x2"))])
    X = (A2.parse("x2"), A2.const(1), A2.parse("x1"))
    assert lie_derivative_form(rep, X, g) == VForm.from_entries(K, 0, [((), 0, A2.parse("x2^2 + x1"))])


def test_adjoint_reps_of_catalog_are_flat(entries):
    for entry in entries.values():
        assert not validate(entry.alg), entry.name
        for ideal in entry.ideals:
            assert not adjoint_rep(entry.alg, ideal).problems(), entry.name


def test_ideal_must_be_in_kernel_of_anchor():
    tan = tangent_algebroid(A2)
    assert IdealBundle(tan, [0]).problems()
