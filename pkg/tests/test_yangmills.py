import warnings

import pytest
from gmpy2 import mpq

from weilcalc.algebroid import make_coupling_algebroid, tangent_algebroid, zero_algebroid
from weilcalc.funcring import Torus
from weilcalc.geometry import (
    FiberBracket, FiberMetric, LinearConnection, Metric, TrivBundle, VForm, d_nabla_form, exterior_d, form_bracket,
    l2_pairing, star_rational,
)
from weilcalc.imconn import GaugeMap, PrimitiveData, curvature_im, deform_primitive
from weilcalc.suites import _lagrange_coeffs
from weilcalc.weil import make_rng, random_form
from weilcalc.yangmills import (
    FoliatedSplitting, YangMillsData, YMError, adaptedness_check, covariant_codifferential, eigen_check,
    foliated_action, foliated_curvature, foliated_hessian, foliated_problems, foliated_ym_check, gathered_system,
    gauge_invariance, laplacian, leafwise_codifferential, leafwise_pairing, quadratic_fit, self_dual_check,
    tangent_residuals, ym_action, ym_first_check, ym_second_check,
)

T2, T3, T5 = Torus(2), Torus(3), Torus(5)
EYE2 = Metric([[1, 0], [0, 1]])
EYE3 = Metric([[1, 0, 0], [0, 1, 0], [0, 0, 1]])


def form(bundle, degree, *entries):
    model = bundle.model
    return VForm.from_entries(bundle, degree, [(I, a, model.parse(t)) for I, a, t in entries])


def ymd_for(bundle, metric, mu=-1):
    return YangMillsData(FiberMetric.identity(bundle), metric, mu)


def splitting(entry, idx):
    s = entry.splittings[idx]
    return FoliatedSplitting(entry.alg, entry.ideals[s.ideal], s.leaf, s.sigma)


def line_bundle(model, F, base=None):
    K = TrivBundle(model, 1)
    base = base or tangent_algebroid(model)
    alg, ideal, conn = make_coupling_algebroid(base, FiberBracket.abelian(K), LinearConnection.trivial(K), F)
    return PrimitiveData(conn, F)


# -- foliated -----------------------------------------------------------------------

def test_foliated_curvature_is_omega_minus_d_theta(entries):
    e = entries["am-t2"]
    K = e.ideals[0].bundle
    omega = e.conns[0].curving
    theta = form(K, 1, ((1,), 0, "sin(x1)"))
    assert foliated_curvature(splitting(e, 0)) == omega - exterior_d(theta) == form(K, 2, ((0, 1), 0, "1"))
    assert foliated_curvature(splitting(e, 1)) == omega
    assert not foliated_problems(splitting(e, 0))


def test_bracket_morphism_splitting_is_flat(entries):
    e = entries["coupling-t2-so3-flat"]
    sigma = FoliatedSplitting(e.alg, e.ideals[0], (0, 1), [e.alg.frame(0), e.alg.frame(1)])
    assert foliated_curvature(sigma).is_zero()


def test_foliated_deformation_law(entries):
    for name in ("am-t2", "coupling-t2-so3"):
        e = entries[name]
        sigma = FoliatedSplitting(e.alg, e.ideals[0], (0, 1), [e.alg.frame(0), e.alg.frame(1)])
        K = e.ideals[0].bundle
        br = e.ideals[0].fiber_bracket()
        for tau in (form(K, 1, ((1,), 0, "sin(x1)")), random_form(K, 1, make_rng(name))):
            expected = foliated_curvature(sigma) - d_nabla_form(sigma.nabla, tau) \
                - form_bracket(br, tau, tau).scale(mpq(1, 2))
            assert foliated_curvature(sigma.deform(tau)) == expected


def test_foliated_residuals(entries):
    e = entries["am-t2"]
    ymd = ymd_for(e.ideals[0].bundle, EYE2)
    assert foliated_ym_check(splitting(e, 0), ymd).is_zero()
    res = foliated_ym_check(splitting(e, 1), ymd)
    assert res.form == form(e.ideals[0].bundle, 1, ((0,), 0, "-sin(x1)"))
    assert str(res) == "((-sin(x1))*dx1*e1) * sqrt(detg)"


def test_criticality_stable_exactly_under_closed_deformations(entries):
    e = entries["am-t2"]
    K = e.ideals[0].bundle
    ymd = ymd_for(K, EYE2)
    crit = splitting(e, 0)
    closed = form(K, 1, ((0,), 0, "cos(x1)"), ((1,), 0, "3"))
    nonclosed = form(K, 1, ((1,), 0, "cos(x1)"))
    assert foliated_ym_check(crit.deform(closed), ymd).is_zero()
    assert not foliated_ym_check(crit.deform(nonclosed), ymd).is_zero()


def test_foliated_hessian(entries):
    e = entries["am-t2"]
    K = e.ideals[0].bundle
    ymd = ymd_for(K, EYE2)
    tau = form(K, 1, ((1,), 0, "sin(x1)"))
    vals, fit = foliated_hessian(splitting(e, 0), ymd, tau)
    assert vals == [1, mpq(3, 2), 3, mpq(11, 2)]
    assert fit == (1, 0, mpq(1, 2))
    assert fit[2] == l2_pairing(EYE2, ymd.kappa, exterior_d(tau), exterior_d(tau)).coef
    assert quadratic_fit([1, 2, 5]) == (1, 0, 1)
    assert foliated_action(splitting(e, 0), ymd).coef == 1


@pytest.mark.parametrize("name", ["am-t2", "coupling-t2-so3"])
def test_leafwise_codifferential_is_adjoint(entries, name):
    e = entries[name]
    sigma = FoliatedSplitting(e.alg, e.ideals[0], (0, 1), [e.alg.frame(0), e.alg.frame(1)])
    K = e.ideals[0].bundle
    ymd = ymd_for(K, Metric([[2, 0], [0, 3]]))
    rng = make_rng(name)
    for i in range(20):
        k = i % 2
        a, b = random_form(K, k, rng), random_form(K, k + 1, rng)
        lhs = leafwise_pairing(sigma, ymd, d_nabla_form(sigma.nabla, a, sigma.leaf), b)
        assert lhs == leafwise_pairing(sigma, ymd, a, leafwise_codifferential(sigma, ymd, b))


def test_splitting_must_lift_the_leaves(entries):
    e = entries["am-t2"]
    z, one = T2.zero(), T2.const(1)
    with pytest.raises(YMError):
        FoliatedSplitting(e.alg, e.ideals[0], (0, 1), [(one, one, z), (z, one, z)])


# -- multiplicative -------------------------------------------------------------------

def test_action_examples():
    K = TrivBundle(T2, 1)
    ymd = ymd_for(K, EYE2)
    area = form(K, 2, ((0, 1), 0, "1"))
    assert str(ym_action(line_bundle(T2, area), ymd)) == "1 * (2pi)^2 * sqrt(detg)"
    assert ym_action(line_bundle(T2, VForm.zero(K, 2)), ymd).coef == 0
    assert ym_action(line_bundle(T2, area.scale(2)), ymd).coef == 4


def test_first_equation_examples(entries):
    K = TrivBundle(T2, 1)
    ymd = ymd_for(K, EYE2)
    assert ym_first_check(line_bundle(T2, form(K, 2, ((0, 1), 0, "1"))), ymd).is_zero()
    pd = line_bundle(T2, form(K, 2, ((0, 1), 0, "1 + cos(x1)")))
    assert str(ym_first_check(pd, ymd)) == "((-sin(x1))*dx1*e1) * sqrt(detg)"
    ymd2 = ymd_for(K, Metric([[2, 0], [0, 1]]))
    assert str(ym_first_check(pd, ymd2)) == "((-1/2*sin(x1))*dx1*e1) * sqrt(detg)"
    assert str(ym_action(pd, ymd2)) == "3/4 * (2pi)^2 * sqrt(detg)"


def test_first_variation_matches_codifferential(entries):
    ce = entries["coupling-t2-so3"].conns[0]
    pd = PrimitiveData(ce.conn, ce.curving)
    ymd = ymd_for(ce.conn.ideal.bundle, EYE2)
    rng = make_rng("variation")
    for _ in range(2):
        g = random_form(ce.conn.ideal.bundle, 1, rng)
        coeffs = _lagrange_coeffs([ym_action(deform_primitive(pd, g, lam), ymd).coef for lam in range(6)])
        assert coeffs[5] == 0
        assert coeffs[1] == 2 * l2_pairing(EYE2, ymd.kappa, covariant_codifferential(pd, ymd, pd.F), g).coef
    am = entries["am-t2"].conns[0]
    pd = PrimitiveData(am.conn, am.curving)
    ymd = ymd_for(am.conn.ideal.bundle, EYE2)
    g = random_form(am.conn.ideal.bundle, 1, rng)
    fit = quadratic_fit([ym_action(deform_primitive(pd, g, lam), ymd).coef for lam in range(3)])
    assert fit[1] == 2 * l2_pairing(EYE2, ymd.kappa, covariant_codifferential(pd, ymd, pd.F), g).coef


def t3_eigen(entries, mu=-1):
    ce = entries["coupling-t3-abelian"].conns[0]
    return PrimitiveData(ce.conn, ce.curving), ymd_for(ce.conn.ideal.bundle, EYE3, mu)


def test_t3_eigen_solution(entries):
    pd, ymd = t3_eigen(entries)
    assert ym_first_check(pd, ymd).is_zero()
    assert ym_second_check(pd, ymd).is_zero()
    assert adaptedness_check(pd, ymd)
    assert laplacian(pd, ymd, pd.F) == pd.F
    assert eigen_check(pd, ymd)
    assert all(gathered_system(pd, ymd).values())
    pd2, ymd2 = t3_eigen(entries, -2)
    assert not ym_second_check(pd2, ymd2).is_zero()
    assert ym_first_check(pd2, ymd2).is_zero()


def test_second_residual_without_three_curvature():
    K = TrivBundle(T3, 1)
    F = form(K, 2, ((0, 1), 0, "1"))
    pd = line_bundle(T3, F, zero_algebroid(T3, 1))
    ymd = ymd_for(K, EYE3)
    assert pd.G.is_zero()
    assert ym_second_check(pd, ymd).form == star_rational(EYE3, F)


def test_adaptedness_examples(entries):
    ce = entries["am-t2"].conns[0]
    pd = PrimitiveData(ce.conn, ce.curving)
    assert pd.G.is_zero() and not curvature_im(ce.conn).is_zero()
    assert not adaptedness_check(pd, ymd_for(ce.conn.ideal.bundle, EYE2))
    flat = entries["coupling-t2-so3-flat"].conns[0]
    assert adaptedness_check(PrimitiveData(flat.conn, flat.curving), ymd_for(flat.conn.ideal.bundle, EYE2))


def test_self_duality(entries):
    ce = entries["coupling-t5-abelian"].conns[0]
    pd = PrimitiveData(ce.conn, ce.curving)
    lorentz = Metric([[-1 if i == j == 0 else int(i == j) for j in range(5)] for i in range(5)])
    report = self_dual_check(pd, ymd_for(ce.conn.ideal.bundle, lorentz))
    assert report.ok and report.ratio == 1
    euclid = Metric([[int(i == j) for j in range(5)] for i in range(5)])
    with pytest.raises(YMError):
        self_dual_check(pd, ymd_for(ce.conn.ideal.bundle, euclid))
    zero = line_bundle(T5, VForm.zero(ce.conn.ideal.bundle, 2), zero_algebroid(T5, 1))
    assert self_dual_check(zero, ymd_for(ce.conn.ideal.bundle, lorentz)).ok


def test_tangent_residuals(entries):
    pd, ymd = t3_eigen(entries)
    K = pd.conn.ideal.bundle
    zero1, zero2 = VForm.zero(K, 1), VForm.zero(K, 2)
    first, second = tangent_residuals(pd, ymd, zero1, zero2)
    assert first.is_zero() and second.is_zero()
    gamma = form(K, 1, ((1,), 0, "cos(x1)"))
    first, second = tangent_residuals(pd, ymd, gamma, -exterior_d(gamma))
    assert first.is_zero() and second.is_zero()
    gamma = form(K, 1, ((2,), 0, "sin(x2)"))
    first, _ = tangent_residuals(pd, ymd, gamma, zero2)
    assert first == covariant_codifferential(pd, ymd, exterior_d(gamma))


def test_gauge_invariance_needs_isometry(entries):
    ce = entries["coupling-t3-abelian"].conns[0]
    pd = PrimitiveData(ce.conn, ce.curving)
    e = entries["coupling-t3-abelian"]
    model = e.alg.model
    ident = [[model.const(int(i == j)) for j in range(2)] for i in range(2)]
    shear = GaugeMap(e.alg, [[1, 1, 0], [0, 1, 0], [0, 0, 1]], [0, 0, 0], ident)
    with pytest.raises(YMError):
        gauge_invariance(shear, pd, ymd_for(ce.conn.ideal.bundle, EYE3))
    for g in e.gauge_maps:
        before, after = gauge_invariance(g.phi, pd, ymd_for(ce.conn.ideal.bundle, EYE3))
        assert before == after


def test_yang_mills_data_validation():
    K = TrivBundle(T2, 1)
    with pytest.raises(YMError):
        YangMillsData(FiberMetric.identity(K), EYE2, 0)
    with pytest.raises(YMError):
        YangMillsData(FiberMetric(K, [[-1]]), EYE2)
    with pytest.raises(YMError):
        YangMillsData(FiberMetric(K, [[T2.parse("2 + cos(x1)")]]), EYE2)
    with pytest.raises(YMError):
        YangMillsData(FiberMetric.identity(K), EYE3)


def test_incompatible_connection_warns(entries):
    ce = entries["coupling-t2-so3"].conns[0]
    pd = PrimitiveData(ce.conn, ce.curving)
    bent = FiberMetric(ce.conn.ideal.bundle, [[2, 0, 0], [0, 1, 0], [0, 0, 1]])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ym_action(pd, YangMillsData(bent, EYE2))
    assert caught
    assert YangMillsData(bent, EYE2).problems(entries["coupling-t2-so3"].alg, ce.conn.ideal)
