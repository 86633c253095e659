"""Yang-Mills checks for splittings and primitive IM connections on torus models.

Everything returns exact residual forms; a residual is zero exactly when the
corresponding equation holds.  Hodge stars carry a sqrt|det g| tag so that
residuals stay rational.
"""

import warnings
from dataclasses import dataclass

from gmpy2 import mpq

from . import faults, linalg
from .geometry import (
    FiberMetric, LinearConnection, Metric, TaggedForm, VForm, codifferential, d_nabla_form,
    form_bracket, l2_pairing, metric_compatible, star_rational,
)
from .imconn import curvature_im
from .weil import delta0


class YMError(ValueError):
    pass


# -- data -------------------------------------------------------------------------

@dataclass
class YangMillsData:
    """Fiber metric on the ideal, constant base metric and the structure constant mu."""
    kappa: FiberMetric
    metric: Metric
    mu: object = mpq(-1)

    def __post_init__(self):
        self.mu = mpq(self.mu)
        if self.mu == 0:
            raise YMError("structure constant must be nonzero")
        k = self.kappa.kappa
        if not all(f.is_constant() for row in k for f in row):
            raise YMError("fiber metric must have constant entries")
        rows = [[f.constant_term() for f in row] for row in k]
        for size in range(1, len(rows) + 1):
            if linalg.det([r[:size] for r in rows[:size]]) <= 0:
                raise YMError("fiber metric is not positive definite")
        if self.kappa.bundle.model.dim != self.metric.dim:
            raise YMError("base metric does not cover every coordinate")

    def problems(self, alg, ideal):
        """ad-invariance rho(a)<xi,eta> = <[a,xi],eta> + <xi,[a,eta]> on frames."""
        model = alg.model
        k = ideal.rank
        issues = []
        units = [tuple(model.const(1 if t == s else 0) for t in range(k)) for s in range(k)]
        for a in range(alg.rank):
            X = alg.anchor[a]
            ad = [ideal.from_section(alg.bracket_frames(a, b)) for b in ideal.frames]
            for s in range(k):
                for t in range(s, k):
                    lhs = _derive(X, self.kappa.kappa[s][t])
                    rhs = self.kappa.pair(ad[s], units[t]) + self.kappa.pair(units[s], ad[t])
                    if lhs != rhs:
                        issues.append(f"fiber metric is not ad-invariant along frame {a + 1}")
                        break
                else:
                    continue
                break
        return issues


def _derive(X, f):
    from .funcring import vector_apply
    return vector_apply(X, f)


def _tagged(metric, form):
    return TaggedForm(form, metric.abs_det)


# -- foliated Yang-Mills ------------------------------------------------------------

class FoliatedSplitting:
    """A splitting sigma of A -> T(leaves) for a regular algebroid with frame-split kernel.

    ``leaf`` lists the leaf coordinates; ``sigma[j]`` is the A-section lifting
    the coordinate field of ``leaf[j]``.
    """

    def __init__(self, alg, ideal, leaf, sigma):
        self.alg = alg
        self.ideal = ideal
        self.leaf = tuple(leaf)
        self.sigma = [tuple(s) for s in sigma]
        model = alg.model
        n = model.dim
        if len(self.sigma) != len(self.leaf):
            raise YMError("one lift per leaf coordinate is required")
        if alg.rank - ideal.rank != len(self.leaf):
            raise YMError("the ideal must be the full kernel of the anchor")
        inside = set(ideal.frames)
        for a in range(alg.rank):
            X = alg.anchor[a]
            if a in inside and any(f.terms for f in X):
                raise YMError("ideal frames must have zero anchor")
            if any(X[i].terms for i in range(n) if i not in self.leaf):
                raise YMError("anchor is not tangent to the coordinate foliation")
        for j, i in enumerate(self.leaf):
            image = alg.anchor_of(self.sigma[j])
            if image != tuple(model.const(1 if m == i else 0) for m in range(n)):
                raise YMError(f"rho(sigma) is not the identity on leaf coordinate {i + 1}")
        gamma = [{} for _ in range(n)]
        for j, i in enumerate(self.leaf):
            for s, b in enumerate(ideal.frames):
                img = ideal.from_section(alg.bracket(self.sigma[j], alg.frame(b)))
                col = {t: f for t, f in enumerate(img) if f.terms}
                if col:
                    gamma[i][s] = col
        self.nabla = LinearConnection(ideal.bundle, gamma)

    def deform(self, tau):
        """sigma + tau for an ideal-valued leafwise 1-form tau."""
        sig = [list(s) for s in self.sigma]
        for j, i in enumerate(self.leaf):
            for s, b in enumerate(self.ideal.frames):
                f = tau.component((i,), s)
                if f.terms:
                    sig[j][b] = sig[j][b] + f
        return FoliatedSplitting(self.alg, self.ideal, self.leaf, sig)


def foliated_curvature(sigma):
    """F(X, Y) = sigma[X, Y] - [sigma X, sigma Y]; coordinate fields commute."""
    alg, ideal = sigma.alg, sigma.ideal
    sign = 1 if faults.active("foliated-curvature-sign") else -1
    entries = []
    for j in range(len(sigma.leaf)):
        for l in range(j + 1, len(sigma.leaf)):
            br = alg.bracket(sigma.sigma[j], sigma.sigma[l])
            try:
                val = ideal.from_section(br)
            except Exception as exc:
                raise YMError("bracket of lifts leaves the ideal") from exc
            for s, f in enumerate(val):
                if f.terms:
                    entries.append(((sigma.leaf[j], sigma.leaf[l]), s, f.scale(sign)))
    return VForm.from_entries(ideal.bundle, 2, entries)


def foliated_problems(sigma):
    issues = []
    br = sigma.ideal.fiber_bracket()
    from .geometry import bracket_compatible
    if not bracket_compatible(sigma.nabla, br):
        issues.append("leafwise connection does not preserve the fiber bracket")
    F = foliated_curvature(sigma)
    if not d_nabla_form(sigma.nabla, F, sigma.leaf).is_zero():
        issues.append("leafwise Bianchi identity fails")
    return issues


def foliated_ym_check(sigma, ymd):
    """d^nabla star_leaf F, tagged with the leaf volume factor."""
    if not sigma.alg.model.is_torus:
        raise YMError("Yang-Mills checks need a torus model")
    leaf_metric = ymd.metric.restrict(sigma.leaf)
    F = foliated_curvature(sigma)
    star = star_rational(leaf_metric, F)
    return _tagged(leaf_metric, d_nabla_form(sigma.nabla, star, sigma.leaf))


def foliated_action(sigma, ymd):
    leaf_metric = ymd.metric.restrict(sigma.leaf)
    F = foliated_curvature(sigma)
    return l2_pairing(leaf_metric, ymd.kappa, F, F, volume=ymd.metric)


def leafwise_pairing(sigma, ymd, alpha, beta):
    return l2_pairing(ymd.metric.restrict(sigma.leaf), ymd.kappa, alpha, beta, volume=ymd.metric)


def leafwise_codifferential(sigma, ymd, form):
    return codifferential(ymd.metric.restrict(sigma.leaf), sigma.nabla, form)


# -- multiplicative Yang-Mills -------------------------------------------------------

def _require(pd, ymd):
    conn = pd.conn
    if not conn.alg.model.is_torus:
        raise YMError("Yang-Mills checks need a torus model")
    if ymd.kappa.bundle != conn.ideal.bundle:
        raise YMError("fiber metric lives on a different bundle")
    if not metric_compatible(conn.nabla, ymd.kappa):
        warnings.warn("connection is not compatible with the fiber metric; criticality statements do not apply",
                      stacklevel=3)


def ym_action(pd, ymd):
    """<<F, F>> + mu <<G, G>>."""
    _require(pd, ymd)
    F, G = pd.F, pd.G
    out = l2_pairing(ymd.metric, ymd.kappa, F, F)
    return out + l2_pairing(ymd.metric, ymd.kappa, G, G).scale(ymd.mu)


def ym_first_check(pd, ymd):
    """d^nabla star F."""
    _require(pd, ymd)
    star = star_rational(ymd.metric, pd.F)
    return _tagged(ymd.metric, d_nabla_form(pd.conn.nabla, star))


def ym_second_check(pd, ymd):
    """d^nabla star G - (1/mu) star F."""
    _require(pd, ymd)
    nabla = pd.conn.nabla
    res = d_nabla_form(nabla, star_rational(ymd.metric, pd.G)) - star_rational(ymd.metric, pd.F).scale(1 / ymd.mu)
    return _tagged(ymd.metric, res)


def covariant_codifferential(pd, ymd, form):
    return codifferential(ymd.metric, pd.conn.nabla, form)


def adaptedness_check(pd, ymd):
    """delta0(delta^nabla G) = -(1/mu) Omega."""
    _require(pd, ymd)
    conn = pd.conn
    lhs = delta0(conn.rep, covariant_codifferential(pd, ymd, pd.G))
    return lhs == curvature_im(conn, check=False).scale(-1 / ymd.mu)


def laplacian(pd, ymd, form):
    """d^nabla delta^nabla + delta^nabla d^nabla."""
    nabla = pd.conn.nabla
    out = d_nabla_form(nabla, covariant_codifferential(pd, ymd, form))
    return out + covariant_codifferential(pd, ymd, d_nabla_form(nabla, form))


def eigen_check(pd, ymd):
    """Laplacian F = -(1/mu) F."""
    return laplacian(pd, ymd, pd.F) == pd.F.scale(-1 / ymd.mu)


def gathered_system(pd, ymd):
    """The six identities collected from both equations, the Bianchi identities and the curving."""
    conn = pd.conn
    nabla = conn.nabla
    F, G = pd.F, pd.G
    codiff = lambda w: covariant_codifferential(pd, ymd, w)
    return {
        "codiff F = 0": codiff(F).is_zero(),
        "d F = G": d_nabla_form(nabla, F) == G,
        "delta0 F = Omega": delta0(conn.rep, F) == curvature_im(conn, check=False),
        "codiff G = -F/mu": codiff(G) == F.scale(-1 / ymd.mu),
        "d G = 0": d_nabla_form(nabla, G).is_zero(),
        "delta0 G = 0": delta0(conn.rep, G).is_zero(),
    }


@dataclass
class SelfDualReport:
    ratio: object
    sign: int
    constant_ok: bool
    identities: dict

    @property
    def ok(self):
        return self.constant_ok and all(self.identities.values())


def self_dual_check(pd, ymd):
    """G = c star F with (-1)^s c^2 = 1/mu, and the gathered system."""
    _require(pd, ymd)
    metric = ymd.metric
    if metric.dim != 5:
        raise YMError("self-duality is defined in dimension five")
    s = metric.signature
    if (ymd.mu > 0) != (s % 2 == 0):
        raise YMError("structure constant sign must equal (-1)^s")
    F, G = pd.F, pd.G
    starF = star_rational(metric, F)
    if F.is_zero() and G.is_zero():
        return SelfDualReport(mpq(0), 1, True, gathered_system(pd, ymd))
    ratio = _ratio(G, starF)
    ok = False
    sign = 0
    if ratio is not None and ratio != 0:
        # G = ratio * star_rational(F) = (ratio / sqrt|g|) * star F, so c^2 = ratio^2 / |g|
        ok = (-1) ** s * ratio * ratio / metric.abs_det == 1 / ymd.mu
        sign = 1 if ratio > 0 else -1
    return SelfDualReport(ratio, sign, ok, gathered_system(pd, ymd))


def _ratio(a, b):
    """Rational r with a = r b, or None."""
    if b.is_zero():
        return None
    I, s, f = next(b.entries())
    g = a.component(I, s)
    if not g.terms:
        return None
    lead = next(iter(f.terms))
    if lead not in g.terms:
        return None
    r = g.terms[lead] / f.terms[lead]
    return r if a == b.scale(r) else None


def tangent_residuals(pd, ymd, gamma, beta):
    """(codiff(d gamma + beta) - (-1)^n Fhat(gamma), (d gamma + beta) + mu codiff d beta), Fhat(g) = star[star F, g]."""
    _require(pd, ymd)
    if not ym_first_check(pd, ymd).is_zero() or not ym_second_check(pd, ymd).is_zero():
        raise YMError("tangent residuals need a critical primitive connection")
    conn = pd.conn
    if not delta0(conn.rep, beta).is_zero():
        raise YMError("beta is not an invariant 2-form")
    metric = ymd.metric
    nabla = conn.nabla
    br = conn.ideal.fiber_bracket()
    n = metric.dim
    eta = d_nabla_form(nabla, gamma) + beta
    fhat = star_rational(metric, form_bracket(br, star_rational(metric, pd.F), gamma)).scale(metric.abs_det)
    first = covariant_codifferential(pd, ymd, eta) - fhat.scale((-1) ** n)
    second = eta + covariant_codifferential(pd, ymd, d_nabla_form(nabla, beta)).scale(ymd.mu)
    return first, second


def gauge_invariance(phi, pd, ymd):
    """(S(pd), S(phi^* pd)); the base map must be an orientation-preserving isometry."""
    from .imconn import gauge_pullback
    M = [[mpq(x) for x in row] for row in phi.M]
    n = len(M)
    g = ymd.metric.matrix
    pulled = [[sum(M[k][i] * g[k][l] * M[l][j] for k in range(n) for l in range(n)) for j in range(n)]
              for i in range(n)]
    if pulled != g:
        raise YMError("base map is not an isometry")
    if linalg.det(M) < 0:
        raise YMError("base map reverses orientation")
    other = gauge_pullback(phi, pd, ymd.kappa)
    return ym_action(pd, ymd), ym_action(other, ymd)


# -- second variation oracle -----------------------------------------------------

def quadratic_fit(values):
    """Coefficients (a0, a1, a2) of the quadratic through values at 0, 1, 2."""
    v0, v1, v2 = values
    a2 = (v2 - 2 * v1 + v0) / 2
    a1 = v1 - v0 - a2
    return v0, a1, a2


def foliated_hessian(sigma, ymd, tau, points=(0, 1, 2, 3)):
    """Action along sigma + lam tau at the given points, plus the quadratic through the first three."""
    vals = [foliated_action(sigma.deform(tau.scale(lam)), ymd).coef for lam in points]
    fit = quadratic_fit(vals[:3])
    return vals, fit

