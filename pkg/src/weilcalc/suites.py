"""Identity suites over the example catalog.

Each suite returns a list of ``Check`` records.  Controls are checks whose
underlying identity is expected to fail; a control passes when it does fail.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from gmpy2 import mpq

from . import catalog, faults
from .algebroid import coupling_conditions, make_coupling_algebroid, tangent_algebroid, validate
from .formats import catalog_dir
from .geometry import (
    FiberBracket, FiberMetric, LinearConnection, Metric, TrivBundle, VForm, d_nabla_form, exterior_d,
    form_bracket, format_form, interior, l2_pairing, section_form,
)
from .imconn import (
    IMError, NotFound, NotUnique, PrimitiveData, affine_deform, coupling_data, curvature_closed_forms,
    curvature_im, deform_primitive, find_curving, gauge_pullback, hor_ext_cov_derivative,
    horizontal_projection, is_horizontal, obstruction_rep, quadratic_term, semisimple_inverse,
)
from .weil import (
    WeilCochain, d_nabla_weil, delta, delta0, invariance_form, invariance_wedge, make_rng, random_cochain,
    random_form,
)
from .yangmills import (
    FoliatedSplitting, YangMillsData, YMError, adaptedness_check, covariant_codifferential, eigen_check,
    foliated_curvature, foliated_hessian, foliated_problems, foliated_ym_check, gathered_system,
    gauge_invariance, leafwise_codifferential, leafwise_pairing, self_dual_check, tangent_residuals,
    ym_action, ym_first_check, ym_second_check,
)

SUITES = ("weil-delta", "commutator", "horizontal", "curvature-bianchi", "deformation", "primitive",
          "foliated-ym", "multiplicative-ym", "gauge")

SWEEP_P = (0, 1, 2)
SWEEP_Q = (0, 1, 2, 3)
PER_SHAPE = 5


@dataclass
class Check:
    id: str
    anchor: str
    ok: bool
    control: bool = False
    detail: dict = field(default_factory=dict)

    @property
    def status(self):
        return "pass" if self.ok else "fail"

    def to_json(self):
        out = {"id": self.id, "anchor": self.anchor, "status": self.status}
        if self.control:
            out["control"] = True
        if not self.ok:
            out["counterexample"] = self.detail
        return out


def _witness(c):
    """Counterexample payload for a failing cochain sample."""
    if c is None:
        return {}
    values = []
    for k, table in enumerate(c.comps):
        for (al, be), form in sorted(table.items()):
            args = ",".join(str(a + 1) for a in al) + "|" + ",".join(str(b + 1) for b in be)
            values.append(f"c{k}({args}) = {format_form(form)}")
    return {"cochain": f"({c.p},{c.q}) " + "; ".join(values)}


def _check(checks, cid, anchor, ok, control=False, **detail):
    checks.append(Check(cid, anchor, bool(ok), control, {k: str(v) for k, v in detail.items()}))


def _rng(seed, *parts):
    return make_rng(":".join(str(p) for p in (seed,) + parts))


class Context:
    """Catalog entries and scenario documents read once per run."""

    def __init__(self, directory=None, seed=0, samples=PER_SHAPE):
        self.directory = Path(directory) if directory else catalog_dir()
        self.seed = seed
        self.samples = samples
        self._entries = None

    @property
    def entries(self):
        if self._entries is None:
            # unchecked, so that a broken differential shows up as failing checks rather than a load error
            self._entries = catalog.load_catalog(self.directory, check=False)
        return self._entries

    def rng(self, *parts):
        return _rng(self.seed, *parts)

    def with_conns(self):
        for name, entry in self.entries.items():
            for i, ce in enumerate(entry.conns):
                yield name, i, entry, ce


# -- weil-delta ------------------------------------------------------------------------

def suite_weil_delta(ctx, names=None):
    checks = []
    for name, entry in ctx.entries.items():
        if names and name not in names:
            continue
        rep = entry.reps[0][1]
        for p in SWEEP_P:
            for q in SWEEP_Q:
                rng = ctx.rng("weil-delta", name, p, q)
                bad = None
                for i in range(ctx.samples):
                    c = random_cochain(rep, p, q, rng)
                    if not delta(delta(c)).is_zero():
                        bad = c
                        break
                _check(checks, f"weil-delta/{name}/p{p}q{q}", "delta squared vanishes", bad is None,
                       **_witness(bad))
    return checks


# -- commutator ------------------------------------------------------------------------

def _rep_connection(entry):
    """Connection used for the commutator sweep: the IM one when it acts on the first representation."""
    rep = entry.reps[0][1]
    for ce in entry.conns:
        if ce.conn.rep.bundle == rep.bundle and ce.conn.rep.table == rep.table:
            return ce.conn.nabla
    return LinearConnection.trivial(rep.bundle)


def suite_commutator(ctx):
    checks = []
    for name, entry in ctx.entries.items():
        rep = entry.reps[0][1]
        nabla = _rep_connection(entry)
        tt = invariance_form(nabla, rep)
        for p in SWEEP_P:
            for q in SWEEP_Q:
                rng = ctx.rng("commutator", name, p, q)
                bad = None
                for i in range(ctx.samples):
                    c = random_cochain(rep, p, q, rng)
                    lhs = d_nabla_weil(nabla, delta(c)) - delta(d_nabla_weil(nabla, c))
                    if lhs != invariance_wedge(tt, c):
                        bad = c
                        break
                _check(checks, f"commutator/{name}/p{p}q{q}",
                       "d-nabla and delta commute up to the invariance form", bad is None, **_witness(bad))
    for name, i, entry, ce in ctx.with_conns():
        conn = ce.conn
        tt = invariance_form(conn.nabla, conn.rep)
        abelian = conn.ideal.is_abelian()
        _check(checks, f"commutator/{name}/conn{i + 1}/invariant-iff-abelian",
               "the IM connection is invariant exactly when the ideal is abelian", tt.is_zero() == abelian,
               abelian=abelian)
    entry = ctx.entries["am-t2"]
    rep = entry.reps[0][1]
    nabla = LinearConnection(rep.bundle, [{0: {0: entry.alg.model.parse("cos(x1)")}}, {}])
    tt = invariance_form(nabla, rep)
    rng = ctx.rng("commutator", "control")
    broken = False
    for _ in range(ctx.samples):
        c = random_cochain(rep, 1, 1, rng)
        if not (d_nabla_weil(nabla, delta(c)) - delta(d_nabla_weil(nabla, c))).is_zero():
            broken = True
            break
    _check(checks, "commutator/am-t2/control-noninvariant",
           "a connection with nonzero invariance form is not a cochain map",
           broken and not tt.is_zero(), control=True)
    return checks


# -- horizontal machinery -------------------------------------------------------------

def random_horizontal(conn, p, q, rng):
    c = random_cochain(conn.rep, p, q, rng)
    inside = set(conn.ideal.frames)
    comps = [{key: f for key, f in t.items() if not any(b in inside for b in key[1])} for t in c.comps]
    return WeilCochain(c.rep, p, q, comps)


def suite_horizontal(ctx):
    checks = []
    for name, i, entry, ce in ctx.with_conns():
        conn = ce.conn
        hstar = lambda c: horizontal_projection(conn, c)
        D = lambda c: hor_ext_cov_derivative(conn, c)
        for p in SWEEP_P:
            for q in (0, 1, 2):
                rng = ctx.rng("horizontal", name, i, p, q)
                fails = {"image": None, "idempotent": None, "identity": None, "cochain": None, "delta-D": None}
                for s in range(ctx.samples):
                    c = random_cochain(conn.rep, p, q, rng)
                    hc = hstar(c)
                    if fails["image"] is None and not is_horizontal(hc, conn.ideal):
                        fails["image"] = c
                    if fails["idempotent"] is None and hstar(hc) != hc:
                        fails["idempotent"] = c
                    hor = random_horizontal(conn, p, q, rng)
                    if fails["identity"] is None and hstar(hor) != hor:
                        fails["identity"] = hor
                    if fails["cochain"] is None and hstar(delta(c)) != delta(hc):
                        fails["cochain"] = c
                    if fails["delta-D"] is None and delta(D(c)) != D(delta(c)):
                        fails["delta-D"] = c
                base = f"horizontal/{name}/conn{i + 1}/p{p}q{q}"
                _check(checks, base + "/image", "the horizontal projection lands in horizontal cochains",
                       fails["image"] is None, **_witness(fails["image"]))
                _check(checks, base + "/idempotent", "the horizontal projection is idempotent",
                       fails["idempotent"] is None, **_witness(fails["idempotent"]))
                _check(checks, base + "/identity-on-horizontal", "the horizontal projection fixes horizontal cochains",
                       fails["identity"] is None, **_witness(fails["identity"]))
                _check(checks, base + "/cochain-map", "the horizontal projection commutes with delta",
                       fails["cochain"] is None, **_witness(fails["cochain"]))
                _check(checks, base + "/delta-D", "delta commutes with the horizontal covariant derivative",
                       fails["delta-D"] is None, **_witness(fails["delta-D"]))
    return checks


# -- curvature and Bianchi ----------------------------------------------------------

def suite_curvature(ctx):
    checks = []
    for name, i, entry, ce in ctx.with_conns():
        conn = ce.conn
        base = f"curvature-bianchi/{name}/conn{i + 1}"
        issues = conn.problems()
        _check(checks, base + "/im-condition", "(C, v) is an IM connection", not issues, issues="; ".join(issues))
        _, U, issues = coupling_data(conn)
        _check(checks, base + "/coupling-conditions", "the coupling data satisfy the compatibility conditions", not issues,
               issues="; ".join(issues))
        _check(checks, base + "/orbit-identities", "v[h a, h b] = U(h a)(rho b) and nabla along orbits is [h a, .]",
               not _orbit_identity_failures(conn, U))
        omega = curvature_im(conn, check=False)
        first, second = curvature_closed_forms(conn)
        _check(checks, base + "/closed-forms", "both closed forms of the curvature agree with D(C, v)",
               omega == first and omega == second)
        _check(checks, base + "/bianchi", "the curvature satisfies the Bianchi identity D Omega = 0",
               hor_ext_cov_derivative(conn, omega).is_zero())
        _check(checks, base + "/horizontal", "the curvature is horizontal", is_horizontal(omega, conn.ideal))
        _check(checks, base + "/cocycle", "the curvature is a delta cocycle", delta(omega).is_zero())
    return checks


def _orbit_identity_failures(conn, U):
    alg, ideal = conn.alg, conn.ideal
    zero1 = VForm.zero(ideal.bundle, 1)
    failures = []
    for a in range(alg.rank):
        ha = conn.h(a)
        for b in range(alg.rank):
            hb = conn.h(b)
            lhs = conn.v_of(alg.bracket(ha, hb))
            Ua = U.get(a, zero1)
            rhs = tuple(interior(alg.anchor[b], Ua).comps.get(s, {}).get((), alg.model.zero())
                        for s in range(ideal.rank))
            if lhs != rhs:
                failures.append(("v-bracket", a, b))
        for s, e in enumerate(ideal.frames):
            xi = tuple(alg.model.const(1 if t == s else 0) for t in range(ideal.rank))
            lhs = conn.nabla.covariant(alg.anchor[a], xi)
            rhs = ideal.from_section(alg.bracket(ha, alg.frame(e)))
            if lhs != rhs:
                failures.append(("orbit-connection", a, s))
    return failures


# -- deformations ----------------------------------------------------------------------

def suite_deformation(ctx):
    checks = []
    for name, i, entry, ce in ctx.with_conns():
        conn = ce.conn
        base = f"deformation/{name}/conn{i + 1}"
        rng = ctx.rng("deformation", name, i)
        gamma = random_form(conn.ideal.bundle, 1, rng)
        L = delta0(conn.rep, gamma)
        omega = curvature_im(conn, check=False)
        DL = hor_ext_cov_derivative(conn, L)
        c2 = quadratic_term(L, conn.ideal)
        bad = [lam for lam in (0, 1, 2, 3)
               if curvature_im(affine_deform(conn, L, lam), check=False) != omega + DL.scale(lam) + c2.scale(lam * lam)]
        _check(checks, base + "/expansion", "curvature of conn + lam L is quadratic in lam with coefficients D L and c2",
               not bad, lambdas=bad, gamma=format_form(gamma))
        br = conn.ideal.fiber_bracket()
        _check(checks, base + "/c2-coboundary", "c2 of delta0 gamma equals -1/2 delta0 [gamma, gamma]",
               c2 == delta0(conn.rep, form_bracket(br, gamma, gamma)).scale(mpq(-1, 2)), gamma=format_form(gamma))
        if ce.curving is not None:
            pd = PrimitiveData(conn, ce.curving)
            try:
                moved = deform_primitive(pd, gamma)
                issues = moved.problems()
                same_G = moved.G == pd.G
            except IMError as exc:
                issues, same_G = [str(exc)], False
            _check(checks, base + "/curving", "the deformed curving is a curving of the deformed connection",
                   not issues, issues="; ".join(issues))
            _check(checks, base + "/three-curvature", "the 3-curvature is unchanged by deformation", same_G)
        bad_L = _non_horizontal(conn, rng)
        if bad_L is not None:
            try:
                affine_deform(conn, bad_L, 1)
                rejected = False
            except IMError:
                rejected = True
            _check(checks, base + "/control-non-horizontal", "deformation by a non-horizontal form is rejected",
                   rejected, control=True)
    return checks


def _non_horizontal(conn, rng):
    """The IM form (0, l) with l the identity on the ideal: never horizontal."""
    comps = [{}, {}]
    for s, a in enumerate(conn.ideal.frames):
        xi = tuple(conn.alg.model.const(1 if t == s else 0) for t in range(conn.ideal.rank))
        comps[1][((), (a,))] = section_form(conn.ideal.bundle, xi)
    return WeilCochain(conn.rep, 1, 1, comps)


# -- primitive solvers --------------------------------------------------------------

def suite_primitive(ctx):
    checks = []
    entries = ctx.entries
    so3 = entries["coupling-t2-so3"]
    conn = so3.conns[0].conn
    found = find_curving(conn)
    ok = isinstance(found, PrimitiveData) and found.F == so3.conns[0].curving
    _check(checks, "primitive/coupling-t2-so3/semisimple-curving", "the semisimple branch recovers the curving", ok)
    rng = ctx.rng("primitive", "so3")
    for trial in range(3):
        gamma = random_form(conn.ideal.bundle, 1, rng)
        L = delta0(conn.rep, gamma)
        back = semisimple_inverse(L, conn.ideal)
        moved = deform_primitive(found, gamma) if isinstance(found, PrimitiveData) else None
        refound = find_curving(moved.conn) if moved else None
        ok = back == gamma and isinstance(refound, PrimitiveData) and refound.F == moved.F
        _check(checks, f"primitive/coupling-t2-so3/round-trip{trial + 1}",
               "deforming by delta0 gamma and solving back recovers gamma and the unique curving", ok)
    for name in ("am-t2", "am-r2"):
        conn = entries[name].conns[0].conn
        res = find_curving(conn)
        ok = (isinstance(res, PrimitiveData) and delta0(conn.rep, res.F) == curvature_im(conn, check=False)
              and res.G.is_zero())
        _check(checks, f"primitive/{name}/transitive", "the transitive branch returns a curving with G = 0", ok)
    t3 = entries["coupling-t3-abelian"]
    res = find_curving(t3.conns[0].conn, candidate=t3.conns[0].curving)
    _check(checks, "primitive/coupling-t3-abelian/abelian-candidate",
           "the abelian branch validates a candidate and reports the invariant 2-forms",
           isinstance(res, NotUnique) and len(res.basis) == 3)
    res = find_curving(t3.conns[0].conn)
    _check(checks, "primitive/coupling-t3-abelian/abelian-without-candidate",
           "the abelian branch without a candidate reports NotFound", isinstance(res, NotFound))
    leaf = entries["coupling-t2-leaf-so3"]
    res = find_curving(leaf.conns[0].conn)
    _check(checks, "primitive/coupling-t2-leaf-so3/semisimple-curving",
           "the semisimple branch recovers the curving on a regular algebroid",
           isinstance(res, PrimitiveData) and res.F == leaf.conns[0].curving)
    for name, i, entry, ce in ctx.with_conns():
        if ce.curving is None:
            continue
        pd = PrimitiveData(ce.conn, ce.curving)
        issues = pd.problems()
        _check(checks, f"primitive/{name}/conn{i + 1}/invariants",
               "a curving gives R = -ad F, U = -i F, delta0 G = 0 and d G = 0", not issues,
               issues="; ".join(issues))
    for name, i, entry, ce in ctx.with_conns():
        conn = ce.conn
        v = {a: conn.v(a) for a in range(conn.alg.rank)}
        _, U, _ = coupling_data(conn)
        try:
            obs, seed_conn = obstruction_rep(conn.alg, conn.ideal, v, conn.nabla, U)
            ok = obs.is_zero() and seed_conn == conn.cochain
        except IMError:
            ok = False
        _check(checks, f"primitive/{name}/conn{i + 1}/obstruction",
               "the obstruction of a seed built from an IM connection vanishes", ok)
    checks.extend(_coupling_rebuild(ctx))
    return checks


def _coupling_rebuild(ctx):
    """Rebuild coupling examples from their ingredients and compare with the catalog."""
    checks = []
    entries = ctx.entries
    for name in ("am-t2", "coupling-t2-so3"):
        entry = entries[name]
        ce = entry.conns[0]
        conn = ce.conn
        model = entry.alg.model
        B = tangent_algebroid(model)
        br = conn.ideal.fiber_bracket()
        try:
            alg, ideal, rebuilt = make_coupling_algebroid(B, br, conn.nabla, ce.curving, name)
            ok = (not validate(alg) and alg.structure == entry.alg.structure
                  and not PrimitiveData(rebuilt, ce.curving).problems())
        except Exception:
            ok = False
        _check(checks, f"primitive/{name}/coupling-rebuild",
               "the coupling construction reproduces the algebroid and its primitive connection", ok)
    model = entries["am-t2"].alg.model
    so3br = entries["coupling-t2-so3"].conns[0].conn.ideal.fiber_bracket()
    bad = coupling_conditions(tangent_algebroid(model), so3br, LinearConnection.trivial(so3br.bundle),
                              VForm.from_entries(so3br.bundle, 2, [((0, 1), 0, model.const(1))]))
    _check(checks, "primitive/coupling/control-curvature-mismatch",
           "the coupling construction rejects F with R != -ad F", bool(bad), control=True)
    return checks


# -- foliated Yang-Mills ----------------------------------------------------------------

def _splitting(entry, idx):
    s = entry.splittings[idx]
    return FoliatedSplitting(entry.alg, entry.ideals[s.ideal], s.leaf, s.sigma)


def suite_foliated(ctx):
    checks = []
    entry = ctx.entries["am-t2"]
    model = entry.alg.model
    ideal = entry.ideals[0]
    K = ideal.bundle
    omega = entry.conns[0].curving
    metric = Metric([[1, 0], [0, 1]])
    ymd = YangMillsData(FiberMetric.identity(K), metric)
    for idx, s in enumerate(entry.splittings):
        sigma = _splitting(entry, idx)
        theta = VForm.from_entries(K, 1, [((1,), 0, s.sigma[1][2]), ((0,), 0, s.sigma[0][2])])
        _check(checks, f"foliated-ym/am-t2/{s.name}/curvature", "splitting curvature is omega - d theta",
               foliated_curvature(sigma) == omega - exterior_d(theta))
        _check(checks, f"foliated-ym/am-t2/{s.name}/invariants", "leafwise connection and Bianchi identity",
               not foliated_problems(sigma))
    crit, zero = _splitting(entry, 0), _splitting(entry, 1)
    _check(checks, "foliated-ym/am-t2/critical-residual", "the splitting sin(x1) dx2 is critical",
           foliated_ym_check(crit, ymd).is_zero())
    res = foliated_ym_check(zero, ymd)
    _check(checks, "foliated-ym/am-t2/zero-residual", "the zero splitting is not critical", not res.is_zero(),
           control=True)
    tau = VForm.from_entries(K, 1, [((1,), 0, model.parse("sin(x1)"))])
    moved = crit.deform(tau)
    br = ideal.fiber_bracket()
    expected = foliated_curvature(crit) - d_nabla_form(crit.nabla, tau, crit.leaf) \
        - form_bracket(br, tau, tau).scale(mpq(1, 2))
    _check(checks, "foliated-ym/am-t2/deformation-law", "curvature changes by -d tau - 1/2 [tau, tau]",
           foliated_curvature(moved) == expected)
    closed = VForm.from_entries(K, 1, [((0,), 0, model.parse("cos(x1)")), ((1,), 0, model.const(2))])
    _check(checks, "foliated-ym/am-t2/closed-deformation", "deforming a critical splitting by a closed form stays critical",
           foliated_ym_check(crit.deform(closed), ymd).is_zero())
    _check(checks, "foliated-ym/am-t2/nonclosed-deformation",
           "deforming a critical splitting by a non-closed form breaks criticality",
           not foliated_ym_check(crit.deform(tau), ymd).is_zero(), control=True)
    vals, fit = foliated_hessian(crit, ymd, tau)
    dtau = exterior_d(tau)
    hess = l2_pairing(metric, ymd.kappa, dtau, dtau).coef
    ok = fit[1] == 0 and fit[2] == hess and vals[3] == fit[0] + 3 * fit[1] + 9 * fit[2]
    _check(checks, "foliated-ym/am-t2/hessian", "the action along sigma + lam tau is S + lam^2 <<d tau, d tau>>", ok,
           values=vals)
    checks.extend(_adjointness(ctx, entry, crit, ymd, "am-t2"))
    so3 = ctx.entries["coupling-t2-so3"]
    sigma = FoliatedSplitting(so3.alg, so3.ideals[0], (0, 1),
                              [so3.alg.frame(0), so3.alg.frame(1)])
    ymd3 = YangMillsData(FiberMetric.identity(so3.ideals[0].bundle), metric)
    _check(checks, "foliated-ym/coupling-t2-so3/invariants", "leafwise connection and Bianchi identity",
           not foliated_problems(sigma))
    _check(checks, "foliated-ym/coupling-t2-so3/curvature", "the splitting by frames has curvature F",
           foliated_curvature(sigma) == so3.conns[0].curving)
    checks.extend(_adjointness(ctx, so3, sigma, ymd3, "coupling-t2-so3"))
    leaf = ctx.entries["coupling-t2-leaf-so3"]
    sig = _splitting(leaf, 0)
    _check(checks, "foliated-ym/coupling-t2-leaf-so3/invariants", "leafwise connection and Bianchi identity",
           not foliated_problems(sig))
    ymdl = YangMillsData(FiberMetric.identity(leaf.ideals[0].bundle), metric)
    _check(checks, "foliated-ym/coupling-t2-leaf-so3/critical", "curvature vanishes on one-dimensional leaves",
           foliated_ym_check(sig, ymdl).is_zero())
    return checks


def _adjointness(ctx, entry, sigma, ymd, name, count=20):
    rng = ctx.rng("foliated-adjoint", name)
    K = sigma.ideal.bundle
    bad = None
    for i in range(count):
        k = i % 2
        alpha = random_form(K, k, rng)
        beta = random_form(K, k + 1, rng)
        lhs = leafwise_pairing(sigma, ymd, d_nabla_form(sigma.nabla, alpha, sigma.leaf), beta)
        rhs = leafwise_pairing(sigma, ymd, alpha, leafwise_codifferential(sigma, ymd, beta))
        if lhs != rhs:
            bad = i
            break
    return [Check(f"foliated-ym/{name}/adjointness", "the leafwise codifferential is the formal adjoint of d",
                  bad is None, False, {} if bad is None else {"sample": str(bad)})]


# -- multiplicative Yang-Mills ------------------------------------------------------------

def _scenario_pd(ctx, name):
    from .formats import load_json, parse_scenario
    doc = load_json(ctx.directory / "scenarios" / f"{name}.json")
    sc = parse_scenario(doc, lambda n: ctx.entries[n])
    pd = PrimitiveData(sc.conn, sc.curving)
    return sc, pd, YangMillsData(sc.kappa, sc.metric, sc.mu)


def suite_multiplicative(ctx):
    checks = []
    sc, pd, ymd = _scenario_pd(ctx, "t3-eigen")
    base = "multiplicative-ym/t3-eigen"
    _check(checks, base + "/first", "first equation residual vanishes", ym_first_check(pd, ymd).is_zero())
    _check(checks, base + "/second", "second equation residual vanishes", ym_second_check(pd, ymd).is_zero())
    _check(checks, base + "/adapted", "the curving is adapted", adaptedness_check(pd, ymd))
    _check(checks, base + "/eigenvalue", "the curving is a Laplacian eigenform with eigenvalue -1/mu",
           eigen_check(pd, ymd))
    system = gathered_system(pd, ymd)
    _check(checks, base + "/gathered", "all six collected identities hold", all(system.values()),
           failed=[k for k, v in system.items() if not v])
    first, second = tangent_residuals(pd, ymd, sc.gamma, sc.beta)
    _check(checks, base + "/tangent", "the supplied tangent vector satisfies both linearized equations",
           first.is_zero() and second.is_zero())
    zero = VForm.zero(sc.gamma.bundle, 1)
    first, second = tangent_residuals(pd, ymd, zero, pd.F)
    _check(checks, base + "/tangent-curving", "the curving itself is a transversal tangent vector",
           first.is_zero() and second.is_zero())
    sc2, pd2, ymd2 = _scenario_pd(ctx, "t3-eigen-mu2")
    _check(checks, "multiplicative-ym/t3-eigen-mu2/second", "changing mu breaks the second equation",
           not ym_second_check(pd2, ymd2).is_zero(), control=True)
    sc5, pd5, ymd5 = _scenario_pd(ctx, "t5-self-dual")
    report = self_dual_check(pd5, ymd5)
    _check(checks, "multiplicative-ym/t5-self-dual/self-dual", "G = c star F with (-1)^s c^2 = 1/mu and the gathered system",
           report.ok, ratio=report.ratio)
    sc6, pd6, ymd6 = _scenario_pd(ctx, "t5-euclidean")
    try:
        self_dual_check(pd6, ymd6)
        rejected = False
    except YMError:
        rejected = True
    _check(checks, "multiplicative-ym/t5-euclidean/self-dual-rejected",
           "Riemannian metrics with mu < 0 admit no self-dual pairs", rejected, control=True)
    checks.extend(_action_values(ctx))
    checks.extend(_variation(ctx))
    return checks


def _flat_torus_pd(scale):
    from .funcring import Torus
    T2 = Torus(2)
    K = TrivBundle(T2, 1)
    F = VForm.from_entries(K, 2, [((0, 1), 0, T2.const(scale))])
    _, _, conn = make_coupling_algebroid(tangent_algebroid(T2), FiberBracket.abelian(K), LinearConnection.trivial(K), F)
    return PrimitiveData(conn, F), YangMillsData(FiberMetric.identity(K), Metric([[1, 0], [0, 1]]))


def _action_values(ctx):
    checks = []
    pd, ymd = _flat_torus_pd(1)
    s = ym_action(pd, ymd)
    _check(checks, "multiplicative-ym/flat-t2/action", "S = (2pi)^2 for F = dx1^dx2",
           (s.coef, s.power, s.detg) == (1, 2, 1), value=s)
    pd2, _ = _flat_torus_pd(2)
    _check(checks, "multiplicative-ym/flat-t2/action-scaling", "the action is quadratic in F",
           ym_action(pd2, ymd).coef == 4)
    _check(checks, "multiplicative-ym/flat-t2/first", "constant curving solves the first equation",
           ym_first_check(pd, ymd).is_zero())
    _check(checks, "multiplicative-ym/flat-t2/adapted-control", "G = 0 with nonzero curvature is not adapted",
           not adaptedness_check(pd, ymd), control=True)
    am = ctx.entries["am-t2"]
    ce = am.conns[0]
    pd3 = PrimitiveData(ce.conn, ce.curving)
    ymd3 = YangMillsData(FiberMetric.identity(ce.conn.ideal.bundle), Metric([[1, 0], [0, 1]]))
    _check(checks, "multiplicative-ym/am-t2/first-control", "non-constant curving on the flat torus is not critical",
           not ym_first_check(pd3, ymd3).is_zero(), control=True)
    rng = ctx.rng("positivity")
    K = ce.conn.ideal.bundle
    ok = True
    for _ in range(10):
        F = random_form(K, 2, rng)
        val = l2_pairing(ymd3.metric, ymd3.kappa, F, F).coef
        if (val > 0) != (not F.is_zero()) or val < 0:
            ok = False
    _check(checks, "multiplicative-ym/am-t2/positivity", "<<F, F>> is positive for nonzero F", ok)
    return checks


def _lagrange_coeffs(values):
    """Coefficients of the polynomial through (i, values[i]), i = 0..n-1."""
    import sympy
    lam = sympy.symbols("lam")
    pts = [(i, sympy.Rational(int(v.numerator), int(v.denominator))) for i, v in enumerate(values)]
    poly = sympy.Poly(sympy.interpolate(pts, lam), lam)
    coeffs = poly.all_coeffs()[::-1]
    coeffs += [0] * (len(values) - len(coeffs))
    return [mpq(int(sympy.fraction(c)[0]), int(sympy.fraction(c)[1])) for c in coeffs]


def _variation(ctx):
    """d/dlam S along deform_primitive(gamma) at 0 equals 2 <<codiff F, gamma>>."""
    checks = []
    entry = ctx.entries["coupling-t2-so3"]
    ce = entry.conns[0]
    pd = PrimitiveData(ce.conn, ce.curving)
    K = ce.conn.ideal.bundle
    ymd = YangMillsData(FiberMetric.identity(K), Metric([[1, 0], [0, 1]]))
    rng = ctx.rng("variation")
    gamma = random_form(K, 1, rng)
    vals = [ym_action(deform_primitive(pd, gamma, lam), ymd).coef for lam in range(6)]
    coeffs = _lagrange_coeffs(vals)
    codF = covariant_codifferential(pd, ymd, pd.F)
    expected = 2 * l2_pairing(ymd.metric, ymd.kappa, codF, gamma).coef
    ok = coeffs[5] == 0 and coeffs[1] == expected
    _check(checks, "multiplicative-ym/coupling-t2-so3/first-variation",
           "the first variation of the action is 2 <<codiff F, gamma>>", ok, slope=coeffs[1], expected=expected)
    return checks


# -- gauge ----------------------------------------------------------------------------

def suite_gauge(ctx):
    checks = []
    for name, entry in ctx.entries.items():
        for g in entry.gauge_maps:
            ce = entry.conns[g.conn]
            pd = PrimitiveData(ce.conn, ce.curving)
            n = entry.alg.model.dim
            kappa = g.kappa or FiberMetric.identity(ce.conn.ideal.bundle)
            ymd = YangMillsData(kappa, Metric([[1 if i == j else 0 for j in range(n)] for i in range(n)]))
            try:
                before, after = gauge_invariance(g.phi, pd, ymd)
                ok = before == after
                detail = {"before": before, "after": after}
            except (IMError, YMError) as exc:
                ok = False
                detail = {"error": exc}
            _check(checks, f"gauge/{name}/{g.name}/action", "the action is invariant under gauge transformations",
                   ok, **detail)
            if g.name == "identity":
                _check(checks, f"gauge/{name}/identity/pullback", "pulling back along the identity changes nothing",
                       gauge_pullback(g.phi, pd, kappa).F == pd.F)
    flat = ctx.entries["coupling-t2-so3-flat"]
    rot = next(g for g in flat.gauge_maps if g.name == "fiber-rotation")
    pd = PrimitiveData(flat.conns[1].conn, flat.conns[1].curving)
    moved = gauge_pullback(rot.phi, pd, rot.kappa)
    _check(checks, "gauge/coupling-t2-so3-flat/fiber-rotation/nontrivial",
           "a fiber rotation moves the curving", moved.F != pd.F)
    am = ctx.entries["am-t2"]
    from .imconn import GaugeMap
    shift = GaugeMap(am.alg, [[1, 0], [0, 1]], [1, 0], [[am.alg.model.const(1 if i == j else 0) for j in range(3)]
                                                         for i in range(3)])
    _check(checks, "gauge/am-t2/control-translation", "a translation that moves omega is not a bracket morphism",
           bool(shift.problems(am.ideals[0])), control=True)
    return checks


RUNNERS = {
    "weil-delta": suite_weil_delta,
    "commutator": suite_commutator,
    "horizontal": suite_horizontal,
    "curvature-bianchi": suite_curvature,
    "deformation": suite_deformation,
    "primitive": suite_primitive,
    "foliated-ym": suite_foliated,
    "multiplicative-ym": suite_multiplicative,
    "gauge": suite_gauge,
}


@dataclass
class SuiteResult:
    name: str
    checks: list
    seconds: float = 0.0

    @property
    def failed(self):
        return [c for c in self.checks if not c.ok]

    @property
    def ok(self):
        return not self.failed

    def to_json(self, timing=False):
        out = {"suite": self.name, "passed": len(self.checks) - len(self.failed), "failed": len(self.failed),
               "checks": [c.to_json() for c in sorted(self.checks, key=lambda c: c.id)]}
        if timing:
            out["seconds"] = round(self.seconds, 3)
        return out


def run_suite(name, seed=0, directory=None, samples=PER_SHAPE):
    if name not in RUNNERS:
        raise KeyError(name)
    ctx = Context(directory, seed, samples)
    start = time.perf_counter()
    try:
        checks = RUNNERS[name](ctx)
    except Exception as exc:
        checks = [Check(f"{name}/error", "the suite runs to completion", False, False,
                        {"error": f"{type(exc).__name__}: {exc}"})]
    return SuiteResult(name, checks, time.perf_counter() - start)


def _run_one(args):
    name, seed, directory, samples = args
    return run_suite(name, seed, directory, samples)


def run_suites(names, seed=0, directory=None, samples=PER_SHAPE, jobs=1):
    """Run several suites; results come back in the order of ``names``."""
    args = [(n, seed, directory, samples) for n in names]
    if jobs > 1 and len(names) > 1 and not faults.current():
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, args))
    return [_run_one(a) for a in args]


# Which suite exposes each documented corruption.
FAULT_TARGETS = {
    "delta-tail-sign": "weil-delta",
    "delta-drop-bracket-slot": "weil-delta",
    "leibniz-df-sign": "deformation",
    "dnabla-drop-shift": "commutator",
    "hproj-drop-dotwedge": "horizontal",
    "curving-drop-bracket": "deformation",
    "c2-sign": "deformation",
    "theta-drop": "commutator",
    "hodge-drop-sign": "foliated-ym",
    "foliated-curvature-sign": "foliated-ym",
    "coupling-drop-F": "primitive",
}


def fault_sweep(seed=0, directory=None, samples=2):
    """For each corruption: (name, suite, number of failing non-control checks)."""
    out = []
    for fault, suite in FAULT_TARGETS.items():
        with faults.inject(fault):
            res = run_suite(suite, seed, directory, samples)
            failing = sum(1 for c in res.checks if not c.ok and not c.control)
        out.append((fault, suite, failing))
    return out
