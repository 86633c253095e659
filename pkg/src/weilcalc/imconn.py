"""IM connections for a bundle of ideals and the structures built from them.

An IM connection is a (1,1) Weil cochain (C, v) valued in the ideal k with
the adjoint representation: ``C(e_a)`` is a k-valued 1-form and ``v(e_a)`` a
section of k with v(e_s) = e_s on ideal frames.  The horizontal projector is
h = id - v on A.
"""

from dataclasses import dataclass, field
from itertools import combinations, combinations_with_replacement

from gmpy2 import mpq

from . import faults, linalg
from .algebroid import adjoint_rep
from .geometry import (
    LinearConnection, SymForm, VForm, bracket_compatible, curvature_tensor, d_nabla_form,
    dot_wedge, end_wedge, form_bracket, interior, section_form, sf_add_into,
)
from .weil import WeilCochain, d_nabla_weil, delta, delta0


class IMError(ValueError):
    pass


def _unit(model, n, i):
    return tuple(model.const(1 if j == i else 0) for j in range(n))


class IMConnection:
    """A k-valued IM 1-form whose symbol restricts to the identity on k."""

    def __init__(self, ideal, cochain, check=True):
        self.ideal = ideal
        self.alg = ideal.alg
        self.rep = cochain.rep
        if cochain.p != 1 or cochain.q != 1:
            raise IMError("an IM connection is a (1,1) cochain")
        if cochain.bundle != ideal.bundle:
            raise IMError("an IM connection takes values in the ideal")
        self.cochain = cochain
        model = self.alg.model
        z = model.zero()
        self._v = []
        for a in range(self.alg.rank):
            form = cochain.frame_value(1, (), (a,))
            self._v.append(tuple(form.comps.get(s, {}).get((), z) for s in range(ideal.rank)))
        self._h = []
        for a in range(self.alg.rank):
            sec = list(self.alg.frame(a))
            for s, b in enumerate(ideal.frames):
                sec[b] = sec[b] - self._v[a][s]
            self._h.append(tuple(sec))
        gamma = [{} for _ in range(model.dim)]
        for s, a in enumerate(ideal.frames):
            C = self.C(a)
            for t, comp in C.comps.items():
                for (i,), f in comp.items():
                    gamma[i].setdefault(s, {})[t] = f
        self.nabla = LinearConnection(ideal.bundle, gamma)
        if check:
            issues = self.problems()
            if issues:
                raise IMError("; ".join(issues))

    @classmethod
    def from_tables(cls, alg, ideal, C, v, check=True):
        """``C``: {frame: k-valued 1-form}; ``v``: {frame: k-section}; missing entries are zero."""
        rep = adjoint_rep(alg, ideal)
        comps = [{}, {}]
        for a, form in C.items():
            if not form.is_zero():
                comps[0][((a,), ())] = form
        for a, sec in v.items():
            form = section_form(ideal.bundle, sec)
            if not form.is_zero():
                comps[1][((), (a,))] = form
        return cls(ideal, WeilCochain(rep, 1, 1, comps), check)

    @classmethod
    def from_coupling(cls, alg, ideal, v, nabla, U, check=True):
        """C(alpha) = nabla(v alpha) - U(h alpha), with U given on frames ({frame: 1-form})."""
        C = split_C(alg, ideal, v, nabla, U)
        return cls.from_tables(alg, ideal, C, v, check)

    # -- data on frames and sections ---------------------------------------------
    def C(self, a):
        return self.cochain.frame_value(0, (a,), ())

    def v(self, a):
        return self._v[a]

    def h(self, a):
        return self._h[a]

    def C_of(self, alpha):
        return self.cochain.evaluate(0, [alpha])

    def v_of(self, alpha):
        out = [self.alg.model.zero() for _ in range(self.ideal.rank)]
        for a, f in enumerate(alpha):
            if f.terms:
                for s, g in enumerate(self._v[a]):
                    if g.terms:
                        out[s] = out[s] + f * g
        return tuple(out)

    def h_of(self, alpha):
        sec = list(alpha)
        for s, b in enumerate(self.ideal.frames):
            sec[b] = sec[b] - self.v_of(alpha)[s]
        return tuple(sec)

    def problems(self):
        issues = []
        model = self.alg.model
        for s, a in enumerate(self.ideal.frames):
            if self._v[a] != _unit(model, self.ideal.rank, s):
                issues.append(f"symbol is not the identity on ideal frame {a + 1}")
        if not delta(self.cochain).is_zero():
            issues.append("(C, v) is not infinitesimally multiplicative")
        return issues

    def __add__(self, other):
        return IMConnection(self.ideal, self.cochain + other, check=False)

    def __eq__(self, other):
        return isinstance(other, IMConnection) and self.cochain == other.cochain


def split_C(alg, ideal, v, nabla, U):
    """Frame table of C(alpha) = nabla(v alpha) - U(h alpha)."""
    model = alg.model
    z = model.zero()
    C = {}
    for a in range(alg.rank):
        va = v.get(a, tuple(z for _ in range(ideal.rank)))
        form = d_nabla_form(nabla, section_form(ideal.bundle, va))
        h = list(alg.frame(a))
        for s, b in enumerate(ideal.frames):
            h[b] = h[b] - va[s]
        for b, f in enumerate(h):
            if f.terms and b in U:
                form = form - U[b].scale(f)
        C[a] = form
    return C


def coupling_data(conn):
    """(nabla, U) with nabla_X xi = C(xi)(X) and U_a = U(h e_a) = -C(h e_a), plus S-condition failures."""
    U = {}
    for a in range(conn.alg.rank):
        val = -conn.C_of(conn.h(a))
        if not val.is_zero():
            U[a] = val
    return conn.nabla, U, coupling_problems(conn, U)


def coupling_problems(conn, U):
    alg, ideal, nabla = conn.alg, conn.ideal, conn.nabla
    model = alg.model
    br = ideal.fiber_bracket()
    issues = []
    if not bracket_compatible(nabla, br):
        issues.append("connection does not preserve the fiber bracket")
    R = curvature_tensor(nabla)
    zero1 = VForm.zero(ideal.bundle, 1)
    for a in range(alg.rank):
        iR = interior(alg.anchor[a], R)
        Ua = U.get(a, zero1)
        for s in range(ideal.rank):
            es = section_form(ideal.bundle, _unit(model, ideal.rank, s))
            lhs = end_wedge(iR, es)
            rhs = form_bracket(br, Ua, es)
            if lhs != rhs:
                issues.append(f"curvature of nabla differs from [U, .] for frames ({a + 1}, ideal {s + 1})")
                break
    for a in range(alg.rank):
        for b in range(a + 1, alg.rank):
            lhs = zero1
            for m, f in alg.structure_of(a, b).items():
                if m in U:
                    lhs = lhs + U[m].scale(f)
            Xa, Xb = alg.anchor[a], alg.anchor[b]
            Ua, Ub = U.get(a, zero1), U.get(b, zero1)
            rhs = _lie_nabla(nabla, Xa, Ub) - _lie_nabla(nabla, Xb, Ua) + d_nabla_form(nabla, interior(Xb, Ua))
            if lhs != rhs:
                issues.append(f"U fails the cocycle condition for frames ({a + 1},{b + 1})")
    return issues


def _lie_nabla(nabla, X, form):
    return interior(X, d_nabla_form(nabla, form)) + d_nabla_form(nabla, interior(X, form))


def is_horizontal(c, ideal):
    """c_i(. || xi, .) = 0 for every ideal frame xi and i >= 1."""
    inside = set(ideal.frames)
    for k in range(1, c.p + 1):
        for (al, be) in c.comps[k]:
            if any(b in inside for b in be):
                return False
    return True


# -- horizontal projection ------------------------------------------------------

def _shuffles(items, first):
    """(sign, chosen, rest) over all (first, len-first) shuffles of ``items``."""
    n = len(items)
    for pos in combinations(range(n), first):
        others = tuple(i for i in range(n) if i not in pos)
        perm = pos + others
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        yield (-1) ** inv, tuple(items[i] for i in pos), tuple(items[i] for i in others)


def horizontal_projection(conn, c):
    """h^* c by the shuffle formula

    (h^*c)_k(a || b) = sum_{j>=k} (-1)^{j-k} sum_shuffles sgn c_j(a_rest || h b, .) .^ (C a_1, ..., C a_{j-k}).
    """
    if c.bundle != conn.ideal.bundle:
        raise IMError("horizontal projection needs ideal-valued cochains")
    alg, ideal = conn.alg, conn.ideal
    p, q = c.p, c.q
    frames = ideal.frames
    model = alg.model
    hframes = [conn.h(b) for b in range(alg.rank)]
    Cforms = [conn.C(a) for a in range(alg.rank)]
    drop = faults.active("hproj-drop-dotwedge")
    out = [{} for _ in range(p + 1)]
    for k in range(p + 1):
        if q - k < 0:
            continue
        for al in combinations(range(alg.rank), p - k):
            for be in combinations_with_replacement(range(alg.rank), k):
                hbeta = _expand_h(hframes, be, model)
                total = VForm.zero(c.bundle, q - k)
                for j in range(k, p + 1):
                    if q - j < 0:
                        break
                    if j > k and drop:
                        break
                    m = j - k
                    for sign, chosen, rest in _shuffles(al, m):
                        if m == 0:
                            val = VForm.zero(c.bundle, q - k)
                            for coeff, key in hbeta:
                                f = c.frame_value(j, rest, key)
                                if not f.is_zero():
                                    val = val + f.scale(coeff)
                        else:
                            table = {}
                            for extra in combinations_with_replacement(frames, m):
                                acc = VForm.zero(c.bundle, q - j)
                                for coeff, key in hbeta:
                                    f = c.frame_value(j, rest, key + extra)
                                    if not f.is_zero():
                                        acc = acc + f.scale(coeff)
                                if not acc.is_zero():
                                    table[extra] = acc
                            if not table:
                                continue
                            gamma = SymForm(c.bundle, q - j, m, table)
                            thetas = [Cforms[a] for a in chosen]
                            val = dot_wedge(gamma, thetas, frames).value(())
                        if val.is_zero():
                            continue
                        sgn = sign * (-1) ** m
                        total = total + val if sgn > 0 else total - val
                if not total.is_zero():
                    out[k][(al, be)] = total
    return WeilCochain(c.rep, p, q, out)


def _expand_h(hframes, be, model):
    """Multilinear expansion of (h e_b1, ..., h e_bk): list of (coeff, sorted key)."""
    terms = [(model.const(1), ())]
    for b in be:
        nxt = []
        for coeff, key in terms:
            for a, f in enumerate(hframes[b]):
                if f.terms:
                    nxt.append((coeff * f, key + (a,)))
        terms = nxt
    merged = {}
    for coeff, key in terms:
        key = tuple(sorted(key))
        merged[key] = merged[key] + coeff if key in merged else coeff
    return [(c, k) for k, c in merged.items() if c.terms]


def hor_ext_cov_derivative(conn, c):
    """D c = h^*(d^nabla c) with nabla = C restricted to the ideal."""
    return horizontal_projection(conn, d_nabla_weil(conn.nabla, c))


def curvature_im(conn, check=True):
    """Omega = D(C, v); with ``check`` the two closed forms are computed and compared."""
    omega = hor_ext_cov_derivative(conn, conn.cochain)
    if check:
        first, second = curvature_closed_forms(conn)
        if omega != first or omega != second:
            raise IMError("curvature formulas disagree")
    return omega


def curvature_closed_forms(conn):
    """(d^nabla C a, C h b) and (R v a - d^nabla U(h a), -U(h b)) as (1,2) cochains."""
    nabla = conn.nabla
    R = curvature_tensor(nabla)
    _, U, _ = coupling_data(conn)
    zero1 = VForm.zero(conn.ideal.bundle, 1)
    first = [{}, {}]
    second = [{}, {}]
    for a in range(conn.alg.rank):
        first[0][((a,), ())] = d_nabla_form(nabla, conn.C(a))
        first[1][((), (a,))] = conn.C_of(conn.h(a))
        Ua = U.get(a, zero1)
        second[0][((a,), ())] = end_wedge(R, section_form(conn.ideal.bundle, conn.v(a))) - d_nabla_form(nabla, Ua)
        second[1][((), (a,))] = -Ua
    return (WeilCochain(conn.rep, 1, 2, first), WeilCochain(conn.rep, 1, 2, second))


# -- deformations ---------------------------------------------------------------

def is_horizontal_im(L, ideal):
    return is_horizontal(L, ideal) and delta(L).is_zero()


def affine_deform(conn, L, lam):
    """conn + lam L for a horizontal IM 1-form L."""
    if L.p != 1 or L.q != 1 or L.bundle != conn.ideal.bundle:
        raise IMError("deformation must be an ideal-valued (1,1) cochain")
    if not is_horizontal_im(L, conn.ideal):
        raise IMError("deformation is not a horizontal IM form")
    return IMConnection(conn.ideal, conn.cochain + L.scale(lam), check=False)


def restricted_form(L, ideal):
    """L restricted to the ideal as a SymForm of arity 1 over ideal frames."""
    table = {}
    for s in ideal.frames:
        val = L.frame_value(0, (s,), ())
        if not val.is_zero():
            table[(s,)] = val
    return SymForm(L.bundle, 1, 1, table)


def quadratic_term(L, ideal):
    """c2(L, l)(a) = -(L|k .^ L a, L|k (l a))."""
    alg = L.alg
    gamma = restricted_form(L, ideal)
    comps = [{}, {}]
    z = alg.model.zero()
    for a in range(alg.rank):
        lead = dot_wedge(gamma, [L.frame_value(0, (a,), ())], ideal.frames).value(())
        la = L.frame_value(1, (), (a,))
        sym = VForm.zero(L.bundle, 1)
        for s, b in enumerate(ideal.frames):
            f = la.comps.get(s, {}).get((), z)
            if f.terms:
                sym = sym + L.frame_value(0, (b,), ()).scale(f)
        sign = 1 if faults.active("c2-sign") else -1
        comps[0][((a,), ())] = lead.scale(sign)
        comps[1][((), (a,))] = sym.scale(sign)
    return WeilCochain(L.rep, 1, 2, comps)


# -- primitive connections ------------------------------------------------------

@dataclass
class PrimitiveData:
    conn: IMConnection
    F: VForm

    @property
    def G(self):
        return d_nabla_form(self.conn.nabla, self.F)

    def problems(self):
        conn, F = self.conn, self.F
        issues = []
        if delta0(conn.rep, F) != curvature_im(conn, check=False):
            issues.append("delta0 F differs from the curvature")
        br = conn.ideal.fiber_bracket()
        if curvature_tensor(conn.nabla) != minus_ad(br, F):
            issues.append("curvature of nabla is not -ad F")
        _, U, _ = coupling_data(conn)
        zero1 = VForm.zero(conn.ideal.bundle, 1)
        for a in range(conn.alg.rank):
            if U.get(a, zero1) != -interior(conn.alg.anchor[a], F):
                issues.append(f"U differs from -i_rho F on frame {a + 1}")
                break
        G = self.G
        if not delta0(conn.rep, G).is_zero():
            issues.append("delta0 G is not zero")
        if not d_nabla_form(conn.nabla, G).is_zero():
            issues.append("d^nabla G is not zero")
        return issues


def minus_ad(br, F):
    """-ad F as an End-valued form: e_s -> [e_s, F]."""
    from .geometry import end_bundle
    k = br.bundle.rank
    out = {}
    for (s, u), col in br.f.items():
        comp = F.comps.get(u)
        if not comp:
            continue
        for t, g in col.items():
            tgt = out.setdefault(t * k + s, {})
            for I, f in comp.items():
                sf_add_into(tgt, I, g * f)
    return VForm.from_frames(end_bundle(br.bundle), F.degree, out)


def deform_primitive(pd, gamma, lam=1):
    """Deform by lam delta0(gamma); the curving becomes F + lam d gamma - lam^2/2 [gamma, gamma]."""
    conn = pd.conn
    lam = mpq(lam)
    L = delta0(conn.rep, gamma)
    new_conn = IMConnection(conn.ideal, conn.cochain + L.scale(lam), check=False)
    br = conn.ideal.fiber_bracket()
    F = pd.F + d_nabla_form(conn.nabla, gamma).scale(lam)
    if not faults.active("curving-drop-bracket"):
        F = F - form_bracket(br, gamma, gamma).scale(lam * lam / 2)
    out = PrimitiveData(new_conn, F)
    if out.G != pd.G:
        raise IMError("3-curvature changed under deformation")
    return out


@dataclass
class NotFound:
    reason: str


@dataclass
class NotUnique:
    data: PrimitiveData
    basis: list = field(default_factory=list)


def ad_matrix_rows(br):
    """Rows (s,t), columns u of the linear map u -> [e_s, e_u]^t, or None when non-constant."""
    k = br.bundle.rank
    rows = []
    for s in range(k):
        for t in range(k):
            row = []
            for u in range(k):
                f = br.coeffs(s, u).get(t)
                if f is None:
                    row.append(mpq(0))
                elif f.is_constant():
                    row.append(f.constant_term())
                else:
                    return None
            rows.append(row)
    return rows


def _solve_ad(br, targets):
    """Solve [e_s, X]^t = targets[(s,t)] for X (k-valued), entries FuncExpr; None if unsolvable."""
    rows = ad_matrix_rows(br)
    if rows is None:
        return None
    li = linalg.left_inverse(rows)
    if li is None:
        return None
    k = br.bundle.rank
    model = br.bundle.model
    order = [(s, t) for s in range(k) for t in range(k)]
    X = []
    for u in range(k):
        val = model.zero()
        for col, st in enumerate(order):
            if li[u][col]:
                val = val + targets.get(st, model.zero()).scale(li[u][col])
        X.append(val)
    for idx, st in enumerate(order):
        lhs = model.zero()
        for u in range(k):
            if rows[idx][u]:
                lhs = lhs + X[u].scale(rows[idx][u])
        if lhs != targets.get(st, model.zero()):
            return None
    return X


def semisimple_inverse(L, ideal):
    """gamma with L(xi) = [xi, gamma] on the ideal, or None."""
    br = ideal.fiber_bracket()
    model = ideal.alg.model
    k = ideal.rank
    entries = []
    for i in range(model.dim):
        targets = {}
        for s, a in enumerate(ideal.frames):
            val = L.frame_value(0, (a,), ())
            for t in range(k):
                f = val.comps.get(t, {}).get((i,))
                if f is not None:
                    targets[(s, t)] = f
        X = _solve_ad(br, targets)
        if X is None:
            return None
        for u, f in enumerate(X):
            entries.append(((i,), u, f))
    gamma = VForm.from_entries(ideal.bundle, 1, entries)
    return gamma if delta0(L.rep, gamma) == L else None


def _is_semisimple(br):
    rows = ad_matrix_rows(br)
    if rows is None or not rows:
        return False
    return linalg.rank(rows) == br.bundle.rank


def invariant_two_forms(conn):
    """Basis of constant-coefficient 2-forms beta on the ideal with delta0 beta = 0."""
    ideal = conn.ideal
    model = conn.alg.model
    candidates = []
    for I in combinations(range(model.dim), 2):
        for s in range(ideal.rank):
            candidates.append(VForm.from_entries(ideal.bundle, 2, [(I, s, model.const(1))]))
    if not candidates:
        return []
    images = [delta0(conn.rep, b) for b in candidates]
    coords = {}
    for img in images:
        for k, table in enumerate(img.comps):
            for key, form in table.items():
                for I, a, f in form.entries():
                    for term in f.terms:
                        coords.setdefault((k, key, I, a, term), len(coords))
    rows = [[mpq(0)] * len(candidates) for _ in range(len(coords))]
    for col, img in enumerate(images):
        for k, table in enumerate(img.comps):
            for key, form in table.items():
                for I, a, f in form.entries():
                    for term, v in f.terms.items():
                        rows[coords[(k, key, I, a, term)]][col] = v
    basis = []
    for vec in linalg.nullspace(rows, len(candidates)):
        form = VForm.zero(ideal.bundle, 2)
        for c, b in zip(vec, candidates):
            if c:
                form = form + b.scale(c)
        basis.append(form)
    return basis


def find_curving(conn, candidate=None):
    """Curving F with delta0 F = Omega: semisimple, transitive or abelian branch."""
    ideal = conn.ideal
    alg = conn.alg
    model = alg.model
    br = ideal.fiber_bracket()
    omega = curvature_im(conn)
    if _is_semisimple(br):
        R = curvature_tensor(conn.nabla)
        k = ideal.rank
        entries = []
        for I in combinations(range(model.dim), 2):
            targets = {}
            for s in range(k):
                for t in range(k):
                    f = R.comps.get(t * k + s, {}).get(I)
                    if f is not None:
                        targets[(s, t)] = f
            X = _solve_ad(br, targets)
            if X is None:
                return NotFound("curvature of nabla is not of the form -ad F")
            for u, f in enumerate(X):
                entries.append((I, u, f))
        F = VForm.from_entries(ideal.bundle, 2, entries)
        if delta0(conn.rep, F) != omega:
            return NotFound("the unique solution of R = -ad F is not a curving")
        return _checked(PrimitiveData(conn, F))
    lifts = alg.anchor_lift()
    if lifts is not None and alg.rank - model.dim == ideal.rank:
        entries = []
        for i in range(model.dim):
            sym = omega.evaluate(1, [], [lifts[i]])
            for j in range(model.dim):
                X = _unit(model, model.dim, j)
                val = interior(X, sym)
                for s, comp in val.comps.items():
                    f = comp.get(())
                    if f is not None and i != j:
                        entries.append(((i, j), s, f.scale(mpq(1, 2))))
        F = VForm.from_entries(ideal.bundle, 2, entries)
        if delta0(conn.rep, F) != omega:
            return NotFound("orbital projection of the curvature is not a curving")
        return _checked(PrimitiveData(conn, F))
    if br.is_abelian():
        if candidate is None:
            return NotFound("abelian ideal: supply a candidate curving to validate")
        if delta0(conn.rep, candidate) != omega:
            return NotFound("candidate does not satisfy delta0 F = Omega")
        pd = _checked(PrimitiveData(conn, candidate))
        basis = invariant_two_forms(conn)
        return NotUnique(pd, basis) if basis else pd
    return NotFound("no implemented branch applies")


def _checked(pd):
    issues = pd.problems()
    if issues:
        raise IMError("; ".join(issues))
    return pd


def coupling_primitive(alg, ideal, conn, F):
    return _checked(PrimitiveData(conn, F))


# -- obstruction --------------------------------------------------------------------

def obstruction_rep(alg, ideal, v, nabla, U=None):
    """delta(C, v) for C = nabla(v .) - U(h .); a horizontal (2,1) cocycle."""
    U = U or {}
    model = alg.model
    for s, a in enumerate(ideal.frames):
        if tuple(v.get(a, ())) != _unit(model, ideal.rank, s):
            raise IMError("v is not a splitting: it must be the identity on the ideal")
    C = split_C(alg, ideal, v, nabla, U)
    conn = IMConnection.from_tables(alg, ideal, C, v, check=False)
    obs = delta(conn.cochain)
    if not is_horizontal(obs, ideal):
        raise IMError("obstruction representative is not horizontal")
    if not delta(obs).is_zero():
        raise IMError("obstruction representative is not a cocycle")
    return obs, conn.cochain


# -- gauge transformations ----------------------------------------------------------

class GaugeMap:
    """Bundle automorphism of A covering y = M x + s.

    ``phi[b][a]`` is the e_b coefficient of phi(e_a) (functions of x); on tori
    M is an integral matrix with det +-1 and s is in units of pi.
    """

    def __init__(self, alg, M, shift, phi, phi_inv=None, name=""):
        from .funcring import compose_linear
        self.alg = alg
        self.name = name
        n = alg.model.dim
        self.M = [[mpq(x) for x in row] for row in M]
        self.shift = tuple(shift)
        self.phi = [[f for f in row] for row in phi]
        if linalg.det(self.M) == 0:
            raise IMError("base map is not invertible")
        self.Minv = linalg.inverse(self.M)
        if alg.model.is_torus:
            if any(x.denominator != 1 for row in self.Minv for x in row) or any(
                    x.denominator != 1 for row in self.M for x in row):
                raise IMError("torus base maps must be integral with integral inverse")
            if any(mpq(x).denominator != 1 for x in self.shift):
                raise IMError("torus shifts must be integer multiples of pi")
            self.shift = tuple(int(x) for x in self.shift)
            self.M = [[int(x) for x in row] for row in self.M]
            self.Minv = [[int(x) for x in row] for row in self.Minv]
            inv_shift = tuple(-sum(self.Minv[i][j] * self.shift[j] for j in range(n)) for i in range(n))
        else:
            inv_shift = tuple(-sum(self.Minv[i][j] * mpq(self.shift[j]) for j in range(n)) for i in range(n))
        self.inv_shift = inv_shift
        self._pull = lambda f: compose_linear(f, self.M, self.shift)
        self._push = lambda f: compose_linear(f, self.Minv, inv_shift)
        r = alg.rank
        if phi_inv is None:
            if not all(f.is_constant() for row in self.phi for f in row):
                raise IMError("non-constant fiber maps need an explicit inverse")
            inv = linalg.inverse([[f.constant_term() for f in row] for row in self.phi])
            phi_inv = [[alg.model.const(x) for x in row] for row in inv]
        self.phi_inv = phi_inv
        for i in range(r):
            for j in range(r):
                val = alg.model.zero()
                for m in range(r):
                    val = val + self.phi[i][m] * self.phi_inv[m][j]
                if val != alg.model.const(1 if i == j else 0):
                    raise IMError("fiber map and its inverse do not compose to the identity")

    def pull_function(self, f):
        return self._pull(f)

    def push_function(self, f):
        return self._push(f)

    def push_section(self, alpha):
        """(phi_* alpha)(y) = Phi(x) alpha(x) at x = phi^{-1}(y)."""
        r = self.alg.rank
        out = []
        for b in range(r):
            val = self.alg.model.zero()
            for a in range(r):
                if alpha[a].terms and self.phi[b][a].terms:
                    val = val + self.phi[b][a] * alpha[a]
            out.append(self._push(val))
        return tuple(out)

    def push_vector(self, X):
        n = self.alg.model.dim
        out = []
        for i in range(n):
            val = self.alg.model.zero()
            for j in range(n):
                if self.M[i][j]:
                    val = val + X[j].scale(self.M[i][j])
            out.append(self._push(val))
        return tuple(out)

    def problems(self, ideal=None, kappa=None):
        alg = self.alg
        issues = []
        frames = [alg.frame(a) for a in range(alg.rank)]
        pushed = [self.push_section(e) for e in frames]
        for a in range(alg.rank):
            if alg.anchor_of(pushed[a]) != self.push_vector(alg.anchor[a]):
                issues.append(f"anchor not preserved on frame {a + 1}")
        for a in range(alg.rank):
            for b in range(a + 1, alg.rank):
                lhs = self.push_section(alg.bracket_frames(a, b))
                rhs = alg.bracket(pushed[a], pushed[b])
                if lhs != rhs:
                    issues.append(f"bracket not preserved on ({a + 1},{b + 1})")
        if ideal is not None:
            inside = set(ideal.frames)
            for a in ideal.frames:
                if any(self.phi[b][a].terms for b in range(alg.rank) if b not in inside):
                    issues.append("fiber map does not preserve the ideal")
                    break
            if kappa is not None:
                k = ideal.rank
                for s in range(k):
                    for t in range(k):
                        val = alg.model.zero()
                        for u in range(k):
                            for w in range(k):
                                val = val + self.phi[ideal.frames[u]][ideal.frames[s]] * \
                                    self.phi[ideal.frames[w]][ideal.frames[t]] * kappa.kappa[u][w]
                        if val != kappa.kappa[s][t]:
                            issues.append("fiber map is not an isometry of the ideal metric")
                            break
        return issues

    def pull_form(self, form, ideal):
        """phi^*(omega (x) xi) = (base pullback omega) (x) Phi^{-1} xi on ideal-valued forms."""
        n = self.alg.model.dim
        bundle = form.bundle
        base = {}
        for I, s, f in form.entries():
            g = self._pull(f)
            expansions = [((), g)]
            for i in I:
                nxt = []
                for J, h in expansions:
                    for j in range(n):
                        if self.M[i][j]:
                            nxt.append((J + (j,), h.scale(self.M[i][j])))
                expansions = nxt
            for J, h in expansions:
                base.setdefault(s, []).append((J, h))
        entries = []
        for s, items in base.items():
            for t in range(bundle.rank):
                coeff = self.phi_inv[ideal.frames[t]][ideal.frames[s]]
                if coeff.terms:
                    for J, h in items:
                        entries.append((J, t, coeff * h))
        return VForm.from_entries(bundle, form.degree, entries)

    def pull_cochain(self, c, ideal):
        """(phi^*c)_k(a || b) = phi^* c_k(phi_* a || phi_* b)."""
        alg = self.alg
        pushed = [self.push_section(alg.frame(a)) for a in range(alg.rank)]
        out = [{} for _ in range(c.p + 1)]
        for k in range(c.p + 1):
            if c.q - k < 0:
                continue
            for al, be in c.keys(k):
                val = c.evaluate(k, [pushed[a] for a in al], [pushed[b] for b in be])
                if not val.is_zero():
                    pulled = self.pull_form(val, ideal)
                    if not pulled.is_zero():
                        out[k][(al, be)] = pulled
        return WeilCochain(c.rep, c.p, c.q, out)


def gauge_pullback(phi, obj, kappa=None):
    """Pull back a cochain, IM connection or primitive data along a validated gauge map."""
    if isinstance(obj, PrimitiveData):
        ideal = obj.conn.ideal
        _gauge_check(phi, ideal, kappa)
        conn = IMConnection(ideal, phi.pull_cochain(obj.conn.cochain, ideal))
        return _checked(PrimitiveData(conn, phi.pull_form(obj.F, ideal)))
    if isinstance(obj, IMConnection):
        _gauge_check(phi, obj.ideal, kappa)
        return IMConnection(obj.ideal, phi.pull_cochain(obj.cochain, obj.ideal))
    if isinstance(obj, tuple) and len(obj) == 2:
        c, ideal = obj
        _gauge_check(phi, ideal, kappa)
        return phi.pull_cochain(c, ideal)
    raise IMError("gauge_pullback expects PrimitiveData, IMConnection or (cochain, ideal)")


def _gauge_check(phi, ideal, kappa):
    issues = phi.problems(ideal, kappa)
    if issues:
        raise IMError("; ".join(issues))
