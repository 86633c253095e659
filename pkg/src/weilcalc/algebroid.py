"""Lie algebroid presentations on trivial bundles.

A presentation fixes a global frame e_1..e_r of A, an anchor matrix with
rho(e_a) = sum_i rho[a][i] d_i and structure functions [e_a, e_b] =
sum_k c_ab^k e_k.  Sections are tuples of FuncExpr of length r; vector
fields are tuples of length dim.  Everything else is the Leibniz extension.
"""

from itertools import combinations

from . import faults, linalg
from .funcring import vector_apply
from .geometry import (
    FiberBracket, SymForm, TrivBundle, VForm, curvature_tensor,
    d_nabla_form, interior, lie_scalar, sf_add_into, sf_scale,
)


class AlgebroidError(ValueError):
    pass


def frame_section(model, rank, a, coeff=None):
    z = model.zero()
    one = model.const(1) if coeff is None else coeff
    return tuple(one if i == a else z for i in range(rank))


def zero_section(model, rank):
    return tuple(model.zero() for _ in range(rank))


def add_sections(u, v):
    return tuple(x + y for x, y in zip(u, v))


def scale_section(f, u):
    return tuple(f * x for x in u)


def vector_bracket(X, Y):
    """[X, Y] of vector fields given by component tuples."""
    return tuple(vector_apply(X, Y[i]) - vector_apply(Y, X[i]) for i in range(len(X)))


class AlgebroidPresentation:
    __slots__ = ("model", "rank", "anchor", "structure", "name")

    def __init__(self, model, rank, anchor, structure, name=""):
        self.model = model
        self.rank = rank
        if len(anchor) != rank or any(len(row) != model.dim for row in anchor):
            raise AlgebroidError("anchor must be a rank x dim matrix")
        self.anchor = tuple(tuple(f for f in row) for row in anchor)
        clean = {}
        for (a, b), col in structure.items():
            col = {k: f for k, f in col.items() if f.terms}
            if col:
                clean[(a, b)] = col
        self.structure = clean
        self.name = name

    @classmethod
    def antisymmetric(cls, model, rank, anchor, upper, name=""):
        """Build from structure functions given for a < b only."""
        structure = {}
        for (a, b), col in upper.items():
            if a == b:
                continue
            if a > b:
                a, b = b, a
                col = {k: -f for k, f in col.items()}
            structure[(a, b)] = dict(col)
            structure[(b, a)] = {k: -f for k, f in col.items()}
        return cls(model, rank, anchor, structure, name)

    @property
    def bundle(self):
        return TrivBundle(self.model, self.rank)

    def frame(self, a):
        return frame_section(self.model, self.rank, a)

    def zero(self):
        return zero_section(self.model, self.rank)

    def anchor_frame(self, a):
        return self.anchor[a]

    def anchor_of(self, alpha):
        out = [self.model.zero() for _ in range(self.model.dim)]
        for a, f in enumerate(alpha):
            if f.terms:
                for i, r in enumerate(self.anchor[a]):
                    if r.terms:
                        out[i] = out[i] + f * r
        return tuple(out)

    def structure_of(self, a, b):
        return self.structure.get((a, b), {})

    def bracket_frames(self, a, b):
        z = self.model.zero()
        col = self.structure_of(a, b)
        return tuple(col.get(k, z) for k in range(self.rank))

    def bracket(self, alpha, beta):
        """Leibniz extension of the frame bracket."""
        out = [self.model.zero() for _ in range(self.rank)]
        for (a, b), col in self.structure.items():
            x, y = alpha[a], beta[b]
            if x.terms and y.terms:
                xy = x * y
                for k, f in col.items():
                    out[k] = out[k] + f * xy
        ra = self.anchor_of(alpha)
        rb = self.anchor_of(beta)
        for k in range(self.rank):
            if beta[k].terms:
                out[k] = out[k] + vector_apply(ra, beta[k])
            if alpha[k].terms:
                out[k] = out[k] - vector_apply(rb, alpha[k])
        return tuple(out)

    def is_transitive_frame_split(self):
        return self.anchor_lift() is not None

    def anchor_lift(self):
        """Sections s_i with rho(s_i) = d_i built from a constant invertible
        block of the anchor matrix, or None when no such block exists."""
        n = self.model.dim
        rows = [a for a in range(self.rank) if all(f.is_constant() for f in self.anchor[a])]
        for choice in combinations(rows, n):
            mat = [[self.anchor[a][i].constant_term() for i in range(n)] for a in choice]
            if linalg.det(mat) == 0:
                continue
            inv = linalg.inverse(mat)
            lifts = []
            for i in range(n):
                coeffs = [self.model.zero() for _ in range(self.rank)]
                for j, a in enumerate(choice):
                    coeffs[a] = self.model.const(inv[i][j])
                lifts.append(tuple(coeffs))
            return lifts
        return None


def bracket_sections(alg, alpha, beta):
    return alg.bracket(alpha, beta)


def validate(alg):
    """List of failed identities (empty when the presentation is a Lie algebroid)."""
    issues = []
    r = alg.rank
    z = alg.model.zero()
    for a in range(r):
        if alg.structure_of(a, a):
            issues.append(f"antisymmetry fails for ({a + 1},{a + 1})")
        for b in range(a + 1, r):
            cab, cba = alg.structure_of(a, b), alg.structure_of(b, a)
            if any((cab.get(k, z) + cba.get(k, z)).terms for k in range(r)):
                issues.append(f"antisymmetry fails for ({a + 1},{b + 1})")
    for a in range(r):
        for b in range(a + 1, r):
            lhs = alg.anchor_of(alg.bracket_frames(a, b))
            rhs = vector_bracket(alg.anchor[a], alg.anchor[b])
            if any((u - v).terms for u, v in zip(lhs, rhs)):
                issues.append(f"anchor is not a bracket morphism on ({a + 1},{b + 1})")
    frames = [alg.frame(a) for a in range(r)]
    for a, b, c in combinations(range(r), 3):
        total = alg.zero()
        for x, y, w in ((a, b, c), (b, c, a), (c, a, b)):
            total = add_sections(total, alg.bracket(alg.bracket_frames(x, y), frames[w]))
        if any(t.terms for t in total):
            issues.append(f"Jacobi identity fails for ({a + 1},{b + 1},{c + 1})")
    return issues


class Representation:
    """Flat A-connection on a trivial bundle: nabla_{e_a} e_mu = sum_nu table[a][mu][nu] e_nu."""

    __slots__ = ("alg", "bundle", "table")

    def __init__(self, alg, bundle, table):
        self.alg = alg
        self.bundle = bundle
        clean = []
        for a in range(alg.rank):
            rows = table[a] if a < len(table) else {}
            out = {}
            for mu, col in rows.items():
                col = {nu: f for nu, f in col.items() if f.terms}
                if col:
                    out[mu] = col
            clean.append(out)
        self.table = clean

    @classmethod
    def trivial(cls, alg, rank=1):
        return cls(alg, TrivBundle(alg.model, rank), [{} for _ in range(alg.rank)])

    def action_matrix(self, alpha):
        """The zeroth-order part sum_a alpha^a table[a] as {mu: {nu: f}}."""
        out = {}
        for a, f in enumerate(alpha):
            if not f.terms:
                continue
            for mu, col in self.table[a].items():
                tgt = out.setdefault(mu, {})
                for nu, g in col.items():
                    tgt[nu] = tgt[nu] + f * g if nu in tgt else f * g
        return out

    def covariant(self, alpha, s):
        X = self.alg.anchor_of(alpha)
        out = [vector_apply(X, f) for f in s]
        for mu, col in self.action_matrix(alpha).items():
            if s[mu].terms:
                for nu, g in col.items():
                    out[nu] = out[nu] + g * s[mu]
        return tuple(out)

    def problems(self):
        issues = []
        r = self.alg.rank
        m = self.bundle.rank
        model = self.alg.model
        for a in range(r):
            for b in range(a + 1, r):
                ea, eb = self.alg.frame(a), self.alg.frame(b)
                br = self.alg.bracket_frames(a, b)
                for mu in range(m):
                    e = frame_section(model, m, mu)
                    lhs = self.covariant(br, e)
                    rhs = tuple(u - v for u, v in zip(self.covariant(ea, self.covariant(eb, e)),
                                                       self.covariant(eb, self.covariant(ea, e))))
                    if any((u - v).terms for u, v in zip(lhs, rhs)):
                        issues.append(f"representation is not flat on ({a + 1},{b + 1})")
                        break
        return issues


def end_rep(rep):
    """Induced representation on End(V): nabla_alpha E = [nabla_alpha, E].

    Frame b*m + a of End(V) is the matrix unit e_a -> e_b.
    """
    m = rep.bundle.rank
    table = []
    for a in range(rep.alg.rank):
        t = rep.table[a]
        out = {}
        for b in range(m):
            for c in range(m):
                col = {}
                for d, g in t.get(b, {}).items():
                    col[d * m + c] = col[d * m + c] + g if d * m + c in col else g
                for lam in range(m):
                    g = t.get(lam, {}).get(c)
                    if g is not None:
                        col[b * m + lam] = col[b * m + lam] - g if b * m + lam in col else -g
                if col:
                    out[b * m + c] = col
        table.append(out)
    return Representation(rep.alg, TrivBundle(rep.alg.model, m * m), table)


class IdealBundle:
    __slots__ = ("alg", "frames")

    def __init__(self, alg, frames):
        self.alg = alg
        self.frames = tuple(frames)
        if len(set(self.frames)) != len(self.frames) or not self.frames:
            raise AlgebroidError("ideal frames must be distinct and nonempty")

    @property
    def rank(self):
        return len(self.frames)

    @property
    def bundle(self):
        return TrivBundle(self.alg.model, self.rank)

    def position(self, a):
        return self.frames.index(a)

    def problems(self):
        issues = []
        inside = set(self.frames)
        for a in self.frames:
            if any(f.terms for f in self.alg.anchor[a]):
                issues.append(f"anchor does not vanish on ideal frame {a + 1}")
        for b in range(self.alg.rank):
            for a in self.frames:
                for k in self.alg.structure_of(b, a):
                    if k not in inside:
                        issues.append(f"bracket of frames ({b + 1},{a + 1}) leaves the ideal")
                        break
        return issues

    def fiber_bracket(self):
        f = {}
        for s, a in enumerate(self.frames):
            for t, b in enumerate(self.frames):
                col = self.alg.structure_of(a, b)
                if col:
                    f[(s, t)] = {self.position(k): g for k, g in col.items()}
        return FiberBracket(self.bundle, f)

    def to_section(self, xi):
        """Embed a section of the ideal into A."""
        out = list(self.alg.zero())
        for s, a in enumerate(self.frames):
            out[a] = xi[s]
        return tuple(out)

    def from_section(self, alpha):
        """Restrict an A-section lying in the ideal to ideal coordinates."""
        inside = set(self.frames)
        for a, f in enumerate(alpha):
            if a not in inside and f.terms:
                raise AlgebroidError("section does not lie in the ideal")
        return tuple(alpha[a] for a in self.frames)

    def is_abelian(self):
        return self.fiber_bracket().is_abelian()


def adjoint_rep(alg, ideal):
    issues = ideal.problems()
    if issues:
        raise AlgebroidError("; ".join(issues))
    table = []
    for a in range(alg.rank):
        out = {}
        for s, b in enumerate(ideal.frames):
            col = alg.structure_of(a, b)
            if col:
                out[s] = {ideal.position(k): g for k, g in col.items()}
        table.append(out)
    return Representation(alg, ideal.bundle, table)


# -- Lie derivatives ---------------------------------------------------------------

def lie_derivative_form(rep, alpha, form):
    """L^A_alpha on a V-valued form: sum L_{rho alpha} w^mu e_mu + w^mu nabla_alpha e_mu."""
    X = rep.alg.anchor_of(alpha)
    result = lie_scalar(X, form) if any(x.terms for x in X) else VForm.zero(form.bundle, form.degree)
    mat = rep.action_matrix(alpha)
    if mat:
        out = {}
        for mu, col in mat.items():
            comp = form.comps.get(mu)
            if not comp:
                continue
            for nu, g in col.items():
                tgt = out.setdefault(nu, {})
                for I, f in sf_scale(comp, g).items():
                    sf_add_into(tgt, I, f)
        result = result + VForm.from_frames(form.bundle, form.degree, out)
    return result


def _expand_slot(key, pos, section):
    """Replace slot ``pos`` of the sorted frame tuple by a section: list of (coeff, new key)."""
    out = []
    rest = key[:pos] + key[pos + 1:]
    for m, f in enumerate(section):
        if f.terms:
            out.append((f, tuple(sorted(rest + (m,)))))
    return out


def lie_derivative(rep, alpha, gamma):
    """L^A_alpha on Omega^m(M; S^n(A^*) (x) V), given as a SymForm over A-frames."""
    alg = rep.alg
    table = {}

    def acc(key, form):
        if form.is_zero():
            return
        table[key] = table[key] + form if key in table else form

    for key, val in gamma.table.items():
        acc(key, lie_derivative_form(rep, alpha, val))
    if gamma.arity:
        brackets = {}
        # (L gamma)(e_b...) gets -gamma(..[alpha, e_b]..); collect by target key.
        for key in _all_keys(alg.rank, gamma.arity):
            total = None
            for pos in range(len(key)):
                b = key[pos]
                if b not in brackets:
                    brackets[b] = alg.bracket(alpha, alg.frame(b))
                for f, newkey in _expand_slot(key, pos, brackets[b]):
                    val = gamma.table.get(newkey)
                    if val is not None:
                        term = val.scale(f)
                        total = term if total is None else total + term
            if total is not None:
                acc(key, -total)
    return SymForm(gamma.bundle, gamma.degree, gamma.arity, table)


def _all_keys(rank, arity):
    from itertools import combinations_with_replacement
    return combinations_with_replacement(range(rank), arity)


# -- constructors --------------------------------------------------------------------

def tangent_algebroid(model, name="TM"):
    n = model.dim
    anchor = [[model.const(1 if i == a else 0) for i in range(n)] for a in range(n)]
    return AlgebroidPresentation(model, n, anchor, {}, name)


def zero_algebroid(model, rank, name="zero"):
    anchor = [[model.zero() for _ in range(model.dim)] for _ in range(rank)]
    return AlgebroidPresentation(model, rank, anchor, {}, name)


def make_action_algebroid(model, lie_structure, action, name="action"):
    """Action algebroid g x M.

    ``lie_structure`` maps (a, b) to {k: rational} with [e_a, e_b] = sum c^k e_k;
    ``action`` lists the vector fields X_{e_a} as tuples of FuncExpr.
    """
    rank = len(action)
    upper = {}
    for (a, b), col in lie_structure.items():
        upper[(a, b)] = {k: model.const(c) for k, c in col.items()}
    alg = AlgebroidPresentation.antisymmetric(model, rank, [tuple(X) for X in action], upper, name)
    for a in range(rank):
        for b in range(a + 1, rank):
            lhs = alg.anchor_of(alg.bracket_frames(a, b))
            rhs = vector_bracket(action[a], action[b])
            if any((u - v).terms for u, v in zip(lhs, rhs)):
                raise AlgebroidError(f"action is not a Lie algebra homomorphism on ({a + 1},{b + 1})")
    issues = validate(alg)
    if issues:
        raise AlgebroidError("; ".join(issues))
    return alg


def coupling_conditions(B, br, conn, F):
    """Failed conditions for the coupling construction, as readable strings."""
    from .geometry import bracket_compatible, end_bundle
    issues = []
    if not bracket_compatible(conn, br):
        issues.append("connection does not preserve the fiber bracket")
    R = curvature_tensor(conn)
    k = br.bundle.rank
    # -ad F as an End-valued 2-form: (-ad F) e_s = [e_s, F]
    adF = {}
    for (s, u), col in br.f.items():
        comp = F.comps.get(u)
        if not comp:
            continue
        for t, g in col.items():
            tgt = adF.setdefault(t * k + s, {})
            for I, f in comp.items():
                sf_add_into(tgt, I, g * f)
    adF = VForm.from_frames(end_bundle(br.bundle), 2, adF)
    if R != adF:
        issues.append("curvature is not -ad F")
    dF = d_nabla_form(conn, F)
    for a in range(B.rank):
        if not interior(B.anchor[a], dF).is_zero():
            issues.append(f"d F does not vanish along the anchor of frame {a + 1}")
            break
    return issues


def make_coupling_algebroid(B, br, conn, F, name="coupling"):
    """A = B + k with bracket ([a,b], nabla_a eta - nabla_b xi + [xi,eta] - F(rho a, rho b)).

    Returns (algebroid, ideal, IM connection); the connection is
    C(alpha, xi) = nabla xi + i_{rho alpha} F with symbol v(alpha, xi) = xi.
    """
    issues = coupling_conditions(B, br, conn, F)
    if issues:
        raise AlgebroidError("; ".join(issues))
    model = B.model
    rB, k = B.rank, br.bundle.rank
    rank = rB + k
    z = model.zero()
    anchor = [B.anchor[a] for a in range(rB)] + [tuple(z for _ in range(model.dim)) for _ in range(k)]
    structure = {}

    def put(a, b, col):
        col = {m: f for m, f in col.items() if f.terms}
        if col:
            structure[(a, b)] = col
            structure[(b, a)] = {m: -f for m, f in col.items()}

    for a in range(rB):
        for b in range(a + 1, rB):
            col = {m: f for m, f in B.structure_of(a, b).items()}
            Fab = interior(B.anchor[b], interior(B.anchor[a], F))
            for s in range(k):
                f = Fab.comps.get(s, {}).get(())
                if f is not None and not faults.active("coupling-drop-F"):
                    col[rB + s] = col.get(rB + s, z) - f
            put(a, b, col)
        for s in range(k):
            es = frame_section(model, k, s)
            img = conn.covariant(B.anchor[a], es)
            put(a, rB + s, {rB + t: f for t, f in enumerate(img)})
    for s in range(k):
        for t in range(s + 1, k):
            put(rB + s, rB + t, {rB + u: f for u, f in br.coeffs(s, t).items()})
    alg = AlgebroidPresentation(model, rank, anchor, structure, name)
    ideal = IdealBundle(alg, range(rB, rank))
    from .imconn import IMConnection
    C = {}
    for a in range(rB):
        C[a] = interior(B.anchor[a], F)
    for s in range(k):
        C[rB + s] = d_nabla_form(conn, VForm.from_frames(br.bundle, 0, {s: {(): model.const(1)}}))
    v = {rB + s: frame_section(model, k, s) for s in range(k)}
    return alg, ideal, IMConnection.from_tables(alg, ideal, C, v)
