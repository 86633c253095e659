"""Bundle-valued differential forms over coordinate models.

Forms live on trivialized bundles.  A ``VForm`` of degree q stores, for each
frame index a, a scalar form ``{I: f}`` keyed by strictly increasing tuples of
zero-based coordinate indices.  Endomorphism-valued forms live on the bundle
of rank r*r, where frame ``b*r + a`` is the matrix unit sending e_a to e_b.

Metrics are constant rational matrices.  The Hodge star carries the factor
sqrt|det g| symbolically: ``hodge_star`` returns a ``TaggedForm`` whose
``sqrt_detg`` field records whether that factor is present.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from math import factorial

from gmpy2 import mpq

from . import faults, linalg
from .funcring import FuncExpr, partial

ONE = mpq(1)


class BundleMismatch(ValueError):
    pass


# -- index combinatorics -------------------------------------------------------

def perm_sign(seq):
    """Sign of the permutation sorting ``seq``; 0 if it has repeats."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] == seq[j]:
                return 0
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def merge(I, J):
    """dx^I ^ dx^J = sign dx^K.  Returns (sign, K) with sign 0 on overlap."""
    seq = I + J
    s = perm_sign(seq)
    if not s:
        return 0, None
    return s, tuple(sorted(seq))


@lru_cache(maxsize=None)
def sort_index(I):
    s = perm_sign(I)
    return s, tuple(sorted(I))


@lru_cache(maxsize=None)
def index_sets(coords, k):
    return tuple(combinations(coords, k))


# -- scalar forms: dicts {I: FuncExpr} ------------------------------------------

def sf_add_into(target, I, f):
    g = target.get(I)
    if g is None:
        if f.terms:
            target[I] = f
    else:
        h = g + f
        if h.terms:
            target[I] = h
        else:
            del target[I]


def sf_wedge(a, b):
    out = {}
    for I, f in a.items():
        for J, g in b.items():
            s, K = merge(I, J)
            if s:
                prod = f * g
                sf_add_into(out, K, prod if s > 0 else -prod)
    return out


def sf_d(a, dirs):
    out = {}
    for I, f in a.items():
        for i in dirs:
            if i in I:
                continue
            df = partial(f, i)
            if df.terms:
                s, K = merge((i,), I)
                sf_add_into(out, K, df if s > 0 else -df)
    return out


def sf_interior(X, a):
    out = {}
    for I, f in a.items():
        for m, i in enumerate(I):
            xi = X[i]
            if xi.terms:
                term = xi * f
                sf_add_into(out, I[:m] + I[m + 1:], term if m % 2 == 0 else -term)
    return out


def sf_lie(X, a, dirs):
    """Lie derivative of a scalar form along a vector field, by Cartan's formula."""
    out = sf_interior(X, sf_d(a, dirs))
    for I, f in sf_d(sf_interior(X, a), dirs).items():
        sf_add_into(out, I, f)
    return out


def sf_scale(a, f):
    """Multiply a scalar form by a function or rational."""
    out = {}
    for I, g in a.items():
        h = g * f
        if h.terms:
            out[I] = h
    return out


# -- bundles and forms -----------------------------------------------------------

@dataclass(frozen=True)
class TrivBundle:
    model: object
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("bundle rank must be at least 1")


def end_bundle(bundle):
    return TrivBundle(bundle.model, bundle.rank * bundle.rank)


class VForm:
    """Immutable bundle-valued form; ``comps[a][I]`` is the coefficient of dx^I (x) e_a."""

    __slots__ = ("bundle", "degree", "comps")

    def __init__(self, bundle, degree, comps=None):
        self.bundle = bundle
        self.degree = degree
        self.comps = comps if comps is not None else {}

    @classmethod
    def zero(cls, bundle, degree):
        return cls(bundle, degree, {})

    @classmethod
    def from_entries(cls, bundle, degree, entries):
        """Build from (indices, frame, FuncExpr) triples; indices in any order."""
        comps = {}
        for I, a, f in entries:
            I = tuple(I)
            if len(I) != degree:
                raise ValueError(f"index tuple {I} does not have length {degree}")
            if not 0 <= a < bundle.rank:
                raise ValueError(f"frame index {a} out of range")
            s, K = sort_index(I)
            if s and f.terms:
                sf_add_into(comps.setdefault(a, {}), K, f if s > 0 else -f)
        return cls(bundle, degree, {a: c for a, c in comps.items() if c})

    @classmethod
    def from_frames(cls, bundle, degree, frames):
        """Build from {frame: scalar form dict}, dropping empty entries."""
        return cls(bundle, degree, {a: c for a, c in frames.items() if c})

    @property
    def model(self):
        return self.bundle.model

    def is_zero(self):
        return not self.comps

    def __bool__(self):
        return bool(self.comps)

    def frame(self, a):
        return self.comps.get(a, {})

    def entries(self):
        for a in sorted(self.comps):
            for I in sorted(self.comps[a]):
                yield I, a, self.comps[a][I]

    def component(self, I, a):
        s, K = sort_index(tuple(I))
        if not s:
            return self.model.zero()
        f = self.comps.get(a, {}).get(K)
        if f is None:
            return self.model.zero()
        return f if s > 0 else -f

    def _check(self, other):
        if self.bundle != other.bundle:
            raise BundleMismatch("forms live on different bundles")
        if self.degree != other.degree:
            raise ValueError(f"degree mismatch {self.degree} vs {other.degree}")

    def __eq__(self, other):
        if not isinstance(other, VForm):
            return NotImplemented
        return (self.bundle == other.bundle and self.degree == other.degree
                and self.comps == other.comps)

    def __hash__(self):
        return hash((self.bundle, self.degree, len(self.comps)))

    def __add__(self, other):
        self._check(other)
        if not other.comps:
            return self
        if not self.comps:
            return other
        comps = {a: dict(c) for a, c in self.comps.items()}
        for a, c in other.comps.items():
            tgt = comps.setdefault(a, {})
            for I, f in c.items():
                sf_add_into(tgt, I, f)
        return VForm.from_frames(self.bundle, self.degree, comps)

    def __neg__(self):
        return VForm(self.bundle, self.degree,
                     {a: {I: -f for I, f in c.items()} for a, c in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        """Multiply by a rational or a function."""
        if isinstance(c, FuncExpr):
            if c.is_constant():
                c = c.constant_term()
            else:
                return VForm.from_frames(self.bundle, self.degree,
                                         {a: sf_scale(comp, c) for a, comp in self.comps.items()})
        c = mpq(c)
        if c == ONE:
            return self
        if not c:
            return VForm(self.bundle, self.degree, {})
        return VForm(self.bundle, self.degree,
                     {a: {I: f.scale(c) for I, f in comp.items()} for a, comp in self.comps.items()})

    def __repr__(self):
        return f"VForm(deg={self.degree}, rank={self.bundle.rank}, {format_form(self)})"


def format_form(form):
    """Readable canonical rendering with one-based indices and frames."""
    if form.is_zero():
        return "0"
    parts = []
    for I, a, f in form.entries():
        dx = "^".join(f"dx{i + 1}" for i in I) if I else "1"
        parts.append(f"({f})*{dx}*e{a + 1}")
    return " + ".join(parts)


def form_to_records(form):
    return [{"indices": [i + 1 for i in I], "frame": a + 1, "expr": str(f)}
            for I, a, f in form.entries()]


def form_from_records(bundle, degree, records, parse):
    entries = []
    for rec in records:
        I = tuple(int(i) - 1 for i in rec["indices"])
        entries.append((I, int(rec["frame"]) - 1, parse(rec["expr"])))
    return VForm.from_entries(bundle, degree, entries)


def scalar_vform(bundle, a, sform, degree):
    """Embed a scalar form as the e_a component."""
    return VForm.from_frames(bundle, degree, {a: dict(sform)})


def section_form(bundle, xi):
    """A section (tuple of functions) viewed as a degree-0 form."""
    return VForm.from_frames(bundle, 0, {a: {(): f} for a, f in enumerate(xi) if f.terms})


def form_section(form):
    """Inverse of ``section_form``."""
    if form.degree != 0:
        raise ValueError("only degree-0 forms are sections")
    z = form.model.zero()
    return tuple(form.comps.get(a, {}).get((), z) for a in range(form.bundle.rank))


def wedge_scalar(theta, form, theta_degree):
    """theta ^ form for a scalar form ``theta``."""
    return VForm.from_frames(form.bundle, theta_degree + form.degree,
                             {a: sf_wedge(theta, c) for a, c in form.comps.items()})


def interior(X, form):
    if form.degree == 0:
        return VForm.zero(form.bundle, 0)
    return VForm.from_frames(form.bundle, form.degree - 1,
                             {a: sf_interior(X, c) for a, c in form.comps.items()})


def exterior_d(form, dirs=None):
    dirs = range(form.model.dim) if dirs is None else dirs
    return VForm.from_frames(form.bundle, form.degree + 1,
                             {a: sf_d(c, dirs) for a, c in form.comps.items()})


def lie_scalar(X, form, dirs=None):
    """Componentwise Lie derivative along a vector field (trivial frame)."""
    dirs = range(form.model.dim) if dirs is None else dirs
    return VForm.from_frames(form.bundle, form.degree,
                             {a: sf_lie(X, c, dirs) for a, c in form.comps.items()})


def apply_matrix(matrix, form):
    """Pointwise action of a matrix field: (M form)^b = sum_a M[a][b] form^a.

    ``matrix[a]`` is a dict {b: FuncExpr} giving the image of e_a.
    """
    out = {}
    for a, comp in form.comps.items():
        for b, m in matrix.get(a, {}).items():
            tgt = out.setdefault(b, {})
            for I, f in comp.items():
                sf_add_into(tgt, I, m * f)
    return VForm.from_frames(form.bundle, form.degree, out)


# -- connections -----------------------------------------------------------------

class LinearConnection:
    """Linear connection with nabla_{d_i} e_a = sum_b gamma[i][a][b] e_b.

    ``gamma[i]`` is a dict {a: {b: FuncExpr}} holding nonzero entries only.
    """

    __slots__ = ("bundle", "gamma")

    def __init__(self, bundle, gamma=None):
        self.bundle = bundle
        n = bundle.model.dim
        gamma = gamma if gamma is not None else [{} for _ in range(n)]
        if len(gamma) != n:
            raise ValueError("Christoffel table needs one entry per coordinate")
        clean = []
        for gi in gamma:
            row = {}
            for a, col in gi.items():
                col = {b: f for b, f in col.items() if f.terms}
                if col:
                    row[a] = col
            clean.append(row)
        self.gamma = clean

    @classmethod
    def trivial(cls, bundle):
        return cls(bundle)

    def entry(self, i, a, b):
        return self.gamma[i].get(a, {}).get(b, self.bundle.model.zero())

    def covariant(self, X, xi):
        """nabla_X xi for a vector field X and section xi."""
        form = section_form(self.bundle, xi)
        return form_section(interior(X, d_nabla_form(self, form)))

    def __eq__(self, other):
        return isinstance(other, LinearConnection) and self.bundle == other.bundle and self.gamma == other.gamma

    def __add__(self, other):
        gamma = []
        for gi, hi in zip(self.gamma, other.gamma):
            row = {a: dict(col) for a, col in gi.items()}
            for a, col in hi.items():
                tgt = row.setdefault(a, {})
                for b, f in col.items():
                    tgt[b] = tgt[b] + f if b in tgt else f
            gamma.append(row)
        return LinearConnection(self.bundle, gamma)


def d_nabla_form(conn, form, dirs=None):
    """Exterior covariant derivative: d form + sum_i dx^i ^ (Gamma_i form)."""
    if conn.bundle != form.bundle:
        raise BundleMismatch("connection and form live on different bundles")
    dirs = range(form.model.dim) if dirs is None else dirs
    out = {a: sf_d(c, dirs) for a, c in form.comps.items()}
    for i in dirs:
        gi = conn.gamma[i]
        if not gi:
            continue
        for a, comp in form.comps.items():
            col = gi.get(a)
            if not col:
                continue
            for I, f in comp.items():
                s, K = merge((i,), I)
                if not s:
                    continue
                for b, g in col.items():
                    term = g * f
                    sf_add_into(out.setdefault(b, {}), K, term if s > 0 else -term)
    return VForm.from_frames(form.bundle, form.degree + 1, out)


def end_connection(conn):
    """Induced connection on End(V): nabla E = [nabla, E]."""
    r = conn.bundle.rank
    gamma = []
    for gi in conn.gamma:
        row = {}
        for b in range(r):
            for a in range(r):
                col = {}
                for d, g in gi.get(b, {}).items():
                    col[d * r + a] = col.get(d * r + a, g.model.zero()) + g
                for c in range(r):
                    g = gi.get(c, {}).get(a)
                    if g is not None:
                        col[b * r + c] = col.get(b * r + c, g.model.zero()) - g
                if col:
                    row[b * r + a] = col
        gamma.append(row)
    return LinearConnection(end_bundle(conn.bundle), gamma)


def curvature_tensor(conn):
    """R(d_i, d_j) e_a = nabla_i nabla_j e_a - nabla_j nabla_i e_a as an End-valued 2-form."""
    bundle = conn.bundle
    r = bundle.rank
    n = bundle.model.dim
    entries = []
    for i, j in combinations(range(n), 2):
        for a in range(r):
            for b in range(r):
                val = partial(conn.entry(j, a, b), i) - partial(conn.entry(i, a, b), j)
                for c in range(r):
                    val = val + conn.entry(j, a, c) * conn.entry(i, c, b) - conn.entry(i, a, c) * conn.entry(j, c, b)
                if val.terms:
                    entries.append(((i, j), b * r + a, val))
    return VForm.from_entries(end_bundle(bundle), 2, entries)


def end_wedge(T, form):
    """T ^ form for an End-valued form T acting on a V-valued form."""
    r = form.bundle.rank
    if T.bundle != end_bundle(form.bundle):
        raise BundleMismatch("endomorphism form does not match the target bundle")
    out = {}
    for e, tcomp in T.comps.items():
        b, a = divmod(e, r)
        comp = form.comps.get(a)
        if comp:
            for K, f in sf_wedge(tcomp, comp).items():
                sf_add_into(out.setdefault(b, {}), K, f)
    return VForm.from_frames(form.bundle, T.degree + form.degree, out)


def end_compose(S, T):
    """Pointwise composition S o T of End-valued 0-forms (matrices)."""
    r = int(round(S.bundle.rank ** 0.5))
    out = {}
    for e1, c1 in S.comps.items():
        b, m = divmod(e1, r)
        for e2, c2 in T.comps.items():
            m2, a = divmod(e2, r)
            if m2 == m:
                for K, f in sf_wedge(c1, c2).items():
                    sf_add_into(out.setdefault(b * r + a, {}), K, f)
    return VForm.from_frames(S.bundle, S.degree + T.degree, out)


# -- fiber brackets and metrics --------------------------------------------------

class FiberBracket:
    """Fiberwise Lie bracket [e_a, e_b] = sum_c f[a][b][c] e_c (nonzero entries only)."""

    __slots__ = ("bundle", "f")

    def __init__(self, bundle, f):
        self.bundle = bundle
        self.f = {}
        for (a, b), col in f.items():
            col = {c: g for c, g in col.items() if g.terms}
            if col:
                self.f[(a, b)] = col

    @classmethod
    def abelian(cls, bundle):
        return cls(bundle, {})

    def coeffs(self, a, b):
        return self.f.get((a, b), {})

    def bracket(self, xi, eta):
        model = self.bundle.model
        out = [model.zero() for _ in range(self.bundle.rank)]
        for (a, b), col in self.f.items():
            x, y = xi[a], eta[b]
            if x.terms and y.terms:
                xy = x * y
                for c, g in col.items():
                    out[c] = out[c] + g * xy
        return tuple(out)

    def is_abelian(self):
        return not self.f

    def problems(self):
        """Antisymmetry and Jacobi failures as readable strings."""
        r = self.bundle.rank
        model = self.bundle.model
        issues = []
        for a in range(r):
            for b in range(a, r):
                for c in range(r):
                    s = self.coeffs(a, b).get(c, model.zero()) + self.coeffs(b, a).get(c, model.zero())
                    if s.terms:
                        issues.append(f"antisymmetry fails for ({a + 1},{b + 1})")
                        break
        basis = [tuple(model.const(1 if i == a else 0) for i in range(r)) for a in range(r)]
        for a, b, c in combinations(range(r), 3):
            ea, eb, ec = basis[a], basis[b], basis[c]
            total = [model.zero()] * r
            for x, y, z in ((ea, eb, ec), (eb, ec, ea), (ec, ea, eb)):
                t = self.bracket(self.bracket(x, y), z)
                total = [u + v for u, v in zip(total, t)]
            if any(t.terms for t in total):
                issues.append(f"Jacobi identity fails for ({a + 1},{b + 1},{c + 1})")
        return issues

    def ad_matrix(self, xi):
        """Matrix of ad_xi in the dict form used by ``apply_matrix``."""
        r = self.bundle.rank
        model = self.bundle.model
        out = {}
        for a in range(r):
            ea = tuple(model.const(1 if i == a else 0) for i in range(r))
            img = self.bracket(xi, ea)
            col = {b: g for b, g in enumerate(img) if g.terms}
            if col:
                out[a] = col
        return out


def form_bracket(br, alpha, beta):
    """[alpha, beta] = sum f_ab^c alpha^a ^ beta^b e_c."""
    if alpha.bundle != br.bundle or beta.bundle != br.bundle:
        raise BundleMismatch("bracket and forms live on different bundles")
    out = {}
    for (a, b), col in br.f.items():
        ca, cb = alpha.comps.get(a), beta.comps.get(b)
        if not ca or not cb:
            continue
        w = sf_wedge(ca, cb)
        if not w:
            continue
        for c, g in col.items():
            tgt = out.setdefault(c, {})
            for K, h in w.items():
                sf_add_into(tgt, K, g * h)
    return VForm.from_frames(br.bundle, alpha.degree + beta.degree, out)


class FiberMetric:
    """Symmetric fiber metric kappa[a][b] with symbolically nonzero determinant."""

    __slots__ = ("bundle", "kappa")

    def __init__(self, bundle, kappa):
        self.bundle = bundle
        r = bundle.rank
        model = bundle.model
        self.kappa = [[k if isinstance(k, FuncExpr) else model.const(k) for k in row] for row in kappa]
        if len(self.kappa) != r or any(len(row) != r for row in self.kappa):
            raise ValueError("fiber metric must be a square matrix of the bundle rank")
        for a in range(r):
            for b in range(a + 1, r):
                if self.kappa[a][b] != self.kappa[b][a]:
                    raise ValueError("fiber metric is not symmetric")
        if not _det(self.kappa, model).terms:
            raise ValueError("fiber metric is degenerate")

    @classmethod
    def identity(cls, bundle):
        r = bundle.rank
        return cls(bundle, [[1 if a == b else 0 for b in range(r)] for a in range(r)])

    def pair(self, xi, eta):
        total = self.bundle.model.zero()
        for a, x in enumerate(xi):
            if x.terms:
                for b, y in enumerate(eta):
                    k = self.kappa[a][b]
                    if y.terms and k.terms:
                        total = total + k * x * y
        return total


def _det(matrix, model):
    n = len(matrix)
    if n == 0:
        return model.const(1)
    total = model.zero()
    for perm in permutations(range(n)):
        term = model.const(perm_sign(perm))
        for i, j in enumerate(perm):
            term = term * matrix[i][j]
            if not term.terms:
                break
        total = total + term
    return total


def metric_compatible(conn, kappa):
    """d_i kappa_st = kappa(nabla_i e_s, e_t) + kappa(e_s, nabla_i e_t) for all i, s, t."""
    r = conn.bundle.rank
    for i in range(conn.bundle.model.dim):
        for s in range(r):
            for t in range(r):
                val = partial(kappa.kappa[s][t], i)
                for u in range(r):
                    val = val - conn.entry(i, s, u) * kappa.kappa[u][t] - conn.entry(i, t, u) * kappa.kappa[s][u]
                if val.terms:
                    return False
    return True


def bracket_compatible(conn, br):
    """nabla is a derivation of the fiber bracket."""
    r = conn.bundle.rank
    model = conn.bundle.model
    n = model.dim
    for i in range(n):
        X = tuple(model.const(1 if j == i else 0) for j in range(n))
        for a in range(r):
            for b in range(a + 1, r):
                ea = tuple(model.const(1 if c == a else 0) for c in range(r))
                eb = tuple(model.const(1 if c == b else 0) for c in range(r))
                lhs = conn.covariant(X, br.bracket(ea, eb))
                rhs1 = br.bracket(conn.covariant(X, ea), eb)
                rhs2 = br.bracket(ea, conn.covariant(X, eb))
                if any((u - v - w).terms for u, v, w in zip(lhs, rhs1, rhs2)):
                    return False
    return True


# -- symmetric-argument forms and the dot-wedge pairing ------------------------

def sym_key(bs):
    return tuple(sorted(bs))


class SymForm:
    """A form in Omega^k(M; S^j(A^*) (x) V): table {sorted j-tuple of A-frames: VForm}."""

    __slots__ = ("bundle", "degree", "arity", "table")

    def __init__(self, bundle, degree, arity, table=None):
        self.bundle = bundle
        self.degree = degree
        self.arity = arity
        self.table = {k: v for k, v in (table or {}).items() if not v.is_zero()}

    def value(self, bs):
        return self.table.get(sym_key(bs), VForm.zero(self.bundle, self.degree))

    def __eq__(self, other):
        return (isinstance(other, SymForm) and self.bundle == other.bundle and self.degree == other.degree
                and self.arity == other.arity and self.table == other.table)

    def __add__(self, other):
        table = dict(self.table)
        for k, v in other.table.items():
            table[k] = table[k] + v if k in table else v
        return SymForm(self.bundle, self.degree, self.arity, table)

    def __neg__(self):
        return SymForm(self.bundle, self.degree, self.arity, {k: -v for k, v in self.table.items()})

    def __sub__(self, other):
        return self + (-other)

    def is_zero(self):
        return not self.table


def dot_wedge_one(gamma, theta, frames):
    """gamma .^ theta = sum_s theta^s ^ gamma(e_{frames[s]}, .).

    ``frames`` lists the A-frame of each fiber index of theta's bundle.
    """
    if gamma.arity < 1:
        raise ValueError("dot-wedge needs at least one symmetric argument")
    table = {}
    for key, val in gamma.table.items():
        for pos in range(len(key)):
            if pos > 0 and key[pos] == key[pos - 1]:
                continue
            b = key[pos]
            rest = key[:pos] + key[pos + 1:]
            for s, tcomp in theta.comps.items():
                if frames[s] != b:
                    continue
                term = VForm.from_frames(val.bundle, theta.degree + val.degree,
                                         {a: sf_wedge(tcomp, c) for a, c in val.comps.items()})
                table[rest] = table[rest] + term if rest in table else term
    return SymForm(gamma.bundle, gamma.degree + theta.degree, gamma.arity - 1, table)


def dot_wedge(gamma, thetas, frames):
    """gamma .^ (theta_1, ..., theta_l) = gamma .^ theta_l .^ ... .^ theta_1."""
    if len(thetas) > gamma.arity:
        raise ValueError("more forms than symmetric arguments")
    result = gamma
    for theta in reversed(thetas):
        result = dot_wedge_one(result, theta, frames)
    return result


def dot_wedge_alternating(gamma, thetas, frames):
    """Reference evaluation of the multiple pairing by the alternating sum
    over coordinate vectors (1-forms only), used as an independent oracle."""
    model = gamma.bundle.model
    n = model.dim
    k = gamma.degree
    l = len(thetas)
    out_degree = k + l
    table = {}
    inv = {}
    for s, b in enumerate(frames):
        inv[b] = s
    for K in combinations(range(n), out_degree):
        for perm in permutations(K):
            sign = perm_sign(perm)
            head, tail = perm[:l], perm[l:]
            # gamma(theta_1(X_head1), ..., theta_l(X_headl))(X_tail)
            choices = [[(s, c[(i,)]) for s, c in th.comps.items() if (i,) in c] for th, i in zip(thetas, head)]
            for combo in _product(choices):
                coeff = model.const(sign)
                args = []
                for s, f in combo:
                    coeff = coeff * f
                    args.append(frames[s])
                rest = gamma.arity - l
                for key, val in gamma.table.items():
                    sub = list(key)
                    ok = True
                    for b in args:
                        if b in sub:
                            sub.remove(b)
                        else:
                            ok = False
                            break
                    if not ok or len(sub) != rest:
                        continue
                    for a, comp in val.comps.items():
                        s_t, T = sort_index(tail)
                        g = comp.get(T)
                        if g is None or not s_t:
                            continue
                        term = coeff * g * s_t
                        entry = table.setdefault(tuple(sub), {}).setdefault(a, {})
                        sf_add_into(entry, K, term.scale(mpq(1, factorial(k))))
    return SymForm(gamma.bundle, out_degree, gamma.arity - l,
                   {key: VForm.from_frames(gamma.bundle, out_degree, comps) for key, comps in table.items()})


def _product(lists):
    if not lists:
        yield ()
        return
    for first in lists[0]:
        for rest in _product(lists[1:]):
            yield (first,) + rest


# -- metrics, Hodge star, integration --------------------------------------------

class Metric:
    """Constant metric on the coordinates ``coords`` with an orientation sign.

    Non-diagonal matrices must be positive definite.  Diagonal matrices may
    carry negative entries (signature flags).
    """

    def __init__(self, matrix, coords=None, orientation=1):
        self.matrix = [[mpq(x) for x in row] for row in matrix]
        m = len(self.matrix)
        if any(len(row) != m for row in self.matrix):
            raise ValueError("metric must be square")
        self.coords = tuple(coords) if coords is not None else tuple(range(m))
        if len(self.coords) != m:
            raise ValueError("metric size does not match its coordinates")
        for i in range(m):
            for j in range(i + 1, m):
                if self.matrix[i][j] != self.matrix[j][i]:
                    raise ValueError("metric is not symmetric")
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.orientation = orientation
        self.diagonal = all(self.matrix[i][j] == 0 for i in range(m) for j in range(m) if i != j)
        if self.diagonal:
            if any(self.matrix[i][i] == 0 for i in range(m)):
                raise ValueError("metric is degenerate")
            self.signature = sum(1 for i in range(m) if self.matrix[i][i] < 0)
        else:
            for size in range(1, m + 1):
                if _rdet([row[:size] for row in self.matrix[:size]]) <= 0:
                    raise ValueError("non-diagonal metrics must be positive definite")
            self.signature = 0
        self.det = _rdet(self.matrix)
        self.abs_det = abs(self.det)
        self.inverse = _rinv(self.matrix)
        self._local = {c: p for p, c in enumerate(self.coords)}
        self._minor_cache = {}

    @property
    def dim(self):
        return len(self.coords)

    def restrict(self, coords):
        pos = [self._local[c] for c in coords]
        block = [[self.matrix[i][j] for j in pos] for i in pos]
        for i in pos:
            for j in range(self.dim):
                if j not in pos and self.matrix[i][j] != 0:
                    raise ValueError("metric is not block diagonal along the requested coordinates")
        return Metric(block, coords, self.orientation)

    def inv_minor(self, I, J):
        key = (I, J)
        val = self._minor_cache.get(key)
        if val is None:
            rows = [self._local[i] for i in I]
            cols = [self._local[j] for j in J]
            val = _rdet([[self.inverse[r][c] for c in cols] for r in rows])
            self._minor_cache[key] = val
        return val

    def star_sign(self, k):
        """Sign of star(star(w)) on k-forms."""
        n = self.dim
        return -1 if (k * (n - k) + self.signature) % 2 else 1

    def same_tag(self, other):
        return self.abs_det == other.abs_det


def _rdet(m):
    return linalg.det(m)


def _rinv(m):
    return linalg.inverse(m)


@dataclass(frozen=True)
class TaggedForm:
    """``form`` times sqrt|det g| when ``sqrt_detg`` is not None (the |det g| value)."""
    form: VForm
    sqrt_detg: object = None

    def is_zero(self):
        return self.form.is_zero()

    def __str__(self):
        if self.form.is_zero():
            return "0"
        text = format_form(self.form)
        return f"({text}) * sqrt(detg)" if self.sqrt_detg is not None else text


def star_rational(metric, form):
    """star(form) / sqrt|det g|, an exact rational-coefficient form."""
    coords = metric.coords
    d = len(coords)
    k = form.degree
    drop = faults.active("hodge-drop-sign")
    out = {}
    for a, comp in form.comps.items():
        tgt = out.setdefault(a, {})
        for I, f in comp.items():
            if any(i not in metric._local for i in I):
                raise ValueError("form has components outside the metric's coordinates")
            if metric.diagonal:
                targets = [I]
            else:
                targets = index_sets(coords, k)
            for K in targets:
                g = metric.inv_minor(I, K)
                if not g:
                    continue
                comp_K = tuple(c for c in coords if c not in K)
                s = 1 if drop else perm_sign(tuple(metric._local[c] for c in K + comp_K))
                sf_add_into(tgt, comp_K, f.scale(g * s * metric.orientation))
    return VForm.from_frames(form.bundle, d - k, out)


def hodge_star(metric, form):
    """Hodge star of a VForm or TaggedForm; the result tracks the sqrt|det g| factor."""
    if isinstance(form, TaggedForm):
        inner = star_rational(metric, form.form)
        if form.sqrt_detg is None:
            return TaggedForm(inner, metric.abs_det)
        return TaggedForm(inner.scale(metric.abs_det), None)
    return TaggedForm(star_rational(metric, form), metric.abs_det)


def codifferential(metric, conn, form):
    """(-1)^k star^{-1} d^nabla star on degree k; the zero 0-form at degree 0."""
    k = form.degree
    if k == 0:
        return VForm.zero(form.bundle, 0)
    d = metric.dim
    inner = d_nabla_form(conn, star_rational(metric, form), metric.coords)
    j = d - k + 1
    sign = (-1) ** k * metric.star_sign(j)
    return star_rational(metric, inner).scale(metric.abs_det * sign)


def pointwise_pairing(metric, kappa, alpha, beta):
    if alpha.degree != beta.degree:
        raise ValueError("pairing needs forms of equal degree")
    if alpha.bundle != beta.bundle:
        raise BundleMismatch("pairing needs forms on the same bundle")
    model = alpha.model
    total = model.zero()
    for a, ca in alpha.comps.items():
        for b, cb in beta.comps.items():
            k = kappa.kappa[a][b]
            if not k.terms:
                continue
            for I, f in ca.items():
                for J, g in cb.items():
                    if metric.diagonal and I != J:
                        continue
                    m = metric.inv_minor(I, J)
                    if m:
                        total = total + (k * f * g).scale(m)
    return total


@dataclass(frozen=True)
class ActionScalar:
    """Exact value coef * (2 pi)^power * sqrt(detg), where detg is the |det g| tag."""
    coef: object
    power: int
    detg: object

    def _check(self, other):
        if self.power != other.power or self.detg != other.detg:
            raise ValueError("action scalars carry different tags")

    def __add__(self, other):
        self._check(other)
        return ActionScalar(self.coef + other.coef, self.power, self.detg)

    def __sub__(self, other):
        self._check(other)
        return ActionScalar(self.coef - other.coef, self.power, self.detg)

    def scale(self, c):
        return ActionScalar(self.coef * mpq(c), self.power, self.detg)

    def __str__(self):
        return f"{self.coef} * (2pi)^{self.power} * sqrt(detg)"


def l2_pairing(metric, kappa, alpha, beta, volume=None):
    """Integral of the pointwise pairing against the volume of ``volume`` (default ``metric``) on the torus."""
    model = alpha.model
    if not model.is_torus:
        raise ValueError("integration is only available on torus models")
    if alpha.degree != beta.degree:
        raise ValueError("pairing needs forms of equal degree")
    volume = metric if volume is None else volume
    return ActionScalar(pointwise_pairing(metric, kappa, alpha, beta).constant_term(), model.dim, volume.abs_det)
