"""Weil cochains of a Lie algebroid with values in a representation.

A cochain c in W^{p,q}(A; V) is stored by its values on frame sections:
``comps[k][(alphas, betas)]`` is the (q-k)-form c_k(e_alphas || e_betas),
with ``alphas`` strictly increasing (antisymmetric slots) and ``betas``
sorted (symmetric slots).  Values on arbitrary sections follow from the
Leibniz rule

    c_k(f a_1, ... || b) = f c_k(a_1, ... || b) + df ^ c_{k+1}(a_2, ... || a_1, b),

implemented by ``WeilCochain.evaluate``.
"""

import random
from itertools import combinations, combinations_with_replacement

from gmpy2 import mpq

from . import faults
from .algebroid import end_rep, lie_derivative_form
from .funcring import partial
from .geometry import (
    VForm, curvature_tensor, d_nabla_form, end_connection, end_wedge, interior,
    perm_sign, sf_wedge,
)


class WeilError(ValueError):
    pass


def _sort_alphas(alphas):
    s = perm_sign(alphas)
    return s, tuple(sorted(alphas))


def _df(f):
    return {(i,): d for i in range(f.model.dim) for d in (partial(f, i),) if d.terms}


def _wedge_df(f, form):
    df = _df(f)
    if not df:
        return VForm.zero(form.bundle, form.degree + 1)
    return VForm.from_frames(form.bundle, form.degree + 1,
                             {a: sf_wedge(df, c) for a, c in form.comps.items()})


class WeilCochain:
    __slots__ = ("rep", "p", "q", "comps")

    def __init__(self, rep, p, q, comps=None):
        if p < 0 or q < 0:
            raise WeilError("cochain degrees must be nonnegative")
        self.rep = rep
        self.p = p
        self.q = q
        comps = comps if comps is not None else [{} for _ in range(p + 1)]
        if len(comps) != p + 1:
            raise WeilError("a (p,q) cochain has p+1 components")
        clean = []
        for k, table in enumerate(comps):
            out = {}
            for (al, be), form in table.items():
                if form.is_zero():
                    continue
                if q - k < 0:
                    raise WeilError(f"component {k} must vanish for q={q}")
                if form.degree != q - k:
                    raise WeilError(f"component {k} must have degree {q - k}")
                if len(al) != p - k or len(be) != k:
                    raise WeilError(f"bad argument counts in component {k}")
                out[(al, be)] = form
            clean.append(out)
        self.comps = clean

    # -- basic structure -------------------------------------------------------
    @property
    def alg(self):
        return self.rep.alg

    @property
    def bundle(self):
        return self.rep.bundle

    @classmethod
    def from_frame_values(cls, rep, p, q, values):
        """Build from {k: {(alphas, betas): VForm}} with arbitrary argument order."""
        comps = [{} for _ in range(p + 1)]
        for k, table in values.items():
            for (al, be), form in table.items():
                s, key = _sort_alphas(tuple(al))
                if not s or form.is_zero():
                    continue
                full = (key, tuple(sorted(be)))
                form = form if s > 0 else -form
                comps[k][full] = comps[k][full] + form if full in comps[k] else form
        return cls(rep, p, q, comps)

    def keys(self, k):
        r = self.alg.rank
        for al in combinations(range(r), self.p - k):
            for be in combinations_with_replacement(range(r), k):
                yield al, be

    def zero_form(self, k):
        return VForm.zero(self.bundle, self.q - k)

    def frame_value(self, k, alphas, betas):
        if k < 0 or k > self.p or self.q - k < 0:
            return VForm.zero(self.bundle, max(self.q - k, 0))
        s, key = _sort_alphas(tuple(alphas))
        if not s:
            return self.zero_form(k)
        form = self.comps[k].get((key, tuple(sorted(betas))))
        if form is None:
            return self.zero_form(k)
        return form if s > 0 else -form

    def is_zero(self):
        return not any(self.comps)

    def __eq__(self, other):
        if not isinstance(other, WeilCochain):
            return NotImplemented
        return (self.p == other.p and self.q == other.q and self.bundle == other.bundle
                and self.comps == other.comps)

    def __hash__(self):
        return hash((self.p, self.q))

    def _check(self, other):
        if (self.p, self.q) != (other.p, other.q) or self.bundle != other.bundle:
            raise WeilError("cochains have different shapes")

    def __add__(self, other):
        self._check(other)
        comps = []
        for a, b in zip(self.comps, other.comps):
            t = dict(a)
            for key, form in b.items():
                t[key] = t[key] + form if key in t else form
            comps.append(t)
        return WeilCochain(self.rep, self.p, self.q, comps)

    def __neg__(self):
        return WeilCochain(self.rep, self.p, self.q,
                           [{key: -f for key, f in t.items()} for t in self.comps])

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return WeilCochain(self.rep, self.p, self.q,
                           [{key: f.scale(c) for key, f in t.items()} for t in self.comps])

    def with_rep(self, rep):
        return WeilCochain(rep, self.p, self.q, self.comps)

    def __repr__(self):
        n = sum(len(t) for t in self.comps)
        return f"WeilCochain(p={self.p}, q={self.q}, rank={self.bundle.rank}, {n} frame values)"

    # -- evaluation on arbitrary sections ------------------------------------
    def evaluate(self, k, alphas, betas=(), order="first"):
        """c_k(alphas || betas) for arbitrary sections, via the Leibniz rule.

        ``order`` chooses which non-constant antisymmetric slot is expanded
        first; every order gives the same answer.
        """
        if len(alphas) != self.p - k or len(betas) != k:
            raise WeilError("wrong number of arguments")
        if self.q - k < 0:
            return VForm.zero(self.bundle, 0)
        total = self.zero_form(k)
        for coeff, bkey in _expand_betas(betas, self.alg.model):
            val = self._eval_alphas(k, list(alphas), list(bkey), order)
            if not val.is_zero():
                total = total + val.scale(coeff)
        return total

    def _eval_alphas(self, k, alphas, bframes, order):
        if k > self.p or self.q - k < 0:
            return VForm.zero(self.bundle, max(self.q - k, 0))
        positions = [i for i, al in enumerate(alphas) if any(not f.is_constant() for f in al)]
        if not positions:
            total = self.zero_form(k)
            for coeff, frames in _expand_constant(alphas):
                val = self.frame_value(k, frames, bframes)
                if not val.is_zero():
                    total = total + val.scale(coeff)
            return total
        i = positions[0] if order == "first" else positions[-1]
        total = self.zero_form(k)
        model = self.alg.model
        for a, f in enumerate(alphas[i]):
            if not f.terms:
                continue
            unit = tuple(model.const(1) if b == a else model.zero() for b in range(len(alphas[i])))
            val = self._eval_alphas(k, alphas[:i] + [unit] + alphas[i + 1:], bframes, order)
            if not val.is_zero():
                total = total + val.scale(f)
            if not f.is_constant():
                sub = self._eval_alphas(k + 1, alphas[:i] + alphas[i + 1:], sorted(bframes + [a]), order)
                if not sub.is_zero():
                    term = _wedge_df(f, sub)
                    negative = (i % 2 == 1) != faults.active("leibniz-df-sign")
                    total = total - term if negative else total + term
        return total


def _expand_betas(betas, model):
    """Multilinear expansion of symmetric arguments: (coefficient, sorted frame key)."""
    out = [(model.const(1), ())]
    for beta in betas:
        nxt = []
        for coeff, key in out:
            for b, f in enumerate(beta):
                if f.terms:
                    nxt.append((coeff * f, key + (b,)))
        out = nxt
    merged = {}
    for coeff, key in out:
        key = tuple(sorted(key))
        merged[key] = merged[key] + coeff if key in merged else coeff
    return [(c, key) for key, c in merged.items() if c.terms]


def _expand_constant(alphas):
    out = [(mpq(1), ())]
    for al in alphas:
        nxt = []
        for coeff, frames in out:
            for a, f in enumerate(al):
                if f.terms and a not in frames:
                    nxt.append((coeff * f.constant_term(), frames + (a,)))
        out = nxt
    return out


# -- the Weil differential ----------------------------------------------------

class _LieCache:
    """Caches anchors and frame brackets of an algebroid."""

    def __init__(self, alg):
        self.alg = alg
        self.frames = [alg.frame(a) for a in range(alg.rank)]

    def lie(self, rep, a, form):
        return lie_derivative_form(rep, self.frames[a], form)


def delta(c):
    """The Weil differential W^{p,q} -> W^{p+1,q}."""
    rep, alg = c.rep, c.alg
    p, q = c.p, c.q
    cache = _LieCache(alg)
    out = [{} for _ in range(p + 2)]
    drop_slot = faults.active("delta-drop-bracket-slot")
    tail_sign = 1 if faults.active("delta-tail-sign") else -1
    for k in range(p + 2):
        if q - k < 0:
            continue
        for al in combinations(range(alg.rank), p + 1 - k):
            for be in combinations_with_replacement(range(alg.rank), k):
                total = VForm.zero(c.bundle, q - k)
                if k <= p:
                    for i, a in enumerate(al):
                        rest = al[:i] + al[i + 1:]
                        term = cache.lie(rep, a, c.frame_value(k, rest, be))
                        if not drop_slot:
                            for l in range(k):
                                col = alg.structure_of(a, be[l])
                                for m, f in col.items():
                                    newbe = be[:l] + (m,) + be[l + 1:]
                                    val = c.frame_value(k, rest, newbe)
                                    if not val.is_zero():
                                        term = term - val.scale(f)
                        total = total + term if i % 2 == 0 else total - term
                    for i, j in combinations(range(len(al)), 2):
                        rest = al[:i] + al[i + 1:j] + al[j + 1:]
                        col = alg.structure_of(al[i], al[j])
                        term = VForm.zero(c.bundle, q - k)
                        for m, f in col.items():
                            val = c.frame_value(k, (m,) + rest, be)
                            if not val.is_zero():
                                term = term + val.scale(f)
                            if not f.is_constant() and k + 1 <= p and q - k - 1 >= 0:
                                sub = c.frame_value(k + 1, rest, be + (m,))
                                if not sub.is_zero():
                                    term = term + _wedge_df(f, sub)
                        total = total + term if (i + j) % 2 == 0 else total - term
                if k >= 1:
                    for j in range(k):
                        rest = be[:j] + be[j + 1:]
                        val = c.frame_value(k - 1, al, rest)
                        if not val.is_zero():
                            term = interior(alg.anchor[be[j]], val)
                            total = total + term if tail_sign > 0 else total - term
                if not total.is_zero():
                    out[k][(al, be)] = total if k % 2 == 0 else -total
    return WeilCochain(rep, p + 1, q, out)


def d_nabla_weil(conn, c):
    """Exterior covariant derivative of cochains, W^{p,q} -> W^{p,q+1}."""
    if conn.bundle != c.bundle:
        raise WeilError("connection does not act on the cochain's values")
    p, q = c.p, c.q
    out = [{} for _ in range(p + 1)]
    drop = faults.active("dnabla-drop-shift")
    for k in range(p + 1):
        if q + 1 - k < 0:
            continue
        for al, be in c.keys(k):
            total = VForm.zero(c.bundle, q + 1 - k)
            if q - k >= 0:
                val = c.frame_value(k, al, be)
                if not val.is_zero():
                    total = d_nabla_form(conn, val)
            if not drop:
                for i in range(k):
                    rest = be[:i] + be[i + 1:]
                    val = c.frame_value(k - 1, (be[i],) + al, rest)
                    if not val.is_zero():
                        total = total - val
            if not total.is_zero():
                out[k][(al, be)] = total if k % 2 == 0 else -total
    return WeilCochain(c.rep, p, q + 1, out)


def zero_cochain(rep, form):
    """A form viewed as a (0, q) cochain."""
    return WeilCochain(rep, 0, form.degree, [{((), ()): form}])


def delta0(rep, form):
    """delta of a form viewed as a (0, q) cochain: alpha -> (L_alpha form, i_{rho beta} form)."""
    return delta(zero_cochain(rep, form))


def is_cocycle(c):
    return delta(c).is_zero()


def is_coboundary_of(gamma, c):
    """Whether c = delta0(gamma) exactly."""
    if c.p != 1 or c.q != gamma.degree:
        return False
    return delta0(c.rep, gamma) == c


# -- the invariance form ---------------------------------------------------------

def invariance_form(conn, rep):
    """(T, theta): theta(a) = nabla^A_a - nabla_{rho a}, T(a) = d^{nabla End} theta(a) - i_{rho a} R.

    Returned as a (1,1) cochain valued in End(V) with the induced representation.
    """
    if conn.bundle != rep.bundle:
        raise WeilError("connection and representation act on different bundles")
    alg = rep.alg
    m = rep.bundle.rank
    model = alg.model
    erep = end_rep(rep)
    econn = end_connection(conn)
    R = curvature_tensor(conn)
    comps = [{}, {}]
    for a in range(alg.rank):
        entries = {}
        if not faults.active("theta-drop"):
            for mu, col in rep.table[a].items():
                for nu, g in col.items():
                    entries[nu * m + mu] = entries.get(nu * m + mu, model.zero()) + g
        for i, rho in enumerate(alg.anchor[a]):
            if not rho.terms:
                continue
            for mu, col in conn.gamma[i].items():
                for nu, g in col.items():
                    entries[nu * m + mu] = entries.get(nu * m + mu, model.zero()) - rho * g
        theta = VForm.from_frames(erep.bundle, 0, {e: {(): f} for e, f in entries.items() if f.terms})
        T = d_nabla_form(econn, theta) - interior(alg.anchor[a], R)
        if not T.is_zero():
            comps[0][((a,), ())] = T
        if not theta.is_zero():
            comps[1][((), (a,))] = theta
    return WeilCochain(erep, 1, 1, comps)


def invariance_wedge(tt, c):
    """((T,theta) ^ c)_k = sum_i (-1)^i T(a_i) ^ c_k(..^a_i..||b) + sum_j theta(b_j) c_{k-1}(a||..^b_j..)."""
    p, q = c.p, c.q
    alg = c.alg
    out = [{} for _ in range(p + 2)]
    for k in range(p + 2):
        if q + 1 - k < 0:
            continue
        for al in combinations(range(alg.rank), p + 1 - k):
            for be in combinations_with_replacement(range(alg.rank), k):
                total = VForm.zero(c.bundle, q + 1 - k)
                if k <= p and q - k >= 0:
                    for i, a in enumerate(al):
                        T = tt.frame_value(0, (a,), ())
                        if T.is_zero():
                            continue
                        val = c.frame_value(k, al[:i] + al[i + 1:], be)
                        if val.is_zero():
                            continue
                        term = end_wedge(T, val)
                        total = total + term if i % 2 == 0 else total - term
                for j in range(k):
                    th = tt.frame_value(1, (), (be[j],))
                    if th.is_zero():
                        continue
                    val = c.frame_value(k - 1, al, be[:j] + be[j + 1:])
                    if not val.is_zero():
                        total = total + end_wedge(th, val)
                if not total.is_zero():
                    out[k][(al, be)] = total
    return WeilCochain(c.rep, p + 1, q + 1, out)


# -- random cochains ----------------------------------------------------------------

def random_function(model, rng, terms=2, degree=2):
    """A small random element of the model's function ring."""
    f = model.zero()
    for _ in range(rng.randint(1, terms)):
        c = mpq(rng.choice([-3, -2, -1, 1, 2, 3]), rng.choice([1, 1, 2]))
        if model.is_torus:
            freq = tuple(rng.choice([-1, 0, 0, 1]) for _ in range(model.dim))
            if not any(freq):
                f = f + model.const(c)
            elif rng.random() < 0.5:
                f = f + model.cos(freq, c)
            else:
                f = f + model.sin(freq, c)
        else:
            expo = [0] * model.dim
            for _ in range(rng.randint(0, degree)):
                expo[rng.randrange(model.dim)] += 1
            term = model.const(c)
            for i, e in enumerate(expo):
                if e:
                    term = term * model.coord(i) ** e
            f = f + term
    return f


def random_form(bundle, degree, rng, density=2):
    n = bundle.model.dim
    if degree > n:
        return VForm.zero(bundle, degree)
    idx = list(combinations(range(n), degree))
    entries = []
    for _ in range(rng.randint(1, density)):
        entries.append((rng.choice(idx), rng.randrange(bundle.rank), random_function(bundle.model, rng)))
    return VForm.from_entries(bundle, degree, entries)


def random_cochain(rep, p, q, rng, density=2, fill=0.5):
    """A sparse random (p,q) cochain; each component keeps a random subset of frame values."""
    r = rep.alg.rank
    n = rep.alg.model.dim
    comps = [{} for _ in range(p + 1)]
    for k in range(p + 1):
        if q - k < 0 or q - k > n:
            continue
        keys = [(al, be) for al in combinations(range(r), p - k)
                for be in combinations_with_replacement(range(r), k)]
        if not keys:
            continue
        count = max(1, int(len(keys) * fill)) if rng.random() < 0.9 else 0
        count = min(count, 4)
        for key in rng.sample(keys, min(count, len(keys))):
            form = random_form(rep.bundle, q - k, rng, density)
            if not form.is_zero():
                comps[k][key] = form
    return WeilCochain(rep, p, q, comps)


def random_section(model, rank, rng, zero_prob=0.4):
    return tuple(model.zero() if rng.random() < zero_prob else random_function(model, rng)
                 for _ in range(rank))


def make_rng(seed):
    return random.Random(seed)
