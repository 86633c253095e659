"""Exact function rings on flat coordinate models.

Two models are supported:

* ``Affine``: polynomials in x1..xn with rational coefficients.
* ``Torus``: trigonometric polynomials on the n-torus, written in the basis
  1, cos(k.x), sin(k.x) with integer frequency vectors k whose first nonzero
  entry is positive.

Coefficients are ``gmpy2.mpq`` throughout, so canonical forms are unique and
equality is structural.
"""

from dataclasses import dataclass

from gmpy2 import mpq

AFFINE = "affine"
TORUS = "torus"

ZERO_Q = mpq(0)
ONE_Q = mpq(1)
HALF_Q = mpq(1, 2)

COS = 0
SIN = 1


class ModelMismatch(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, message, text="", column=None):
        self.text = text
        self.column = column
        where = f" at column {column}" if column is not None else ""
        super().__init__(f"{message}{where}: {text!r}" if text else message)


@dataclass(frozen=True)
class CoordModel:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (AFFINE, TORUS):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("model dimension must be at least 1")

    @property
    def names(self):
        return tuple(f"x{i + 1}" for i in range(self.dim))

    @property
    def is_torus(self):
        return self.kind == TORUS

    def zero(self):
        return FuncExpr(self, {})

    def const(self, value):
        return FuncExpr.constant(self, value)

    def coord(self, i):
        """The coordinate function x_{i+1} (affine models only)."""
        if self.is_torus:
            raise ValueError("bare coordinates are not functions on a torus")
        key = tuple(1 if j == i else 0 for j in range(self.dim))
        return FuncExpr(self, {key: ONE_Q})

    def cos(self, freq, coeff=1):
        return FuncExpr(self, _trig_atom(COS, tuple(freq), mpq(coeff)))

    def sin(self, freq, coeff=1):
        return FuncExpr(self, _trig_atom(SIN, tuple(freq), mpq(coeff)))

    def parse(self, text):
        return parse_expr(self, text)

    def __str__(self):
        return f"{self.kind}{self.dim}"


def Affine(dim):
    return CoordModel(AFFINE, dim)


def Torus(dim):
    return CoordModel(TORUS, dim)


def _lex_negative(freq):
    for k in freq:
        if k:
            return k < 0
    return False


def _trig_atom(kind, freq, coeff):
    """Canonical single-term dict for coeff*cos(freq.x) or coeff*sin(freq.x)."""
    if not coeff:
        return {}
    if _lex_negative(freq):
        freq = tuple(-k for k in freq)
        if kind == SIN:
            coeff = -coeff
    elif kind == SIN and not any(freq):
        return {}
    return {(kind, freq): coeff}


def _accumulate(terms, key, value):
    v = terms.get(key)
    if v is None:
        terms[key] = value
    else:
        v = v + value
        if v:
            terms[key] = v
        else:
            del terms[key]


def _add_trig(terms, kind, freq, coeff):
    if _lex_negative(freq):
        freq = tuple(-k for k in freq)
        if kind == SIN:
            coeff = -coeff
    elif kind == SIN and not any(freq):
        return
    _accumulate(terms, (kind, freq), coeff)


class FuncExpr:
    """Immutable element of the function ring of a coordinate model."""

    __slots__ = ("model", "terms", "_hash")

    def __init__(self, model, terms):
        self.model = model
        self.terms = terms
        self._hash = None

    @classmethod
    def constant(cls, model, value):
        value = mpq(value)
        if not value:
            return cls(model, {})
        return cls(model, {_const_key(model): value})

    # -- inspection ---------------------------------------------------------
    def is_zero(self):
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def is_constant(self):
        if not self.terms:
            return True
        return len(self.terms) == 1 and _const_key(self.model) in self.terms

    def constant_term(self):
        return self.terms.get(_const_key(self.model), ZERO_Q)

    def __eq__(self, other):
        if isinstance(other, FuncExpr):
            return self.model == other.model and self.terms == other.terms
        if isinstance(other, (int, type(ZERO_Q))):
            return self.is_constant() and self.constant_term() == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.model, frozenset(self.terms.items())))
        return self._hash

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other):
        if self.model != other.model:
            raise ModelMismatch(f"cannot combine {self.model} and {other.model}")

    def _coerce(self, other):
        if isinstance(other, FuncExpr):
            self._check(other)
            return other
        return FuncExpr.constant(self.model, other)

    def __add__(self, other):
        other = self._coerce(other)
        if not other.terms:
            return self
        if not self.terms:
            return other
        terms = dict(self.terms)
        for k, v in other.terms.items():
            _accumulate(terms, k, v)
        return FuncExpr(self.model, terms)

    __radd__ = __add__

    def __neg__(self):
        return FuncExpr(self.model, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if not other.terms:
            return self
        terms = dict(self.terms)
        for k, v in other.terms.items():
            _accumulate(terms, k, -v)
        return FuncExpr(self.model, terms)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = mpq(c)
        if not c or not self.terms:
            return FuncExpr(self.model, {})
        if c == ONE_Q:
            return self
        return FuncExpr(self.model, {k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, FuncExpr):
            return self.scale(other)
        self._check(other)
        if not self.terms or not other.terms:
            return FuncExpr(self.model, {})
        if self.model.kind == AFFINE:
            return FuncExpr(self.model, _poly_mul(self.terms, other.terms))
        return FuncExpr(self.model, _trig_mul(self.terms, other.terms))

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = FuncExpr.constant(self.model, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def partial(self, i):
        return partial(self, i)

    def __repr__(self):
        return f"FuncExpr({self.model}, {format_expr(self)!r})"

    def __str__(self):
        return format_expr(self)


def _const_key(model):
    if model.kind == AFFINE:
        return (0,) * model.dim
    return (COS, (0,) * model.dim)


def _poly_mul(a, b):
    terms = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            _accumulate(terms, key, va * vb)
    return terms


def _trig_mul(a, b):
    terms = {}
    for (ka, fa), va in a.items():
        for (kb, fb), vb in b.items():
            c = va * vb * HALF_Q
            plus = tuple(x + y for x, y in zip(fa, fb))
            minus = tuple(x - y for x, y in zip(fa, fb))
            if ka == COS and kb == COS:
                _add_trig(terms, COS, minus, c)
                _add_trig(terms, COS, plus, c)
            elif ka == SIN and kb == SIN:
                _add_trig(terms, COS, minus, c)
                _add_trig(terms, COS, plus, -c)
            elif ka == SIN:
                _add_trig(terms, SIN, plus, c)
                _add_trig(terms, SIN, minus, c)
            else:
                _add_trig(terms, SIN, plus, c)
                _add_trig(terms, SIN, minus, -c)
    return terms


# -- module-level operations -----------------------------------------------

def add(f, g):
    return f + g


def mul(f, g):
    return f * g


def partial(f, i):
    """Exact derivative along the coordinate with zero-based index ``i``."""
    model = f.model
    if not 0 <= i < model.dim:
        raise IndexError(f"coordinate index {i} out of range for {model}")
    terms = {}
    if model.kind == AFFINE:
        for key, v in f.terms.items():
            e = key[i]
            if e:
                k = key[:i] + (e - 1,) + key[i + 1:]
                terms[k] = v * e
    else:
        for (kind, freq), v in f.terms.items():
            k = freq[i]
            if k:
                if kind == COS:
                    terms[(SIN, freq)] = -v * k
                else:
                    terms[(COS, freq)] = v * k
    return FuncExpr(model, terms)


def mean_value(f):
    """Constant Fourier coefficient; the integral over the torus is this times (2pi)^n."""
    if f.model.kind != TORUS:
        raise ValueError("mean_value is only defined on torus models")
    return f.constant_term()


def vector_apply(field, f):
    """Directional derivative X(f) for a vector field given as a tuple of components."""
    result = None
    for i, xi in enumerate(field):
        if xi.terms:
            d = partial(f, i)
            if d.terms:
                term = xi * d
                result = term if result is None else result + term
    return result if result is not None else f.model.zero()


def compose_linear(f, matrix, shift=None):
    """Pullback f(M x + s) along a linear map of the model.

    On the torus ``matrix`` must be integral and ``shift`` is given in units
    of pi, so cos(k.(Mx + pi m)) = (-1)^(k.m) cos((M^T k).x).  On affine
    models ``shift`` is a rational vector.
    """
    model = f.model
    n = model.dim
    shift = tuple(shift) if shift is not None else (0,) * n
    if model.kind == TORUS:
        terms = {}
        for (kind, freq), v in f.terms.items():
            newfreq = tuple(sum(freq[j] * matrix[j][i] for j in range(n)) for i in range(n))
            parity = sum(freq[j] * shift[j] for j in range(n))
            if not isinstance(parity, int):
                raise ValueError("torus shifts must be integer multiples of pi")
            c = -v if parity % 2 else v
            _add_trig(terms, kind, newfreq, c)
        return FuncExpr(model, terms)
    images = []
    for j in range(n):
        img = FuncExpr.constant(model, shift[j])
        for i in range(n):
            if matrix[j][i]:
                img = img + model.coord(i).scale(matrix[j][i])
        images.append(img)
    result = model.zero()
    for key, v in f.terms.items():
        term = FuncExpr.constant(model, v)
        for j, e in enumerate(key):
            if e:
                term = term * images[j] ** e
        result = result + term
    return result


# -- printing ----------------------------------------------------------------

def _fmt_coeff_term(c, atom):
    """Render c*atom as (sign, text) with the sign split off."""
    sign = "-" if c < 0 else "+"
    a = abs(c)
    if not atom:
        return sign, str(a)
    if a == ONE_Q:
        return sign, atom
    return sign, f"{a}*{atom}"


def _linear_text(freq, names):
    parts = []
    for k, name in zip(freq, names):
        if not k:
            continue
        sign = "-" if k < 0 else "+"
        a = abs(k)
        body = name if a == 1 else f"{a}*{name}"
        parts.append((sign, body))
    text = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


def format_expr(f):
    """Canonical text for f; parse_expr(model, format_expr(f)) == f."""
    if not f.terms:
        return "0"
    names = f.model.names
    pieces = []
    if f.model.kind == AFFINE:
        keys = sorted(f.terms, key=lambda k: (-sum(k), tuple(-e for e in k)))
        for key in keys:
            factors = []
            for e, name in zip(key, names):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            pieces.append(_fmt_coeff_term(f.terms[key], "*".join(factors)))
    else:
        keys = sorted(f.terms, key=lambda k: (k[1], k[0]))
        for kind, freq in keys:
            if any(freq):
                fn = "cos" if kind == COS else "sin"
                atom = f"{fn}({_linear_text(freq, names)})"
            else:
                atom = ""
            pieces.append(_fmt_coeff_term(f.terms[(kind, freq)], atom))
    sign, body = pieces[0]
    text = ("-" if sign == "-" else "") + body
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text


# -- parsing -----------------------------------------------------------------

_ALIASES = {"x": 0, "y": 1, "z": 2, "w": 3}


def _tokenize(text):
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(("num", int(text[i:j]), i))
            i = j
        elif ch.isalpha():
            j = i
            while j < len(text) and text[j].isalnum():
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
        elif ch in "+-*/^()":
            tokens.append((ch, ch, i))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", text, i + 1)
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, model, text, allow_coords):
        self.model = model
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.allow_coords = allow_coords

    def error(self, message, tok=None):
        tok = tok or self.tokens[self.pos]
        raise ParseError(message, self.text, tok[2] + 1)

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            self.error(f"expected {kind!r}")
        self.pos += 1
        return tok

    def parse(self):
        value = self.expr()
        if self.peek()[0] != "end":
            self.error("unexpected trailing input")
        return value

    def expr(self):
        value = self.term()
        while self.peek()[0] in "+-":
            op = self.take()[0]
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self):
        value = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.take()
            rhs = self.unary()
            if op[0] == "*":
                value = value * rhs
            else:
                if not rhs.is_constant() or rhs.is_zero():
                    self.error("division only by nonzero rational constants", op)
                value = value.scale(1 / rhs.constant_term())
        return value

    def unary(self):
        if self.peek()[0] == "-":
            self.take()
            return -self.unary()
        if self.peek()[0] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "num":
                self.error("exponent must be a nonnegative integer literal", tok)
            return base ** tok[1]
        return base

    def coord_index(self, tok):
        name = tok[1]
        if name in _ALIASES and _ALIASES[name] < self.model.dim:
            return _ALIASES[name]
        if name[0] == "x" and name[1:].isdigit():
            i = int(name[1:]) - 1
            if 0 <= i < self.model.dim:
                return i
        self.error(f"unknown coordinate {name!r}", tok)

    def atom(self):
        tok = self.take()
        kind = tok[0]
        if kind == "num":
            return FuncExpr.constant(self.model, tok[1])
        if kind == "(":
            value = self.expr()
            self.take(")")
            return value
        if kind == "name":
            if tok[1] in ("sin", "cos"):
                return self.trig(tok)
            i = self.coord_index(tok)
            if not self.allow_coords:
                self.error("bare coordinate outside sin/cos on a torus", tok)
            return Affine(self.model.dim).coord(i)
        self.error("unexpected token", tok)

    def trig(self, tok):
        if not self.model.is_torus:
            self.error("sin/cos are only available on torus models", tok)
        self.take("(")
        inner = _Parser(Affine(self.model.dim), self.text, True)
        inner.tokens = self.tokens
        inner.pos = self.pos
        arg = inner.expr()
        self.pos = inner.pos
        self.take(")")
        freq = [0] * self.model.dim
        for key, v in arg.terms.items():
            if sum(key) != 1 or v.denominator != 1:
                self.error("trigonometric argument must be an integer linear combination of coordinates", tok)
            freq[key.index(1)] = int(v)
        atom = _trig_atom(COS if tok[1] == "cos" else SIN, tuple(freq), ONE_Q)
        return FuncExpr(self.model, atom)


def parse_expr(model, text):
    """Parse the expression grammar into canonical form on ``model``."""
    if not isinstance(text, str):
        if isinstance(text, int):
            return FuncExpr.constant(model, text)
        raise ParseError(f"expression must be a string, got {type(text).__name__}")
    parser = _Parser(model, text, not model.is_torus)
    value = parser.parse()
    if value.model != model:
        value = FuncExpr(model, value.terms)
    return value
