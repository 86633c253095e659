"""Exact rational linear algebra on lists of gmpy2 rationals, backed by sympy."""

from gmpy2 import mpq


def _sympy_matrix(rows):
    from sympy import Matrix, Rational
    return Matrix([[Rational(int(x.numerator), int(x.denominator)) for x in row] for row in rows])


def _to_mpq(x):
    from sympy import fraction
    num, den = fraction(x)
    return mpq(int(num), int(den))


def det(rows):
    if not rows:
        return mpq(1)
    return _to_mpq(_sympy_matrix(rows).det())


def inverse(rows):
    m = _sympy_matrix(rows).inv()
    return [[_to_mpq(m[i, j]) for j in range(m.cols)] for i in range(m.rows)]


def rank(rows):
    if not rows:
        return 0
    return _sympy_matrix(rows).rank()


def nullspace(rows, ncols):
    """Basis of {x : rows x = 0} as lists of rationals."""
    if not rows:
        return [[mpq(1 if i == j else 0) for i in range(ncols)] for j in range(ncols)]
    basis = _sympy_matrix(rows).nullspace()
    return [[_to_mpq(v[i]) for i in range(ncols)] for v in basis]


def left_inverse(rows):
    """A left inverse (A^T A)^{-1} A^T of a full column rank matrix, or None."""
    m = _sympy_matrix(rows)
    if m.rank() < m.cols:
        return None
    li = (m.T * m).inv() * m.T
    return [[_to_mpq(li[i, j]) for j in range(li.cols)] for i in range(li.rows)]
