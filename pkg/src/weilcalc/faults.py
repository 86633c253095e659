"""Named single-term corruptions used by the negative-control suites.

Core routines consult ``active(name)`` at the matching term.  Nothing is
active unless a caller enters ``inject``.
"""

from contextlib import contextmanager

KNOWN = {
    "delta-tail-sign": "flip the sign of the anchor-contraction term of the Weil differential",
    "delta-drop-bracket-slot": "drop the bracket-of-symmetric-argument term of the Lie derivative in the Weil differential",
    "leibniz-df-sign": "flip the sign of the df term in the Leibniz evaluation of cochains",
    "dnabla-drop-shift": "drop the symmetric-to-antisymmetric shift term of d-nabla on cochains",
    "hproj-drop-dotwedge": "drop the dot-wedge correction in the horizontal projection",
    "curving-drop-bracket": "drop the -1/2 [g,g] term when deforming a curving",
    "c2-sign": "flip the sign of the quadratic deformation term of the curvature",
    "theta-drop": "replace the zeroth-order part of the invariance form by zero",
    "hodge-drop-sign": "forget the permutation sign in the Hodge star",
    "foliated-curvature-sign": "flip the sign of the bracket term in the foliated curvature",
    "coupling-drop-F": "drop the curving term from the coupling bracket",
}

_active = set()


def active(name):
    return name in _active


def current():
    return frozenset(_active)


@contextmanager
def inject(*names):
    unknown = [n for n in names if n not in KNOWN]
    if unknown:
        raise KeyError(f"unknown fault {unknown[0]!r}")
    saved = set(_active)
    _active.update(names)
    try:
        yield
    finally:
        _active.clear()
        _active.update(saved)
