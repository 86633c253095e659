"""The shipped example catalog.

The builders here are the source of the JSON files under ``data/``;
``python -m weilcalc.catalog DIR`` rewrites them.  At run time the CLI reads
the JSON files (from ``WEILCALC_CATALOG`` when set).
"""

import sys
from functools import lru_cache
from pathlib import Path

from gmpy2 import mpq

from .algebroid import (
    AlgebroidPresentation, IdealBundle, Representation, adjoint_rep, make_action_algebroid,
    make_coupling_algebroid, tangent_algebroid, zero_algebroid,
)
from .formats import (
    ConnEntry, Entry, GaugeEntry, SplittingEntry, catalog_dir, dump_presentation, dump_scenario, dumps,
    load_json, parse_presentation,
)
from .funcring import Affine, Torus
from .geometry import (
    FiberBracket, FiberMetric, LinearConnection, TrivBundle, VForm, exterior_d, form_bracket,
)
from .imconn import GaugeMap, IMConnection, PrimitiveData, deform_primitive

TRIVIAL = {"name": "trivial", "rank": 1}


def so3_bracket(model):
    one = model.const(1)
    K = TrivBundle(model, 3)
    f = {}
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        f[(a, b)] = {c: one}
        f[(b, a)] = {c: -one}
    return FiberBracket(K, f)


def ad_connection(br, A):
    """nabla = d + ad A for a bundle-valued 1-form A."""
    model = br.bundle.model
    r = br.bundle.rank
    gamma = [{} for _ in range(model.dim)]
    for i in range(model.dim):
        Ai = tuple(A.component((i,), s) for s in range(r))
        for a in range(r):
            ea = tuple(model.const(1 if b == a else 0) for b in range(r))
            col = {b: f for b, f in enumerate(br.bracket(Ai, ea)) if f.terms}
            if col:
                gamma[i][a] = col
    return LinearConnection(br.bundle, gamma)


def ad_curving(br, A):
    """F with R = -ad F for nabla = d + ad A."""
    return -(exterior_d(A) + form_bracket(br, A, A).scale(mpq(1, 2)))


def _coupling_entry(name, B, br, nabla, F, description, extra_reps=()):
    alg, ideal, conn = make_coupling_algebroid(B, br, nabla, F, name)
    entry = Entry(name, alg, [ideal], description=description)
    entry.rep_specs.append({"name": "adjoint", "ideal": 1})
    entry.reps.append(("adjoint", adjoint_rep(alg, ideal)))
    for spec in extra_reps:
        entry.rep_specs.append(spec)
    entry.conns.append(ConnEntry(0, conn, F))
    return entry


def _plain_entry(name, alg, rep_spec, description, ideals=()):
    entry = Entry(name, alg, [IdealBundle(alg, fr) for fr in ideals], description=description)
    entry.rep_specs.append(rep_spec)
    return entry


def _identity(model, rank):
    return [[model.const(1 if i == j else 0) for j in range(rank)] for i in range(rank)]


def _build():
    entries = []
    A2, T2, A3, T3, T5 = Affine(2), Torus(2), Affine(3), Torus(3), Torus(5)
    x, y = A2.coord(0), A2.coord(1)
    z2 = A2.zero()
    one2 = A2.const(1)

    alg = zero_algebroid(A2, 2, "zero-r2")
    ideal = IdealBundle(alg, [0, 1])
    conn = IMConnection.from_tables(alg, ideal, {}, {0: (one2, z2), 1: (z2, one2)})
    e = Entry("zero-r2", alg, [ideal], description="zero algebroid of rank 2 on the plane")
    e.rep_specs.append({"name": "adjoint", "ideal": 1})
    e.conns.append(ConnEntry(0, conn, VForm.zero(ideal.bundle, 2)))
    entries.append(e)

    entries.append(_plain_entry("tangent-r2", tangent_algebroid(A2, "tangent-r2"), TRIVIAL,
                                "tangent algebroid of the plane"))
    entries.append(_plain_entry("tangent-t2", tangent_algebroid(T2, "tangent-t2"), TRIVIAL,
                                "tangent algebroid of the 2-torus"))
    entries.append(_plain_entry("so2-plane", make_action_algebroid(A2, {}, [(-y, x)], "so2-plane"), TRIVIAL,
                                "rotation action of so(2) on the plane"))
    X, Y, Z = A3.coord(0), A3.coord(1), A3.coord(2)
    z3 = A3.zero()
    so3_act = [(z3, Z, -Y), (-Z, z3, X), (Y, -X, z3)]
    so3_lie = {(0, 1): {2: 1}, (1, 2): {0: 1}, (2, 0): {1: 1}}
    entries.append(_plain_entry("so3-space", make_action_algebroid(A3, so3_lie, so3_act, "so3-space"), TRIVIAL,
                                "rotation action of so(3) on 3-space"))
    heis = make_action_algebroid(A2, {(0, 1): {2: 1}}, [(one2, z2), (z2, x), (z2, one2)], "heisenberg-plane")
    entries.append(_plain_entry("heisenberg-plane", heis,
                                {"name": "character", "rank": 1, "table": {"1": [["1"]]}},
                                "Heisenberg algebra acting on the plane, with a character"))

    K1 = TrivBundle(A2, 1)
    F = VForm.from_entries(K1, 2, [((0, 1), 0, one2)])
    entries.append(_coupling_entry("am-r2", tangent_algebroid(A2), FiberBracket.abelian(K1),
                                   LinearConnection.trivial(K1), F,
                                   "tangent bundle extended by a line with the 2-form dx^dy"))

    K1t = TrivBundle(T2, 1)
    one_t, zt = T2.const(1), T2.zero()
    omega = VForm.from_entries(K1t, 2, [((0, 1), 0, T2.parse("1 + cos(x1)"))])
    e = _coupling_entry("am-t2", tangent_algebroid(T2), FiberBracket.abelian(K1t),
                        LinearConnection.trivial(K1t), omega,
                        "2-torus extended by a line with the 2-form (1 + cos x1) dx1^dx2")
    e.splittings.append(SplittingEntry("critical", 0, (0, 1), [(one_t, zt, zt), (zt, one_t, T2.parse("sin(x1)"))]))
    e.splittings.append(SplittingEntry("zero", 0, (0, 1), [(one_t, zt, zt), (zt, one_t, zt)]))
    reflect = [[T2.const(-1), zt, zt], [zt, T2.const(-1), zt], [zt, zt, one_t]]
    e.gauge_maps.append(GaugeEntry("point-reflection", 0, GaugeMap(e.alg, [[-1, 0], [0, -1]], [0, 0], reflect),
                                   FiberMetric.identity(K1t)))
    e.gauge_maps.append(GaugeEntry("identity", 0, GaugeMap(e.alg, [[1, 0], [0, 1]], [0, 0], _identity(T2, 3))))
    entries.append(e)

    br = so3_bracket(T2)
    alg = AlgebroidPresentation(T2, 3, [(zt, zt)] * 3,
                                {k: v for k, v in br.f.items()}, "so3-bundle")
    ideal = IdealBundle(alg, [0, 1, 2])
    ident = {a: tuple(T2.const(1 if s == a else 0) for s in range(3)) for a in range(3)}
    conn = IMConnection.from_tables(alg, ideal, {}, ident)
    e = Entry("so3-bundle", alg, [ideal], description="trivial so(3) bundle over the 2-torus")
    e.rep_specs.append({"name": "adjoint", "ideal": 1})
    e.conns.append(ConnEntry(0, conn, VForm.zero(ideal.bundle, 2)))
    entries.append(e)

    alg = AlgebroidPresentation.antisymmetric(A2, 2, [(z2, z2)] * 2, {(0, 1): {1: one2}}, "nonabelian-bundle")
    line = IdealBundle(alg, [1])
    whole = IdealBundle(alg, [0, 1])
    conn = IMConnection.from_tables(alg, whole, {}, {0: (one2, z2), 1: (z2, one2)})
    e = Entry("nonabelian-bundle", alg, [line, whole],
              description="bundle of 2-dimensional nonabelian Lie algebras")
    e.rep_specs.append({"name": "adjoint", "ideal": 1})
    e.conns.append(ConnEntry(1, conn, VForm.zero(whole.bundle, 2)))
    entries.append(e)

    K3 = br.bundle
    A = VForm.from_entries(K3, 1, [((1,), 0, T2.parse("cos(x1)")), ((0,), 1, T2.parse("sin(x2)"))])
    entries.append(_coupling_entry("coupling-t2-so3", tangent_algebroid(T2), br, ad_connection(br, A),
                                   ad_curving(br, A), "2-torus coupled to so(3) through d + ad A"))

    e = _coupling_entry("coupling-t2-so3-flat", tangent_algebroid(T2), br, LinearConnection.trivial(K3),
                        VForm.zero(K3, 2), "2-torus coupled to so(3) with the trivial connection")
    base = PrimitiveData(e.conns[0].conn, VForm.zero(K3, 2))
    g = VForm.from_entries(K3, 1, [((0,), 2, T2.parse("cos(x2)")), ((1,), 0, T2.parse("sin(x1)"))])
    moved = deform_primitive(base, g)
    e.conns.append(ConnEntry(0, moved.conn, moved.F))
    rot = _identity(T2, 5)
    for i, row in enumerate([[0, -1, 0], [1, 0, 0], [0, 0, 1]]):
        for j, c in enumerate(row):
            rot[2 + i][2 + j] = T2.const(c)
    e.gauge_maps.append(GaugeEntry("fiber-rotation", 1, GaugeMap(e.alg, [[1, 0], [0, 1]], [0, 0], rot),
                                   FiberMetric.identity(K3)))
    e.gauge_maps.append(GaugeEntry("identity", 1, GaugeMap(e.alg, [[1, 0], [0, 1]], [0, 0], _identity(T2, 5))))
    entries.append(e)

    K1_3 = TrivBundle(T3, 1)
    F3 = VForm.from_entries(K1_3, 2, [((1, 2), 0, T3.parse("cos(x1)"))])
    e = _coupling_entry("coupling-t3-abelian", zero_algebroid(T3, 1), FiberBracket.abelian(K1_3),
                        LinearConnection.trivial(K1_3), F3,
                        "abelian line bundle over the 3-torus with curving cos(x1) dx2^dx3")
    e.gauge_maps.append(GaugeEntry("translation", 0, GaugeMap(e.alg, _identity_int(3), [1, 0, 0],
                                                              _identity(T3, 2)), FiberMetric.identity(K1_3)))
    e.gauge_maps.append(GaugeEntry("cyclic-permutation", 0,
                                   GaugeMap(e.alg, [[0, 1, 0], [0, 0, 1], [1, 0, 0]], [0, 0, 0], _identity(T3, 2)),
                                   FiberMetric.identity(K1_3)))
    e.gauge_maps.append(GaugeEntry("identity", 0, GaugeMap(e.alg, _identity_int(3), [0, 0, 0], _identity(T3, 2))))
    entries.append(e)

    br_t = so3_bracket(T2)
    B = AlgebroidPresentation(T2, 1, [(one_t, zt)], {}, "leaf-line")
    A = VForm.from_entries(br_t.bundle, 1, [((0,), 0, T2.parse("cos(x2)")), ((1,), 1, T2.parse("sin(x1)"))])
    e = _coupling_entry("coupling-t2-leaf-so3", B, br_t, ad_connection(br_t, A), ad_curving(br_t, A),
                        "so(3) coupled to the foliation of the 2-torus by x1-circles")
    e.splittings.append(SplittingEntry("lift", 0, (0,), [(one_t, zt, zt, zt)]))
    entries.append(e)

    K1_5 = TrivBundle(T5, 1)
    F5 = VForm.from_entries(K1_5, 2, [((0, 2), 0, T5.parse("cos(x2)")), ((3, 4), 0, T5.parse("sin(x2)"))])
    entries.append(_coupling_entry("coupling-t5-abelian", zero_algebroid(T5, 1), FiberBracket.abelian(K1_5),
                                   LinearConnection.trivial(K1_5), F5,
                                   "abelian line bundle over the 5-torus with a self-dual curving"))
    for entry in entries:
        if not entry.reps:
            entry.reps = [(spec.get("name", "rep"), _rep_from_spec(entry, spec)) for spec in entry.rep_specs]
        entry.alg.name = entry.name
    return entries


def _identity_int(n):
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def _rep_from_spec(entry, spec):
    alg = entry.alg
    if "ideal" in spec:
        return adjoint_rep(alg, entry.ideals[spec["ideal"] - 1])
    table = [{} for _ in range(alg.rank)]
    for key, matrix in spec.get("table", {}).items():
        for mu, row in enumerate(matrix):
            for nu, t in enumerate(row):
                f = alg.model.parse(t)
                if f.terms:
                    table[int(key) - 1].setdefault(mu, {})[nu] = f
    return Representation(alg, TrivBundle(alg.model, spec.get("rank", 1)), table)


def _scenarios():
    T3 = Torus(3)
    K = TrivBundle(T3, 1)
    gamma = VForm.from_entries(K, 1, [((1,), 0, T3.parse("cos(x1)"))])
    eye3 = _identity_int(3)
    eye2 = _identity_int(2)
    eye5 = _identity_int(5)
    lorentz = [[-1 if i == j == 0 else (1 if i == j else 0) for j in range(5)] for i in range(5)]
    return {
        "t3-eigen": dump_scenario("t3-eigen", "coupling-t3-abelian", eye3, -1,
                                  tangent=(gamma, -exterior_d(gamma))),
        "t3-eigen-mu2": dump_scenario("t3-eigen-mu2", "coupling-t3-abelian", eye3, -2),
        "am-t2-critical": dump_scenario("am-t2-critical", "am-t2", eye2, -1, splitting=1),
        "am-t2-zero": dump_scenario("am-t2-zero", "am-t2", eye2, -1, splitting=2),
        "t5-self-dual": dump_scenario("t5-self-dual", "coupling-t5-abelian", lorentz, -1),
        "t5-euclidean": dump_scenario("t5-euclidean", "coupling-t5-abelian", eye5, -1),
    }


def _controls():
    """Presentations that must be rejected, as raw documents."""
    nonclosed = {
        "schema": "weilcalc.presentation", "version": 1, "name": "am-r3-nonclosed",
        "description": "extension of the tangent bundle of 3-space by the non-closed 2-form x1 dx2^dx3",
        "model": {"kind": "affine", "dim": 3}, "bundle_rank": 4,
        "anchor": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"], ["0", "0", "0"]],
        "structure": {"2,3": ["0", "0", "0", "-x1"]},
        "ideals": [[4]], "representations": [{"name": "adjoint", "ideal": 1}],
    }
    malformed = dict(nonclosed, name="malformed-expression", structure={"2,3": ["0", "0", "0", "-x1 +* 2"]})
    perturbed = dump_presentation(entries()["so3-space"])
    perturbed["name"] = "so3-space-perturbed"
    perturbed["structure"]["1,2"] = ["0", "0", "2"]
    return {"am-r3-nonclosed": nonclosed, "malformed-expression": malformed, "so3-space-perturbed": perturbed}


# Single structure-function mutations that validation must reject.
MUTATIONS = [
    ("so2-plane", "1,1", ["1"]),
    ("so3-space", "1,2", ["0", "0", "2"]),
    ("heisenberg-plane", "1,2", ["0", "0", "x1"]),
    ("am-r2", "1,3", ["0", "1", "0"]),
    ("am-t2", "1,2", ["1", "0", "-1 - cos(x1)"]),
    ("so3-bundle", "1,2", ["1", "0", "1"]),
    ("nonabelian-bundle", "1,1", ["0", "1"]),
    ("coupling-t2-so3", "1,3", ["0", "0", "0", "1", "0"]),
    ("coupling-t3-abelian", "2,2", ["1", "0"]),
]


@lru_cache(maxsize=None)
def _cached():
    return {e.name: e for e in _build()}


def entries():
    """Catalog entries built in memory, keyed by name."""
    return _cached()


def scenarios():
    return _scenarios()


def controls():
    return _controls()


def export(directory):
    directory = Path(directory)
    (directory / "scenarios").mkdir(parents=True, exist_ok=True)
    (directory / "controls").mkdir(parents=True, exist_ok=True)
    for name, entry in entries().items():
        (directory / f"{name}.json").write_text(dumps(dump_presentation(entry)))
    for name, doc in scenarios().items():
        (directory / "scenarios" / f"{name}.json").write_text(dumps(doc))
    for name, doc in controls().items():
        (directory / "controls" / f"{name}.json").write_text(dumps(doc))


def catalog_names(directory=None):
    directory = Path(directory) if directory else catalog_dir()
    return sorted(p.stem for p in directory.glob("*.json"))


def load_entry(name, directory=None, check=True):
    directory = Path(directory) if directory else catalog_dir()
    return parse_presentation(load_json(directory / f"{name}.json"), check)


def load_catalog(directory=None, check=True):
    return {name: load_entry(name, directory, check) for name in catalog_names(directory)}


if __name__ == "__main__":
    export(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "data")
