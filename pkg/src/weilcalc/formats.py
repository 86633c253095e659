"""JSON-shaped file formats for presentations and Yang-Mills scenarios.

Frames, coordinates and ideals are 1-based in files and 0-based in memory.
Forms are lists of records {"indices": [...], "frame": s, "expr": "..."}.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from gmpy2 import mpq

from .algebroid import AlgebroidPresentation, IdealBundle, Representation, adjoint_rep
from .funcring import Affine, ParseError, Torus, format_expr
from .geometry import (
    FiberMetric, LinearConnection, Metric, TrivBundle, VForm, form_from_records, form_to_records,
)
from .imconn import GaugeMap, IMConnection, split_C

PRESENTATION_SCHEMA = "weilcalc.presentation"
SCENARIO_SCHEMA = "weilcalc.ym-scenario"
VERSION = 1


class FormatError(ValueError):
    """Malformed file content; ``where`` names the offending field.

    ``line``/``column`` locate JSON syntax errors in the file; ``text``/``column``
    locate an expression error inside the offending string.
    """

    def __init__(self, message, where="", text=None, line=None, column=None):
        self.where = where
        self.text = text
        self.line = line
        self.column = column
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class ConnEntry:
    ideal: int
    conn: IMConnection
    curving: object = None


@dataclass
class Entry:
    """A catalog presentation with everything attached to it."""
    name: str
    alg: AlgebroidPresentation
    ideals: list = field(default_factory=list)
    reps: list = field(default_factory=list)
    conns: list = field(default_factory=list)
    splittings: list = field(default_factory=list)
    gauge_maps: list = field(default_factory=list)
    rep_specs: list = field(default_factory=list)
    description: str = ""


@dataclass
class SplittingEntry:
    name: str
    ideal: int
    leaf: tuple
    sigma: list


@dataclass
class GaugeEntry:
    name: str
    conn: int
    phi: GaugeMap
    kappa: object = None


# -- low-level helpers ------------------------------------------------------------

def _model(spec, where="model"):
    try:
        kind, dim = spec["kind"], int(spec["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError("model needs kind and dim", where) from exc
    if kind == "torus":
        return Torus(dim)
    if kind == "affine":
        return Affine(dim)
    raise FormatError(f"unknown model kind {kind!r}", where)


def _expr(model, text, where):
    try:
        return model.parse(str(text))
    except ParseError as exc:
        raise FormatError(str(exc), where, text=str(text), column=exc.column) from exc


def _rational(text, where):
    try:
        return mpq(str(text))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"not a rational number: {text!r}", where) from exc


def _form(model, bundle, degree, records, where):
    try:
        for rec in records:
            if len(rec["indices"]) != degree:
                raise FormatError(f"expected {degree} indices", where)
            if not 1 <= int(rec["frame"]) <= bundle.rank:
                raise FormatError(f"frame {rec['frame']} out of range", where)
            if any(not 1 <= int(i) <= model.dim for i in rec["indices"]):
                raise FormatError("coordinate index out of range", where)
        return form_from_records(bundle, degree, records, lambda t: _expr(model, t, where))
    except (KeyError, TypeError) as exc:
        raise FormatError("form records need indices, frame and expr", where) from exc


def _records(form):
    return form_to_records(form)


def _exprs(values):
    return [format_expr(f) for f in values]


def _frame_key(text, rank, where):
    try:
        a = int(text)
    except ValueError as exc:
        raise FormatError(f"bad frame key {text!r}", where) from exc
    if not 1 <= a <= rank:
        raise FormatError(f"frame {a} out of range", where)
    return a - 1


# -- presentations -------------------------------------------------------------------

def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", str(path), line=exc.lineno, column=exc.colno) from exc
    except OSError as exc:
        raise FormatError(str(exc), str(path)) from exc


def parse_algebroid(data):
    """The algebroid part of a presentation document."""
    if data.get("schema") != PRESENTATION_SCHEMA:
        raise FormatError(f"schema must be {PRESENTATION_SCHEMA!r}", "schema")
    if data.get("version") != VERSION:
        raise FormatError(f"unsupported version {data.get('version')!r}", "version")
    model = _model(data.get("model", {}))
    try:
        rank = int(data["bundle_rank"])
    except (KeyError, ValueError) as exc:
        raise FormatError("bundle_rank is required", "bundle_rank") from exc
    anchor_rows = data.get("anchor", [])
    if len(anchor_rows) != rank:
        raise FormatError("anchor needs one row per frame", "anchor")
    anchor = []
    for a, row in enumerate(anchor_rows):
        if len(row) != model.dim:
            raise FormatError("anchor rows need one entry per coordinate", f"anchor[{a + 1}]")
        anchor.append(tuple(_expr(model, t, f"anchor[{a + 1}]") for t in row))
    structure = {}
    for key, col in data.get("structure", {}).items():
        where = f"structure[{key}]"
        try:
            a, b = (int(x) - 1 for x in key.split(","))
        except ValueError as exc:
            raise FormatError("structure keys look like \"a,b\"", where) from exc
        if not (0 <= a < rank and 0 <= b < rank):
            raise FormatError("frame out of range", where)
        if len(col) != rank:
            raise FormatError("structure entries list one expression per frame", where)
        structure[(a, b)] = {k: _expr(model, t, where) for k, t in enumerate(col)}
    for (a, b), col in list(structure.items()):
        if (b, a) not in structure:
            structure[(b, a)] = {k: -f for k, f in col.items()}
    return AlgebroidPresentation(model, rank, anchor, structure, data.get("name", ""))


def parse_presentation(data, check=True):
    alg = parse_algebroid(data)
    model, rank = alg.model, alg.rank
    entry = Entry(data.get("name", ""), alg, description=data.get("description", ""))
    for i, frames in enumerate(data.get("ideals", [])):
        where = f"ideals[{i + 1}]"
        if any(not 1 <= int(a) <= rank for a in frames):
            raise FormatError("ideal frame out of range", where)
        entry.ideals.append(IdealBundle(alg, [int(a) - 1 for a in frames]))
    for i, spec in enumerate(data.get("representations", [])):
        entry.rep_specs.append(spec)
        entry.reps.append((spec.get("name", f"rep{i + 1}"), _representation(entry, spec, f"representations[{i + 1}]")))
    for i, spec in enumerate(data.get("im_connections", [])):
        entry.conns.append(_im_connection(entry, spec, f"im_connections[{i + 1}]", check))
    for i, spec in enumerate(data.get("splittings", [])):
        where = f"splittings[{i + 1}]"
        ideal = _ideal_ref(entry, spec.get("ideal"), where)
        leaf = tuple(int(c) - 1 for c in spec.get("leaf", []))
        sigma = [tuple(_expr(model, t, where) for t in row) for row in spec.get("sigma", [])]
        if any(len(row) != rank for row in sigma):
            raise FormatError("each lift lists one expression per frame", where)
        entry.splittings.append(SplittingEntry(spec.get("name", f"splitting{i + 1}"), ideal, leaf, sigma))
    for i, spec in enumerate(data.get("gauge_maps", [])):
        where = f"gauge_maps[{i + 1}]"
        conn_index = int(spec.get("im_connection", 1)) - 1
        M = [[_rational(x, where) for x in row] for row in spec["M"]]
        shift = [_rational(x, where) for x in spec.get("shift", [0] * model.dim)]
        phi = [[_expr(model, t, where) for t in row] for row in spec["phi"]]
        phi_inv = None
        if "phi_inv" in spec:
            phi_inv = [[_expr(model, t, where) for t in row] for row in spec["phi_inv"]]
        kappa = None
        if "metric_k" in spec and entry.conns:
            bundle = entry.conns[conn_index].conn.ideal.bundle
            kappa = FiberMetric(bundle, [[_expr(model, t, where) for t in row] for row in spec["metric_k"]])
        gm = GaugeMap(alg, M, shift, phi, phi_inv, spec.get("name", ""))
        entry.gauge_maps.append(GaugeEntry(spec.get("name", f"gauge{i + 1}"), conn_index, gm, kappa))
    return entry


def _ideal_ref(entry, ref, where):
    try:
        idx = int(ref) - 1
        entry.ideals[idx]
    except (TypeError, ValueError, IndexError) as exc:
        raise FormatError(f"unknown ideal {ref!r}", where) from exc
    if idx < 0:
        raise FormatError(f"unknown ideal {ref!r}", where)
    return idx


def _representation(entry, spec, where):
    alg = entry.alg
    if "ideal" in spec:
        return adjoint_rep(alg, entry.ideals[_ideal_ref(entry, spec["ideal"], where)])
    m = int(spec.get("rank", 1))
    table = [{} for _ in range(alg.rank)]
    for key, matrix in spec.get("table", {}).items():
        a = _frame_key(key, alg.rank, where)
        if len(matrix) != m or any(len(row) != m for row in matrix):
            raise FormatError("representation matrices must be rank x rank", where)
        for mu, row in enumerate(matrix):
            for nu, t in enumerate(row):
                f = _expr(alg.model, t, where)
                if f.terms:
                    table[a].setdefault(mu, {})[nu] = f
    return Representation(alg, TrivBundle(alg.model, m), table)


def _im_connection(entry, spec, where, check):
    alg = entry.alg
    model = alg.model
    idx = _ideal_ref(entry, spec.get("ideal"), where)
    ideal = entry.ideals[idx]
    k = ideal.rank
    v = {}
    for key, vals in spec.get("v", {}).items():
        a = _frame_key(key, alg.rank, where)
        if len(vals) != k:
            raise FormatError("symbol values list one expression per ideal frame", where)
        v[a] = tuple(_expr(model, t, where) for t in vals)
    C = None
    if "C" in spec:
        C = {}
        for key, recs in spec["C"].items():
            C[_frame_key(key, alg.rank, where)] = _form(model, ideal.bundle, 1, recs, where)
    if "nabla" in spec:
        gamma = [{} for _ in range(model.dim)]
        rows = spec["nabla"]
        if len(rows) != model.dim:
            raise FormatError("nabla lists one matrix per coordinate", where)
        for i, matrix in enumerate(rows):
            for s, row in enumerate(matrix):
                for t, text in enumerate(row):
                    f = _expr(model, text, where)
                    if f.terms:
                        gamma[i].setdefault(s, {})[t] = f
        nabla = LinearConnection(ideal.bundle, gamma)
        U = {}
        for key, recs in spec.get("U", {}).items():
            U[_frame_key(key, alg.rank, where)] = _form(model, ideal.bundle, 1, recs, where)
        from_split = split_C(alg, ideal, v, nabla, U)
        if C is None:
            C = from_split
        else:
            for a in range(alg.rank):
                left = C.get(a, VForm.zero(ideal.bundle, 1))
                if left != from_split[a]:
                    raise FormatError(f"C and (nabla, U) disagree on frame {a + 1}", where)
    if C is None:
        raise FormatError("an IM connection needs C or nabla", where)
    conn = IMConnection.from_tables(alg, ideal, C, v, check=check)
    curving = None
    if "curving" in spec:
        curving = _form(model, ideal.bundle, 2, spec["curving"], where)
    return ConnEntry(idx, conn, curving)


def load_presentation(path, check=True):
    return parse_presentation(load_json(path), check)


# -- serialization --------------------------------------------------------------------

def dump_presentation(entry):
    """Document for ``entry``; connections are written in the C encoding."""
    alg = entry.alg
    model = alg.model
    doc = {
        "schema": PRESENTATION_SCHEMA,
        "version": VERSION,
        "name": entry.name,
        "description": entry.description,
        "model": {"kind": model.kind, "dim": model.dim},
        "bundle_rank": alg.rank,
        "anchor": [_exprs(row) for row in alg.anchor],
    }
    structure = {}
    for a in range(alg.rank):
        for b in range(a + 1, alg.rank):
            col = alg.structure_of(a, b)
            if col:
                structure[f"{a + 1},{b + 1}"] = _exprs(alg.bracket_frames(a, b))
    doc["structure"] = structure
    doc["ideals"] = [[a + 1 for a in ideal.frames] for ideal in entry.ideals]
    doc["representations"] = list(entry.rep_specs)
    conns = []
    for ce in entry.conns:
        conn = ce.conn
        C = {}
        v = {}
        for a in range(alg.rank):
            form = conn.C(a)
            if not form.is_zero():
                C[str(a + 1)] = _records(form)
            if any(f.terms for f in conn.v(a)):
                v[str(a + 1)] = _exprs(conn.v(a))
        item = {"ideal": ce.ideal + 1, "C": C, "v": v}
        if ce.curving is not None:
            item["curving"] = _records(ce.curving)
        conns.append(item)
    doc["im_connections"] = conns
    doc["splittings"] = [
        {"name": s.name, "ideal": s.ideal + 1, "leaf": [c + 1 for c in s.leaf],
         "sigma": [_exprs(row) for row in s.sigma]}
        for s in entry.splittings
    ]
    maps = []
    for g in entry.gauge_maps:
        item = {"name": g.name, "im_connection": g.conn + 1,
                "M": [[str(x) for x in row] for row in g.phi.M],
                "shift": [str(x) for x in g.phi.shift],
                "phi": [_exprs(row) for row in g.phi.phi]}
        if g.kappa is not None:
            item["metric_k"] = [_exprs(row) for row in g.kappa.kappa]
        maps.append(item)
    doc["gauge_maps"] = maps
    return doc


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


# -- Yang-Mills scenarios -------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    entry: Entry
    conn: object
    curving: object
    metric: Metric
    kappa: object
    mu: object
    splitting: object = None
    gamma: object = None
    beta: object = None


def parse_scenario(data, resolve):
    """``resolve(name)`` returns the Entry of a catalog presentation."""
    if data.get("schema") != SCENARIO_SCHEMA:
        raise FormatError(f"schema must be {SCENARIO_SCHEMA!r}", "schema")
    if data.get("version") != VERSION:
        raise FormatError(f"unsupported version {data.get('version')!r}", "version")
    ref = data.get("algebroid")
    if isinstance(ref, dict):
        entry = parse_presentation(ref)
    elif isinstance(ref, str):
        entry = resolve(ref)
    else:
        raise FormatError("algebroid must be a catalog name or an inline presentation", "algebroid")
    model = entry.alg.model
    conn_index = int(data.get("im_connection", 1)) - 1
    if not 0 <= conn_index < len(entry.conns):
        raise FormatError("unknown IM connection", "im_connection")
    ce = entry.conns[conn_index]
    bundle = ce.conn.ideal.bundle
    curving = ce.curving
    if "curving" in data:
        curving = _form(model, bundle, 2, data["curving"], "curving")
    orientation = int(data.get("orientation", 1))
    try:
        g = [[_rational(x, "metric_g") for x in row] for row in data["metric_g"]]
        metric = Metric(g, orientation=orientation)
    except KeyError as exc:
        raise FormatError("metric_g is required", "metric_g") from exc
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(str(exc), "metric_g") from exc
    k_rows = data.get("metric_k", [[1 if i == j else 0 for j in range(bundle.rank)] for i in range(bundle.rank)])
    try:
        kappa = FiberMetric(bundle, [[_expr(model, x, "metric_k") for x in row] for row in k_rows])
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(str(exc), "metric_k") from exc
    mu = _rational(data.get("mu", -1), "mu")
    sc = Scenario(data.get("name", ""), entry, ce.conn, curving, metric, kappa, mu)
    if "splitting" in data:
        idx = int(data["splitting"]) - 1
        if not 0 <= idx < len(entry.splittings):
            raise FormatError("unknown splitting", "splitting")
        sc.splitting = entry.splittings[idx]
    tangent = data.get("tangent")
    if tangent:
        sc.gamma = _form(model, bundle, 1, tangent.get("gamma", []), "tangent.gamma")
        sc.beta = _form(model, bundle, 2, tangent.get("beta", []), "tangent.beta")
    return sc


def dump_scenario(name, algebroid, metric_g, mu, im_connection=1, metric_k=None, curving=None,
                  orientation=1, splitting=None, tangent=None):
    doc = {"schema": SCENARIO_SCHEMA, "version": VERSION, "name": name, "algebroid": algebroid,
           "im_connection": im_connection,
           "metric_g": [[str(x) for x in row] for row in metric_g], "mu": str(mpq(mu)),
           "orientation": orientation}
    if metric_k is not None:
        doc["metric_k"] = [[str(x) for x in row] for row in metric_k]
    if curving is not None:
        doc["curving"] = _records(curving)
    if splitting is not None:
        doc["splitting"] = splitting
    if tangent is not None:
        doc["tangent"] = {"gamma": _records(tangent[0]), "beta": _records(tangent[1])}
    return doc


def catalog_dir():
    import os
    env = os.environ.get("WEILCALC_CATALOG")
    return Path(env) if env else Path(__file__).parent / "data"
