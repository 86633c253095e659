import json

import pytest

from weilcalc import catalog
from weilcalc.algebroid import validate
from weilcalc.formats import (
    FormatError, catalog_dir, dump_presentation, dumps, load_json, parse_algebroid, parse_presentation, parse_scenario,
)
from weilcalc.imconn import PrimitiveData

DATA = catalog_dir()


def test_shipped_files_match_the_builders(tmp_path):
    catalog.export(tmp_path)
    shipped = sorted(p.relative_to(DATA) for p in DATA.rglob("*.json"))
    built = sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*.json"))
    assert shipped == built
    for rel in built:
        assert (DATA / rel).read_text() == (tmp_path / rel).read_text(), rel


@pytest.mark.parametrize("name", catalog.catalog_names())
def test_presentations_round_trip(name):
    doc = load_json(DATA / f"{name}.json")
    entry = parse_presentation(doc)
    assert dump_presentation(entry) == doc
    assert not validate(entry.alg)
    for ce in entry.conns:
        assert not ce.conn.problems()
        if ce.curving is not None:
            assert not PrimitiveData(ce.conn, ce.curving).problems()


def test_catalog_size():
    names = catalog.catalog_names()
    assert len(names) >= 12
    assert {"am-t2", "coupling-t2-so3", "coupling-t3-abelian", "so3-space"} <= set(names)


@pytest.mark.parametrize("name,key,values", catalog.MUTATIONS)
def test_mutations_are_rejected(name, key, values):
    doc = dump_presentation(catalog.entries()[name])
    doc["structure"][key] = values
    a, b = key.split(",")
    if a != b:
        doc["structure"].pop(f"{b},{a}", None)
    assert validate(parse_algebroid(doc))


def test_missing_mirror_entries_are_filled():
    doc = dump_presentation(catalog.entries()["so3-space"])
    for key in list(doc["structure"]):
        a, b = key.split(",")
        if int(a) > int(b):
            del doc["structure"][key]
    alg = parse_algebroid(doc)
    assert alg.structure_of(1, 0) == {k: -f for k, f in alg.structure_of(0, 1).items()}


def test_controls_are_rejected():
    docs = {p.stem: json.loads(p.read_text()) for p in (DATA / "controls").glob("*.json")}
    assert validate(parse_algebroid(docs["am-r3-nonclosed"])) == ["Jacobi identity fails for (1,2,3)"]
    assert validate(parse_algebroid(docs["so3-space-perturbed"]))
    with pytest.raises(FormatError) as info:
        parse_algebroid(docs["malformed-expression"])
    assert info.value.text == "-x1 +* 2" and info.value.column == 6


def test_json_errors_carry_line_and_column(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "schema": "weilcalc.presentation",\n  "version": 1,,\n}')
    with pytest.raises(FormatError) as info:
        load_json(bad)
    assert (info.value.line, info.value.column) == (3, 16)


@pytest.mark.parametrize("field,value", [("schema", "other"), ("version", 2), ("anchor", [["1"]])])
def test_schema_violations(field, value):
    doc = dump_presentation(catalog.entries()["am-r2"])
    doc[field] = value
    with pytest.raises(FormatError):
        parse_presentation(doc)


def test_scenarios_parse():
    resolve = lambda name: catalog.load_entry(name)
    for path in (DATA / "scenarios").glob("*.json"):
        sc = parse_scenario(load_json(path), resolve)
        assert sc.name == path.stem
    sc = parse_scenario(load_json(DATA / "scenarios" / "t3-eigen.json"), resolve)
    assert sc.mu == -1 and sc.gamma is not None and sc.beta is not None


def test_catalog_directory_override(tmp_path, monkeypatch):
    catalog.export(tmp_path)
    (tmp_path / "am-r2.json").unlink()
    monkeypatch.setenv("WEILCALC_CATALOG", str(tmp_path))
    assert catalog_dir() == tmp_path
    assert "am-r2" not in catalog.catalog_names()


def test_c_and_nabla_encodings_must_agree():
    doc = dump_presentation(catalog.entries()["coupling-t2-so3"])
    spec = doc["im_connections"][0]
    spec["nabla"] = [[["0"] * 3 for _ in range(3)] for _ in range(2)]
    with pytest.raises(FormatError):
        parse_presentation(doc)


def test_dumps_is_stable():
    doc = dump_presentation(catalog.entries()["am-t2"])
    assert dumps(doc) == dumps(json.loads(dumps(doc)))
