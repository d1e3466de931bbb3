import json
import os
import stat
from importlib import resources
from pathlib import Path

import jsonschema
import pytest
from click.testing import CliRunner

from protax import taxonomy as tx
from protax.cli import main
from protax.fixtures_path import NAMES, fixture

DATA = Path(__file__).parent / "data"


def schema(name):
    return json.loads(resources.files("protax").joinpath("schemas", name).read_text())


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env)


def test_check_ok():
    r = run("check", fixture("nsl"))
    assert r.exit_code == 0
    assert "ok" in r.output


def test_check_missing_file():
    r = run("check", DATA / "does_not_exist.dsl")
    assert r.exit_code == 2


def test_check_reports_diagnostics_with_positions(tmp_path):
    src = tmp_path / "bad.dsl"
    src.write_text('protocol "bad" {\n  roles {\n    A(a: identity) {\n      send zork(a);\n    }\n  }\n  claims { }\n}\n')
    r = run("check", src)
    assert r.exit_code == 1
    assert f"{src}:4:" in r.stderr


def test_explore_json_violated_matches_schema():
    r = run("explore", DATA / "leak.dsl", "--json")
    assert r.exit_code == 1
    out = json.loads(r.stdout)
    jsonschema.validate(out, schema("explore.schema.json"))
    (claim,) = out["claims"]
    assert claim["status"] == "violated"
    assert claim["witness"]["events"]


def test_explore_json_holds_matches_schema():
    r = run("explore", fixture("secrecy"), "--json")
    assert r.exit_code == 0
    out = json.loads(r.stdout)
    jsonschema.validate(out, schema("explore.schema.json"))
    assert out["bounds"] == {"sessions": 2, "depth": 4, "max_trace": 24}


def test_explore_unlinkability_witness_matches_schema():
    r = run("explore", DATA / "linkable.dsl", "--json")
    assert r.exit_code == 1
    jsonschema.validate(json.loads(r.stdout), schema("explore.schema.json"))


def test_zero_sessions_warns():
    r = run("explore", fixture("nsl"), "--sessions", "0", "--json")
    assert r.exit_code == 0
    out = json.loads(r.stdout)
    jsonschema.validate(out, schema("explore.schema.json"))
    assert out["warnings"]
    assert "warning" in r.stderr
    assert all(c["status"] == "holds_up_to_bounds" for c in out["claims"])


def test_explore_bounds_exceeded():
    r = run("explore", fixture("nsl"), "--max-trace", "1")
    assert r.exit_code == 4


def test_negative_bounds_rejected():
    assert run("explore", fixture("nsl"), "--depth", "-1").exit_code == 2


def test_explore_table_prints_attack():
    r = run("explore", DATA / "leak.dsl")
    assert r.exit_code == 1
    assert "violated" in r.output and "attack:" in r.output


@pytest.mark.parametrize("name", NAMES)
def test_report_matches_schema(name):
    r = run("report", fixture(name), "--json")
    assert r.exit_code == 0
    out = json.loads(r.stdout)
    jsonschema.validate(out, schema("report.schema.json"))
    assert set(out["categories"]) | set(out["uncovered"]) == set(tx.CATEGORIES)


def test_report_text_for_nsl():
    r = run("report", fixture("nsl"))
    assert "Authentication: 4 kinds claimed" in r.output
    assert "no Privacy claim" in r.output


def test_report_without_claims():
    r = run("report", DATA / "empty.dsl", "--json")
    out = json.loads(r.stdout)
    assert out["categories"] == {}
    assert out["uncovered"] == list(tx.CATEGORIES)


def test_compile_writes_models_and_sidecars(tmp_path):
    r = run("compile", fixture("signcryption"), "--out", tmp_path)
    assert r.exit_code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["signcryption.pv", "signcryption.pv.prov.json",
                     "signcryption.spthy", "signcryption.spthy.prov.json"]
    rows = json.loads((tmp_path / "signcryption.pv.prov.json").read_text())
    assert [r["name"] for r in rows] == ["secrecy_0", "unforgeability_1"]


def test_compile_is_byte_deterministic(tmp_path):
    outs = []
    for i in range(3):
        d = tmp_path / str(i)
        assert run("compile", fixture("nsl"), "--out", d).exit_code == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert outs[0] == outs[1] == outs[2]


def test_compile_unsupported_dialect(tmp_path):
    r = run("compile", DATA / "peer_key.dsl", "--target", "proverif", "--out", tmp_path)
    assert r.exit_code == 1
    r = run("compile", DATA / "peer_key.dsl", "--target", "tamarin", "--out", tmp_path)
    assert r.exit_code == 0


def test_compile_and_report_agree(tmp_path):
    for name in NAMES:
        rep = json.loads(run("report", fixture(name), "--json").stdout)
        assert run("compile", fixture(name), "--target", "proverif", "--out", tmp_path).exit_code == 0
        rows = json.loads((tmp_path / f"{name}.pv.prov.json").read_text())
        claimed = sorted((c["claim"], c["kind"]) for rs in rep["categories"].values() for c in rs)
        assert sorted((r["claim"], r["kind"]) for r in rows) == claimed


def fake_prover(tmp_path, verdict):
    script = tmp_path / "fake-proverif"
    script.write_text(f"#!/bin/sh\necho 'RESULT not attacker(s[]) {verdict}.'\n")
    script.chmod(script.stat().st_mode | stat.S_IEXEC)
    return {"PROTAX_PROVERIF": str(script), "PATH": os.environ.get("PATH", "")}


def test_gate_agreement(tmp_path):
    env = fake_prover(tmp_path, "is false")
    r = run("compile", DATA / "leak.dsl", "--target", "proverif", "--with-provers", "--out", tmp_path / "o", env=env)
    assert r.exit_code == 0
    rows = json.loads((tmp_path / "o" / "leak.pv.prov.json").read_text())
    assert rows[0]["prover_verdict"] == "false"


def test_gate_disagreement(tmp_path):
    env = fake_prover(tmp_path, "is true")
    r = run("compile", DATA / "leak.dsl", "--target", "proverif", "--with-provers", "--out", tmp_path / "o", env=env)
    assert r.exit_code == 3


def test_gate_skipped_without_prover(tmp_path):
    env = {"PROTAX_PROVERIF": str(tmp_path / "missing"), "PATH": str(tmp_path)}
    r = run("compile", DATA / "leak.dsl", "--target", "proverif", "--with-provers", "--out", tmp_path / "o", env=env)
    assert r.exit_code == 0
    assert "gate skipped" in r.stderr
