import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from netnorm.cli import (
    EXIT_INVALID,
    EXIT_OK,
    EXIT_PARAM,
    InstanceError,
    decode_array,
    dump_report,
    encode_array,
    instance_doc,
    load_schema,
    parse_instance,
    read_instance,
    run,
)

ROOT = Path(__file__).resolve().parents[1]
INSTANCES = ROOT / "instances"
MANIFEST = json.loads((INSTANCES / "manifest.json").read_text())
SAMPLES = sorted(MANIFEST)


def run_json(argv, capsys):
    code = run(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


def sample(name):
    return str(INSTANCES / f"{name}.json")


def test_published_schemas_match_package_copies():
    for name in ("instance", "report"):
        pkg = ROOT / "src" / "netnorm" / "schemas" / f"{name}.schema.json"
        docs = ROOT / "docs" / "schemas" / f"{name}.schema.json"
        assert pkg.read_bytes() == docs.read_bytes()


def test_schemas_are_valid_draft_2020_12():
    for name in ("instance", "report"):
        jsonschema.Draft202012Validator.check_schema(load_schema(name))


@pytest.mark.parametrize("name", SAMPLES)
def test_sample_round_trip(name):
    doc = json.loads(Path(sample(name)).read_text())
    kind, payload = parse_instance(doc)
    assert kind == MANIFEST[name]["kind"]
    again = json.loads(dump_report(instance_doc(kind, payload)))
    assert again == doc


def test_array_codec_round_trip(gen):
    A = gen.standard_normal((2, 3)) + 1j * gen.standard_normal((2, 3))
    np.testing.assert_array_equal(decode_array(encode_array(A)), A)
    v = gen.standard_normal(4)
    np.testing.assert_array_equal(decode_array(encode_array(v)).real, v)


def test_decode_rejects_wrong_entry_count():
    with pytest.raises(InstanceError, match="entries"):
        decode_array({"dim": 2, "entries": [[1, 0]] * 3})


def test_decode_rejects_non_finite():
    with pytest.raises(InstanceError):
        decode_array({"dim": 1, "entries": [["nan", 0]]})


def test_parse_rejects_unknown_kind():
    with pytest.raises(InstanceError):
        parse_instance({"kind": "tensor"})


def test_hsep_projector_example(capsys):
    code, rep = run_json(["hsep", "--delta", "0.5", sample("projector_n1")], capsys)
    assert code == EXIT_OK
    assert rep["value"] == pytest.approx(1.0)
    jsonschema.validate(rep, load_schema("report"))


def test_two_to_q_consistency_example(capsys):
    code, rep = run_json(["two-to-q", "--q", "2", "--delta", "0.1", sample("random_3x3")], capsys)
    A = decode_array(json.loads(Path(sample("random_3x3")).read_text())["matrix"])
    assert code == EXIT_OK
    assert rep["value"] == pytest.approx(np.linalg.svd(A, compute_uv=False)[0] ** 2, abs=1e-9)


def test_channel_norm_depolarizing_example(capsys):
    code, rep = run_json(["channel-norm", "--alpha", "2", "--delta", "0.2", sample("depolarizing_d2")], capsys)
    assert code == EXIT_OK
    assert abs(rep["value"] - 2**-0.5) <= rep["attained_delta"]


def test_report_embeds_reproduction_state(capsys):
    _, rep = run_json(["hsep", "--k", "10", "--seed", "7", sample("random_locc_n3")], capsys)
    for key in ("tool_version", "seed", "k", "config", "instance_sha256"):
        assert key in rep
    assert rep["seed"] == 7 and rep["config"]["cli"]["k"] == 10
    assert rep["config"]["solver"]["tol"] == 1e-4


def test_validate_reports_violations(capsys):
    code = run(["validate", sample("invalid_povm")])
    doc = json.loads(capsys.readouterr().out)
    assert code == EXIT_INVALID
    assert not doc["valid"]
    assert any("sum X" in v["rule"] for v in doc["violations"])


def test_validate_ok(capsys):
    code = run(["validate", sample("projector_n1")])
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out)["valid"]


def test_estimator_on_invalid_instance_exits_2(capsys):
    assert run(["hsep", "--delta", "0.5", sample("invalid_povm")]) == EXIT_INVALID
    assert "sum X <= I" in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text('{\n  "kind": "locc",\n  "d1": 2,,\n}')
    assert run(["validate", str(f)]) == EXIT_INVALID
    assert "line 3" in capsys.readouterr().err


def test_schema_violation_reports_field(tmp_path, capsys):
    doc = json.loads(Path(sample("projector_n1")).read_text())
    doc["d1"] = "two"
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(doc))
    assert run(["hsep", "--delta", "0.5", str(f)]) == EXIT_INVALID
    assert "d1" in capsys.readouterr().err


def test_missing_file_exits_2(capsys):
    assert run(["validate", "/nonexistent/instance.json"]) == EXIT_INVALID


def test_missing_delta_exits_3(capsys):
    assert run(["hsep", sample("projector_n1")]) == EXIT_PARAM
    assert "--delta" in capsys.readouterr().err


def test_unsupported_alpha_exits_3(capsys):
    assert run(["channel-norm", "--alpha", "1", "--delta", "0.1", sample("depolarizing_d2")]) == EXIT_PARAM


def test_wrong_kind_exits_2(capsys):
    assert run(["two-to-q", "--q", "2", "--delta", "0.1", sample("projector_n1")]) == EXIT_INVALID


def test_bad_seed_exits_3(capsys):
    assert run(["hsep", "--delta", "0.5", "--seed", "-1", sample("projector_n1")]) == EXIT_PARAM


def test_out_flag_writes_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run(["hsep", "--delta", "0.5", "--out", str(out), sample("projector_n1")]) == EXIT_OK
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["value"] == pytest.approx(1.0)


def test_oracle_command(capsys):
    code, doc = run_json(["oracle", "--q", "2", sample("identity_2")], capsys)
    assert code == EXIT_OK and doc["value"] == pytest.approx(1.0)


def test_lemma_check_quick(capsys):
    code, doc = run_json(["lemma-check", "--quick"], capsys)
    assert code == EXIT_OK and doc["passed"]
    assert {c["name"] for c in doc["checks"]} >= {"net-covering", "hoeffding", "type", "symmetrization", "azuma"}


def test_read_instance_hash_is_stable():
    a = read_instance(sample("classical_locc"))[2]
    b = read_instance(sample("classical_locc"))[2]
    assert a == b and len(a) == 64


@pytest.mark.parametrize("name", [n for n in SAMPLES if MANIFEST[n]["runs"]])
def test_sample_runs_succeed_and_match_schema(name, capsys):
    schema = load_schema("report")
    for argv in MANIFEST[name]["runs"]:
        code, rep = run_json(argv + ["--threads", "1", sample(name)], capsys)
        assert code == EXIT_OK, argv
        jsonschema.validate(rep, schema)
