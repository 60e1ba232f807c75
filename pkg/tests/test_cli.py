import json
from pathlib import Path

import pytest

from qbk.cli import EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK, UNFAITHFUL_NOTE, run
from qbk.fixtures import fixture_text

BARCAN = "<>exists x . P(x) -> exists x . <>P(x)"


def write(tmp_path: Path, name: str, payload) -> str:
    path = tmp_path / name
    text = payload if isinstance(payload, str) else json.dumps(payload)
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture()
def gap_model(tmp_path: Path) -> str:
    return write(tmp_path, "gap.json", fixture_text("one_point_gap.json"))


def test_nnf_prints_canonical_text(capsys):
    assert run(["nnf", "~(p & ~q)"]) == EXIT_OK
    assert capsys.readouterr().out == "~p | q\n"


def test_print_and_parse(capsys):
    assert run(["print", "((p)) & (q | r)"]) == EXIT_OK
    assert capsys.readouterr().out == "p & (q | r)\n"
    assert run(["parse", "P(c)", "--constants", "c"]) == EXIT_OK
    tree = json.loads(capsys.readouterr().out)
    assert tree == {"type": "Atom", "predicate": "P", "args": [{"const": "c"}]}


def test_translate_modes(capsys):
    assert run(["translate", "~(p -> q)"]) == EXIT_OK
    assert capsys.readouterr().out == "[]p & ~<>q\n"
    assert run(["translate", "--mode", "tau-prime", "~p"]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out == "[](p -> _|_)\n"
    assert f"note: {UNFAITHFUL_NOTE}" in captured.err


def test_translate_rejects_modal_input(capsys):
    assert run(["translate", "[]p"]) == EXIT_ERROR
    assert "modal operator" in capsys.readouterr().err


def test_eval_reports_verdicts(gap_model, capsys):
    assert run(["eval", "p | !p", "--model", gap_model, "--world", "x"]) == EXIT_OK
    assert capsys.readouterr().out == "verified\n"
    assert run(["eval", "p | ~p", "--model", gap_model, "--world", "x"]) == EXIT_NEGATIVE
    assert capsys.readouterr().out == "not verified\n"
    assert run(["eval", "_|_", "--model", gap_model, "--world", "x", "--polarity=-"]) == EXIT_OK
    assert capsys.readouterr().out == "falsified\n"


def test_eval_with_nelson_semantics(gap_model, capsys):
    args = ["eval", "(p -> ~p) -> ~p", "--model", gap_model, "--world", "x", "--semantics", "nelson"]
    assert run(args) == EXIT_NEGATIVE
    assert capsys.readouterr().out == "not verified\n"


def test_eval_assignments(tmp_path, capsys):
    model = {
        "signature": {"predicates": {"P": 1}},
        "worlds": ["w"],
        "domains": {"w": ["a", "b"]},
        "positive": {"w": {"P": [["b"]]}},
    }
    path = write(tmp_path, "m.json", model)
    assert run(["eval", "P(x)", "--model", path, "--world", "w", "--assign", "x=b"]) == EXIT_OK
    assert run(["eval", "P(x)", "--model", path, "--world", "w", "--assign", "x=a"]) == EXIT_NEGATIVE
    capsys.readouterr()
    assert run(["eval", "P(x)", "--model", path, "--world", "w"]) == EXIT_ERROR
    assert "has no value" in capsys.readouterr().err
    assert run(["eval", "P(x)", "--model", path, "--world", "w", "--assign", "x"]) == EXIT_ERROR


def test_validate_model(gap_model, capsys):
    assert run(["validate-model", gap_model, "--class", "QN4bot"]) == EXIT_OK
    assert capsys.readouterr().out == "model is of class QN4bot\n"
    assert run(["validate-model", gap_model, "--class", "QBKo"]) == EXIT_NEGATIVE
    out = capsys.readouterr().out.splitlines()
    assert out == ["model is not of class QBKo:", "  AtomComplete: p is neither verified nor falsified at x"]


def test_validate_model_rejects_broken_documents(tmp_path, capsys):
    path = write(tmp_path, "broken.json", {"signature": {}, "worlds": ["w"], "domains": {"w": []}})
    assert run(["validate-model", path]) == EXIT_ERROR
    assert "non-empty-domain" in capsys.readouterr().err


def test_check_proof_on_shipped_derivation(tmp_path, capsys):
    path = write(tmp_path, "nec.json", fixture_text("necessitation.json"))
    assert run(["check-proof", path]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 7
    assert out[0].split() == ["0", "ok", "N1", "with", "Φ", ":=", "P(c)"]
    assert out[-1] == "derivation is valid: [](P(c) | (P(c) -> _|_))"


def test_check_proof_reports_failing_lines(tmp_path, capsys):
    doc = json.loads(fixture_text("converse_barcan.json"))
    doc["lines"][2]["rule"] = "br1:1,x"
    path = write(tmp_path, "bad.json", doc)
    assert run(["check-proof", path]) == EXIT_NEGATIVE
    out = capsys.readouterr().out.splitlines()
    assert "FAIL" in out[2]
    assert out[-1] == "derivation is invalid"


def test_check_proof_with_lemmas(tmp_path, capsys):
    custom = write(tmp_path, "custom.json", fixture_text("converse_barcan_box.json"))
    doc = {
        "mode": "theorem",
        "signature": {"predicates": {"P": 1}},
        "lines": [
            {"formula": "(exists x . <>P(x)) -> <>exists x . P(x)", "rule": "lemma:converse-barcan"},
            {"formula": "[]forall x . P(x) -> forall x . []P(x)", "rule": "lemma:mine"},
        ],
    }
    path = write(tmp_path, "uses.json", doc)
    assert run(["check-proof", path]) == EXIT_NEGATIVE
    assert "unknown lemma 'mine'" in capsys.readouterr().out
    assert run(["check-proof", path, "--lemma", f"mine={custom}"]) == EXIT_OK


def test_check_proof_discharge_in_json(tmp_path, capsys):
    doc = {
        "mode": "consequence",
        "signature": {"predicates": {"p": 0, "q": 0}},
        "hypotheses": ["p"],
        "lines": [
            {"formula": "p", "rule": "hyp:0"},
            {"formula": "p -> p | q", "rule": "axiom:D1"},
            {"formula": "p | q", "rule": "mp:0,1"},
        ],
    }
    path = write(tmp_path, "cons.json", doc)
    assert run(["--json", "check-proof", path, "--discharge"]) == EXIT_OK
    envelope = json.loads(capsys.readouterr().out)
    assert envelope["command"] == "check-proof"
    assert envelope["verdict"] == "valid"
    assert envelope["diagnostics"] == []
    assert [line["ok"] for line in envelope["result"]["lines"]] == [True, True, True]
    discharged = envelope["result"]["discharged"]
    assert discharged["hypotheses"] == []
    assert discharged["lines"][-1]["formula"] == "p -> p | q"


def test_check_proof_missing_file(tmp_path, capsys):
    assert run(["check-proof", str(tmp_path / "none.json")]) == EXIT_ERROR
    assert "file not found" in capsys.readouterr().err


def test_search_countermodel_to_barcan(capsys):
    assert run(["search-countermodel", "--conclusion", BARCAN, "--max-worlds", "2"]) == EXIT_NEGATIVE
    out = capsys.readouterr().out
    assert out.startswith("countermodel found at world w0 (model #")
    assert run(["search-countermodel", "--conclusion", BARCAN, "--max-worlds", "2", "--class", "QBKsharp"]) == EXIT_OK
    assert capsys.readouterr().out == "no countermodel in QBKsharp with at most 2 world(s) and 2 individual(s)\n"


def test_search_countermodel_json_is_deterministic(capsys):
    argv = ["--json", "search-countermodel", "--conclusion", BARCAN, "--max-worlds", "2"]
    assert run(argv) == EXIT_NEGATIVE
    first = capsys.readouterr().out
    assert run(argv) == EXIT_NEGATIVE
    assert capsys.readouterr().out == first
    envelope = json.loads(first)
    assert envelope["verdict"] == "countermodel"
    assert envelope["witness"]["world"] == "w0"
    assert envelope["witness"]["model"]["access"] == [["w0", "w1"]]


def test_search_countermodel_with_premises_and_signature(capsys):
    argv = [
        "search-countermodel",
        "--premise",
        "P(c)",
        "--conclusion",
        "[]P(c)",
        "--predicates",
        "P:1",
        "--constants",
        "c",
        "--max-worlds",
        "2",
        "--max-domain",
        "1",
    ]
    assert run(argv) == EXIT_NEGATIVE
    assert capsys.readouterr().out.startswith("countermodel found at world w0")


def test_search_limit_errors(capsys):
    assert run(["search-countermodel", "--conclusion", BARCAN, "--max-models", "10"]) == EXIT_ERROR
    assert "exceeds the cap of 10 models" in capsys.readouterr().err
    assert run(["search-countermodel", "--conclusion", BARCAN, "--max-worlds", "0"]) == EXIT_ERROR
    assert "max_worlds" in capsys.readouterr().err


def test_fixture_unfaithful_translation(capsys):
    assert run(["fixtures", "unfaithful-translation", "--max-worlds", "2"]) == EXIT_OK
    captured = capsys.readouterr()
    lines = captured.out.splitlines()
    assert lines[-1] == "reproduced"
    assert all(line.startswith("ok") for line in lines[:-1])
    assert len(lines) == 6
    assert UNFAITHFUL_NOTE in captured.err


def test_fixture_alias_runs_the_same_checks(capsys):
    assert run(["--json", "fixtures", "remark28", "--max-worlds", "2"]) == EXIT_OK
    aliased = json.loads(capsys.readouterr().out)
    assert run(["--json", "fixtures", "unfaithful-translation", "--max-worlds", "2"]) == EXIT_OK
    direct = json.loads(capsys.readouterr().out)
    assert aliased["verdict"] == direct["verdict"] == "reproduced"
    assert aliased["result"] == direct["result"]


def test_fixture_barcan(capsys):
    assert run(["--json", "fixtures", "barcan", "--max-worlds", "2"]) == EXIT_OK
    envelope = json.loads(capsys.readouterr().out)
    assert envelope["verdict"] == "reproduced"
    assert all(check["ok"] for check in envelope["result"])


def test_usage_errors_exit_with_one(capsys):
    assert run(["eval", "p"]) == EXIT_ERROR
    assert capsys.readouterr().err.startswith("usage error:")
    assert run(["frobnicate"]) == EXIT_ERROR
    assert run(["--log-level", "loud", "nnf", "p"]) == EXIT_ERROR
    assert run([]) == EXIT_ERROR


def test_syntax_errors_in_json_mode(capsys):
    assert run(["--json", "nnf", "p &"]) == EXIT_ERROR
    envelope = json.loads(capsys.readouterr().out)
    assert envelope["verdict"] == "error"
    assert envelope["command"] == "nnf"
    assert envelope["diagnostics"]


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        run(["--version"])
    assert excinfo.value.code == 0
    assert capsys.readouterr().out.startswith("qbk ")


def test_logs_go_to_stderr_as_json(capsys):
    assert run(["--log-level", "info", "nnf", "p"]) == EXIT_OK
    captured = capsys.readouterr()
    assert captured.out == "p\n"
    records = [json.loads(line) for line in captured.err.splitlines()]
    started = next(r for r in records if r["message"] == "command started")
    finished = next(r for r in records if r["message"] == "command finished")
    assert started["command"] == "nnf"
    assert started["correlation_id"] == finished["correlation_id"]
    assert finished["verdict"] == "ok"
