from __future__ import annotations

import io
import json
import re
import subprocess
import sys

import pytest

from hfsets import parse_set, v_stage
from hfsets.cli import run

ERROR_LINE = re.compile(r"error\[E_[A-Z_]+\]: \S.*")


def call(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    status = run(list(argv), out, err)
    return status, out.getvalue(), err.getvalue()


def expect_error(code: str, *argv: str) -> str:
    status, out, err = call(*argv)
    assert status == 1
    assert out == ""
    lines = err.splitlines()
    assert len(lines) == 1 and ERROR_LINE.fullmatch(lines[0])
    assert lines[0].startswith(f"error[{code}]")
    return lines[0]


@pytest.fixture
def chain(tmp_path):
    path = tmp_path / "chain.edges"
    path.write_text("nodes 3\n0 1\n0 2\n1 2\n")
    return str(path)


def test_eval_with_empty_predicate():
    assert call("eval", "--universe", "V3", "--pred", "{}", "--formula", "exists x . A(x)") == (0, "false\n", "")


def test_eval_variants(tmp_path):
    assert call("eval", "--universe", "V2", "--pred", "{{}}", "--formula", "exists x . A(x)")[1] == "true\n"
    f = tmp_path / "f.txt"
    f.write_text("exists x in $a . exists y in x . true\n")
    assert call("eval", "--universe", "V2", "--formula-file", str(f), "--param", "a={{},{{}}}")[1] == "true\n"
    assert call("eval", "--universe", "{{}}", "--formula", "x = {}", "--var", "x={}")[1] == "true\n"
    pred = tmp_path / "a.txt"
    pred.write_text("{{}}")
    assert call("eval", "--universe", f"L3[{pred}]", "--formula", "exists x . A(x)")[1] == "true\n"


def test_eval_json_report():
    status, out, _ = call("--json", "eval", "--universe", "V1", "--formula", "forall x . x = {}")
    assert status == 0
    assert json.loads(out) == {"ok": True, "command": "eval", "value": True, "formula": "forall x . x = {}"}


def test_build_formats():
    assert call("build", "--stage", "V2")[1] == "{{},{{}}}\n"
    assert call("build", "--stage", "V3", "--format", "code")[1] == "15\n"
    assert call("build", "--stage", "L4", "--format", "size")[1] == "16\n"
    status, out, _ = call("build", "--stage", "V5", "--format", "code")
    assert status == 0 and int(out) == v_stage(5).code


def test_build_witnesses():
    status, out, _ = call("build", "--stage", "L3", "--witnesses")
    assert status == 0
    lines = out.splitlines()
    assert len(lines) == 4
    assert [parse_set(line.split("\t")[0]) for line in lines] == list(v_stage(3).children)
    expect_error("E_USAGE", "build", "--stage", "V3", "--witnesses")


def test_collapse_chain(chain):
    status, out, _ = call("collapse", "--graph", chain)
    assert status == 0
    assert out.splitlines() == ["0\t{}", "1\t{{}}", "2\t{{},{{}}}", "image\t{{},{{}},{{},{{}}}}"]


def test_collapse_rejections(tmp_path):
    cyc = tmp_path / "cycle.edges"
    cyc.write_text("nodes 2\n0 1\n1 0\n")
    expect_error("E_NOT_WELL_FOUNDED", "collapse", "--graph", str(cyc))
    twins = tmp_path / "twins.edges"
    twins.write_text("nodes 2\n")
    expect_error("E_NOT_EXTENSIONAL", "collapse", "--graph", str(twins))
    bad = tmp_path / "bad.edges"
    bad.write_text("nodes 2\n0 5\n")
    expect_error("E_EDGE_LIST", "collapse", "--graph", str(bad))
    expect_error("E_IO", "collapse", "--graph", str(tmp_path / "missing"))


def test_encode_then_collapse(tmp_path):
    status, out, _ = call("encode", "--set", "{{},{{}}}", "--seed", "3")
    assert status == 0
    path = tmp_path / "g.edges"
    path.write_text(out)
    status, table, _ = call("collapse", "--graph", str(path))
    assert table.splitlines()[-1] == "image\t{{},{{}}}"
    expect_error("E_NOT_TRANSITIVE", "encode", "--set", "{{{}}}")
    assert call("encode", "--set", "{{{}}}", "--close")[0] == 0


def test_absolute_command():
    status, out, _ = call(
        "absolute", "--inner", "V2", "--outer", "V4", "--formula", "forall x in $a . x = x", "--param", "a={{}}"
    )
    assert (status, out) == (0, "inner=true outer=true agree\n")
    line = expect_error("E_UNBOUNDED", "absolute", "--inner", "V1", "--outer", "V2", "--formula", "exists x . true")
    assert line.count("E_UNBOUNDED") == 1
    expect_error("E_PARAM_ESCAPE", "absolute", "--inner", "V1", "--outer", "V3", "--formula", "x = x", "--var", "x={{}}")


def test_fuzz_command():
    assert call("fuzz", "--seed", "0", "--trials", "1000") == (0, "1000/1000 agree\n", "")
    status, out, _ = call("--json", "fuzz", "--seed", "1", "--trials", "20")
    data = json.loads(out)
    assert status == 0 and data["agreements"] == 20 and data["disagreements"] == []


def test_complete_command(tmp_path):
    one = tmp_path / "one.theory"
    one.write_text("sig\nexists x . forall y . y = x\n")
    status, out, _ = call("complete", "--theory", str(one), "--size-cap", "4", "--depth-cap", "4")
    assert status == 0 and out.startswith("complete up to domain size 4 and depth 4")
    empty = tmp_path / "empty.theory"
    empty.write_text("sig R/2\n")
    status, out, _ = call("--json", "complete", "--theory", str(empty))
    data = json.loads(out)
    assert data["verdict"] == "counterexample"
    assert data["model_true"].startswith("sig R/2\nsize ")
    bottom = tmp_path / "false.theory"
    bottom.write_text("false\n")
    assert call("complete", "--theory", str(bottom))[1].startswith("inconsistent")
    broken = tmp_path / "broken.theory"
    broken.write_text("sig R/2\nforall x . R(x\n")
    assert expect_error("E_PARSE", "complete", "--theory", str(broken)).startswith("error[E_PARSE]: 2:")
    expect_error("E_CAPACITY", "complete", "--theory", str(one), "--size-cap", "9")


def test_translate_command(tmp_path):
    m = tmp_path / "chain.structure"
    m.write_text("sig R/2\nsize 2\nR 0 1\n")
    status, out, _ = call(
        "translate", "--sentence", "exists v . forall w . R(v,w) | v = w", "--structure", str(m), "--check"
    )
    lines = out.splitlines()
    assert status == 0 and lines[-1] == "# direct=true bounded=true"
    status, out, _ = call("--json", "translate", "--sentence", "forall v . R(v,v)", "--structure", str(m))
    data = json.loads(out)
    assert data["bounded"] and data["fo_value"] is False and data["set_value"] is False
    expect_error("E_SIGNATURE", "translate", "--sentence", "exists v . S(v)", "--structure", str(m))
    bad = tmp_path / "bad.structure"
    bad.write_text("sig R/2\nsize 2\nR 0 7\n")
    expect_error("E_STRUCTURE", "translate", "--sentence", "true", "--structure", str(bad))


@pytest.mark.parametrize(
    "code, argv",
    [
        ("E_PARSE", ["eval", "--universe", "V2", "--formula", "exists x ."]),
        ("E_SET_LITERAL", ["eval", "--universe", "V2", "--formula", "x = x", "--var", "x={"]),
        ("E_UNIVERSE", ["eval", "--universe", "W2", "--formula", "true"]),
        ("E_CAPACITY", ["eval", "--universe", "V9", "--formula", "true"]),
        ("E_UNBOUND", ["eval", "--universe", "V2", "--formula", "x = x"]),
        ("E_USAGE", ["eval", "--universe", "V2"]),
        ("E_USAGE", ["eval", "--universe", "V2", "--formula", "x = x", "--var", "x"]),
    ],
)
def test_error_paths_print_one_coded_line(code, argv):
    expect_error(code, *argv)


def test_json_errors_are_structured():
    status, out, err = call("--json", "eval", "--universe", "V2", "--formula", "exists")
    assert status == 1 and json.loads(out)["error"] == "E_PARSE"
    assert err.startswith("error[E_PARSE]")


def test_argparse_errors(capsys):
    assert run(["frobnicate"]) == 1
    err = capsys.readouterr().err
    assert err.splitlines()[-1].startswith("error[E_USAGE]: ")
    assert run(["fuzz", "--bogus"]) == 1
    assert run([]) == 1


def test_output_is_deterministic():
    first = call("--json", "fuzz", "--seed", "7", "--trials", "50")
    assert call("--json", "fuzz", "--seed", "7", "--trials", "50") == first


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hfsets", "build", "--stage", "V1"], capture_output=True, text=True, check=False
    )
    assert (proc.returncode, proc.stdout) == (0, "{{}}\n")
