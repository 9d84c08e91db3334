import io
import json
import subprocess
import sys

import pytest

from pirho.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def pi(tmp_path):
    def write(text, name="p.pi"):
        f = tmp_path / name
        f.write_text(text, encoding="utf-8")
        return str(f)
    return write


def test_parse_prints_canonical_form(pi):
    code, out, _ = call("parse", pi("-- a comment\nnew x.(x!x.0|0)"))
    assert code == 0
    assert out == "new x. x!x.0 | 0\n"


def test_parse_names(pi):
    code, out, _ = call("parse", "--names", pi("#c!#d.0"))
    assert code == 0 and "#c" in out and "#d" in out


def test_parse_error_exit_code(pi):
    code, _, err = call("parse", pi("#c!"))
    assert code == 2 and "1:4" in err


def test_steps(pi):
    code, out, _ = call("steps", pi("new x.0"), "--sigma", "{}", "--universe", "#c,#d")
    assert code == 0
    assert out.splitlines() == ["--nu #c--> 0 ; {#c: pri}", "--nu #d--> 0 ; {#d: pri}"]


def test_dtrace_example(pi):
    code, out, _ = call("dtrace", pi("new x. x!x.0"), "--sigma", "{}",
                        "--universe", "#c,#d", "--depth", "2")
    assert code == 0
    # allocation alone is not observable
    assert out == "\n"


def test_otrace_bound_send(pi):
    code, out, _ = call("otrace", pi("new x. #c!x.0"), "--sigma", "{#c: pub}",
                        "--universe", "#c,#d", "--depth", "1")
    assert code == 0
    assert out.splitlines() == ["", "nu #d, #c!#d"]


def test_trace_diff_empty(pi):
    code, out, _ = call("otrace", "--diff", pi("#c!#c.0 | #c?(x).0"), "--sigma", "{#c: pub}")
    assert code == 0 and out == ""


def test_compare(pi):
    code, out, _ = call("compare", pi("new x. x!x.0"), "--sigma", "{}")
    assert code == 0 and out.startswith("EQUAL (")


def test_compare_liveness(pi):
    code, out, _ = call("compare", "--mode", "liveness", pi("#c!#c.0"), "--sigma", "{#c: pub}")
    assert code == 0 and out.startswith("EQUAL")


def test_ltrace(pi):
    code, out, _ = call("ltrace", pi("#c!#c.0"), "--sigma", "{#c: pri}")
    assert code == 0 and out == "delta{}\n"
    code, out, _ = call("ltrace", pi("rec X. X"), "--semantics", "denotational")
    assert code == 0 and out == "FAULT\n"


def test_refine_holds(pi):
    code, out, _ = call("refine", "--assert", r"x@pri /\ y@known", pi("x!y.0", "a.pi"),
                        pi("0", "b.pi"))
    assert code == 0 and out.strip() == "HOLDS"


def test_refine_fails_with_counterexample(pi):
    code, out, _ = call("refine", "--assert", "x@pub", pi("x!x.0", "a.pi"), pi("0", "b.pi"))
    assert code == 1
    assert out.startswith("FAILS") and "trace:" in out


def test_refine_bad_assertion(pi):
    code, _, err = call("refine", "--assert", "x@own", pi("0", "a.pi"), pi("0", "b.pi"))
    assert code == 2 and err


def test_rules(pi):
    code, out, _ = call("rules", "--samples", "5", "--rule", "send-pri", "--rule", "new")
    assert code == 0
    assert len(out.splitlines()) == 2


def test_fuzz_json_lines():
    code, out, _ = call("fuzz", "--count", "5", "--universe", "#c,#d", "--depth", "3",
                        "--ast-depth", "3", "--seed", "1")
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()]
    assert [r["instance"] for r in rows] == list(range(5))
    assert all(r["verdict"] == "equal" and r["diff"] == 0 for r in rows)


def test_output_is_deterministic():
    argv = ("fuzz", "--count", "8", "--universe", "#c,#d", "--depth", "3", "--seed", "4")
    assert call(*argv) == call(*argv)


def test_config_file_and_flag_precedence(pi, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("-- settings\nuniverse = #c\ndepth = 1\n", encoding="utf-8")
    p = pi("#c!#c.#c!#c.0")
    code, out, _ = call("otrace", p, "--sigma", "{#c: pub}", "--config", str(cfg))
    assert out.splitlines() == ["", "#c!#c"]
    code, out, _ = call("otrace", p, "--sigma", "{#c: pub}", "--config", str(cfg), "--depth", "2")
    assert out.splitlines() == ["", "#c!#c", "#c!#c, #c!#c"]


def test_bad_config(pi, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n", encoding="utf-8")
    code, _, err = call("parse", pi("0"), "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_environment_universe(pi, monkeypatch):
    monkeypatch.setenv("PIRHO_UNIVERSE", "#c")
    code, out, _ = call("steps", pi("new x.0"))
    assert out.splitlines() == ["--nu #c--> 0 ; {#c: pri}"]


def test_constant_outside_universe(pi):
    code, _, err = call("otrace", pi("#e!#e.0"), "--universe", "#c")
    assert code == 2 and "outside the universe" in err


def test_missing_file():
    code, _, err = call("parse", "/nonexistent/p.pi")
    assert code == 2 and "cannot read" in err


def test_console_script_runs(pi):
    res = subprocess.run([sys.executable, "-m", "pirho.cli", "parse", pi("0 (+) 0")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "0 (+) 0\n"
