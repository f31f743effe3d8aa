import hashlib
import io
import json
import subprocess
import sys

from datalogo.cli import EXIT_DIVERGED, EXIT_LIMIT, EXIT_OK, EXIT_USAGE, main


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_run_sssp_text():
    code, text = run("run", "sssp.dl", "--edb", "fig1", "--no-figures")
    assert code == EXIT_OK
    assert "converged in 5 iterations" in text
    assert "  d  8" in text


def test_run_full_trace():
    code, text = run("run", "sssp.dl", "--edb", "fig1", "--trace", "full", "--no-figures")
    lines = text.splitlines()
    assert lines[0] == "t=0 L(a)=inf L(b)=inf L(c)=inf L(d)=inf"
    assert lines[3] == "t=3 L(c)=4 L(d)=9"
    assert lines[5] == "t=5"


def test_exit_codes(tmp_path):
    assert run("run", "parts_nat.dl", "--edb", "fig2", "--max-iters", "100", "--no-figures")[0] == EXIT_DIVERGED
    assert run("run", str(tmp_path / "missing.dl"))[0] == EXIT_USAGE
    bad = tmp_path / "bad.dl"
    bad.write_text("L(x) :- +.")
    assert run("check", str(bad))[0] == EXIT_USAGE
    assert run("run", "apsp.dl", "--edb", "fig1", "--budget", "3", "--no-figures")[0] == EXIT_LIMIT
    assert run("run", "sssp.dl", "--max-iters", "-4")[0] == EXIT_USAGE


def test_check_lines():
    code, text = run("check", "sssp.dl")
    assert code == EXIT_OK and text.splitlines()[0] == "1 stratum, linear: yes"
    assert run("check", "apsp_extract.dl")[1].splitlines()[0] == "2 strata, linear: yes, yes"


def test_ground_dump():
    code, text = run("ground", "sssp.dl", "--edb", "fig1")
    assert code == EXIT_OK
    assert "x_1: L(a) = 0 + 2 * x_2" in text
    assert "x_4: L(d) = 4 * x_3" in text


def test_json_output():
    code, text = run("run", "sssp.dl", "--edb", "fig1", "--json", "--no-figures")
    doc = json.loads(text)
    assert doc["converged"] and doc["relations"]["L"][3] == ["d", "8"]
    assert doc["strata"][0]["iterations"] == 5


def test_out_and_figures_are_deterministic(tmp_path):
    digests = []
    for name in ("one", "two"):
        d = tmp_path / name
        code, _ = run("run", "sssp.dl", "--edb", "fig1", "--out", str(d))
        assert code == EXIT_OK
        assert (d / "L.csv").read_text().splitlines()[0] == "k1,value"
        digests.append(hashlib.sha256((d / "convergence.png").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_analyze_matrix_and_stability(tmp_path):
    code, text = run("analyze", "--matrix", "--pops", "trop_p(1)")
    assert code == EXIT_OK and "  1  4      7         7" in text
    code, text = run("analyze", "--stability", "--pops", "trop_p(2)", "--samples", "10", "--figures", str(tmp_path))
    assert code == EXIT_OK and "samples witness the natural order:" in text
    assert any(p.suffix == ".png" for p in tmp_path.iterdir())
    code, text = run("analyze", "--bound", "3,2", "--json")
    assert code == EXIT_OK and "9" in text


def test_color_is_disabled_off_tty(monkeypatch):
    monkeypatch.setenv("DATALOGO_COLOR", "0")
    code, text = run("run", "sssp.dl", "--edb", "fig1", "--no-figures")
    assert "\033[" not in text


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "datalogo.cli", "check", "tc.dl"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "1 stratum" in proc.stdout
