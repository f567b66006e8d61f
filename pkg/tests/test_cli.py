import subprocess
import sys

import pytest

from branchtail import __version__
from branchtail.cli import (
    EXIT_DEGENERATE,
    EXIT_FAIL,
    EXIT_OK,
    EXIT_PARSE,
    SpecParseError,
    main,
    parse_spec,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


CLASSIFY = "offspring = {1:.5,2:.5}\nimmigration = {0:.5,1:.5}\npipeline = classify\n"

FL_TAIL = """\
offspring = fl(m=2)
immigration = none
variant = W_only
pipeline = tail
eps_min = 1e-3
eps_max = 1e-1
replicates = 1000000
seed = 5
"""

SMALL_TAIL = """\
# small run for determinism checks
offspring = {1:.5,2:.5}
immigration = {0:.5,1:.5}
variant = curlyW
eps_min = 0.05
eps_max = 0.5
eps_points = 8
replicates = 40000
generations = 12
seed = 11
"""


def test_classify_writes_regime(tmp_path):
    spec = write(tmp_path, "a.spec", CLASSIFY)
    assert main(["classify", str(spec), "--out-dir", str(tmp_path / "out")]) == EXIT_OK
    text = (tmp_path / "out" / "regime.txt").read_text()
    assert "case = A\n" in text
    assert "power_exponent = 1.70951" in text


def test_fl_tail_passes(tmp_path, capsys):
    spec = write(tmp_path, "fl.spec", FL_TAIL)
    out = tmp_path / "out"
    assert main(["tail", str(spec), "--out-dir", str(out)]) == EXIT_OK
    report = (out / "report.txt").read_text()
    assert "RESULT PASS" in report
    csv = (out / "tail.csv").read_text().splitlines()
    assert f"# tool = branchtail {__version__}" in csv
    assert "# offspring = fl(m=2)" in csv
    assert "epsilon,prob,ci_low,ci_high,replicates,seed" in csv


def test_malformed_literal_exit_2(tmp_path, capsys):
    spec = write(tmp_path, "bad.spec", "offspring = {0:0.25 2:0.75}\n")
    assert main(["classify", str(spec)]) == EXIT_PARSE
    assert "line 1, column 21" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text, line",
    [
        ("offspring = {1:1}\nfoo = 3\n", 2),
        ("offspring = {1:.5,2:.5}\nimmigration = {1:1}\nvariant = sideways\n", 3),
        ("offspring = {1:.5,2:.5}\nreplicates = many\n", 2),
        ("immigration = {1:1}\n", 1),
        ("offspring = {1:.5,2:.5}\nvariant = curlyW\n", 1),
        ("offspring = {1:.5,2:.5}\neps_min = 0.5\neps_max = 0.1\n", 1),
    ],
)
def test_parse_errors(text, line):
    with pytest.raises(SpecParseError) as info:
        parse_spec(text)
    assert info.value.line == line


def test_empty_suite_exit_2(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["verify", str(tmp_path / "empty")]) == EXIT_PARSE


def test_degenerate_spec_exit_3(tmp_path):
    spec = write(tmp_path, "d.spec", "offspring = {1:.5,2:.5}\nimmigration = {0:1}\nvariant = curlyW\n")
    assert main(["tail", str(spec), "--out-dir", str(tmp_path / "o")]) == EXIT_DEGENERATE
    assert "case = Degenerate" in (tmp_path / "o" / "regime.txt").read_text()


def test_subcritical_exit_3(tmp_path):
    spec = write(tmp_path, "s.spec", "offspring = {0:.5,1:.5}\nimmigration = {1:1}\npipeline = tail\n")
    assert main(["tail", str(spec), "--out-dir", str(tmp_path / "o")]) == EXIT_DEGENERATE


def test_suite_isolates_degenerate_row(tmp_path, capsys):
    suite = tmp_path / "suite"
    suite.mkdir()
    write(suite, "a_good.spec", SMALL_TAIL + "tolerance = 0.5\n")
    write(suite, "b_degenerate.spec", "offspring = {1:.5,2:.5}\nimmigration = {0:1}\nvariant = curlyW\n")
    write(suite, "c_classify.spec", "offspring = {2:.5,3:.5}\nimmigration = {1:1}\nchecks = minimal_tree\n")
    code = main(["verify", str(suite), "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_DEGENERATE
    rows = (tmp_path / "out" / "summary.csv").read_text().splitlines()
    assert rows[0] == "spec,case,predicted,fitted,tolerance,status,exit,wall_s"
    assert len(rows) == 4
    cells = {r.split(",")[0]: r.split(",") for r in rows[1:]}
    assert cells["a_good"][5:7] == ["PASS", "0"]
    assert cells["b_degenerate"][1] == "Degenerate"
    assert cells["b_degenerate"][5:7] == ["FAIL", "3"]
    assert cells["c_classify"][5:7] == ["PASS", "0"]


def test_failed_check_exit_1(tmp_path):
    # a tolerance of zero cannot be met by a Monte Carlo slope
    spec = write(tmp_path, "t.spec", SMALL_TAIL + "tolerance = 0\n")
    assert main(["tail", str(spec), "--out-dir", str(tmp_path / "o")]) == EXIT_FAIL
    assert "RESULT FAIL" in (tmp_path / "o" / "report.txt").read_text()


def _artifacts(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_byte_identical_across_runs_and_threads(tmp_path):
    spec = write(tmp_path, "s.spec", SMALL_TAIL)
    for name, threads in [("r1", "1"), ("r2", "1"), ("r3", "2")]:
        main(["tail", str(spec), "--out-dir", str(tmp_path / name), "--threads", threads])
    a = _artifacts(tmp_path / "r1")
    assert set(a) == {"regime.txt", "tail.csv", "report.txt"}
    assert a == _artifacts(tmp_path / "r2") == _artifacts(tmp_path / "r3")


def test_seed_override_changes_samples(tmp_path):
    spec = write(tmp_path, "s.spec", SMALL_TAIL)
    main(["tail", str(spec), "--out-dir", str(tmp_path / "a")])
    main(["tail", str(spec), "--out-dir", str(tmp_path / "b"), "--seed", "12"])
    a, b = (tmp_path / "a" / "tail.csv").read_text(), (tmp_path / "b" / "tail.csv").read_text()
    assert "# seed = 12" in b
    assert a != b


def test_laplace_pipeline(tmp_path):
    spec = write(
        tmp_path,
        "b.spec",
        "offspring = {1:.5,2:.5}\nimmigration = {1:1}\nvariant = curlyW\ntolerance = 0.2\n",
    )
    assert main(["laplace", str(spec), "--out-dir", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "laplace.csv").read_text().splitlines()
    assert "# case = B" in lines
    assert "lambda,log_value,depth,terms" in lines


def test_console_entry_point(tmp_path):
    spec = write(tmp_path, "a.spec", CLASSIFY)
    r = subprocess.run(
        [sys.executable, "-m", "branchtail.cli", "classify", str(spec), "--out-dir", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0, r.stderr
