import re
import subprocess
import sys

import pytest

from mabound.cli import main
from mabound.models import six_state, two_state_ctmc
from mabound.modelio import TRACE_COLUMNS, serialize_model

SUMMARY = re.compile(r"^lb=\S+ ub=\S+ eps_hat=\S+ iterations=\d+ blocks=\d+ game_states=\d+$")


@pytest.fixture
def model_file(tmp_path):
    def write(doc, name="m.ma"):
        path = tmp_path / name
        path.write_text(serialize_model(doc))
        return str(path)
    return write


def test_success_prints_summary(model_file, tmp_path, capsys):
    trace, dump = tmp_path / "t.csv", tmp_path / "g.txt"
    code = main(["check", "--model", model_file(two_state_ctmc()), "--time-bound", "1",
                 "--epsilon", "0.01", "--trace", str(trace), "--dump-game", str(dump)])
    out = capsys.readouterr().out.strip()
    assert code == 0 and SUMMARY.match(out)
    lines = trace.read_text().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS) and len(lines) > 1
    assert dump.read_text().startswith("v 0 ")


def test_concrete_mode_and_min(model_file, capsys):
    code = main(["check", "--model", model_file(six_state()), "--time-bound", "1",
                 "--epsilon", "0.05", "--mode", "concrete", "--objective", "min"])
    out = capsys.readouterr().out
    assert code == 0 and "blocks=6" in out


def test_bound_not_met_exit_code(model_file, capsys):
    code = main(["check", "--model", model_file(six_state()), "--time-bound", "1",
                 "--epsilon", "0.01", "--max-refinements", "0"])
    captured = capsys.readouterr()
    assert code == 2 and SUMMARY.match(captured.out.strip())
    assert "budget" in captured.err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ma"
    bad.write_text("ma\ninitial: a\nstate a\n  rate -> a : -1\n")
    assert main(["check", "--model", str(bad), "--time-bound", "1", "--epsilon", "0.1"]) == 1
    assert ":4:" in capsys.readouterr().err
    assert main(["check", "--model", str(tmp_path / "missing.ma"), "--time-bound", "1",
                 "--epsilon", "0.1"]) == 1


@pytest.mark.parametrize("args", [
    [], ["check"], ["check", "--model", "x", "--time-bound", "1", "--epsilon", "1.5"],
    ["check", "--model", "x", "--time-bound", "-1", "--epsilon", "0.1"],
    ["check", "--model", "x", "--time-bound", "1", "--epsilon", "0.1", "--objective", "avg"],
])
def test_usage_errors_exit_one(args):
    with pytest.raises(SystemExit) as exc:
        main(args)
    assert exc.value.code == 1


def test_module_entry_point(model_file):
    proc = subprocess.run([sys.executable, "-m", "mabound", "check", "--model",
                           model_file(two_state_ctmc()), "--time-bound", "1", "--epsilon", "0.05"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and SUMMARY.match(proc.stdout.strip())
