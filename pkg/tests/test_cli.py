import csv
import io
import json
from fractions import Fraction

import pytest

from padicsums.cli import (
    EXIT_BUDGET,
    EXIT_CONSISTENCY,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_PRECONDITION,
    RunConfig,
    main,
    parse_rational,
    parse_y_vector,
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_rational_grammar():
    assert parse_rational("1/3") == Fraction(1, 3)
    assert parse_rational("2/3^4") == Fraction(2, 81)
    assert parse_rational("-5") == Fraction(-5)
    assert parse_y_vector("1/3,2/9") == (Fraction(1, 3), Fraction(2, 9))
    with pytest.raises(Exception):
        parse_rational("x")


def test_eval_gauss(capsys):
    code, out, _ = run(capsys, "eval", "--prime", "3", "--map", "x1^2", "--y", "1/3")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert abs(payload["magnitude"] - 0.5773503) < 1e-6
    assert not payload["exact_zero"]
    assert payload["histogram"]["counts"] == {"0": 1, "1": 2}
    assert payload["pruning_stats"]["p1"] >= 1


def test_eval_exact_zero(capsys):
    code, out, _ = run(capsys, "eval", "--prime", "3", "--map", "x1", "--y", "1/3")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["magnitude"] == 0.0
    assert payload["exact_zero"] is True


def test_eval_integral_y(capsys):
    code, out, _ = run(capsys, "eval", "--prime", "3", "--map", "x1^2", "--y", "2")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert abs(payload["magnitude"] - 1.0) < 1e-12


def test_eval_config_round_trip(capsys):
    code, out, _ = run(capsys, "eval", "--prime", "5", "--map", "x1^2; x1", "--y", "1/5,0")
    assert code == EXIT_OK
    payload = json.loads(out)
    config = RunConfig.from_json_dict(payload["config"])
    assert config.to_json_dict() == payload["config"]


def test_eval_budget_exit(capsys):
    code, _, err = run(
        capsys, "eval", "--prime", "3", "--map", "x1^2", "--y", "1/81",
        "--budget", "10", "--method", "naive",
    )
    assert code == EXIT_BUDGET
    assert "budget" in err


def test_eval_parse_error_exit(capsys):
    code, _, err = run(capsys, "eval", "--prime", "3", "--map", "x1 + *", "--y", "1")
    assert code == EXIT_PARSE
    assert "error" in err


def test_eval_budget_env_var(capsys, monkeypatch):
    monkeypatch.setenv("PADICSUMS_BUDGET", "10")
    code, _, _ = run(
        capsys, "eval", "--prime", "3", "--map", "x1^2", "--y", "1/81",
        "--method", "naive",
    )
    assert code == EXIT_BUDGET
    monkeypatch.setenv("PADICSUMS_BUDGET", "1000000")
    code, _, _ = run(
        capsys, "eval", "--prime", "3", "--map", "x1^2", "--y", "1/81",
        "--method", "naive",
    )
    assert code == EXIT_OK


def test_density_csv(capsys):
    code, out, _ = run(capsys, "density", "--prime", "3", "--map", "x1^2", "--level", "1")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["z_1", "N", "F"]
    assert rows[1] == ["0", "1", "1"]
    assert rows[2] == ["1", "2", "2"]


def test_density_json(capsys):
    code, out, _ = run(
        capsys, "density", "--prime", "3", "--map", "x1^2", "--level", "1",
        "--format", "json",
    )
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["table"]["rows"][1]["N"] == 2


def test_decay_square(capsys, tmp_path):
    prefix = str(tmp_path / "decay")
    code, _, _ = run(
        capsys, "decay", "--prime", "3", "--map", "x1^2", "--levels", "1..6",
        "--out", prefix,
    )
    assert code == EXIT_OK
    payload = json.loads((tmp_path / "decay.json").read_text())
    assert abs(payload["fit"]["alpha_hat"] + 0.5) < 1e-9
    assert payload["fit"]["verdict"] == "CONSISTENT"
    assert payload["fit"]["c_hat"] == 1.0
    with open(tmp_path / "decay.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["m", "sup", "sup_error", "argmax_u", "exhaustive"]
    assert len(rows) == 7


def test_decay_dependent_map_still_exits_zero(capsys):
    code, out, err = run(capsys, "decay", "--map", "x1; x1+1", "--levels", "1..2")
    assert code == EXIT_OK
    assert "HYPOTHESIS FAILED" in err
    payload = json.loads(out[out.index("{") :])
    assert payload["report"]["hypothesis_ok"] is False


def test_decay_bad_levels(capsys):
    code, _, err = run(capsys, "decay", "--map", "x1^2", "--levels", "3..1")
    assert code == EXIT_PARSE
    assert "level range" in err


def test_decay_sampled_strategy(capsys):
    code, out, _ = run(
        capsys, "decay", "--prime", "3", "--map", "x1^2; x1", "--levels", "1..2",
        "--strategy", "sample:5", "--seed", "9",
    )
    assert code == EXIT_OK
    payload = json.loads(out[out.index("{") :])
    assert payload["config"]["seed"] == 9
    assert all(not rec["exhaustive"] for rec in payload["records"])


def test_fourier_check_ok(capsys):
    code, out, _ = run(
        capsys, "fourier-check", "--prime", "3", "--map", "x1^2", "--y", "1/3",
        "--level", "1",
    )
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["is_zero"] is True
    assert payload["residual"]["counts"] == {}


def test_fourier_check_level_too_low(capsys):
    code, _, err = run(
        capsys, "fourier-check", "--prime", "3", "--map", "x1^2", "--y", "1/9",
        "--level", "1",
    )
    assert code == EXIT_PRECONDITION
    assert "valuation" in err


def test_byte_identical_across_workers(capsys):
    _, out1, _ = run(
        capsys, "eval", "--prime", "3", "--map", "x1^3 + x1^2", "--y", "1/27",
        "--workers", "1",
    )
    _, out8, _ = run(
        capsys, "eval", "--prime", "3", "--map", "x1^3 + x1^2", "--y", "1/27",
        "--workers", "8",
    )
    assert out1 == out8


def test_decay_byte_identical_across_workers(capsys):
    argv = [
        "decay", "--prime", "3", "--map", "x1; x1^2", "--levels", "1..3",
        "--strategy", "sample:6", "--seed", "4",
    ]
    _, out1, _ = run(capsys, *argv, "--workers", "1")
    _, out8, _ = run(capsys, *argv, "--workers", "8")
    assert out1 == out8


def test_map_file_input(capsys, tmp_path):
    path = tmp_path / "map.txt"
    path.write_text("x1^2\n")
    code, out, _ = run(
        capsys, "eval", "--prime", "3", "--map-file", str(path), "--y", "1/3"
    )
    assert code == EXIT_OK
    assert json.loads(out)["config"]["map"] == "x1^2"


def test_phi_flag(capsys):
    phi = json.dumps([{"center": ["0"], "k": 1, "weight": "1"}])
    code, out, _ = run(
        capsys, "eval", "--prime", "3", "--map", "x1", "--y", "1/3", "--phi", phi
    )
    assert code == EXIT_OK
    payload = json.loads(out)
    # on the sub-ball 3 Z_3 the linear phase x/3 is constant 0: measure 1/3
    assert abs(payload["magnitude"] - 1 / 3) < 1e-12


def test_exit_code_5_is_never_expected():
    assert EXIT_CONSISTENCY == 5
