"""Tests for the fracvar command line front end."""

import json

import pandas as pd
import pytest

from fracvar.config import ExitCodes
from fracvar.scripts.analysis import SuiteReport
from fracvar.scripts.run import _with_config, main, parse_args


@pytest.fixture
def cf_args():
    """Caputo-Fabrizio kernel flags, alpha = 0.5 on [0, 1]."""
    return ["--alpha", "0.5", "--gamma", "1", "--beta", "1"]


def test_deriv_writes_csv(tmp_path, cf_args):
    """caputo_ns of f = t at b = 1 is 2 (1 - exp(-1))."""
    out = tmp_path / "deriv.csv"
    code = main(["deriv", "--op", "caputo_ns", *cf_args, "--f", "t", "--n", "512", "--out", str(out)])
    assert code == ExitCodes.OK
    assert out.read_text().splitlines()[0] == "t,value,estimate_error"
    frame = pd.read_csv(out)
    assert len(frame) == 513
    assert frame["value"].iloc[-1] == pytest.approx(1.264241, abs=1e-5)
    assert frame["t"].iloc[0] == 0.0


def test_special_case_flag(capsys):
    code = main(["deriv", "--special", "caputo_fabrizio", "--f", "t", "--n", "512"])
    assert code == ExitCodes.OK
    assert "1.2642" in capsys.readouterr().out


def test_integral(capsys):
    """I^(1/2)[1](1) = 1 / Gamma(3/2)."""
    code = main(["integral", "--alpha", "0.5", "--f", "1", "--n", "256"])
    assert code == ExitCodes.OK
    assert "1.128379" in capsys.readouterr().out


def test_solve_prints_final_value(capsys, cf_args):
    """D u = -u, u(0) = 1 ends at exp(-1/3)."""
    code = main(["solve", *cf_args, "--rhs=-u", "--u0", "1", "--n", "1024"])
    assert code == ExitCodes.OK
    out = capsys.readouterr().out
    assert out.startswith("SUMMARY: solve done.")
    assert "0.7165" in out


def test_solve_without_root_is_numerical(cf_args):
    code = main(
        ["solve", *cf_args, "--rhs", "u^2 + 100", "--u0", "0", "--n", "32", "--compat", "strict"]
    )
    assert code == ExitCodes.NUMERICAL


def test_verify_suite_passes(cf_args):
    assert main(["verify", *cf_args, "--suite", "vanish_at_a", "--n", "64"]) == ExitCodes.OK


def test_verify_failures_exit_with_suite_code(mocker, cf_args):
    """Any recorded failure turns into exit code 3."""
    report = SuiteReport("boundedness")
    report.record("-cos(pi*t)/caputo_ns", 2.48, 2.0, False)
    mocker.patch("fracvar.scripts.run.run_suites", return_value=[report])
    assert main(["verify", *cf_args, "--suite", "boundedness"]) == ExitCodes.SUITE_FAILURE


def test_verify_writes_report_table(tmp_path, mocker, cf_args):
    report = SuiteReport("lipschitz")
    report.note("caputo_ns/theta_1", 0.9)
    mocker.patch("fracvar.scripts.run.run_suites", return_value=[report])
    out = tmp_path / "suites.csv"
    assert main(["verify", *cf_args, "--suite", "lipschitz", "--out", str(out)]) == ExitCodes.OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["suite", "kind", "case", "observed", "bound", "margin"]
    assert frame["case"].iloc[0] == "caputo_ns/theta_1"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["deriv", "--f", "t", "--op", "gl"],
        ["deriv", "--f", "t +"],
        ["deriv", "--f", "t", "--alpha", "1.5"],
        ["deriv", "--f", "t", "--psi=-t"],
        ["deriv", "--f", "t", "--n", "0"],
        ["solve", "--rhs", "u + v", "--u0", "0"],
    ],
)
def test_invalid_input_exits_with_validation_code(argv):
    assert main(argv) == ExitCodes.VALIDATION


def test_degenerate_grid_is_numerical():
    assert main(["deriv", "--f", "t", "--n", "4"]) == ExitCodes.NUMERICAL


def test_json_output_echoes_config(tmp_path, cf_args):
    out = tmp_path / "deriv.json"
    code = main(["deriv", *cf_args, "--f", "t^2", "--n", "64", "--format", "json", "--out", str(out)])
    assert code == ExitCodes.OK
    payload = json.loads(out.read_text())
    assert set(payload) == {"t", "value", "estimate_error", "config"}
    assert len(payload["t"]) == 65
    assert payload["config"]["f"] == "t^2"
    assert payload["config"]["op"] == "caputo_ns"
    assert "config" not in payload["config"]


def test_outputs_are_reproducible(tmp_path, cf_args):
    """Identical flags give byte-identical files."""
    paths = [tmp_path / "first.csv", tmp_path / "second.csv"]
    for path in paths:
        main(["deriv", "--op", "rl_ns", *cf_args, "--f", "sin(t)", "--n", "128", "--out", str(path)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_config_file_supplies_defaults(tmp_path):
    """Flags from --config apply, and flags on the command line override them."""
    config = tmp_path / "run.conf"
    config.write_text("# kernel\nalpha=0.5\nf=t\n\nn=256\n")
    out = tmp_path / "deriv.csv"
    assert main(["deriv", "--config", str(config), "--out", str(out)]) == ExitCodes.OK
    assert len(pd.read_csv(out)) == 257
    assert main(["deriv", "--config", str(config), "--n", "128", "--out", str(out)]) == ExitCodes.OK
    assert len(pd.read_csv(out)) == 129


def test_config_flags_are_inserted_after_the_command(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("order_tied=yes\nalpha=0.4\nstandard-psi-caputo=no\n")
    argv = ["deriv", "--config", str(config), "--f", "t"]
    assert _with_config(argv) == ["deriv", "--order-tied", "--alpha=0.4", *argv[1:]]
    args = parse_args(argv)
    assert args.order_tied
    assert args.alpha == "0.4"
    assert not args.standard_psi_caputo


def test_bad_config_line_is_a_validation_error(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("alpha 0.5\n")
    assert main(["deriv", "--config", str(config), "--f", "t"]) == ExitCodes.VALIDATION


def test_solve_accepts_leading_minus_as_separate_token(capsys, cf_args):
    """--rhs "-u" is a value, not an option."""
    code = main(["solve", *cf_args, "--rhs", "-u", "--u0", "1", "--n", "1024"])
    assert code == ExitCodes.OK
    assert "0.7165" in capsys.readouterr().out


def test_negative_expressions_for_every_expression_flag(tmp_path):
    out = tmp_path / "deriv.csv"
    code = main(
        ["deriv", "--op", "rl_ns", "--alpha", "-0.2*t + 0.6", "--f", "-t", "--n", "64", "--out", str(out)]
    )
    assert code == ExitCodes.OK
    args = parse_args(["deriv", "--f", "-t", "--psi", "-(-t)", "--M", "-alpha + 2 - alpha*(1 - alpha)"])
    assert args.f == "-t"
    assert args.psi == "-(-t)"
    assert args.M.startswith("-alpha")


@pytest.mark.parametrize(
    "argv",
    [
        ["deriv", "--op", "rl_ns", "--f", "sqrt(t)", "--n", "64"],
        ["integral", "--f", "t^0.5", "--n", "64"],
    ],
)
def test_functions_without_derivative_at_a_are_accepted(argv):
    assert main(argv) == ExitCodes.OK


def test_tied_variable_order_without_declared_bounds(capsys):
    code = main(["deriv", "--special", "variable_ml", "--alpha", "0.5+0.1*sin(t)", "--f", "t", "--n", "64"])
    assert code == ExitCodes.OK
    assert capsys.readouterr().out.startswith("SUMMARY: deriv caputo_ns done.")
