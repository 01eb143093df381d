import argparse
import csv
import json

import numpy as np
import pytest

from shuffled_regression.cli import build_parser, main, preset_plan
from shuffled_regression.data_io import read_table


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def generated(tmp_path):
    assert run("generate", "--n", 100, "--d", 10, "--sigma", 0.3, "--shuffle", "full", "--seed", 7,
               "--out-dir", tmp_path) == 0
    return tmp_path


def test_generate_writes_three_files_deterministically(generated, tmp_path_factory):
    names = sorted(p.name for p in generated.iterdir())
    assert names == ["dataset.csv", "dataset.manifest.json", "dataset.truth.json"]
    other = tmp_path_factory.mktemp("again")
    run("generate", "--n", 100, "--d", 10, "--sigma", 0.3, "--shuffle", "full", "--seed", 7, "--out-dir", other)
    for name in names:
        assert (generated / name).read_bytes() == (other / name).read_bytes()


def test_generated_file_round_trips(generated):
    from shuffled_regression.synthetic import SyntheticSpec, generate

    inst = generate(SyntheticSpec(100, 10, 0.3, 7))
    t = read_table(generated / "dataset.csv", "y")
    assert np.array_equal(t.X, inst.X) and np.array_equal(t.y, inst.y_observed)
    truth = json.loads((generated / "dataset.truth.json").read_text())
    assert truth["pi_true"] == inst.pi_true.tolist()


def test_generate_negative_sigma_is_usage_error(tmp_path, capsys):
    assert run("generate", "--n", 10, "--d", 2, "--sigma", -1, "--out-dir", tmp_path) == 2
    assert "error[usage]" in capsys.readouterr().err


def test_fit_reports_parameter_error(generated):
    assert run("fit", "--data", generated / "dataset.csv", "--truth", generated / "dataset.truth.json",
               "--method", "ols", "--out-dir", generated) == 0
    rows = dict(csv.reader(open(generated / "fit.fit.csv")))
    assert float(rows["parameter_error"]) > 0 and rows["method"] == "ols"


def test_fit_hard_em_deterministic(generated):
    outs = []
    for name in ("a", "b"):
        run("fit", "--data", generated / "dataset.csv", "--method", "hard-em", "--restarts", 1, "--seed", 3,
            "--name", name, "--out-dir", generated)
        outs.append(((generated / f"{name}.fit.csv").read_bytes(), (generated / f"{name}.trace.csv").read_bytes()))
    assert outs[0] == outs[1]


@pytest.mark.parametrize("flag,expected", [("--non-cumulative", True), ("--cumulative", False), (None, False)])
def test_fit_cumulative_flag_in_manifest(generated, flag, expected):
    argv = ["fit", "--data", generated / "dataset.csv", "--method", "stochastic-em", "--iterations", 2,
            "--out-dir", generated]
    assert run(*(argv + ([flag] if flag else []))) == 0
    m = json.loads((generated / "fit.manifest.json").read_text())
    assert m["non_cumulative"] is expected and m["config"]["non_cumulative"] is expected
    assert len((generated / "fit.trace.csv").read_text().splitlines()) == 3


def test_fit_groups(tmp_path):
    run("generate", "--n", 30, "--d", 2, "--shuffle", "grouped", "--groups", 3, "--out-dir", tmp_path)
    bounds = tmp_path / "bounds.txt"
    bounds.write_text("0,10,20,30\n")
    for groups in ("3", bounds):
        assert run("fit", "--data", tmp_path / "dataset.csv", "--method", "hard-em", "--groups", groups,
                   "--restarts", 2, "--out-dir", tmp_path) == 0
        m = json.loads((tmp_path / "fit.manifest.json").read_text())
        assert m["group_bounds"] == [0, 10, 20, 30]
    bounds.write_text("0,10,40\n")
    assert run("fit", "--data", tmp_path / "dataset.csv", "--groups", bounds, "--out-dir", tmp_path) == 3


def test_fit_error_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,y\n1,oops\n")
    assert run("fit", "--data", bad, "--out-dir", tmp_path) == 3
    assert run("fit", "--data", tmp_path / "missing.csv", "--out-dir", tmp_path) == 3
    collinear = tmp_path / "col.csv"
    collinear.write_text("a,b,y\n" + "".join(f"{i},{2 * i},{i % 3}\n" for i in range(6)))
    assert run("fit", "--data", collinear, "--method", "ols", "--out-dir", tmp_path) == 4


def test_unknown_preset_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        run("experiment", "--preset", "fig9")
    assert e.value.code == 2
    assert "fig2" in capsys.readouterr().err


def test_fig4_desk_row_counts(tmp_path):
    assert run("experiment", "--preset", "fig4", "--iterations", 3, "--restarts", 2, "--jobs", 2,
               "--out-dir", tmp_path) == 0
    rows = [r for r in csv.DictReader(open(tmp_path / "fig4_desk.csv")) if r["trial"] not in ("mean", "std")]
    plan = preset_plan("fig4", "desk")
    for method in ("hard-em", "stochastic-em"):
        for s in range(plan["series"]):
            n = sum(r["method"] == method and r["trial"] == str(s) for r in rows)
            assert n == plan["max_swaps"] // plan["stride"] + 1


def test_fig2_desk_both_arms_and_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out, jobs in ((a, 1), (b, 3)):
        assert run("experiment", "--preset", "fig2", "--iterations", 3, "--restarts", 2, "--jobs", jobs,
                   "--out-dir", out) == 0
    assert (a / "fig2_desk.csv").read_bytes() == (b / "fig2_desk.csv").read_bytes()
    rows = [r for r in csv.DictReader(open(a / "fig2_desk.csv")) if r["trial"] not in ("mean", "std")]
    plan = preset_plan("fig2", "desk")
    keys = {(r["n"], r["trial"], r["method"]) for r in rows}
    assert len(keys) == len(rows) == len(plan["n_values"]) * plan["trials"] * 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SHUFFLED_REGRESSION_OUT", str(tmp_path / "env"))
    assert run("generate", "--n", 10, "--d", 2) == 0
    assert (tmp_path / "env" / "dataset.csv").exists()


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def test_help_lists_every_flag():
    parser = build_parser()
    parsers = {"": parser, **_subparsers(parser)}
    for name, p in parsers.items():
        text = p.format_help()
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text, f"{name}: {opt} missing from --help"
            if action.option_strings and not isinstance(action, (argparse._HelpAction, argparse._VersionAction)):
                assert action.help, f"{name}: {action.option_strings} has no help text"
