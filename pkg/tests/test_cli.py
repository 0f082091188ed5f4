import io

import numpy as np
import pytest

from app.cli import EXIT_OK, EXIT_USER_ERROR, build_parser, cmd_decode, cmd_list, main
from app.config import parse_experiment_text
from tests.conftest import PAPER_EXPRESSION, PAPER_GENE

SMALL_RUN = ["--trials", "2", "--generations", "3", "--pop", "8", "--seed", "7"]


def _small_ini(tmp_path, extra=""):
    path = tmp_path / "small.ini"
    path.write_text("[encoder]\nn_hidden = 8\ntime_steps = 3\nhead_len = 5\n[gep]\nhead_len = 5\n" + extra)
    return str(path)


def run_cli(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def test_list_all(single_worker_settings):
    code, text = run_cli("list")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[0].split()[:3] == ["name", "vars", "set"]
    assert len(lines) == 17
    assert lines[1].startswith("Sphere5")


def test_list_filter(single_worker_settings):
    assert len(cmd_list("Nico", io.StringIO())) == 4
    code, text = run_cli("list", "--filter", "no-such-problem")
    assert code == EXIT_OK
    assert len(text.splitlines()) == 1


def test_decode():
    out = io.StringIO()
    assert cmd_decode(PAPER_GENE, out=out) == PAPER_EXPRESSION
    assert out.getvalue().splitlines()[1] == "effective length: 11"
    code, text = run_cli("decode", *PAPER_GENE.split(), "--terminals", "x,y", "--head", "8")
    assert code == EXIT_OK
    assert text.splitlines()[0] == PAPER_EXPRESSION


def test_decode_rejects_unknown_symbol(capsys):
    code, _ = run_cli("decode", "+", "x", "$")
    assert code == EXIT_USER_ERROR
    assert "index 2" in capsys.readouterr().err


def test_unknown_method_lists_valid_ones(tmp_path, capsys, single_worker_settings):
    code, _ = run_cli("run", "--method", "cmaes-nep", "--problem", "Nguyen6", "--out", str(tmp_path))
    assert code == EXIT_USER_ERROR
    err = capsys.readouterr().err
    assert "cmaes-neep" in err
    assert "ga-neep" in err


def test_bad_arguments_are_user_errors(capsys):
    assert run_cli("run", "--trials", "many")[0] == EXIT_USER_ERROR
    assert run_cli()[0] == EXIT_USER_ERROR
    assert run_cli("run", "--config", "/nonexistent.ini")[0] == EXIT_USER_ERROR


def test_run_is_reproducible(tmp_path, single_worker_settings):
    ini = _small_ini(tmp_path)
    args = ["run", "--config", ini, "--method", "cmaes-neep,gep", "--problem", "Nguyen6", *SMALL_RUN]
    first, second = tmp_path / "first", tmp_path / "second"
    assert run_cli(*args, "--out", str(first))[0] == EXIT_OK
    assert run_cli(*args, "--out", str(second))[0] == EXIT_OK
    for name in ("summary.csv", "trace.csv", "progress.csv", "config.ini"):
        assert (first / name).read_bytes() == (second / name).read_bytes()

    # the echoed config alone reproduces the run
    third = tmp_path / "third"
    assert run_cli("run", "--config", str(first / "config.ini"), "--out", str(third))[0] == EXIT_OK
    assert (first / "summary.csv").read_bytes() == (third / "summary.csv").read_bytes()


def test_run_with_csv_problem(tmp_path, single_worker_settings):
    rows = np.random.default_rng(0).uniform(0, 1, size=(30, 9))
    data = tmp_path / "concrete.csv"
    data.write_text("\n".join(",".join(repr(float(v)) for v in row) for row in rows) + "\n")
    code, text = run_cli("run", "--config", _small_ini(tmp_path), "--method", "ga-neep",
                         "--problem", "Concrete", "--data", str(data), *SMALL_RUN, "--out", str(tmp_path / "r"))
    assert code == EXIT_OK
    assert "Concrete" in text


def test_failed_cell_sets_exit_code(tmp_path, single_worker_settings):
    code, text = run_cli("run", "--config", _small_ini(tmp_path), "--method", "gep",
                         "--problem", "Nguyen6,Energy", *SMALL_RUN, "--out", str(tmp_path / "r"))
    assert code == EXIT_USER_ERROR
    assert "FAILED GEP Energy" in text
    assert (tmp_path / "r" / "summary.csv").read_text().count("Nguyen6") == 1


def test_config_command_round_trips(tmp_path):
    code, text = run_cli("config", "--config", _small_ini(tmp_path), "--method", "gep", "--trials", "9")
    assert code == EXIT_OK
    config = parse_experiment_text(text)
    assert config.trials == 9
    assert config.encoder.n_hidden == 8


def test_parser_accepts_repeated_options():
    args = build_parser().parse_args(["run", "--problem", "Nguyen6", "--problem", "Nguyen7", "--workers", "2"])
    assert args.problem == ["Nguyen6", "Nguyen7"]
    assert args.workers == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "1.0.0" in capsys.readouterr().out


def test_run_streams_progress_rows(tmp_path, single_worker_settings):
    stream = tmp_path / "live.csv"
    out_dir = tmp_path / "r"
    code, _ = run_cli("run", "--config", _small_ini(tmp_path), "--method", "pso-neep,gep", "--problem", "Nguyen7",
                      *SMALL_RUN, "--out", str(out_dir), "--progress-stream", str(stream))
    assert code == EXIT_OK
    assert stream.read_bytes() == (out_dir / "progress.csv").read_bytes()
    assert len(stream.read_text().splitlines()) == 1 + 2 * 2 * 3
