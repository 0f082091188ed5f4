from pathlib import Path

import pytest

from app.config import (
    Settings, apply_overrides, default_output_dir, dump_experiment, load_experiment_file,
    parse_experiment_text, resolve_method, resolve_problem
)
from app.models.schemas import EncoderConfig, ExperimentConfig, GepParams, Method, OptimizerSettings
from app.utils.errors import ConfigurationError, UnknownNameError

REFERENCE_INI = Path(__file__).resolve().parent.parent / "config" / "neep.ini"


def test_reference_file_matches_defaults():
    config = load_experiment_file(REFERENCE_INI)
    assert config.methods == list(Method)
    assert len(config.problems) == 16
    assert (config.trials, config.seed, config.pop, config.generations) == (50, 0, 100, 500)
    assert config.encoder == EncoderConfig()
    assert config.optimizer == OptimizerSettings()
    assert config.gep == GepParams()
    assert len(config.run_configs()) == 64


def test_run_configs_order_benchmarks_outermost():
    config = ExperimentConfig(methods=[Method.GEP, Method.GA_NEEP], problems=["Nguyen6", "Nguyen7"])
    cells = [(c.benchmark, c.method) for c in config.run_configs()]
    assert cells == [("Nguyen6", Method.GEP), ("Nguyen6", Method.GA_NEEP),
                     ("Nguyen7", Method.GEP), ("Nguyen7", Method.GA_NEEP)]


def test_parse_sections_and_lists():
    config = parse_experiment_text(
        "[experiment]\nmethods = CMAES-NEEP, gep\nproblems = nguyen7\ntrials = 4\n"
        "[encoder]\nn_hidden = 12\ninit_weight_range = -1, 1\n"
        "[optimizer]\nga_mutation_rate = 0.05\n"
    )
    assert config.methods == [Method.CMAES_NEEP, Method.GEP]
    assert config.problems == ["Nguyen7"]
    assert config.trials == 4
    assert config.encoder.n_hidden == 12
    assert config.encoder.init_weight_range == (-1.0, 1.0)
    assert config.optimizer.ga_mutation_rate == 0.05


@pytest.mark.parametrize("text", [
    "[experiment]\ncolour = blue\n",
    "[plotting]\ndpi = 300\n",
    "[encoder]\nn_hidden = 0\n",
    "[encoder]\ninit_weight_range = 2, -2\n",
    "not an ini file",
])
def test_invalid_files_raise(text):
    with pytest.raises(ConfigurationError):
        parse_experiment_text(text)


def test_unknown_names_raise_with_suggestions():
    with pytest.raises(UnknownNameError) as excinfo:
        parse_experiment_text("[experiment]\nmethods = cmaes-nep\n")
    assert "cmaes-neep" in excinfo.value.suggestions
    with pytest.raises(UnknownNameError):
        parse_experiment_text("[experiment]\nproblems = Nguyen99\n")


def test_missing_file():
    with pytest.raises(ConfigurationError):
        load_experiment_file("/nonexistent/neep.ini")


def test_dump_parses_back_to_equal_config():
    config = ExperimentConfig(
        methods=[Method.PSO_NEEP, Method.GEP], problems=["Vlad3", "Energy"], trials=7, seed=11,
        data="data/energy.csv",
        encoder=EncoderConfig(n_hidden=13, sparsity=0.25, fixed_weights_per_experiment=True),
        optimizer=OptimizerSettings(ga_mutation_rate=0.1 + 0.2),
    )
    assert parse_experiment_text(dump_experiment(config)) == config


def test_overrides():
    base = ExperimentConfig()
    assert apply_overrides(base, trials=None) is base
    changed = apply_overrides(base, methods=["gep"], problems=["pagie1"], seed=5)
    assert changed.methods == [Method.GEP]
    assert changed.problems == ["Pagie1"]
    assert changed.seed == 5
    with pytest.raises(ConfigurationError):
        apply_overrides(base, pop=2)


def test_name_resolution():
    assert resolve_method("GA-NEEP") is Method.GA_NEEP
    assert resolve_method(Method.GEP) is Method.GEP
    assert resolve_problem(" vlad3 ") == "Vlad3"
    with pytest.raises(UnknownNameError):
        resolve_method("random-search")


def test_default_output_dir():
    config = ExperimentConfig(methods=[Method.GA_NEEP, Method.GEP], problems=["Nguyen6"], seed=4)
    assert default_output_dir(config, "out") == Path("out") / "ga-neep+gep_Nguyen6_s4"


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("NEEP_OUTPUT_ROOT", "/tmp/neep")
    monkeypatch.setenv("NEEP_WORKERS", "3")
    settings = Settings()
    assert settings.output_root == "/tmp/neep"
    assert settings.workers == 3
    assert settings.max_finished_runs == 100
    monkeypatch.setenv("NEEP_MAX_FINISHED_RUNS", "5")
    assert Settings().max_finished_runs == 5
