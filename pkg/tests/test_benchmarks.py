import numpy as np
import pytest

from app.models.schemas import FunctionSetName, SamplerKind
from app.services.benchmarks import (
    BENCHMARKS, build_problem, draw_inputs, get_benchmark, list_benchmarks, load_csv_dataset, mesh, mesh_axis,
    resolve_data_path, sample_mesh, sample_uniform, split_dataset, target_eval, uniform
)
from app.services.expr_core import Dataset, mse_fitness
from app.utils.errors import IngestionError, UnknownNameError, UsageError

SYNTHETIC = [name for name, spec in BENCHMARKS.items() if not spec.csv_backed]


class ZeroFirstRng:
    """Returns zeros on the first uniform draw, then ones"""

    def __init__(self):
        self.calls = 0

    def uniform(self, low, high, size):
        self.calls += 1
        return np.zeros(size) if self.calls == 1 else np.ones(size)


def _write_csv(path, rows, header=None):
    lines = [",".join(header)] if header else []
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_registry_table():
    assert len(BENCHMARKS) == 16
    assert len(SYNTHETIC) == 14
    assert [s.name for s in list_benchmarks() if s.csv_backed] == ["Energy", "Concrete"]
    assert get_benchmark("Sphere5").function_set is FunctionSetName.A
    assert get_benchmark("Poly10").function_set is FunctionSetName.A
    assert get_benchmark("Dic5").function_set is FunctionSetName.C
    assert get_benchmark("Vlad3").function_set is FunctionSetName.B


def test_list_filter_is_case_insensitive_substring():
    assert [s.name for s in list_benchmarks("Nico")] == ["Nico9", "Nico14", "Nico16", "Nico20"]
    assert [s.name for s in list_benchmarks("nguyen")] == ["Nguyen6", "Nguyen7"]
    assert list_benchmarks("nothing-matches") == []


def test_lookup_and_suggestions():
    assert get_benchmark("nguyen6").name == "Nguyen6"
    with pytest.raises(UnknownNameError) as excinfo:
        get_benchmark("Ngyuen6")
    assert "Nguyen6" in excinfo.value.suggestions
    assert "Sphere5" in str(excinfo.value)


def test_target_values():
    assert target_eval(get_benchmark("Sphere5"), [1, 1, 1, 1, 1]) == 5.0
    assert target_eval(get_benchmark("Nico9"), [0, 0]) == 0.0
    assert target_eval(get_benchmark("Pagie1"), [1, 1]) == 1.0
    assert target_eval(get_benchmark("Nguyen6"), [0.0]) == 0.0
    with pytest.raises(UsageError):
        target_eval(get_benchmark("Sphere5"), [1, 1])
    with pytest.raises(UsageError):
        target_eval(get_benchmark("Energy"), [0] * 8)


@pytest.mark.parametrize("name", SYNTHETIC)
def test_target_tree_scores_zero(name):
    spec = get_benchmark(name)
    train, test = build_problem(spec, np.random.default_rng(1), np.random.default_rng(2))
    tree = spec.target_tree()
    assert mse_fitness(tree, train) == 0.0
    assert mse_fitness(tree, test) == 0.0
    assert train.n_vars == spec.n_vars


def test_uniform_sampler_shape_and_range():
    X = sample_uniform(1, 11, 1000, 5, np.random.default_rng(3))
    assert X.shape == (1000, 5)
    assert X.min() >= 1 and X.max() <= 11
    np.testing.assert_array_equal(X, sample_uniform(1, 11, 1000, 5, np.random.default_rng(3)))
    with pytest.raises(UsageError):
        sample_uniform(2, 1, 5, 1, np.random.default_rng(3))


def test_mesh_counts():
    assert len(mesh_axis(-5, 5, 0.4)) == 26
    np.testing.assert_array_equal(sample_mesh(0, 1, 1, 2), [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert sample_mesh(-5, 5, 0.4, 2).shape == (676, 2)
    with pytest.raises(UsageError):
        mesh_axis(0, 1, 0)


def test_problem_sizes():
    vlad3 = get_benchmark("Vlad3")
    train, test = build_problem(vlad3, np.random.default_rng(0), np.random.default_rng(0))
    assert train.n_points == 600
    assert test.n_points == 5083
    pagie1 = get_benchmark("Pagie1")
    train, test = build_problem(pagie1, np.random.default_rng(0), np.random.default_rng(0))
    assert train.n_points == 676
    assert test.n_points == 676
    assert get_benchmark("Vlad3").train_sampler.kind is SamplerKind.MESH


def test_mesh_rows_with_zero_denominator_dropped():
    X = draw_inputs(get_benchmark("Pagie1").train_sampler, 2, None, nonzero_vars=())
    assert X.shape == (676, 2)
    zero_mesh = draw_inputs(mesh((-1.0, 1.0, 1.0)), 2, None, nonzero_vars=(1,))
    assert zero_mesh.shape == (6, 2)
    assert np.all(zero_mesh[:, 0] != 0)


def test_uniform_rows_with_zero_are_redrawn():
    rng = ZeroFirstRng()
    X = draw_inputs(uniform(-1.0, 1.0, 4), 3, rng, nonzero_vars=(2,))
    np.testing.assert_array_equal(X, np.ones((4, 3)))
    assert rng.calls == 2


def test_train_and_test_streams_are_independent():
    spec = get_benchmark("Nguyen6")
    train, test = build_problem(spec, np.random.default_rng(5), np.random.default_rng(6))
    again, _ = build_problem(spec, np.random.default_rng(5), np.random.default_rng(7))
    np.testing.assert_array_equal(train.inputs, again.inputs)
    assert not np.array_equal(train.inputs, test.inputs)


def test_csv_with_header(tmp_path):
    path = _write_csv(tmp_path / "d.csv", [[1, 2, 3], [4, 5, 6], [7, 8, 9]], header=["a", "b", "y"])
    data = load_csv_dataset(path, "y")
    np.testing.assert_array_equal(data.inputs, [[1, 2], [4, 5], [7, 8]])
    np.testing.assert_array_equal(data.targets, [3, 6, 9])


def test_csv_without_header_and_column_indices(tmp_path):
    path = _write_csv(tmp_path / "d.csv", [[1, 2, 3], [4, 5, 6]])
    data = load_csv_dataset(path, 0, [2])
    np.testing.assert_array_equal(data.inputs, [[3], [6]])
    np.testing.assert_array_equal(data.targets, [1, 4])
    assert load_csv_dataset(path, -1).n_vars == 2


def test_csv_rejects_non_numeric_rows(tmp_path):
    path = _write_csv(tmp_path / "d.csv", [[1, 2], ["x", 3], [5, 6], [7, ""]], header=["a", "y"])
    data = load_csv_dataset(path, "y")
    np.testing.assert_array_equal(data.targets, [2, 6])


def test_csv_errors(tmp_path):
    with pytest.raises(IngestionError):
        load_csv_dataset(tmp_path / "missing.csv", 0)
    header_only = _write_csv(tmp_path / "h.csv", [], header=["a", "y"])
    with pytest.raises(IngestionError):
        load_csv_dataset(header_only, "y")
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(IngestionError):
        load_csv_dataset(empty, 0)
    text_only = _write_csv(tmp_path / "t.csv", [["u", "v"]], header=["a", "y"])
    with pytest.raises(IngestionError) as excinfo:
        load_csv_dataset(text_only, "y")
    assert excinfo.value.row == 2
    small = _write_csv(tmp_path / "s.csv", [[1, 2]])
    with pytest.raises(IngestionError):
        load_csv_dataset(small, 5)
    with pytest.raises(IngestionError):
        load_csv_dataset(small, "missing")


def test_split_sizes_and_seeding():
    data = Dataset(np.arange(1030.0).reshape(-1, 1), np.arange(1030.0))
    train, test = split_dataset(data, np.random.default_rng(8))
    assert (train.n_points, test.n_points) == (721, 309)
    assert sorted(np.concatenate([train.targets, test.targets]).tolist()) == list(range(1030))
    again, _ = split_dataset(data, np.random.default_rng(8))
    np.testing.assert_array_equal(train.targets, again.targets)
    with pytest.raises(UsageError):
        split_dataset(Dataset(np.zeros((1, 1)), np.zeros(1)), np.random.default_rng(8))


def test_csv_backed_problem(tmp_path):
    rng = np.random.default_rng(9)
    rows = rng.uniform(0, 1, size=(20, 9)).tolist()
    path = _write_csv(tmp_path / "concrete.csv", rows)
    spec = get_benchmark("Concrete")
    train, test = build_problem(spec, np.random.default_rng(1), np.random.default_rng(2), data_dir=tmp_path)
    assert (train.n_points, test.n_points) == (14, 6)
    assert train.n_vars == 8
    assert resolve_data_path(spec, None, tmp_path) == path
    with pytest.raises(IngestionError):
        resolve_data_path(spec, None, None)


def test_csv_backed_problem_checks_width(tmp_path):
    path = _write_csv(tmp_path / "narrow.csv", [[1, 2, 3]] * 10)
    with pytest.raises(IngestionError):
        build_problem(get_benchmark("Energy"), np.random.default_rng(1), np.random.default_rng(2),
                      data_path=path)
