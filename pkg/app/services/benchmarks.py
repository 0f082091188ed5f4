"""
Benchmarks - problem registry, samplers and CSV dataset ingestion

Fourteen synthetic problems plus two CSV-backed regression data sets. Each
synthetic problem carries its closed form twice: as a numpy function used to
label samples and as an engine expression tree that computes the same value
with the same operation order, so the exact target scores an MSE of 0.
"""

import csv
import difflib
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.schemas import BenchmarkInfo, FunctionSetName, SamplerKind
from app.services.expr_core import (
    Alphabet, Dataset, ExpressionTree, constant_node, function_node, make_alphabet, variable_node
)
from app.utils.errors import IngestionError, UnknownNameError, UsageError
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

TRAIN_FRACTION = 0.7


# ============================================================================
# SPECS
# ============================================================================

@dataclass(frozen=True)
class SamplerSpec:
    """
    U[a, b, c]: c points uniform in [a, b] per variable.
    E[a, b, c]: grid from a to b with step c, Cartesian product over variables.

    `axes` holds one (a, b, c) triple shared by all variables or one per variable.
    """
    kind: SamplerKind
    axes: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self):
        for a, b, c in self.axes:
            if not a < b:
                raise UsageError(f"sampler interval [{a}, {b}] is empty")
            if c <= 0:
                raise UsageError(f"sampler parameter must be positive, got {c}")

    def describe(self, names: Sequence[str] = ("x", "y")) -> str:
        parts = [f"{self.kind.value}[{a:g}, {b:g}, {c:g}]" for a, b, c in self.axes]
        if len(parts) == 1:
            return parts[0]
        return " ".join(f"{name}:{part}" for name, part in zip(names, parts))


def uniform(a: float, b: float, count: int) -> SamplerSpec:
    return SamplerSpec(SamplerKind.UNIFORM, ((a, b, count),))


def mesh(*axes: Tuple[float, float, float]) -> SamplerSpec:
    return SamplerSpec(SamplerKind.MESH, tuple(axes))


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    n_vars: int
    function_set: FunctionSetName
    train_sampler: Optional[SamplerSpec] = None
    test_sampler: Optional[SamplerSpec] = None
    target: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    target_tree: Optional[Callable[[], ExpressionTree]] = field(default=None, repr=False)
    formula: str = ""
    nonzero_vars: Tuple[int, ...] = ()
    # CSV-backed problems
    default_file: Optional[str] = None
    target_column: int = -1
    feature_columns: Tuple[int, ...] = ()

    @property
    def csv_backed(self) -> bool:
        return self.default_file is not None

    def alphabet(self) -> Alphabet:
        return make_alphabet(self.function_set, self.n_vars)

    def info(self) -> BenchmarkInfo:
        return BenchmarkInfo(
            name=self.name,
            n_vars=self.n_vars,
            function_set=self.function_set,
            train_sampler=self.train_sampler.describe() if self.train_sampler else "csv",
            test_sampler=self.test_sampler.describe() if self.test_sampler else "csv",
            csv_backed=self.csv_backed,
        )


# ============================================================================
# TARGET TREES
# ============================================================================

def _x(i: int) -> ExpressionTree:
    """Engine node for variable x_i (1-based)"""
    return variable_node(i - 1)


def _c(value: float) -> ExpressionTree:
    return constant_node(value)


def _fold(name: str, *terms: ExpressionTree) -> ExpressionTree:
    return reduce(lambda left, right: function_node(name, left, right), terms)


def _add(*terms: ExpressionTree) -> ExpressionTree:
    return _fold("+", *terms)


def _mul(*factors: ExpressionTree) -> ExpressionTree:
    return _fold("*", *factors)


def _sub(a: ExpressionTree, b: ExpressionTree) -> ExpressionTree:
    return function_node("-", a, b)


def _div(a: ExpressionTree, b: ExpressionTree) -> ExpressionTree:
    return function_node("/", a, b)


def _fn(name: str, a: ExpressionTree) -> ExpressionTree:
    return function_node(name, a)


def _sphere5_tree():
    return _add(*[_mul(_x(i), _x(i)) for i in range(1, 6)])


def _dic1_tree():
    return _add(*[_x(i) for i in range(1, 6)])


def _dic3_tree():
    return _add(_x(1), _div(_mul(_x(2), _x(3)), _x(4)), _div(_mul(_x(3), _x(4)), _x(5)))


def _dic4_tree():
    return _add(_mul(_x(1), _x(2)), _mul(_x(2), _x(3)), _mul(_x(3), _x(4), _x(5)), _mul(_x(5), _x(6)))


def _dic5_tree():
    return _add(_fn("sqrt", _x(1)), _fn("sin", _x(2)), _fn("ln", _x(3)))


def _nico9_tree():
    x1, x2 = _x(1), _x(2)
    return _sub(
        _add(_sub(_mul(x1, x1, x1, x1), _mul(x1, x1, x1)), _div(_mul(x2, x2), _c(2.0))),
        x2,
    )


def _nico14_tree():
    return _div(_mul(_x(5), _x(6)), _mul(_div(_x(1), _x(2)), _div(_x(3), _x(4))))


def _nico16_tree():
    t = [_fn("tan", _x(i)) for i in range(1, 5)]
    return _sub(_c(32.0), _mul(_c(3.0), _div(t[0], t[1]), _div(t[2], t[3])))


def _nico20_tree():
    return _add(*[_div(_c(1.0), _x(i)) for i in range(1, 6)])


def _poly10_tree():
    x = _x
    return _add(
        _mul(x(1), x(2)), _mul(x(2), x(3)), _mul(x(3), x(4)), _mul(x(4), x(5)), _mul(x(5), x(6)),
        _mul(x(1), x(7), x(9)), _mul(x(3), x(6), x(10)),
    )


def _pagie1_tree():
    def term(i):
        return _div(_c(1.0), _add(_c(1.0), _div(_c(1.0), _mul(_x(i), _x(i), _x(i), _x(i)))))
    return _add(term(1), term(2))


def _nguyen6_tree():
    x = _x(1)
    return _add(_fn("sin", x), _fn("sin", _add(x, _mul(x, x))))


def _nguyen7_tree():
    x = _x(1)
    return _add(_fn("ln", _add(x, _c(1.0))), _fn("ln", _add(_mul(x, x), _c(1.0))))


def _vlad3_tree():
    x, y = _x(1), _x(2)
    sin_x, cos_x = _fn("sin", x), _fn("cos", x)
    return _mul(
        _fn("exp", _sub(_c(0.0), x)),
        _mul(x, x, x),
        _mul(cos_x, sin_x),
        _sub(_mul(cos_x, _mul(sin_x, sin_x)), _c(1.0)),
        _sub(y, _c(5.0)),
    )


# ============================================================================
# CLOSED FORMS (unprotected numpy, same operation order as the trees)
# ============================================================================

def _col(X: np.ndarray, i: int) -> np.ndarray:
    return X[:, i - 1]


def _sphere5(X):
    total = _col(X, 1) * _col(X, 1)
    for i in range(2, 6):
        total = total + _col(X, i) * _col(X, i)
    return total


def _dic1(X):
    total = _col(X, 1)
    for i in range(2, 6):
        total = total + _col(X, i)
    return total


def _dic3(X):
    x1, x2, x3, x4, x5 = (_col(X, i) for i in range(1, 6))
    return (x1 + (x2 * x3) / x4) + (x3 * x4) / x5


def _dic4(X):
    x1, x2, x3, x4, x5, x6 = (_col(X, i) for i in range(1, 7))
    return ((x1 * x2 + x2 * x3) + (x3 * x4) * x5) + x5 * x6


def _dic5(X):
    return (np.sqrt(_col(X, 1)) + np.sin(_col(X, 2))) + np.log(_col(X, 3))


def _nico9(X):
    x1, x2 = _col(X, 1), _col(X, 2)
    return ((((x1 * x1) * x1) * x1 - (x1 * x1) * x1) + (x2 * x2) / 2.0) - x2


def _nico14(X):
    x1, x2, x3, x4, x5, x6 = (_col(X, i) for i in range(1, 7))
    return (x5 * x6) / ((x1 / x2) * (x3 / x4))


def _nico16(X):
    t1, t2, t3, t4 = (np.tan(_col(X, i)) for i in range(1, 5))
    return 32.0 - (3.0 * (t1 / t2)) * (t3 / t4)


def _nico20(X):
    total = 1.0 / _col(X, 1)
    for i in range(2, 6):
        total = total + 1.0 / _col(X, i)
    return total


def _poly10(X):
    x = [None] + [_col(X, i) for i in range(1, 11)]
    return (((((x[1] * x[2] + x[2] * x[3]) + x[3] * x[4]) + x[4] * x[5]) + x[5] * x[6])
            + (x[1] * x[7]) * x[9]) + (x[3] * x[6]) * x[10]


def _pagie1(X):
    x1, x2 = _col(X, 1), _col(X, 2)
    return 1.0 / (1.0 + 1.0 / (((x1 * x1) * x1) * x1)) + 1.0 / (1.0 + 1.0 / (((x2 * x2) * x2) * x2))


def _nguyen6(X):
    x = _col(X, 1)
    return np.sin(x) + np.sin(x + x * x)


def _nguyen7(X):
    x = _col(X, 1)
    return np.log(x + 1.0) + np.log(x * x + 1.0)


def _vlad3(X):
    x, y = _col(X, 1), _col(X, 2)
    return (((np.exp(0.0 - x) * ((x * x) * x)) * (np.cos(x) * np.sin(x)))
            * (np.cos(x) * (np.sin(x) * np.sin(x)) - 1.0)) * (y - 5.0)


# ============================================================================
# REGISTRY
# ============================================================================

_U_DIC = uniform(1.0, 11.0, 1000)
_U_NICO = uniform(-5.0, 5.0, 1000)

_SPECS: List[BenchmarkSpec] = [
    BenchmarkSpec("Sphere5", 5, FunctionSetName.A, _U_DIC, _U_DIC, _sphere5, _sphere5_tree,
                  "x1^2 + x2^2 + x3^2 + x4^2 + x5^2"),
    BenchmarkSpec("Dic1", 10, FunctionSetName.B, _U_DIC, _U_DIC, _dic1, _dic1_tree,
                  "x1 + x2 + x3 + x4 + x5"),
    BenchmarkSpec("Dic3", 10, FunctionSetName.B, _U_DIC, _U_DIC, _dic3, _dic3_tree,
                  "x1 + x2 x3 / x4 + x3 x4 / x5"),
    BenchmarkSpec("Dic4", 10, FunctionSetName.B, _U_DIC, _U_DIC, _dic4, _dic4_tree,
                  "x1 x2 + x2 x3 + x3 x4 x5 + x5 x6"),
    BenchmarkSpec("Dic5", 10, FunctionSetName.C, _U_DIC, _U_DIC, _dic5, _dic5_tree,
                  "sqrt(x1) + sin(x2) + ln(x3)"),
    BenchmarkSpec("Nico9", 2, FunctionSetName.B, _U_NICO, _U_NICO, _nico9, _nico9_tree,
                  "x1^4 - x1^3 + x2^2 / 2 - x2"),
    BenchmarkSpec("Nico14", 6, FunctionSetName.B, _U_NICO, _U_NICO, _nico14, _nico14_tree,
                  "(x5 x6) / ((x1 / x2) (x3 / x4))", nonzero_vars=(1, 2, 3, 4)),
    BenchmarkSpec("Nico16", 4, FunctionSetName.B, _U_NICO, _U_NICO, _nico16, _nico16_tree,
                  "32 - 3 (tan(x1) / tan(x2)) (tan(x3) / tan(x4))", nonzero_vars=(2, 4)),
    BenchmarkSpec("Nico20", 10, FunctionSetName.B, _U_NICO, _U_NICO, _nico20, _nico20_tree,
                  "sum_{i=1..5} 1 / xi", nonzero_vars=(1, 2, 3, 4, 5)),
    BenchmarkSpec("Poly10", 10, FunctionSetName.A, uniform(-1.0, 1.0, 250), uniform(-1.0, 1.0, 250),
                  _poly10, _poly10_tree,
                  "x1 x2 + x2 x3 + x3 x4 + x4 x5 + x5 x6 + x1 x7 x9 + x3 x6 x10"),
    BenchmarkSpec("Pagie1", 2, FunctionSetName.B, mesh((-5.0, 5.0, 0.4)), mesh((-4.95, 5.05, 0.4)),
                  _pagie1, _pagie1_tree, "1 / (1 + x1^-4) + 1 / (1 + x2^-4)", nonzero_vars=(1, 2)),
    BenchmarkSpec("Nguyen6", 1, FunctionSetName.B, uniform(-1.0, 1.0, 20), uniform(-1.0, 1.0, 20),
                  _nguyen6, _nguyen6_tree, "sin(x) + sin(x + x^2)"),
    BenchmarkSpec("Nguyen7", 1, FunctionSetName.B, uniform(0.0, 2.0, 20), uniform(0.0, 2.0, 20),
                  _nguyen7, _nguyen7_tree, "ln(x + 1) + ln(x^2 + 1)"),
    BenchmarkSpec("Vlad3", 2, FunctionSetName.B,
                  mesh((0.05, 10.0, 0.1), (0.05, 10.05, 2.0)),
                  mesh((-0.5, 10.5, 0.05), (-0.5, 10.5, 0.5)),
                  _vlad3, _vlad3_tree,
                  "exp(-x) x^3 cos(x) sin(x) (cos(x) sin(x)^2 - 1) (y - 5)"),
    BenchmarkSpec("Energy", 8, FunctionSetName.B, formula="Energy efficiency of buildings (heating load)",
                  default_file="energy.csv", target_column=8, feature_columns=tuple(range(8))),
    BenchmarkSpec("Concrete", 8, FunctionSetName.B, formula="Concrete compressive strength",
                  default_file="concrete.csv", target_column=8, feature_columns=tuple(range(8))),
]

BENCHMARKS = {spec.name: spec for spec in _SPECS}


def suggest(name: str, valid: Sequence[str]) -> List[str]:
    """Close matches for an unknown name, case-insensitive"""
    lowered = {v.lower(): v for v in valid}
    matches = difflib.get_close_matches(name.lower(), list(lowered), n=3, cutoff=0.5)
    return [lowered[m] for m in matches]


def get_benchmark(name: str) -> BenchmarkSpec:
    """Registered spec by exact name; case-insensitive fallback"""
    if name in BENCHMARKS:
        return BENCHMARKS[name]
    for key, spec in BENCHMARKS.items():
        if key.lower() == name.lower():
            return spec
    valid = list(BENCHMARKS)
    raise UnknownNameError("benchmark", name, valid, suggest(name, valid))


def list_benchmarks(name_filter: Optional[str] = None) -> List[BenchmarkSpec]:
    """Registry in table order, optionally filtered by case-insensitive substring"""
    if not name_filter:
        return list(_SPECS)
    needle = name_filter.lower()
    return [spec for spec in _SPECS if needle in spec.name.lower()]


# ============================================================================
# SAMPLERS
# ============================================================================

def sample_uniform(a: float, b: float, count: int, n_vars: int, rng: np.random.Generator) -> np.ndarray:
    """count x n_vars matrix, every coordinate iid uniform on [a, b]"""
    if not a < b:
        raise UsageError(f"uniform sampler needs a < b, got [{a}, {b}]")
    return rng.uniform(a, b, size=(int(count), n_vars))


def mesh_axis(a: float, b: float, step: float) -> np.ndarray:
    """a, a + step, ... up to b inclusive when b lies on the grid"""
    if step <= 0:
        raise UsageError(f"mesh step must be positive, got {step}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(count)


def sample_mesh(a: float, b: float, step: float, n_vars: int) -> np.ndarray:
    """Cartesian grid with the same axis for every variable"""
    return sample_mesh_axes([(a, b, step)] * n_vars)


def sample_mesh_axes(axes: Sequence[Tuple[float, float, float]]) -> np.ndarray:
    grids = np.meshgrid(*[mesh_axis(a, b, step) for a, b, step in axes], indexing="ij")
    return np.column_stack([grid.reshape(-1) for grid in grids])


def draw_inputs(sampler: SamplerSpec, n_vars: int, rng: np.random.Generator,
                nonzero_vars: Sequence[int] = ()) -> np.ndarray:
    """
    Input matrix for one sampler

    Uniform rows with an exact zero in a `nonzero_vars` column are redrawn;
    grid rows with such a zero are dropped.
    """
    columns = [v - 1 for v in nonzero_vars]
    if sampler.kind is SamplerKind.MESH:
        axes = sampler.axes if len(sampler.axes) == n_vars else sampler.axes * n_vars
        inputs = sample_mesh_axes(axes)
        if columns:
            keep = np.all(inputs[:, columns] != 0.0, axis=1)
            if not np.all(keep):
                logger.warning(f"Dropped {int(np.sum(~keep))} grid rows with a zero denominator")
            inputs = inputs[keep]
        return inputs

    a, b, count = sampler.axes[0]
    inputs = sample_uniform(a, b, int(count), n_vars, rng)
    while columns:
        bad = np.flatnonzero(np.any(inputs[:, columns] == 0.0, axis=1))
        if bad.size == 0:
            break
        inputs[bad] = sample_uniform(a, b, bad.size, n_vars, rng)
    return inputs


def target_eval(spec: BenchmarkSpec, point: Sequence[float]) -> float:
    """Exact closed-form target at one point"""
    if spec.target is None:
        raise UsageError(f"{spec.name} is data-backed and has no closed form")
    row = np.asarray(point, dtype=float).reshape(1, -1)
    if row.shape[1] != spec.n_vars:
        raise UsageError(f"{spec.name} takes {spec.n_vars} variables, got {row.shape[1]}")
    with np.errstate(all="ignore"):
        return float(spec.target(row)[0])


def label(spec: BenchmarkSpec, inputs: np.ndarray) -> Dataset:
    with np.errstate(all="ignore"):
        targets = spec.target(inputs)
    return Dataset(inputs, targets)


# ============================================================================
# CSV INGESTION
# ============================================================================

def _parse_float(cell: str) -> Optional[float]:
    try:
        value = float(cell.strip())
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv_dataset(path: Union[str, Path], target_column: Union[int, str],
                     feature_columns: Optional[Sequence[Union[int, str]]] = None) -> Dataset:
    """
    Read a comma-separated numeric file

    Args:
        path: CSV file, optional single header row
        target_column: Index or header name of the target
        feature_columns: Indices or header names of the inputs; every other column when omitted

    Returns:
        Dataset of the rows whose used cells are all numeric
    """
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"dataset file not found: {path}")
    try:
        with path.open(newline="", encoding="utf-8-sig") as handle:
            rows = [row for row in csv.reader(handle) if any(cell.strip() for cell in row)]
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise IngestionError(f"cannot read {path}: {e}") from None

    if not rows:
        raise IngestionError(f"{path} is empty")

    header: Optional[List[str]] = None
    first_data_row = 0
    if any(_parse_float(cell) is None for cell in rows[0]):
        header = [cell.strip() for cell in rows[0]]
        first_data_row = 1
    n_columns = len(rows[0])

    def resolve(column: Union[int, str]) -> int:
        if isinstance(column, str) and not column.lstrip("-").isdigit():
            if header is None or column not in header:
                raise IngestionError(f"no column named '{column}' in {path}")
            return header.index(column)
        index = int(column)
        if index < 0:
            index += n_columns
        if not 0 <= index < n_columns:
            raise IngestionError(f"target or feature column outside a {n_columns}-column file", column=index)
        return index

    target = resolve(target_column)
    if feature_columns is None:
        features = [i for i in range(n_columns) if i != target]
    else:
        features = [resolve(c) for c in feature_columns]
    used = features + [target]

    values: List[List[float]] = []
    rejected = 0
    first_rejected: Optional[Tuple[int, int]] = None
    for line, row in enumerate(rows[first_data_row:], start=first_data_row + 1):
        parsed = []
        for column in used:
            cell = _parse_float(row[column]) if column < len(row) else None
            if cell is None:
                if first_rejected is None:
                    first_rejected = (line, column)
                break
            parsed.append(cell)
        if len(parsed) == len(used):
            values.append(parsed)
        else:
            rejected += 1

    if rejected:
        line, column = first_rejected
        logger.warning(
            f"⚠️ {path.name}: rejected {rejected} row(s) with non-numeric cells "
            f"(first at row {line}, column {column})"
        )
    if not values:
        if first_rejected is None:
            raise IngestionError(f"{path} has no data rows")
        raise IngestionError(f"{path} has no numeric rows", row=first_rejected[0], column=first_rejected[1])

    matrix = np.array(values, dtype=float)
    logger.info(f"📂 Loaded {path.name}: {matrix.shape[0]} rows, {len(features)} features")
    return Dataset(matrix[:, :-1], matrix[:, -1])


def split_dataset(data: Dataset, rng: np.random.Generator,
                  train_fraction: float = TRAIN_FRACTION) -> Tuple[Dataset, Dataset]:
    """Seeded shuffle split; the train part has round(fraction * n) rows"""
    n = data.n_points
    n_train = int(math.floor(train_fraction * n + 0.5))
    if not 0 < n_train < n:
        raise UsageError(f"cannot split {n} rows into train and test")
    order = rng.permutation(n)
    return data.subset(order[:n_train]), data.subset(order[n_train:])


def resolve_data_path(spec: BenchmarkSpec, data_path: Optional[Union[str, Path]],
                      data_dir: Optional[Union[str, Path]] = None) -> Path:
    """Explicit path, else the spec's default file under `data_dir`"""
    if data_path:
        return Path(data_path)
    if data_dir:
        return Path(data_dir) / spec.default_file
    raise IngestionError(f"{spec.name} is data-backed; pass a CSV path with --data")


def build_problem(spec: BenchmarkSpec, rng_train: np.random.Generator, rng_test: np.random.Generator,
                  data_path: Optional[Union[str, Path]] = None,
                  data_dir: Optional[Union[str, Path]] = None) -> Tuple[Dataset, Dataset]:
    """
    Train and test datasets for one trial

    Synthetic problems draw train and test inputs from independent streams;
    CSV problems are loaded once and split with the train stream.
    """
    if spec.csv_backed:
        path = resolve_data_path(spec, data_path, data_dir)
        data = load_csv_dataset(path, spec.target_column, list(spec.feature_columns))
        if data.n_vars != spec.n_vars:
            raise IngestionError(f"{spec.name} needs {spec.n_vars} features, {path} gives {data.n_vars}")
        return split_dataset(data, rng_train)

    train = label(spec, draw_inputs(spec.train_sampler, spec.n_vars, rng_train, spec.nonzero_vars))
    test = label(spec, draw_inputs(spec.test_sampler, spec.n_vars, rng_test, spec.nonzero_vars))
    return train, test
