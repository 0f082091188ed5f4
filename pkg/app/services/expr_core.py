"""
Expression core - symbols, alphabets, expression trees and protected evaluation
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.schemas import FunctionSetName
from app.utils.errors import AlphabetError, UsageError

# Protected division: x / (y + EPSILON), applied unconditionally
EPSILON = 1e-100

# Single sentinel for candidates whose predictions are not finite
WORST_FITNESS = float("inf")


class SymbolKind(str, Enum):
    FUNCTION = "function"
    TERMINAL = "terminal"
    CONSTANT = "constant"


@dataclass(frozen=True)
class Operator:
    name: str
    arity: int
    kernel: Callable[..., np.ndarray]
    infix: bool = False


def _protected_div(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x / (y + EPSILON)


def _protected_ln(x: np.ndarray) -> np.ndarray:
    return np.log(np.abs(x))


def _protected_sqrt(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.abs(x))


OPERATORS: Dict[str, Operator] = {
    op.name: op for op in (
        Operator("+", 2, np.add, infix=True),
        Operator("-", 2, np.subtract, infix=True),
        Operator("*", 2, np.multiply, infix=True),
        Operator("/", 2, _protected_div, infix=True),
        Operator("sin", 1, np.sin),
        Operator("cos", 1, np.cos),
        Operator("exp", 1, np.exp),
        Operator("ln", 1, _protected_ln),
        Operator("sqrt", 1, _protected_sqrt),
        # target trees only; never part of a search function set
        Operator("tan", 1, np.tan),
    )
}

SYMBOL_ALIASES = {"√": "sqrt", "−": "-", "×": "*", "log": "ln"}

FUNCTION_SETS: Dict[FunctionSetName, Tuple[str, ...]] = {
    FunctionSetName.A: ("+", "-", "*", "/"),
    FunctionSetName.B: ("+", "-", "*", "/", "sin", "cos", "exp", "ln"),
    FunctionSetName.C: ("+", "-", "*", "/", "sin", "cos", "exp", "ln", "sqrt"),
}


@dataclass(frozen=True)
class Symbol:
    """
    One alphabet entry

    `id` is the index into the active alphabet (functions first, then
    terminals); `column` is the input column a terminal reads.
    """
    kind: SymbolKind
    id: int
    name: str
    arity: int
    column: int = -1
    value: float = 0.0

    def __post_init__(self):
        if (self.arity == 0) != (self.kind is not SymbolKind.FUNCTION):
            raise UsageError(f"symbol '{self.name}' has arity {self.arity} but kind {self.kind.value}")

    @property
    def is_function(self) -> bool:
        return self.kind is SymbolKind.FUNCTION

    @property
    def is_terminal(self) -> bool:
        return self.kind is SymbolKind.TERMINAL

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Alphabet:
    """Ordered function and terminal symbols; the order fixes output-neuron indices"""
    functions: Tuple[Symbol, ...]
    terminals: Tuple[Symbol, ...]
    _by_name: Dict[str, Symbol] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.terminals:
            raise AlphabetError("alphabet needs at least one terminal")
        by_name: Dict[str, Symbol] = {}
        for symbol in self.symbols:
            if symbol.name in by_name:
                raise AlphabetError(f"duplicate symbol name '{symbol.name}'")
            by_name[symbol.name] = symbol
        object.__setattr__(self, "_by_name", by_name)

    @classmethod
    def build(cls, function_names: Iterable[str], terminal_names: Iterable[str]) -> "Alphabet":
        functions = []
        for name in function_names:
            name = SYMBOL_ALIASES.get(name, name)
            if name not in OPERATORS:
                raise AlphabetError(f"unknown function '{name}'")
            functions.append(Symbol(SymbolKind.FUNCTION, len(functions), name, OPERATORS[name].arity))
        terminals = [
            Symbol(SymbolKind.TERMINAL, len(functions) + column, name, 0, column=column)
            for column, name in enumerate(terminal_names)
        ]
        return cls(tuple(functions), tuple(terminals))

    @property
    def symbols(self) -> Tuple[Symbol, ...]:
        return self.functions + self.terminals

    @property
    def size(self) -> int:
        return len(self.functions) + len(self.terminals)

    @property
    def n_vars(self) -> int:
        return len(self.terminals)

    @property
    def max_arity(self) -> int:
        return max((s.arity for s in self.functions), default=1)

    def lookup(self, name: str) -> Symbol:
        """Symbol by name (aliases such as '√' accepted)"""
        symbol = self._by_name.get(SYMBOL_ALIASES.get(name, name))
        if symbol is None:
            raise AlphabetError(f"symbol '{name}' is not in the alphabet")
        return symbol

    def symbol(self, symbol_id: int) -> Symbol:
        """Symbol by alphabet index"""
        if not 0 <= symbol_id < self.size:
            raise AlphabetError(f"symbol id {symbol_id} outside alphabet of size {self.size}")
        return self.symbols[symbol_id]

    def __contains__(self, symbol: Symbol) -> bool:
        return 0 <= symbol.id < self.size and self.symbols[symbol.id] == symbol


def make_alphabet(function_set: Union[FunctionSetName, Sequence[str]], n_vars: int = 0,
                  terminal_names: Optional[Sequence[str]] = None) -> Alphabet:
    """Alphabet from a named function set and x1..xn terminals (or explicit names)"""
    names = FUNCTION_SETS[FunctionSetName(function_set)] if isinstance(function_set, (str, FunctionSetName)) \
        else tuple(function_set)
    if terminal_names is None:
        terminal_names = [f"x{i + 1}" for i in range(n_vars)]
    return Alphabet.build(names, terminal_names)


def arity(symbol: Union[Symbol, int, str], alphabet: Alphabet) -> int:
    """Fixed arity of a symbol of the active alphabet"""
    if isinstance(symbol, Symbol):
        if symbol not in alphabet:
            raise AlphabetError(f"symbol '{symbol.name}' is not in the alphabet")
        return symbol.arity
    if isinstance(symbol, str):
        return alphabet.lookup(symbol).arity
    return alphabet.symbol(symbol).arity


# ============================================================================
# EXPRESSION TREES
# ============================================================================

@dataclass(frozen=True)
class ExpressionTree:
    node: Symbol
    children: Tuple["ExpressionTree", ...] = ()

    def __post_init__(self):
        if len(self.children) != self.node.arity:
            raise UsageError(
                f"node '{self.node.name}' needs {self.node.arity} children, got {len(self.children)}"
            )

    def __str__(self) -> str:
        return format_infix(self)


def function_node(name: str, *children: ExpressionTree) -> ExpressionTree:
    name = SYMBOL_ALIASES.get(name, name)
    if name not in OPERATORS:
        raise AlphabetError(f"unknown function '{name}'")
    return ExpressionTree(Symbol(SymbolKind.FUNCTION, -1, name, OPERATORS[name].arity), tuple(children))


def variable_node(column: int, name: Optional[str] = None) -> ExpressionTree:
    return ExpressionTree(Symbol(SymbolKind.TERMINAL, -1, name or f"x{column + 1}", 0, column=column))


def constant_node(value: float) -> ExpressionTree:
    return ExpressionTree(Symbol(SymbolKind.CONSTANT, -1, format(value, "g"), 0, value=float(value)))


def tree_size(tree: ExpressionTree) -> int:
    return 1 + sum(tree_size(child) for child in tree.children)


def tree_depth(tree: ExpressionTree) -> int:
    return 1 + max((tree_depth(child) for child in tree.children), default=0)


def max_column(tree: ExpressionTree) -> int:
    """Largest input column read by the tree (-1 when it reads none)"""
    own = tree.node.column if tree.node.is_terminal else -1
    return max([own] + [max_column(child) for child in tree.children])


def format_infix(tree: ExpressionTree) -> str:
    """Infix text with explicit parentheses, e.g. sqrt(((x1*x2)-x1)+(x1*sin(x2)))"""
    return _format(tree, top=True)


def _format(tree: ExpressionTree, top: bool = False) -> str:
    symbol = tree.node
    if not symbol.is_function:
        return symbol.name
    if OPERATORS[symbol.name].infix:
        left, right = tree.children
        core = f"{_format(left)}{symbol.name}{_format(right)}"
        return core if top else f"({core})"
    return f"{symbol.name}({_format(tree.children[0], top=True)})"


# ============================================================================
# EVALUATION
# ============================================================================

def evaluate(tree: ExpressionTree, inputs: np.ndarray) -> np.ndarray:
    """
    Evaluate the tree on every row of `inputs`

    Args:
        tree: Expression to evaluate
        inputs: n_points x n_vars matrix

    Returns:
        Vector of n_points predictions; overflow is returned as inf/nan
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2:
        raise UsageError(f"inputs must be a matrix, got shape {inputs.shape}")
    needed = max_column(tree)
    if needed >= inputs.shape[1]:
        raise UsageError(f"tree reads column {needed} but inputs have {inputs.shape[1]} columns")
    with np.errstate(all="ignore"):
        result = _evaluate(tree, inputs)
    return np.broadcast_to(result, (inputs.shape[0],)).astype(float, copy=False)


def _evaluate(tree: ExpressionTree, inputs: np.ndarray) -> np.ndarray:
    symbol = tree.node
    if symbol.kind is SymbolKind.TERMINAL:
        return inputs[:, symbol.column]
    if symbol.kind is SymbolKind.CONSTANT:
        return np.full(inputs.shape[0], symbol.value)
    kernel = OPERATORS[symbol.name].kernel
    return kernel(*[_evaluate(child, inputs) for child in tree.children])


def eval_node(tree: ExpressionTree, point: Sequence[float]) -> float:
    """Evaluate the tree at a single point"""
    row = np.asarray(point, dtype=float).reshape(1, -1)
    return float(evaluate(tree, row)[0])


# ============================================================================
# DATA AND FITNESS
# ============================================================================

@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float)
        targets = np.array(self.targets, dtype=float).reshape(-1)
        if inputs.ndim == 1:
            inputs = inputs.reshape(-1, 1)
        if inputs.ndim != 2:
            raise UsageError(f"inputs must be a matrix, got shape {inputs.shape}")
        if inputs.shape[0] != targets.shape[0]:
            raise UsageError(f"{inputs.shape[0]} input rows but {targets.shape[0]} targets")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(targets))):
            raise UsageError("dataset contains non-finite values")
        inputs.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def n_points(self) -> int:
        return int(self.targets.shape[0])

    @property
    def n_vars(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.inputs[rows], self.targets[rows])


def mse_from_predictions(predictions: np.ndarray, targets: np.ndarray) -> float:
    if not np.all(np.isfinite(predictions)):
        return WORST_FITNESS
    with np.errstate(over="ignore"):
        mse = float(np.mean((predictions - targets) ** 2))
    return mse if np.isfinite(mse) else WORST_FITNESS


def mse_fitness(tree: ExpressionTree, data: Dataset) -> float:
    """Mean squared error of the tree on `data`; non-finite predictions give WORST_FITNESS"""
    if data.n_points == 0:
        raise UsageError("cannot score a tree on an empty dataset")
    return mse_from_predictions(evaluate(tree, data.inputs), data.targets)

