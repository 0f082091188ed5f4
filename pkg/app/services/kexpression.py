"""
K-expressions - fixed-length head/tail genes and the breadth-first (Karva) decoder
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.schemas import FunctionSetName
from app.services.expr_core import (
    FUNCTION_SETS, OPERATORS, SYMBOL_ALIASES, Alphabet, ExpressionTree, Symbol, make_alphabet
)
from app.utils.errors import AlphabetError, GeneParseError, UsageError

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class Gene:
    """
    Linear symbol string: `head_len` positions of any symbol followed by
    `tail_len` terminal-only positions
    """
    symbols: Tuple[Symbol, ...]
    head_len: int
    tail_len: int

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if self.head_len < 1:
            raise UsageError(f"head length must be >= 1, got {self.head_len}")
        if len(self.symbols) != self.head_len + self.tail_len:
            raise UsageError(
                f"gene has {len(self.symbols)} symbols, expected {self.head_len} + {self.tail_len}"
            )
        for index in range(self.head_len, len(self.symbols)):
            if self.symbols[index].is_function:
                raise UsageError(f"function '{self.symbols[index].name}' in tail at index {index}")

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return format_gene(self)

    @property
    def head(self) -> Tuple[Symbol, ...]:
        return self.symbols[:self.head_len]

    @property
    def tail(self) -> Tuple[Symbol, ...]:
        return self.symbols[self.head_len:]

    @property
    def key(self) -> Tuple[int, ...]:
        """Hashable identity used for fitness caching"""
        return tuple(symbol.id for symbol in self.symbols)

    def replace(self, symbols: Sequence[Symbol]) -> "Gene":
        return Gene(tuple(symbols), self.head_len, self.tail_len)


def tail_length(head_len: int, alphabet: Alphabet) -> int:
    """t = h * (a_max - 1) + 1, the smallest tail that lets every head decode"""
    return head_len * (alphabet.max_arity - 1) + 1


def validate_gene(gene: Gene, alphabet: Alphabet):
    """Raise UsageError unless the gene satisfies every invariant for `alphabet`"""
    expected_tail = tail_length(gene.head_len, alphabet)
    if gene.tail_len != expected_tail:
        raise UsageError(f"tail length {gene.tail_len} != {expected_tail} for head {gene.head_len}")
    for index, symbol in enumerate(gene.symbols):
        if symbol not in alphabet:
            raise UsageError(f"symbol '{symbol.name}' at index {index} is not in the alphabet")
        if index >= gene.head_len and not symbol.is_terminal:
            raise UsageError(f"non-terminal '{symbol.name}' in tail at index {index}")


def is_valid_gene(gene: Gene, alphabet: Alphabet) -> bool:
    try:
        validate_gene(gene, alphabet)
    except UsageError:
        return False
    return True


def effective_length(gene: Gene) -> int:
    """Number of leading symbols consumed by breadth-first decoding"""
    needed = 1
    index = 0
    while index < needed:
        needed += gene.symbols[index].arity
        index += 1
    return needed


def decode(gene: Gene) -> ExpressionTree:
    """
    Translate a gene into its expression tree

    The first symbol is the root; each following symbol fills the next open
    argument slot in breadth-first order. Symbols after the last filled slot
    are ignored.
    """
    symbols = gene.symbols
    used = effective_length(gene)

    # children of node i occupy positions first_child[i] .. first_child[i] + arity - 1
    first_child: List[int] = []
    cursor = 1
    for index in range(used):
        first_child.append(cursor)
        cursor += symbols[index].arity

    nodes: List[Optional[ExpressionTree]] = [None] * used
    for index in range(used - 1, -1, -1):
        start = first_child[index]
        children = tuple(nodes[start:start + symbols[index].arity])
        nodes[index] = ExpressionTree(symbols[index], children)
    return nodes[0]


def random_gene(rng: np.random.Generator, head_len: int, alphabet: Alphabet) -> Gene:
    """Head drawn uniformly from all symbols, tail uniformly from terminals"""
    if head_len < 1:
        raise UsageError(f"head length must be >= 1, got {head_len}")
    symbols = alphabet.symbols
    terminals = alphabet.terminals
    tail_len = tail_length(head_len, alphabet)
    head = [symbols[i] for i in rng.integers(0, len(symbols), size=head_len)]
    tail = [terminals[i] for i in rng.integers(0, len(terminals), size=tail_len)]
    return Gene(tuple(head + tail), head_len, tail_len)


# ============================================================================
# TEXT FORM
# ============================================================================

def format_gene(gene: Gene) -> str:
    """Whitespace-separated symbol names"""
    return " ".join(symbol.name for symbol in gene.symbols)


def infer_head_length(total: int, alphabet: Alphabet) -> int:
    """Head length h for which h + t == total, if one exists"""
    remainder = total - 1
    if remainder < 1 or remainder % alphabet.max_arity:
        raise UsageError(
            f"no head length gives a gene of {total} symbols (max arity {alphabet.max_arity})"
        )
    return remainder // alphabet.max_arity


def parse_gene(text: str, alphabet: Alphabet, head_len: Optional[int] = None) -> Gene:
    """
    Parse a whitespace-separated symbol string

    Args:
        text: Gene text such as "sqrt + - * * x x sin x y y y x y x x y"
        alphabet: Alphabet the names resolve against
        head_len: Head length; inferred from the string length when omitted

    Returns:
        Validated Gene
    """
    tokens = text.split()
    if not tokens:
        raise UsageError("empty gene string")
    symbols = []
    for index, token in enumerate(tokens):
        try:
            symbols.append(alphabet.lookup(token))
        except AlphabetError:
            raise GeneParseError(f"unknown symbol '{token}'", index) from None
    if head_len is None:
        head_len = infer_head_length(len(tokens), alphabet)
    tail_len = tail_length(head_len, alphabet)
    if len(tokens) != head_len + tail_len:
        raise UsageError(f"gene has {len(tokens)} symbols, expected {head_len + tail_len} for head {head_len}")
    for index in range(head_len, len(symbols)):
        if symbols[index].is_function:
            raise GeneParseError(f"function '{tokens[index]}' in tail", index)
    return Gene(tuple(symbols), head_len, tail_len)


def alphabet_for_gene_text(text: str, function_set: Union[FunctionSetName, Sequence[str]] = FunctionSetName.C,
                           terminals: Optional[Sequence[str]] = None) -> Alphabet:
    """
    Alphabet for decoding free-standing gene text

    Terminal names default to the identifiers in `text` that are not
    function names, in order of first appearance.
    """
    if terminals is None:
        function_names = set(
            FUNCTION_SETS[FunctionSetName(function_set)] if isinstance(function_set, (str, FunctionSetName))
            else function_set
        )
        found: List[str] = []
        for index, token in enumerate(text.split()):
            name = SYMBOL_ALIASES.get(token, token)
            if name in function_names:
                continue
            if name in OPERATORS or not _IDENTIFIER.match(name):
                raise GeneParseError(f"invalid symbol '{token}'", index)
            if name not in found:
                found.append(name)
        if not found:
            raise UsageError("gene text contains no terminal symbol")
        terminals = found
    return make_alphabet(function_set, terminal_names=list(terminals))
