import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.models.schemas import FunctionSetName
from app.services.expr_core import make_alphabet
from app.services.kexpression import (
    Gene, alphabet_for_gene_text, decode, effective_length, format_gene, infer_head_length,
    is_valid_gene, parse_gene, random_gene, tail_length, validate_gene
)
from app.utils.errors import GeneParseError, UsageError
from tests.conftest import PAPER_EXPRESSION, PAPER_GENE


def _level_decode(symbols):
    """Level-by-level reading of a K-expression into nested (name, children) tuples"""
    levels = [[0]]
    cursor = 1
    while True:
        width = sum(symbols[i].arity for i in levels[-1])
        if width == 0:
            break
        levels.append(list(range(cursor, cursor + width)))
        cursor += width

    children = {}
    for upper, lower in zip(levels, levels[1:]):
        slots = iter(lower)
        for index in upper:
            children[index] = [next(slots) for _ in range(symbols[index].arity)]

    def build(index):
        return symbols[index].name, tuple(build(c) for c in children.get(index, []))

    return build(0), cursor


def _as_tuple(tree):
    return tree.node.name, tuple(_as_tuple(child) for child in tree.children)


def test_tail_length():
    assert tail_length(30, make_alphabet(FunctionSetName.B, 1)) == 31
    assert tail_length(8, make_alphabet(FunctionSetName.C, 2)) == 9
    assert tail_length(4, make_alphabet(["sin", "cos"], 1)) == 1


def test_reference_gene_decodes():
    alphabet = alphabet_for_gene_text(PAPER_GENE)
    gene = parse_gene(PAPER_GENE, alphabet)
    assert gene.head_len == 8
    assert gene.tail_len == 9
    assert str(decode(gene)) == PAPER_EXPRESSION
    assert effective_length(gene) == 11


def test_reference_gene_with_explicit_terminals():
    alphabet = alphabet_for_gene_text(PAPER_GENE, terminals=["x", "y"])
    assert str(decode(parse_gene(PAPER_GENE, alphabet, head_len=8))) == PAPER_EXPRESSION


def test_terminal_root_ignores_rest():
    alphabet = make_alphabet(FunctionSetName.C, terminal_names=["x"])
    gene = parse_gene("x x x", alphabet, head_len=1)
    assert str(decode(gene)) == "x"
    assert effective_length(gene) == 1


def test_unknown_symbol_reports_index():
    with pytest.raises(GeneParseError) as excinfo:
        alphabet_for_gene_text("+ x $")
    assert excinfo.value.index == 2


def test_parse_gene_unknown_name_reports_index(alphabet_xy):
    with pytest.raises(GeneParseError) as excinfo:
        parse_gene("+ x z", alphabet_xy, head_len=1)
    assert excinfo.value.index == 2


def test_function_in_tail_rejected(alphabet_xy):
    with pytest.raises(GeneParseError) as excinfo:
        parse_gene("+ x +", alphabet_xy, head_len=1)
    assert excinfo.value.index == 2


def test_bad_lengths(alphabet_xy):
    with pytest.raises(UsageError):
        infer_head_length(16, alphabet_xy)
    assert infer_head_length(17, alphabet_xy) == 8
    with pytest.raises(UsageError):
        parse_gene("+ x y x", alphabet_xy, head_len=1)
    with pytest.raises(UsageError):
        parse_gene("", alphabet_xy)


def test_gene_constructor_rejects_function_in_tail(alphabet_xy):
    plus, x = alphabet_xy.lookup("+"), alphabet_xy.lookup("x")
    with pytest.raises(UsageError):
        Gene((plus, x, plus), 1, 2)
    with pytest.raises(UsageError):
        Gene((plus, x), 1, 2)


def test_validate_gene_checks_alphabet(alphabet_xy):
    other = make_alphabet(FunctionSetName.A, 2)
    gene = random_gene(np.random.default_rng(0), 4, other)
    assert is_valid_gene(gene, other)
    assert not is_valid_gene(gene, alphabet_xy)
    with pytest.raises(UsageError):
        validate_gene(gene, alphabet_xy)


def test_format_gene_uses_canonical_names(alphabet_xy):
    gene = parse_gene(PAPER_GENE, alphabet_for_gene_text(PAPER_GENE))
    assert format_gene(gene).startswith("sqrt + - * *")
    assert format_gene(parse_gene(format_gene(gene), alphabet_xy)) == format_gene(gene)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), head_len=st.integers(1, 12),
       function_set=st.sampled_from(list(FunctionSetName)), n_vars=st.integers(1, 3))
def test_decoder_matches_level_by_level_reading(seed, head_len, function_set, n_vars):
    alphabet = make_alphabet(function_set, n_vars)
    gene = random_gene(np.random.default_rng(seed), head_len, alphabet)
    expected, used = _level_decode(gene.symbols)
    assert _as_tuple(decode(gene)) == expected
    assert effective_length(gene) == used
    assert 1 <= used <= len(gene)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), head_len=st.integers(1, 30))
def test_random_genes_are_valid(seed, head_len):
    alphabet = make_alphabet(FunctionSetName.B, 2)
    gene = random_gene(np.random.default_rng(seed), head_len, alphabet)
    validate_gene(gene, alphabet)
    assert len(gene) == head_len + tail_length(head_len, alphabet)
    assert all(symbol.is_terminal for symbol in gene.tail)


def test_decoder_matches_level_by_level_reading_on_ten_thousand_genes():
    rng = np.random.default_rng(77)
    alphabets = [make_alphabet(function_set, n_vars) for function_set in FunctionSetName for n_vars in (1, 2, 3)]
    for _ in range(10_000):
        alphabet = alphabets[int(rng.integers(len(alphabets)))]
        gene = random_gene(rng, int(rng.integers(1, 31)), alphabet)
        validate_gene(gene, alphabet)
        expected, used = _level_decode(gene.symbols)
        assert _as_tuple(decode(gene)) == expected
        assert effective_length(gene) == used
