"""
GEP baseline - gene expression programming over K-expression genes

Variation operators work directly on the symbol string and always return
valid genes: head positions may hold any symbol, tail positions only
terminals, and every operator either keeps positions aligned or writes
into the head alone.
"""

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.models.schemas import GepParams, ProgressRecord
from app.services.expr_core import Alphabet, Dataset, Symbol, mse_fitness
from app.services.kexpression import Gene, decode, random_gene, tail_length
from app.services.optimizers import BestSoFar
from app.utils.errors import UsageError
from app.utils.logger import setup_logger

logger = setup_logger(__name__)


# ============================================================================
# VARIATION OPERATORS
# ============================================================================

def mutate(gene: Gene, rng: np.random.Generator, rate: float, alphabet: Alphabet) -> Gene:
    """
    Point mutation: each position is redrawn with probability `rate`

    Head positions draw from every symbol, tail positions from terminals.
    """
    if rate <= 0:
        return gene
    hits = np.flatnonzero(rng.random(len(gene)) < rate)
    if hits.size == 0:
        return gene
    symbols = list(gene.symbols)
    everything, terminals = alphabet.symbols, alphabet.terminals
    for index in hits:
        pool = everything if index < gene.head_len else terminals
        symbols[index] = pool[int(rng.integers(0, len(pool)))]
    return gene.replace(symbols)


def one_point_crossover(a: Gene, b: Gene, rng: np.random.Generator) -> Tuple[Gene, Gene]:
    """Swap everything from a uniform cut point onwards; cut 0 swaps the whole gene"""
    if a.head_len != b.head_len or len(a) != len(b):
        raise UsageError(f"cannot cross genes of shapes ({a.head_len}, {len(a)}) and ({b.head_len}, {len(b)})")
    cut = int(rng.integers(0, len(a)))
    return (
        a.replace(a.symbols[:cut] + b.symbols[cut:]),
        b.replace(b.symbols[:cut] + a.symbols[cut:]),
    )


def _insert_into_head(gene: Gene, segment: Sequence[Symbol], position: int) -> Gene:
    head = list(gene.head[:position]) + list(segment) + list(gene.head[position:])
    return gene.replace(head[:gene.head_len] + list(gene.tail))


def is_transposition(gene: Gene, rng: np.random.Generator, max_len: int = 3) -> Gene:
    """
    Insertion-sequence transposition

    A segment of 1..max_len symbols copied from anywhere in the gene is
    inserted into the head at a position other than the root; the head is
    truncated back to its length.
    """
    h = gene.head_len
    if h < 2:
        return gene
    length = int(rng.integers(1, min(max_len, h - 1, len(gene)) + 1))
    start = int(rng.integers(0, len(gene) - length + 1))
    segment = gene.symbols[start:start + length]
    target = int(rng.integers(1, h))
    return _insert_into_head(gene, segment, target)


def ris_transposition(gene: Gene, rng: np.random.Generator, max_len: int = 3) -> Gene:
    """
    Root transposition: a segment starting at a head function is copied to the root

    Genes without a function in the head come back unchanged.
    """
    starts = [i for i, symbol in enumerate(gene.head) if symbol.is_function]
    if not starts:
        return gene
    start = starts[int(rng.integers(0, len(starts)))]
    length = int(rng.integers(1, min(max_len, gene.head_len, len(gene) - start) + 1))
    return _insert_into_head(gene, gene.symbols[start:start + length], 0)


def inversion(gene: Gene, rng: np.random.Generator) -> Gene:
    """Reverse a head segment of at least two symbols"""
    h = gene.head_len
    if h < 2:
        return gene
    length = int(rng.integers(2, h + 1))
    start = int(rng.integers(0, h - length + 1))
    symbols = list(gene.symbols)
    symbols[start:start + length] = reversed(symbols[start:start + length])
    return gene.replace(symbols)


# ============================================================================
# EVOLUTION
# ============================================================================

class GepEvolution:
    """
    Generational GEP loop

    Features:
    - Tournament selection with elitism
    - Crossover, mutation, IS, RIS and inversion at their configured rates
    - Fitness cache keyed on the symbol sequence
    """

    def __init__(self, params: GepParams, data: Dataset, alphabet: Alphabet,
                 progress: Optional[Callable[[ProgressRecord], None]] = None):
        if alphabet.n_vars > data.n_vars:
            raise UsageError(f"alphabet reads {alphabet.n_vars} variables but data has {data.n_vars}")
        self.params = params
        self.data = data
        self.alphabet = alphabet
        self.progress = progress
        self.tail_len = tail_length(params.head_len, alphabet)
        self.evaluations = 0
        self._cache: Dict[Tuple[int, ...], float] = {}

    def fitness(self, gene: Gene) -> float:
        self.evaluations += 1
        key = gene.key
        value = self._cache.get(key)
        if value is None:
            value = mse_fitness(decode(gene), self.data)
            self._cache[key] = value
        return value

    def _tournament(self, rng: np.random.Generator, fitness: np.ndarray) -> int:
        entrants = rng.integers(0, len(fitness), size=self.params.tournament_size)
        return int(entrants[int(np.argmin(fitness[entrants]))])

    def _breed(self, rng: np.random.Generator, population: List[Gene], fitness: np.ndarray,
               count: int) -> List[Gene]:
        p = self.params
        children = [population[self._tournament(rng, fitness)] for _ in range(count)]

        for i in range(0, count - 1, 2):
            if rng.random() < p.crossover_rate:
                children[i], children[i + 1] = one_point_crossover(children[i], children[i + 1], rng)

        for i, child in enumerate(children):
            child = mutate(child, rng, p.mutation_rate, self.alphabet)
            if rng.random() < p.is_rate:
                child = is_transposition(child, rng, p.transposition_max_len)
            if rng.random() < p.ris_rate:
                child = ris_transposition(child, rng, p.transposition_max_len)
            if rng.random() < p.inversion_rate:
                child = inversion(child, rng)
            children[i] = child
        return children

    def evolve(self, rng: np.random.Generator) -> Tuple[BestSoFar, Gene]:
        """
        Run the configured number of generations

        Args:
            rng: Random stream for initialization and all operators

        Returns:
            Best-ever trace and the best gene found
        """
        p = self.params
        population = [random_gene(rng, p.head_len, self.alphabet) for _ in range(p.pop_size)]
        fitness = np.array([self.fitness(gene) for gene in population])

        best_index = int(np.argmin(fitness))
        best_gene, best_fitness = population[best_index], float(fitness[best_index])
        history: List[float] = []
        records: List[ProgressRecord] = []
        elitism = min(p.elitism, p.pop_size)

        for generation in range(1, p.generations + 1):
            order = np.argsort(fitness, kind="stable")
            elites = [population[i] for i in order[:elitism]]
            offspring = self._breed(rng, population, fitness, p.pop_size - elitism)
            population = elites + offspring
            fitness = np.concatenate([
                fitness[order[:elitism]],
                np.array([self.fitness(gene) for gene in offspring], dtype=float),
            ])

            index = int(np.argmin(fitness))
            if fitness[index] < best_fitness:
                best_gene, best_fitness = population[index], float(fitness[index])
            history.append(best_fitness)

            with np.errstate(over="ignore", invalid="ignore"):
                mean = float(np.mean(fitness))
            record = ProgressRecord(generation=generation, best=best_fitness, mean=mean)
            records.append(record)
            if self.progress is not None:
                self.progress(record)
            logger.debug(f"GEP gen {generation} | best={best_fitness:.6g} | cached={len(self._cache)}")

        result = BestSoFar(
            vector=np.array(best_gene.key, dtype=float),
            fitness=best_fitness,
            history=history,
            evaluations=self.evaluations,
            records=records,
        )
        return result, best_gene


def gep_evolve(params: GepParams, data: Dataset, alphabet: Alphabet, rng: np.random.Generator,
               progress: Optional[Callable[[ProgressRecord], None]] = None) -> Tuple[BestSoFar, Gene]:
    """Standard GEP on `data`; fitness is the MSE of the decoded gene"""
    result, gene = GepEvolution(params, data, alphabet, progress).evolve(rng)
    if not math.isfinite(result.fitness):
        logger.warning("GEP finished without a finite-fitness individual")
    return result, gene
