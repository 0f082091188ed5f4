"""
Neuro encoder - recurrent network whose output weights generate genes

The hidden layer is fully recurrent with fixed, sparse weights shared by every
individual and has no external input. Evolvable weights connect the hidden
layer to one output neuron per alphabet symbol plus a position-insertion
neuron. Each insertion advances the network `time_steps` steps, picks the
symbol with the largest output and inserts it at the position encoded by the
last neuron.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from app.models.schemas import EncoderConfig, Phase
from app.services.expr_core import Alphabet, Symbol
from app.services.kexpression import Gene, tail_length
from app.utils.errors import ConfigurationError, InvariantViolation, UsageError
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

# Gaussian outputs below this underflowed to 0.0; lift them back into (0, 1]
_TINY = np.finfo(float).tiny


def gaussian_activation(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """f(x) = exp(-x^2), range (0, 1]"""
    result = np.exp(-np.square(x))
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class FixedHiddenWeights:
    matrix: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ConfigurationError(f"hidden weights must be square, got shape {matrix.shape}")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n_hidden(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class EncoderState:
    hidden: np.ndarray


@dataclass(frozen=True)
class Genome:
    """Flat output weights, row-major by output neuron"""
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return int(self.weights.shape[0])

    def to_text(self) -> str:
        """Genome dump as a single numeric row"""
        return " ".join(repr(float(w)) for w in self.weights)

    @classmethod
    def from_text(cls, text: str, dimension: Optional[int] = None) -> "Genome":
        try:
            weights = np.array([float(token) for token in text.split()])
        except ValueError as e:
            raise UsageError(f"genome text is not numeric: {e}") from None
        if dimension is not None and weights.shape[0] != dimension:
            raise ConfigurationError(f"genome has {weights.shape[0]} weights, expected {dimension}")
        return cls(weights)


def n_outputs(alphabet: Alphabet) -> int:
    """One neuron per symbol plus the position-insertion neuron"""
    return alphabet.size + 1


def genome_dimension(config: EncoderConfig, alphabet: Alphabet) -> int:
    return n_outputs(alphabet) * config.n_hidden


def make_fixed_weights(config: EncoderConfig, seed: Optional[int]) -> FixedHiddenWeights:
    """
    Seeded sparse hidden-to-hidden matrix

    Exactly round(sparsity * n^2) entries are zero, their positions drawn
    without replacement; the rest are uniform on `fixed_weight_range`.
    """
    rng = np.random.default_rng(seed)
    n = config.n_hidden
    low, high = config.fixed_weight_range
    matrix = rng.uniform(low, high, size=(n, n))
    n_zero = int(math.floor(config.sparsity * n * n + 0.5))
    zero_positions = rng.choice(n * n, size=n_zero, replace=False)
    matrix.flat[zero_positions] = 0.0
    return FixedHiddenWeights(matrix, seed)


def initial_state(n_hidden: int) -> EncoderState:
    return EncoderState(np.zeros(n_hidden))


def step(state: EncoderState, weights: FixedHiddenWeights) -> EncoderState:
    """One recurrent update h'_i = f(sum_j A_ij h_j); the network has no inputs"""
    if state.hidden.shape[0] != weights.n_hidden:
        raise ConfigurationError(
            f"state has {state.hidden.shape[0]} neurons, weights expect {weights.n_hidden}"
        )
    return EncoderState(gaussian_activation(weights.matrix @ state.hidden))


def _output_matrix(genome: Union[Genome, np.ndarray], n_out: int, n_hidden: int) -> np.ndarray:
    weights = genome.weights if isinstance(genome, Genome) else np.asarray(genome, dtype=float)
    if weights.size != n_out * n_hidden:
        raise ConfigurationError(
            f"genome has {weights.size} weights, expected {n_out} x {n_hidden} = {n_out * n_hidden}"
        )
    return weights.reshape(n_out, n_hidden)


def output_preactivations(state: EncoderState, genome: Union[Genome, np.ndarray],
                          alphabet: Alphabet) -> np.ndarray:
    """sum_k W_jk h_k for every output neuron"""
    matrix = _output_matrix(genome, n_outputs(alphabet), state.hidden.shape[0])
    return matrix @ state.hidden


def read_outputs(state: EncoderState, genome: Union[Genome, np.ndarray], alphabet: Alphabet) -> np.ndarray:
    """o_j = f(sum_k W_jk h_k) for every output neuron, never below the smallest normal float"""
    with np.errstate(under="ignore"):
        outputs = gaussian_activation(output_preactivations(state, genome, alphabet))
    return np.maximum(outputs, _TINY)


def output_scores(preactivations: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """-a^2 per output neuron; ordered like exp(-a^2) but never underflows to a tie"""
    with np.errstate(over="ignore"):
        return -np.square(np.asarray(preactivations, dtype=float))


def insertion_position(i_out: float, length: int, head_len: int, phase: Phase,
                       tail_len: Optional[int] = None) -> int:
    """
    1-based insertion index for the next symbol

    Head phase: round(i_out * L + 1) in [1, L + 1].
    Tail phase: round(i_out * (L - h + 1) + h) in [h + 1, L + 1].
    round(x) = floor(x + 0.5).
    """
    if not (0.0 < i_out <= 1.0):
        raise InvariantViolation(f"position rate {i_out!r} outside (0, 1]")
    in_head = length < head_len
    if in_head != (phase is Phase.HEAD):
        raise InvariantViolation(f"phase {phase.value} inconsistent with length {length} and head {head_len}")
    if tail_len is not None and length >= head_len + tail_len:
        raise InvariantViolation(f"gene of length {length} is already complete")

    if phase is Phase.HEAD:
        position = math.floor(i_out * length + 1 + 0.5)
        return min(max(position, 1), length + 1)
    position = math.floor(i_out * (length - head_len + 1) + head_len + 0.5)
    return min(max(position, head_len + 1), length + 1)


def select_symbol(outputs: Sequence[float], phase: Phase, alphabet: Alphabet) -> Symbol:
    """
    Symbol of the strongest output neuron; the position neuron never competes

    Head phase considers every symbol, tail phase only terminals. Ties go
    to the lowest alphabet index. `outputs` may be the activations or their
    `output_scores`, which rank the symbols identically.
    """
    values = np.asarray(outputs, dtype=float)[:alphabet.size]
    if phase is Phase.HEAD:
        return alphabet.symbols[int(np.argmax(values))]
    n_functions = len(alphabet.functions)
    return alphabet.terminals[int(np.argmax(values[n_functions:]))]


def hidden_trajectory(weights: FixedHiddenWeights, config: EncoderConfig, n_insertions: int) -> np.ndarray:
    """
    Hidden state at each readout: `time_steps` steps per insertion from the zero state

    The network receives no input, so the trajectory is the same for every
    genome that shares these fixed weights.
    """
    if weights.n_hidden != config.n_hidden:
        raise ConfigurationError(f"weights have {weights.n_hidden} neurons, config says {config.n_hidden}")
    state = initial_state(config.n_hidden)
    readouts = np.empty((n_insertions, config.n_hidden))
    for insertion in range(n_insertions):
        for _ in range(config.time_steps):
            state = step(state, weights)
        readouts[insertion] = state.hidden
    readouts.setflags(write=False)
    return readouts


def generate_gene(genome: Union[Genome, np.ndarray], weights: FixedHiddenWeights, config: EncoderConfig,
                  alphabet: Alphabet, trajectory: Optional[np.ndarray] = None) -> Gene:
    """
    Grow a gene one inserted symbol at a time

    Args:
        genome: Output weights (n_out x n_hidden, row-major)
        weights: Fixed hidden weights
        config: Encoder configuration
        alphabet: Active alphabet
        trajectory: Precomputed hidden readouts; computed when omitted

    Returns:
        Valid gene of length h + t
    """
    head_len = config.head_len
    tail_len = tail_length(head_len, alphabet)
    total = head_len + tail_len
    if trajectory is None:
        trajectory = hidden_trajectory(weights, config, total)
    matrix = _output_matrix(genome, n_outputs(alphabet), config.n_hidden)
    preactivations = trajectory[:total] @ matrix.T
    scores = output_scores(preactivations)
    with np.errstate(under="ignore", over="ignore"):
        rates = np.maximum(gaussian_activation(preactivations[:, -1]), _TINY)

    symbols = []
    for length in range(total):
        phase = Phase.HEAD if length < head_len else Phase.TAIL
        symbol = select_symbol(scores[length], phase, alphabet)
        i_out = float(rates[length])
        position = insertion_position(i_out, length, head_len, phase, tail_len)
        symbols.insert(position - 1, symbol)
    return Gene(tuple(symbols), head_len, tail_len)


class NeuroEncoder:
    """
    Gene generator bound to one alphabet and one fixed hidden matrix

    Features:
    - Hidden readout trajectory computed once and shared by all genomes
    - Genome dimension bookkeeping
    - Genome initialization in the configured range
    """

    def __init__(self, config: EncoderConfig, alphabet: Alphabet, weights: FixedHiddenWeights):
        self.config = config
        self.alphabet = alphabet
        self.weights = weights
        self.tail_len = tail_length(config.head_len, alphabet)
        self.gene_length = config.head_len + self.tail_len
        self.n_outputs = n_outputs(alphabet)
        self.dimension = genome_dimension(config, alphabet)
        self.trajectory = hidden_trajectory(weights, config, self.gene_length)
        logger.debug(
            f"Encoder ready | hidden={config.n_hidden} | outputs={self.n_outputs} | "
            f"dimension={self.dimension} | gene_length={self.gene_length}"
        )

    def generate(self, genome: Union[Genome, np.ndarray]) -> Gene:
        return generate_gene(genome, self.weights, self.config, self.alphabet, self.trajectory)

    def random_genome(self, rng: np.random.Generator) -> Genome:
        low, high = self.config.init_weight_range
        return Genome(rng.uniform(low, high, size=self.dimension))
