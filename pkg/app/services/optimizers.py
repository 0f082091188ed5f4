"""
Optimizers - continuous black-box minimizers used to evolve genomes

Real-coded genetic algorithm, global-best particle swarm and CMA-ES share one
interface: an Objective over real vectors, an OptimizerRun budget and a
BestSoFar result with a per-generation best-ever trace.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from app.models.schemas import Method, OptimizerRun, OptimizerSettings, ProgressRecord
from app.utils.errors import ConfigurationError, UsageError
from app.utils.logger import setup_logger

logger = setup_logger(__name__)

ProgressCallback = Callable[[ProgressRecord], None]


class Objective:
    """
    Fitness function over real vectors (lower is better)

    NaN results are mapped to +inf so every optimizer can order them.
    """

    def __init__(self, dimension: int, evaluate: Callable[[np.ndarray], float]):
        if dimension < 1:
            raise UsageError(f"objective dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self._evaluate = evaluate
        self.evaluations = 0

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        value = float(self._evaluate(x))
        return math.inf if math.isnan(value) else value

    def evaluate_many(self, population: np.ndarray) -> np.ndarray:
        return np.array([self(row) for row in population], dtype=float)


@dataclass
class BestSoFar:
    vector: np.ndarray
    fitness: float
    history: List[float] = field(default_factory=list)
    evaluations: int = 0
    records: List[ProgressRecord] = field(default_factory=list)


class _Tracker:
    """Best-ever bookkeeping shared by the three optimizers"""

    def __init__(self, objective: Objective, progress: Optional[ProgressCallback]):
        self.objective = objective
        self.progress = progress
        self.vector: Optional[np.ndarray] = None
        self.fitness = math.inf
        self.history: List[float] = []
        self.records: List[ProgressRecord] = []

    def offer(self, population: np.ndarray, fitness: np.ndarray):
        index = int(np.argmin(fitness))
        if self.vector is None or fitness[index] < self.fitness:
            self.vector = np.array(population[index], dtype=float)
            self.fitness = float(fitness[index])

    def close_generation(self, generation: int, fitness: np.ndarray, sigma: Optional[float] = None):
        self.history.append(self.fitness)
        with np.errstate(over="ignore", invalid="ignore"):
            mean = float(np.mean(fitness))
        record = ProgressRecord(generation=generation, best=self.fitness, mean=mean, sigma=sigma)
        self.records.append(record)
        if self.progress is not None:
            self.progress(record)

    def result(self) -> BestSoFar:
        return BestSoFar(
            vector=self.vector,
            fitness=self.fitness,
            history=self.history,
            evaluations=self.objective.evaluations,
            records=self.records,
        )


def _initial_population(rng: np.random.Generator, run: OptimizerRun, dimension: int,
                        initial: Optional[np.ndarray]) -> np.ndarray:
    if initial is None:
        low, high = run.init_range
        return rng.uniform(low, high, size=(run.population_size, dimension))
    population = np.array(initial, dtype=float)
    if population.shape != (run.population_size, dimension):
        raise ConfigurationError(
            f"initial population has shape {population.shape}, "
            f"expected ({run.population_size}, {dimension})"
        )
    return population


def _range_width(run: OptimizerRun) -> float:
    low, high = run.init_range
    return high - low


# ============================================================================
# GENETIC ALGORITHM
# ============================================================================

class GeneticAlgorithm:
    """
    Real-coded generational GA

    Features:
    - Tournament selection
    - Arithmetic crossover with a uniform blend factor per coordinate
    - Per-coordinate Gaussian mutation
    - Elites replace the worst offspring
    """

    def __init__(self, objective: Objective, run: OptimizerRun,
                 settings: Optional[OptimizerSettings] = None,
                 progress: Optional[ProgressCallback] = None):
        self.objective = objective
        self.run = run
        self.settings = settings or OptimizerSettings()
        self.progress = progress
        dimension = objective.dimension
        rate = self.settings.ga_mutation_rate
        self.mutation_rate = 1.0 / dimension if rate is None else rate
        self.mutation_sigma = self.settings.ga_mutation_sigma_factor * _range_width(run)
        self.elitism = min(self.settings.ga_elitism, run.population_size)

    def _select(self, rng: np.random.Generator, fitness: np.ndarray) -> np.ndarray:
        size = self.run.population_size
        entrants = rng.integers(0, size, size=(size, self.settings.ga_tournament_size))
        winners = np.argmin(fitness[entrants], axis=1)
        return entrants[np.arange(size), winners]

    def _crossover(self, rng: np.random.Generator, parents: np.ndarray) -> np.ndarray:
        offspring = parents.copy()
        for i in range(0, len(parents) - 1, 2):
            if rng.random() < self.settings.ga_crossover_rate:
                blend = rng.random(parents.shape[1])
                a, b = parents[i], parents[i + 1]
                offspring[i] = blend * a + (1.0 - blend) * b
                offspring[i + 1] = (1.0 - blend) * a + blend * b
        return offspring

    def _mutate(self, rng: np.random.Generator, offspring: np.ndarray) -> np.ndarray:
        mask = rng.random(offspring.shape) < self.mutation_rate
        noise = rng.normal(0.0, self.mutation_sigma, size=offspring.shape)
        return offspring + mask * noise

    def minimize(self, initial_population: Optional[np.ndarray] = None) -> BestSoFar:
        rng = np.random.default_rng(self.run.seed)
        tracker = _Tracker(self.objective, self.progress)
        population = _initial_population(rng, self.run, self.objective.dimension, initial_population)
        fitness = self.objective.evaluate_many(population)
        tracker.offer(population, fitness)

        for generation in range(1, self.run.generations + 1):
            elite = np.argsort(fitness, kind="stable")[:self.elitism]
            elite_x, elite_f = population[elite].copy(), fitness[elite].copy()

            parents = population[self._select(rng, fitness)]
            offspring = self._mutate(rng, self._crossover(rng, parents))
            offspring_f = self.objective.evaluate_many(offspring)

            if self.elitism:
                worst = np.argsort(offspring_f, kind="stable")[len(offspring_f) - self.elitism:]
                offspring[worst] = elite_x
                offspring_f[worst] = elite_f

            population, fitness = offspring, offspring_f
            tracker.offer(population, fitness)
            tracker.close_generation(generation, fitness)
            logger.debug(f"GA gen {generation} | best={tracker.fitness:.6g}")

        return tracker.result()


# ============================================================================
# PARTICLE SWARM
# ============================================================================

class ParticleSwarm:
    """
    Global-best particle swarm with inertia weight

    Velocities start at zero and are clamped to the initialization width.
    """

    def __init__(self, objective: Objective, run: OptimizerRun,
                 settings: Optional[OptimizerSettings] = None,
                 progress: Optional[ProgressCallback] = None):
        self.objective = objective
        self.run = run
        self.settings = settings or OptimizerSettings()
        self.progress = progress
        self.max_velocity = _range_width(run)

    def minimize(self, initial_positions: Optional[np.ndarray] = None) -> BestSoFar:
        s = self.settings
        rng = np.random.default_rng(self.run.seed)
        tracker = _Tracker(self.objective, self.progress)

        x = _initial_population(rng, self.run, self.objective.dimension, initial_positions)
        v = np.zeros_like(x)
        f = self.objective.evaluate_many(x)
        tracker.offer(x, f)
        pbest, pbest_f = x.copy(), f.copy()
        gbest = pbest[int(np.argmin(pbest_f))].copy()

        for generation in range(1, self.run.generations + 1):
            r1 = rng.random(x.shape)
            r2 = rng.random(x.shape)
            v = s.pso_inertia * v + s.pso_c1 * r1 * (pbest - x) + s.pso_c2 * r2 * (gbest - x)
            v = np.clip(v, -self.max_velocity, self.max_velocity)
            x = x + v
            f = self.objective.evaluate_many(x)

            improved = f < pbest_f
            pbest[improved] = x[improved]
            pbest_f[improved] = f[improved]
            gbest = pbest[int(np.argmin(pbest_f))].copy()

            tracker.offer(x, f)
            tracker.close_generation(generation, f)
            logger.debug(f"PSO gen {generation} | best={tracker.fitness:.6g}")

        return tracker.result()


# ============================================================================
# CMA-ES
# ============================================================================

class CMAESParameters:
    """Strategy constants that depend only on dimension and population size"""

    def __init__(self, dimension: int, popsize: int):
        n = dimension
        self.dimension = n
        self.lam = popsize
        self.mu = popsize // 2

        # recombination weights, positive and summing to one
        weights = math.log(self.lam / 2 + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = weights / weights.sum()
        self.mueff = 1.0 / float(np.sum(self.weights ** 2))

        # time constants for cumulation
        self.cc = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.cs = (self.mueff + 2) / (n + self.mueff + 5)

        # learning rates for rank-one and rank-mu updates
        self.c1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1 - self.c1, 2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff))

        self.damps = 2 * self.mueff / self.lam + 0.3 + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))

        # evaluations between eigendecompositions
        self.lazy_gap_evals = 0.5 * n * self.lam * (self.c1 + self.cmu) ** -1 / n ** 2


class CMAES:
    """
    Covariance matrix adaptation evolution strategy, ask/tell interface

    Features:
    - Log-rank weighted recombination of the best half
    - Cumulative step-size adaptation
    - Rank-one plus rank-mu covariance update
    - Lazy eigendecomposition with a positive-definiteness check
    """

    def __init__(self, x0: np.ndarray, sigma0: float, popsize: int, rng: np.random.Generator):
        self.mean = np.array(x0, dtype=float).reshape(-1)
        n = self.mean.shape[0]
        if n < 1:
            raise UsageError("CMA-ES needs dimension >= 1")
        if sigma0 <= 0:
            raise UsageError(f"initial step size must be positive, got {sigma0}")
        self.params = CMAESParameters(n, popsize)
        self.sigma = float(sigma0)
        self.rng = rng
        self.counteval = 0
        self.restarts = 0
        self.min_eigenvalues: List[float] = []
        self._reset_distribution()

    def _reset_distribution(self):
        n = self.params.dimension
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.C = np.eye(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.invsqrt = np.eye(n)
        self.updated_eval = self.counteval

    def _update_eigensystem(self):
        if self.counteval <= self.updated_eval + self.params.lazy_gap_evals:
            return
        self.C = (self.C + self.C.T) / 2
        eigenvalues = None
        if np.all(np.isfinite(self.C)):
            eigenvalues, basis = np.linalg.eigh(self.C)
        if eigenvalues is None or eigenvalues.min() <= 0:
            self.restarts += 1
            logger.warning(
                f"⚠️ Covariance lost positive-definiteness after {self.counteval} evaluations; "
                f"restarting from current mean with identity covariance"
            )
            self._reset_distribution()
            self.min_eigenvalues.append(1.0)
            return
        self.min_eigenvalues.append(float(eigenvalues.min()))
        self.B = basis
        self.D = np.sqrt(eigenvalues)
        self.invsqrt = (basis / self.D) @ basis.T
        self.updated_eval = self.counteval

    def ask(self) -> np.ndarray:
        """Sample lambda candidates from N(mean, sigma^2 C)"""
        self._update_eigensystem()
        z = self.rng.standard_normal((self.params.lam, self.params.dimension))
        y = (z * self.D) @ self.B.T
        return self.mean + self.sigma * y

    def tell(self, candidates: np.ndarray, fitness: np.ndarray):
        """Update mean, evolution paths, covariance and step size from one generation"""
        par = self.params
        n = par.dimension
        candidates = np.asarray(candidates, dtype=float)
        fitness = np.asarray(fitness, dtype=float)
        if candidates.shape != (par.lam, n):
            raise UsageError(f"expected {par.lam} candidates of dimension {n}, got {candidates.shape}")
        self.counteval += par.lam

        order = np.argsort(fitness, kind="stable")
        selected = candidates[order[:par.mu]]

        old_mean = self.mean
        self.mean = par.weights @ selected
        y = (self.mean - old_mean) / self.sigma
        z = self.invsqrt @ y

        self.ps = (1 - par.cs) * self.ps + math.sqrt(par.cs * (2 - par.cs) * par.mueff) * z
        ps_norm = float(np.linalg.norm(self.ps))
        hsig = ps_norm / math.sqrt(1 - (1 - par.cs) ** (2 * self.counteval / par.lam)) / par.chi_n \
            < 1.4 + 2 / (n + 1)
        self.pc = (1 - par.cc) * self.pc + hsig * math.sqrt(par.cc * (2 - par.cc) * par.mueff) * y

        # hsig == False loses some variance in pc; compensate in c1
        c1a = par.c1 * (1 - (1 - hsig ** 2) * par.cc * (2 - par.cc))
        steps = (selected - old_mean) / self.sigma
        self.C = (1 - c1a - par.cmu) * self.C \
            + par.c1 * np.outer(self.pc, self.pc) \
            + par.cmu * (steps.T * par.weights) @ steps

        self.sigma *= math.exp(min(1.0, (par.cs / par.damps) * (ps_norm / par.chi_n - 1)))


def _sigma0(run: OptimizerRun, settings: OptimizerSettings) -> float:
    return settings.cmaes_sigma_factor * _range_width(run)


# ============================================================================
# FUNCTION FORMS
# ============================================================================

def ga_minimize(objective: Objective, run: OptimizerRun, settings: Optional[OptimizerSettings] = None,
                progress: Optional[ProgressCallback] = None,
                initial_population: Optional[np.ndarray] = None) -> BestSoFar:
    """Real-coded GA; population_size x (generations + 1) evaluations"""
    return GeneticAlgorithm(objective, run, settings, progress).minimize(initial_population)


def pso_minimize(objective: Objective, run: OptimizerRun, settings: Optional[OptimizerSettings] = None,
                 progress: Optional[ProgressCallback] = None,
                 initial_positions: Optional[np.ndarray] = None) -> BestSoFar:
    """Global-best PSO; population_size x (generations + 1) evaluations"""
    return ParticleSwarm(objective, run, settings, progress).minimize(initial_positions)


def cmaes_minimize(objective: Objective, run: OptimizerRun, settings: Optional[OptimizerSettings] = None,
                   progress: Optional[ProgressCallback] = None,
                   x0: Optional[np.ndarray] = None) -> BestSoFar:
    """
    CMA-ES with lambda = population_size

    Args:
        objective: Function to minimize
        run: Budget and seed; exactly population_size x generations evaluations
        settings: Optimizer constants (sigma factor)
        progress: Called with each generation's ProgressRecord
        x0: Initial mean; uniform in init_range when omitted

    Returns:
        Best-ever vector, fitness and per-generation trace
    """
    settings = settings or OptimizerSettings()
    rng = np.random.default_rng(run.seed)
    if x0 is None:
        low, high = run.init_range
        x0 = rng.uniform(low, high, size=objective.dimension)
    elif np.asarray(x0).size != objective.dimension:
        raise ConfigurationError(f"x0 has {np.asarray(x0).size} entries, expected {objective.dimension}")

    es = CMAES(x0, _sigma0(run, settings), run.population_size, rng)
    tracker = _Tracker(objective, progress)
    for generation in range(1, run.generations + 1):
        candidates = es.ask()
        fitness = objective.evaluate_many(candidates)
        tracker.offer(candidates, fitness)
        es.tell(candidates, fitness)
        tracker.close_generation(generation, fitness, sigma=es.sigma)
        logger.debug(f"CMA-ES gen {generation} | best={tracker.fitness:.6g} | sigma={es.sigma:.3g}")

    if es.restarts:
        logger.info(f"CMA-ES finished with {es.restarts} covariance restart(s)")
    return tracker.result()


OPTIMIZERS = {
    Method.GA_NEEP: ga_minimize,
    Method.PSO_NEEP: pso_minimize,
    Method.CMAES_NEEP: cmaes_minimize,
}


def minimize(method: Method, objective: Objective, run: OptimizerRun,
             settings: Optional[OptimizerSettings] = None,
             progress: Optional[ProgressCallback] = None) -> BestSoFar:
    """Dispatch to the optimizer behind a NEEP method"""
    if method not in OPTIMIZERS:
        raise UsageError(f"method {method.value} is not a continuous optimizer")
    return OPTIMIZERS[method](objective, run, settings, progress)
