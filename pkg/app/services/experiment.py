"""
Experiment orchestration - trials, suites, summaries and result files
"""

import csv
import json
import time
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.schemas import (
    CellFailure, Method, OptimizerRun, ProgressRecord, RunConfig, SummaryRow, SuiteResult, TraceRow, TrialResult
)
from app.services.benchmarks import build_problem, get_benchmark
from app.services.expr_core import mse_fitness, tree_depth, tree_size
from app.services.gep_baseline import gep_evolve
from app.services.kexpression import Gene, decode, effective_length, format_gene
from app.services.neuro_encoder import NeuroEncoder, make_fixed_weights
from app.services.optimizers import BestSoFar, Objective, minimize
from app.services.stats import median_and_std, rank_table, wilcoxon_rank_sum
from app.utils.errors import NeepError
from app.utils.logger import PROGRESS_COLUMNS, ProgressLogger, progress_row, setup_logger

logger = setup_logger(__name__)

SUMMARY_COLUMNS = ["method", "benchmark", "trials", "median", "std", "rank", "verdict", "p_value", "avg_rank"]
TRACE_COLUMNS = ["method", "benchmark", "generation", "mean_best"]

# Fewer trials than this per cell leave the verdict column empty
MIN_TRIALS_FOR_TEST = 3


# ============================================================================
# SEEDS
# ============================================================================

@dataclass(frozen=True)
class TrialSeeds:
    trial: int
    train: int
    test: int
    weights: int
    optimizer: int


def _as_int(sequence: np.random.SeedSequence) -> int:
    high, low = sequence.generate_state(2)
    return (int(high) << 32) | int(low)


def derive_seeds(seed: int, trial_index: int) -> TrialSeeds:
    """Independent streams for one trial, reproducible from (seed, trial_index)"""
    root = np.random.SeedSequence([seed, trial_index])
    train, test, weights, optimizer = root.spawn(4)
    return TrialSeeds(_as_int(root), _as_int(train), _as_int(test), _as_int(weights), _as_int(optimizer))


def experiment_weights_seed(seed: int) -> int:
    """Hidden-matrix seed shared by every trial when weights are fixed per experiment"""
    return _as_int(np.random.SeedSequence([seed]))


# ============================================================================
# TRIALS
# ============================================================================

class NeepObjective:
    """genome -> gene -> tree -> train MSE, cached on the generated gene"""

    def __init__(self, encoder: NeuroEncoder, data):
        self.encoder = encoder
        self.data = data
        self.cache: Dict[Tuple[int, ...], float] = {}

    def __call__(self, genome: np.ndarray) -> float:
        gene = self.encoder.generate(genome)
        key = gene.key
        value = self.cache.get(key)
        if value is None:
            value = mse_fitness(decode(gene), self.data)
            self.cache[key] = value
        return value


def _run_neep(config: RunConfig, train, seeds: TrialSeeds, alphabet,
              progress: Callable[[ProgressRecord], None]) -> Tuple[BestSoFar, Gene]:
    weights_seed = (
        experiment_weights_seed(config.seed) if config.encoder.fixed_weights_per_experiment else seeds.weights
    )
    encoder = NeuroEncoder(config.encoder, alphabet, make_fixed_weights(config.encoder, weights_seed))
    fitness = NeepObjective(encoder, train)
    objective = Objective(encoder.dimension, fitness)
    run = OptimizerRun(
        population_size=config.pop_size,
        generations=config.generations,
        seed=seeds.optimizer,
        init_range=config.encoder.init_weight_range,
    )
    result = minimize(config.method, objective, run, config.optimizer, progress)
    logger.debug(f"{config.method.label} distinct genes scored: {len(fitness.cache)}")
    return result, encoder.generate(result.vector)


def run_trial(config: RunConfig, trial_index: int, data_dir: Optional[str] = None,
              progress: Optional[Callable[[ProgressRecord], None]] = None) -> TrialResult:
    """
    One independent trial of one method on one benchmark

    Args:
        config: Cell configuration
        trial_index: Index of the trial within the cell
        data_dir: Directory searched for CSV-backed datasets
        progress: Receives each generation's record as it is produced

    Returns:
        TrialResult with the best gene, its train trace and its test error
    """
    started = time.perf_counter()
    spec = get_benchmark(config.benchmark)
    seeds = derive_seeds(config.seed, trial_index)
    train, test = build_problem(
        spec, np.random.default_rng(seeds.train), np.random.default_rng(seeds.test), config.data_path, data_dir
    )
    alphabet = spec.alphabet()

    records: List[ProgressRecord] = []

    def collect(record: ProgressRecord):
        record = record.model_copy(update={
            "method": config.method.label, "benchmark": spec.name, "trial": trial_index,
        })
        records.append(record)
        if progress is not None:
            progress(record)

    if config.method is Method.GEP:
        params = config.gep.model_copy(update={"pop_size": config.pop_size, "generations": config.generations})
        result, gene = gep_evolve(params, train, alphabet, np.random.default_rng(seeds.optimizer), collect)
    else:
        result, gene = _run_neep(config, train, seeds, alphabet, collect)

    tree = decode(gene)
    test_mse = mse_fitness(tree, test)
    elapsed = time.perf_counter() - started
    logger.info(
        f"✓ {config.method.label} {spec.name} trial {trial_index} | "
        f"train={result.fitness:.4g} test={test_mse:.4g} | "
        f"nodes={tree_size(tree)} depth={tree_depth(tree)} | {elapsed:.1f}s"
    )
    return TrialResult(
        method=config.method,
        benchmark=spec.name,
        trial_index=trial_index,
        seed=seeds.trial,
        best_gene=format_gene(gene),
        expression=str(tree),
        effective_length=effective_length(gene),
        train_trace=list(result.history),
        train_mse=result.fitness,
        test_mse=test_mse,
        evaluations=result.evaluations,
        wall_time=elapsed,
        progress=records,
    )


# ============================================================================
# SUITES
# ============================================================================

def _cell_name(config: RunConfig) -> str:
    return f"{config.method.label} on {config.benchmark}"


def _run_trials(configs: Sequence[RunConfig], workers: int, data_dir: Optional[str]
                ) -> List[Union[List[TrialResult], Exception]]:
    """Every trial of every cell; a cell's entry is its ordered trials or the first error"""
    if workers <= 1:
        outcomes: List[Union[List[TrialResult], Exception]] = []
        for config in configs:
            try:
                outcomes.append([run_trial(config, i, data_dir) for i in range(config.trials)])
            except Exception as e:  # noqa: BLE001 - a failing cell must not stop the suite
                outcomes.append(e)
        return outcomes

    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures: List[List[Future]] = [
            [pool.submit(run_trial, config, i, data_dir) for i in range(config.trials)]
            for config in configs
        ]
        outcomes = []
        for cell in futures:
            try:
                outcomes.append([future.result() for future in cell])
            except Exception as e:  # noqa: BLE001
                outcomes.append(e)
        return outcomes


def _mean_trace(trials: Sequence[TrialResult]) -> List[float]:
    traces = np.array([t.train_trace for t in trials], dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        return [float(v) for v in traces.mean(axis=0)]


def summarize(cells: Dict[Tuple[Method, str], List[TrialResult]]) -> Tuple[List[SummaryRow], Dict[str, float]]:
    """Summary rows (median, std, rank, verdict against GEP) and average ranks"""
    medians: Dict[str, Dict[str, float]] = {}
    stats: Dict[Tuple[Method, str], Tuple[float, float]] = {}
    for (method, benchmark), trials in cells.items():
        median, std = median_and_std([t.test_mse for t in trials])
        stats[(method, benchmark)] = (median, std)
        medians.setdefault(method.label, {})[benchmark] = median
    ranks, average = rank_table(medians)

    rows = []
    for (method, benchmark), trials in cells.items():
        median, std = stats[(method, benchmark)]
        verdict, p_value = "", None
        baseline = cells.get((Method.GEP, benchmark))
        if method.is_neep and baseline and min(len(trials), len(baseline)) >= MIN_TRIALS_FOR_TEST:
            test = wilcoxon_rank_sum([t.test_mse for t in trials], [t.test_mse for t in baseline])
            verdict, p_value = test.verdict, test.p_value
        rows.append(SummaryRow(
            method=method.label,
            benchmark=benchmark,
            trials=len(trials),
            median=median,
            std=std,
            rank=ranks[benchmark][method.label],
            verdict=verdict,
            p_value=p_value,
        ))
    return rows, average


def run_suite(configs: Sequence[RunConfig], workers: int = 1, data_dir: Optional[str] = None,
              progress_logger: Optional[ProgressLogger] = None) -> SuiteResult:
    """
    Run every (method, benchmark) cell and aggregate

    Failed cells are recorded and skipped; the remaining cells still
    produce summary and trace rows.
    """
    if not configs:
        return SuiteResult()
    logger.info(f"🚀 Suite: {len(configs)} cell(s), {sum(c.trials for c in configs)} trial(s), workers={workers}")

    cells: Dict[Tuple[Method, str], List[TrialResult]] = {}
    failures: List[CellFailure] = []
    all_trials: List[TrialResult] = []
    trace: List[TraceRow] = []

    for config, outcome in zip(configs, _run_trials(configs, workers, data_dir)):
        if isinstance(outcome, Exception):
            kind = "" if isinstance(outcome, NeepError) else f"{type(outcome).__name__}: "
            logger.warning(f"⚠️ Cell {_cell_name(config)} failed: {kind}{outcome}")
            failures.append(CellFailure(method=config.method.label, benchmark=config.benchmark,
                                        error=f"{kind}{outcome}"))
            continue
        benchmark = outcome[0].benchmark
        cells[(config.method, benchmark)] = outcome
        all_trials.extend(outcome)
        if progress_logger is not None:
            for trial in outcome:
                progress_logger.extend(trial.progress)
        trace.extend(
            TraceRow(method=config.method.label, benchmark=benchmark, generation=g, mean_best=value)
            for g, value in enumerate(_mean_trace(outcome), start=1)
        )

    summary, average = summarize(cells) if cells else ([], {})
    logger.info(f"✓ Suite finished: {len(cells)} cell(s) ok, {len(failures)} failed")
    return SuiteResult(summary=summary, trace=trace, trials=all_trials, failures=failures, average_ranks=average)


# ============================================================================
# RESULT FILES
# ============================================================================

def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def _write_csv(path: Path, header: List[str], rows: List[List[str]]):
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_results(result: SuiteResult, out_dir: Union[str, Path], config_text: str) -> Path:
    """
    Write the run directory

    Files: summary.csv, summary.json, trace.csv, progress.csv, trials.json
    and config.ini. Only trials.json holds wall times, so every other file
    is identical across reruns of the same config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, [
        [r.method, r.benchmark, str(r.trials), _cell(r.median), _cell(r.std), str(r.rank), r.verdict,
         _cell(r.p_value), _cell(result.average_ranks.get(r.method))]
        for r in result.summary
    ])
    _write_csv(out / "trace.csv", TRACE_COLUMNS, [
        [r.method, r.benchmark, str(r.generation), _cell(r.mean_best)] for r in result.trace
    ])
    _write_csv(out / "progress.csv", PROGRESS_COLUMNS, [
        progress_row(record) for trial in result.trials for record in trial.progress
    ])

    summary = {
        "summary": [row.model_dump() for row in result.summary],
        "average_ranks": result.average_ranks,
        "failures": [failure.model_dump() for failure in result.failures],
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    trials = [trial.model_dump(mode="python", exclude={"progress"}) for trial in result.trials]
    for trial in trials:
        trial["method"] = trial["method"].value
    (out / "trials.json").write_text(json.dumps(trials, indent=2) + "\n", encoding="utf-8")

    (out / "config.ini").write_text(config_text, encoding="utf-8")
    logger.info(f"📁 Results written to {out}")
    return out
