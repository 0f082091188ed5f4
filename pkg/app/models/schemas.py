"""
Pydantic models and schemas for configuration, results and API payloads
"""

from pydantic import AfterValidator, BaseModel, ConfigDict, Field
from typing import Annotated, Dict, List, Optional, Tuple
from datetime import datetime
from enum import Enum


# ============================================================================
# ENUMS
# ============================================================================

class Method(str, Enum):
    GA_NEEP = "ga-neep"
    PSO_NEEP = "pso-neep"
    CMAES_NEEP = "cmaes-neep"
    GEP = "gep"

    @property
    def label(self) -> str:
        return self.value.upper()

    @property
    def is_neep(self) -> bool:
        return self is not Method.GEP


class FunctionSetName(str, Enum):
    A = "A"  # {+, -, *, /}
    B = "B"  # A + {sin, cos, exp, ln}
    C = "C"  # B + {sqrt}


class SamplerKind(str, Enum):
    UNIFORM = "U"
    MESH = "E"


class Phase(str, Enum):
    HEAD = "head"
    TAIL = "tail"


class RunState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


def _check_interval(value: Tuple[float, float]) -> Tuple[float, float]:
    low, high = value
    if not low < high:
        raise ValueError(f"interval lower bound must be below upper bound, got {value}")
    return value


Interval = Annotated[Tuple[float, float], AfterValidator(_check_interval)]


# ============================================================================
# CONFIGURATION MODELS
# ============================================================================

class EncoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_hidden: int = Field(40, ge=1, description="Hidden neuron count")
    time_steps: int = Field(10, ge=1, description="Recurrent steps per insertion")
    sparsity: float = Field(0.5, ge=0, le=1, description="Fraction of zeroed hidden weights")
    init_weight_range: Interval = Field((-2.0, 2.0), description="Genome initialization interval")
    fixed_weight_range: Interval = Field((-1.0, 1.0), description="Hidden weight interval")
    head_len: int = Field(30, ge=1, description="Gene head length h")
    fixed_weights_per_experiment: bool = Field(
        False, description="Share one hidden matrix across trials instead of one per trial"
    )


class OptimizerRun(BaseModel):
    model_config = ConfigDict(frozen=True)

    population_size: int = Field(100, ge=4)
    generations: int = Field(500, ge=1)
    seed: int = 0
    init_range: Interval = (-2.0, 2.0)


class OptimizerSettings(BaseModel):
    """Internal optimizer constants, frozen so experiments are reproducible"""
    model_config = ConfigDict(frozen=True)

    ga_tournament_size: int = Field(3, ge=1)
    ga_crossover_rate: float = Field(0.9, ge=0, le=1)
    ga_mutation_rate: Optional[float] = Field(None, ge=0, le=1, description="None means 1/dimension")
    ga_mutation_sigma_factor: float = Field(0.1, gt=0)
    ga_elitism: int = Field(1, ge=0)
    pso_inertia: float = 0.7298
    pso_c1: float = 1.49618
    pso_c2: float = 1.49618
    cmaes_sigma_factor: float = Field(0.3, gt=0)


class GepParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    pop_size: int = Field(100, ge=2)
    generations: int = Field(500, ge=0)
    head_len: int = Field(30, ge=1)
    crossover_rate: float = Field(0.7, ge=0, le=1)
    mutation_rate: float = Field(0.1, ge=0, le=1)
    is_rate: float = Field(0.1, ge=0, le=1)
    ris_rate: float = Field(0.1, ge=0, le=1)
    inversion_rate: float = Field(0.1, ge=0, le=1)
    tournament_size: int = Field(3, ge=1)
    elitism: int = Field(1, ge=0)
    transposition_max_len: int = Field(3, ge=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    method: Method
    benchmark: str
    trials: int = Field(50, ge=1)
    seed: int = 0
    pop_size: int = Field(100, ge=4)
    generations: int = Field(500, ge=1)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    gep: GepParams = Field(default_factory=GepParams)
    data_path: Optional[str] = None


class ExperimentConfig(BaseModel):
    """Everything an experiment file or the command line can set"""
    model_config = ConfigDict(frozen=True)

    methods: List[Method] = Field(default_factory=lambda: [Method.CMAES_NEEP], min_length=1)
    problems: List[str] = Field(default_factory=lambda: ["Nguyen6"], min_length=1)
    trials: int = Field(50, ge=1)
    seed: int = 0
    pop: int = Field(100, ge=4)
    generations: int = Field(500, ge=1)
    data: Optional[str] = None
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    gep: GepParams = Field(default_factory=GepParams)

    def run_configs(self) -> List[RunConfig]:
        """One RunConfig per (benchmark, method) cell, benchmarks outermost"""
        return [
            RunConfig(
                method=method,
                benchmark=problem,
                trials=self.trials,
                seed=self.seed,
                pop_size=self.pop,
                generations=self.generations,
                encoder=self.encoder,
                optimizer=self.optimizer,
                gep=self.gep,
                data_path=self.data,
            )
            for problem in self.problems
            for method in self.methods
        ]


# ============================================================================
# RESULT MODELS
# ============================================================================

class ProgressRecord(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: str = ""
    benchmark: str = ""
    trial: int = 0
    generation: int
    best: float
    mean: float
    sigma: Optional[float] = None


class TrialResult(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: Method
    benchmark: str
    trial_index: int
    seed: int
    best_gene: str
    expression: str
    effective_length: int
    train_trace: List[float] = Field(..., description="Best-so-far train MSE per generation")
    train_mse: float
    test_mse: float
    evaluations: int
    wall_time: float
    progress: List[ProgressRecord] = Field(default_factory=list)


class SummaryRow(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: str
    benchmark: str
    trials: int
    median: float
    std: float
    rank: int
    verdict: str = ""
    p_value: Optional[float] = None


class TraceRow(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: str
    benchmark: str
    generation: int
    mean_best: float


class CellFailure(BaseModel):
    method: str
    benchmark: str
    error: str


class SuiteResult(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    summary: List[SummaryRow] = Field(default_factory=list)
    trace: List[TraceRow] = Field(default_factory=list)
    trials: List[TrialResult] = Field(default_factory=list)
    failures: List[CellFailure] = Field(default_factory=list)
    average_ranks: Dict[str, float] = Field(default_factory=dict)


# ============================================================================
# API MODELS
# ============================================================================

class BenchmarkInfo(BaseModel):
    name: str
    n_vars: int
    function_set: FunctionSetName
    train_sampler: str
    test_sampler: str
    csv_backed: bool


class DecodeRequest(BaseModel):
    gene: str = Field(..., description="Whitespace-separated symbol string")
    terminals: Optional[List[str]] = Field(None, description="Terminal names; inferred when omitted")
    function_set: FunctionSetName = FunctionSetName.C
    head_len: Optional[int] = Field(None, ge=1)


class DecodeResponse(BaseModel):
    expression: str
    effective_length: int
    head_len: int
    length: int


class RunRequest(BaseModel):
    methods: List[Method] = Field(..., min_length=1)
    benchmarks: List[str] = Field(..., min_length=1)
    trials: int = Field(2, ge=1)
    seed: int = 0
    pop_size: int = Field(20, ge=4)
    generations: int = Field(10, ge=1)
    data_path: Optional[str] = None


class RunStatus(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    run_id: str
    status: RunState
    created_at: datetime
    finished_at: Optional[datetime] = None
    request: RunRequest
    summary: List[SummaryRow] = Field(default_factory=list)
    failures: List[CellFailure] = Field(default_factory=list)
    error: Optional[str] = None


class SystemStatus(BaseModel):
    status: str
    timestamp: datetime
    version: str
    benchmarks: int
    active_runs: int
