"""
Run Manager - track experiment suites submitted through the API
"""

import asyncio
from collections import deque
from datetime import datetime
from typing import Deque, Dict, List, Optional
import uuid

from app.config import resolve_method, resolve_problem
from app.models.schemas import RunConfig, RunRequest, RunState, RunStatus
from app.services.experiment import run_suite
from app.utils.logger import get_progress_logger, setup_logger

logger = setup_logger(__name__)


class RunManager:
    """
    Manages suite runs started from the API

    Features:
    - Name validation before a run is accepted
    - Background execution on a worker thread
    - Status and summary lookup by run id
    - Only the most recent `max_finished_runs` finished runs are kept
    """

    def __init__(self, workers: int = 1, data_dir: Optional[str] = None, max_finished_runs: int = 100):
        self.runs: Dict[str, RunStatus] = {}
        self.finished_runs: Deque[str] = deque()
        self.max_finished_runs = max_finished_runs
        self.active_runs: List[str] = []
        self.workers = workers
        self.data_dir = data_dir
        self._tasks: Dict[str, asyncio.Task] = {}

    @staticmethod
    def build_configs(request: RunRequest) -> List[RunConfig]:
        """Validated cell configs for a request; unknown names raise UnknownNameError"""
        benchmarks = [resolve_problem(name) for name in request.benchmarks]
        methods = [resolve_method(method) for method in request.methods]
        return [
            RunConfig(
                method=method,
                benchmark=benchmark,
                trials=request.trials,
                seed=request.seed,
                pop_size=request.pop_size,
                generations=request.generations,
                data_path=request.data_path,
            )
            for benchmark in benchmarks
            for method in methods
        ]

    async def create_run(self, request: RunRequest) -> RunStatus:
        """
        Register a run and start it in the background

        Args:
            request: Methods, benchmarks and budget

        Returns:
            Initial run status
        """
        configs = self.build_configs(request)
        run_id = f"run_{uuid.uuid4().hex[:12]}"
        status = RunStatus(run_id=run_id, status=RunState.PENDING, created_at=datetime.now(), request=request)
        self.runs[run_id] = status
        self.active_runs.append(run_id)
        self._tasks[run_id] = asyncio.create_task(self._execute(run_id, configs))
        logger.info(f"🧪 Run {run_id} accepted: {len(configs)} cell(s)")
        return status

    async def _execute(self, run_id: str, configs: List[RunConfig]):
        self._update(run_id, status=RunState.RUNNING)
        try:
            result = await asyncio.to_thread(
                run_suite, configs, self.workers, self.data_dir, get_progress_logger()
            )
        except Exception as e:
            logger.error(f"Run {run_id} failed: {e}")
            self._finish(run_id, status=RunState.FAILED, error=str(e))
            return
        self._finish(run_id, status=RunState.COMPLETED, summary=result.summary, failures=result.failures)

    def _update(self, run_id: str, **changes):
        self.runs[run_id] = self.runs[run_id].model_copy(update=changes)

    def _finish(self, run_id: str, **changes):
        self._update(run_id, finished_at=datetime.now(), **changes)
        if run_id in self.active_runs:
            self.active_runs.remove(run_id)
        self._tasks.pop(run_id, None)
        logger.info(f"Run {run_id} {self.runs[run_id].status.value}")
        self.finished_runs.append(run_id)
        while len(self.finished_runs) > self.max_finished_runs:
            evicted = self.finished_runs.popleft()
            self.runs.pop(evicted, None)
            logger.debug(f"Run {evicted} evicted")

    async def get_run(self, run_id: str) -> Optional[RunStatus]:
        """Get run by ID"""
        return self.runs.get(run_id)

    async def wait(self, run_id: str):
        """Block until the run's background task is done"""
        task = self._tasks.get(run_id)
        if task is not None:
            await task

    def get_active_run_count(self) -> int:
        return len(self.active_runs)

    def get_all_runs(self) -> List[RunStatus]:
        return list(self.runs.values())
