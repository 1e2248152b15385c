"""
Process-pool worker for objective batches
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence

from core.config import DEFAULT_STEP, DEFAULT_TMAX
from core.flows import ShootingPoint
from core.landscape import ObjectiveResult, objective_batch
from core.system_checker import SystemChecker

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 64


def _evaluate_chunk(points: Sequence[ShootingPoint], t_max: float, step: float, target) -> List[ObjectiveResult]:
    return objective_batch(points, t_max, step, target)


def _failed(count: int) -> List[ObjectiveResult]:
    return [ObjectiveResult(float('nan'), float('nan'), float('nan'), float('nan'), True, float('nan'))
            for _ in range(count)]


class ScanWorker:
    """
    Evaluates shooting points in chunks across worker processes.

    Hooks mirror the progress / finished / error signals of a background
    worker: progress(done, total) after every chunk, finished(results) once,
    error(message) for every chunk that raised. Results always come back in
    input order; chunks that raised or were cancelled are marked failed.
    """

    def __init__(self, t_max: float = DEFAULT_TMAX, step: float = DEFAULT_STEP, target=None,
                 threads: Optional[int] = None, chunk_size: int = DEFAULT_CHUNK,
                 progress: Optional[Callable[[int, int], None]] = None,
                 finished: Optional[Callable[[List[ObjectiveResult]], None]] = None,
                 error: Optional[Callable[[str], None]] = None):
        self.t_max = t_max
        self.step = step
        self.target = target
        self.threads = SystemChecker.worker_count(threads)
        self.chunk_size = max(1, int(chunk_size))
        self.progress = progress
        self.finished = finished
        self.error = error
        self.is_cancelled = False

    def _emit_progress(self, done: int, total: int):
        if self.progress is not None:
            self.progress(done, total)

    def _emit_error(self, message: str):
        logger.error(message)
        if self.error is not None:
            self.error(message)

    def map(self, points: Sequence[ShootingPoint]) -> List[ObjectiveResult]:
        """Evaluate all points; usable directly as the evaluator of grid_scan and find_global"""
        points = list(points)
        chunks = [points[i:i + self.chunk_size] for i in range(0, len(points), self.chunk_size)]
        results: List[Optional[List[ObjectiveResult]]] = [None] * len(chunks)

        if self.threads <= 1 or len(chunks) <= 1:
            for index, chunk in enumerate(chunks):
                if self.is_cancelled:
                    break
                results[index] = self._run_local(index, chunk)
                self._emit_progress(index + 1, len(chunks))
        else:
            self._run_pool(chunks, results)

        ordered: List[ObjectiveResult] = []
        for chunk, chunk_results in zip(chunks, results):
            ordered.extend(chunk_results if chunk_results is not None else _failed(len(chunk)))
        if self.finished is not None:
            self.finished(ordered)
        return ordered

    __call__ = map

    def _run_local(self, index: int, chunk) -> Optional[List[ObjectiveResult]]:
        try:
            return _evaluate_chunk(chunk, self.t_max, self.step, self.target)
        except Exception as e:
            self._emit_error(f"chunk {index} failed: {e}")
            return None

    def _run_pool(self, chunks, results):
        logger.debug("evaluating %d chunks on %d processes", len(chunks), self.threads)
        with ProcessPoolExecutor(max_workers=self.threads) as pool:
            futures = {pool.submit(_evaluate_chunk, chunk, self.t_max, self.step, self.target): index
                       for index, chunk in enumerate(chunks)}
            done = 0
            for future in as_completed(futures):
                index = futures[future]
                if self.is_cancelled:
                    for pending in futures:
                        pending.cancel()
                    break
                try:
                    results[index] = future.result()
                except Exception as e:
                    self._emit_error(f"chunk {index} failed: {e}")
                done += 1
                self._emit_progress(done, len(chunks))

    def cancel(self):
        """Stop after the chunks already running; unfinished points come back failed"""
        self.is_cancelled = True
