# qcloud-lab/services/policy_runner.py - Parallel Policy Execution

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, Mapping, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')


class PolicyRunner:
    """Run independent simulation tasks on a thread pool.

    Each task owns its state; results come back keyed and ordered as submitted,
    so the outcome does not depend on which thread finishes first.
    """

    def __init__(self, max_workers: int = 1):
        """Initialize the runner.

        Args:
            max_workers: Worker threads; 1 runs tasks inline in submission order
        """
        self.max_workers = max(1, int(max_workers))
        self.completed = []
        self._lock = threading.Lock()

    def run_all(self, tasks: Mapping[str, Callable[[], T]]) -> Dict[str, T]:
        if self.max_workers == 1 or len(tasks) <= 1:
            return {label: self._run_one(label, task) for label, task in tasks.items()}

        logger.info(f"Running {len(tasks)} policies on {self.max_workers} threads")
        with ThreadPoolExecutor(max_workers=self.max_workers, thread_name_prefix='policy') as pool:
            futures = {label: pool.submit(self._run_one, label, task) for label, task in tasks.items()}
            return {label: future.result() for label, future in futures.items()}

    def _run_one(self, label: str, task: Callable[[], T]) -> T:
        try:
            result = task()
        except Exception as e:
            logger.error(f"Policy run '{label}' failed: {e}")
            raise
        with self._lock:
            self.completed.append(label)
        logger.info(f"Policy run '{label}' finished")
        return result
