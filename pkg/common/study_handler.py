"""Worker pool running independent Monte Carlo replications."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

from common.errors import ConfigError

Result = TypeVar("Result")


def env_int(name: str, default: int) -> int:
    """Read an integer environment variable, raising ConfigError when it does not parse."""
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got '{raw}'")


class StudyHandler:
    """Dispatches replications over a thread pool and returns results in index order."""

    def __init__(self, workers: Optional[int] = None):
        """Initialize handler; workers defaults to FEQR_WORKERS, then 1."""
        self.pool_config = {
            "workers": workers or env_int("FEQR_WORKERS", 1),
            "progress_every": env_int("FEQR_PROGRESS_EVERY", 0),
        }
        if self.pool_config["workers"] < 1:
            logging.warning("FEQR_WORKERS=%s is not positive; using 1", self.pool_config["workers"])
            self.pool_config["workers"] = 1

    @property
    def workers(self) -> int:
        return self.pool_config["workers"]

    def run_one(
        self,
        replicate: Callable[[int], Result],
        on_error: Callable[[int, Exception], Result],
        index: int,
    ) -> Result:
        """Run one replication; an unexpected failure becomes on_error's record."""
        try:
            result = replicate(index)
        except Exception as e:
            logging.error("Error in replication %s: %s", index, e)
            return on_error(index, e)
        every = self.pool_config["progress_every"]
        if every and (index + 1) % every == 0:
            logging.info("Finished replication %s", index + 1)
        return result

    def run(
        self,
        replicate: Callable[[int], Result],
        n_replications: int,
        on_error: Callable[[int, Exception], Result],
    ) -> List[Result]:
        """Main handler: run replications 0..n-1 and return results ordered by index."""
        indices = range(n_replications)
        if self.workers == 1:
            return [self.run_one(replicate, on_error, index) for index in indices]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(
                executor.map(lambda index: self.run_one(replicate, on_error, index), indices)
            )
