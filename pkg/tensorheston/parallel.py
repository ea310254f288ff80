"""
Block scheduling for Monte Carlo path work.

Paths are split into contiguous blocks and dispatched to a thread pool. Results come
back in block order, and every path draws from its own keyed noise stream, so the
output never depends on the number of workers.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple, TypeVar

import numpy as np

from config.settings import get_config

T = TypeVar("T")


class BlockScheduler:
    """
    Splits path ranges into blocks and runs a kernel over them.

    This class is responsible for:
    - Distributing path indices into contiguous blocks
    - Running the block kernel serially or on a thread pool
    - Returning block results in index order
    """

    def __init__(self, threads: Optional[int] = None, block_size: Optional[int] = None):
        """
        Initialize the scheduler.

        Args:
            threads: Worker threads (defaults to Simulation.threads)
            block_size: Paths per block (defaults to Simulation.block_size)
        """
        config = get_config()
        self.threads = max(1, threads or config.get_int("Simulation", "threads", fallback=1))
        self.block_size = max(
            1, block_size or config.get_int("Simulation", "block_size", fallback=2048)
        )

    def plan_blocks(self, count: int) -> List[Tuple[int, int]]:
        """
        Distribute path indices [0, count) into contiguous blocks.

        Args:
            count: Number of paths

        Returns:
            List of (start, stop) pairs covering the range in order
        """
        return [
            (start, min(start + self.block_size, count))
            for start in range(0, count, self.block_size)
        ]

    def map_blocks(self, kernel: Callable[[int, int], T], count: int) -> List[T]:
        """
        Run kernel(start, stop) over every block.

        Args:
            kernel: Block function, must be a pure function of its range
            count: Number of paths

        Returns:
            Kernel results in block order
        """
        blocks = self.plan_blocks(count)
        if self.threads == 1 or len(blocks) <= 1:
            return [kernel(start, stop) for start, stop in blocks]

        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(lambda block: kernel(*block), blocks))

    def gather(
        self, kernel: Callable[[int, int], Dict[str, np.ndarray]], count: int
    ) -> Dict[str, np.ndarray]:
        """
        Run a kernel returning per-path arrays and concatenate them along the path axis.

        Args:
            kernel: Block function returning {field: array with leading axis stop - start}
            count: Number of paths

        Returns:
            {field: array with leading axis count}
        """
        parts = self.map_blocks(kernel, count)
        if not parts:
            return {}
        return {key: np.concatenate([part[key] for part in parts], axis=0) for key in parts[0]}
