"""Order-preserving task fan-out.

Tasks are independent and results are reassembled in submission order, so
numerical output never depends on the number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_jobs() -> int:
    return int(os.environ.get("RWDPP_JOBS", "1"))


def map_chunks(func, tasks: list, jobs: int = 1) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(func, tasks))
