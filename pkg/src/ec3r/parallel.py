import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "EC3R_THREADS"


def worker_count(default: int = 1) -> int:
    """Worker cap from ``EC3R_THREADS``; falls back to ``default``."""
    raw = os.environ.get(ENV_THREADS)
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return max(1, value)


def ordered_map(fn, items, workers: int | None = None):
    """``map`` that may fan out over threads but always returns input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
