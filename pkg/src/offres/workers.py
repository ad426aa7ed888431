import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    """Worker cap from ``OFFRES_THREADS`` (default: CPU count, at most 8)."""
    env = os.environ.get("OFFRES_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def ordered_map(fn, items):
    """``list(map(fn, items))``, possibly threaded; results keep input order."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
