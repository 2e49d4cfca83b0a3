from __future__ import annotations

import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor

# Globals for lazy init
_executor: ThreadPoolExecutor | None = None
_executor_workers = 0
_init_lock = threading.Lock()
_worker_state = threading.local()


def worker_count() -> int:
    from .config import get_settings

    return max(1, get_settings().WORKERS)


def get_executor() -> ThreadPoolExecutor | None:
    """Shared thread pool, or None when a single worker is configured."""
    global _executor, _executor_workers
    workers = worker_count()
    if workers <= 1:
        return None
    if _executor is not None and _executor_workers == workers:
        return _executor
    with _init_lock:
        if _executor is None or _executor_workers != workers:
            if _executor is not None:
                _executor.shutdown(wait=True)
            _executor = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="pkd")
            _executor_workers = workers
    return _executor


def map_ordered(fn, items) -> list:
    """Apply ``fn`` to every item, concurrently when a pool exists; results keep input order.

    Calls made from inside a pool worker run inline so nested use cannot exhaust the pool.
    """
    items = list(items)
    executor = get_executor()
    if executor is None or len(items) <= 1 or getattr(_worker_state, "active", False):
        return [fn(item) for item in items]

    def run(item):
        _worker_state.active = True
        try:
            return fn(item)
        finally:
            _worker_state.active = False

    return list(executor.map(run, items))


def configure_logging(level: str | int = "INFO") -> None:
    root = logging.getLogger("pkdmamba")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    root.setLevel(level)
    if not any(getattr(h, "_pkd_handler", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
        handler._pkd_handler = True  # type: ignore[attr-defined]
        root.addHandler(handler)
