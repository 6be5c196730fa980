import os
from concurrent.futures import ThreadPoolExecutor


class WorkerPool:
    """Bounded fan-out for scans; results always come back in input order."""

    def __init__(self, workers=None):
        self.workers = workers or os.cpu_count() or 1

    def init_app(self, app):
        self.workers = int(app.config.get("WORKERS") or self.workers)
        app.extensions["tunneltime_pool"] = self

    def map(self, fn, items, workers=None):
        items = list(items)
        workers = min(workers or self.workers, max(len(items), 1))
        if workers <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(fn, items))


pool = WorkerPool()
