import logging
import threading
from functools import wraps
from typing import Any, Dict, Hashable

from cachetools import LRUCache

from app.config import settings

logger = logging.getLogger(__name__)

_MISSING = object()


class MemoCache:
    """Named LRU memo tables for windows, cumulative sums and schedule offsets.

    Every stored value is a pure function of its key, so two threads filling
    the same key store the same value.
    """

    def __init__(self, maxsize: int):
        self.maxsize = maxsize
        self.tables: Dict[str, LRUCache] = {}
        self.lock = threading.Lock()
        self.hit_count = 0
        self.miss_count = 0
        self.set_count = 0
        logger.debug(f"🗄️  Memo cache initialized with {maxsize} entries per table")

    def _table(self, name: str) -> LRUCache:
        table = self.tables.get(name)
        if table is None:
            table = self.tables.setdefault(name, LRUCache(maxsize=self.maxsize))
        return table

    def get(self, name: str, key: Hashable, default: Any = None) -> Any:
        with self.lock:
            value = self._table(name).get(key, _MISSING)
            if value is _MISSING:
                self.miss_count += 1
                return default
            self.hit_count += 1
            return value

    def set(self, name: str, key: Hashable, value: Any) -> None:
        with self.lock:
            self._table(name)[key] = value
            self.set_count += 1

    def clear(self) -> None:
        with self.lock:
            for table in self.tables.values():
                table.clear()
        logger.info("🧹 Memo cache cleared")

    def get_stats(self) -> Dict[str, Any]:
        with self.lock:
            total_requests = self.hit_count + self.miss_count
            hit_rate = (self.hit_count / total_requests * 100) if total_requests > 0 else 0
            return {
                "total_items": sum(len(table) for table in self.tables.values()),
                "tables": {name: len(table) for name, table in sorted(self.tables.items())},
                "hit_count": self.hit_count,
                "miss_count": self.miss_count,
                "set_count": self.set_count,
                "hit_rate_percent": round(hit_rate, 2),
                "total_requests": total_requests,
            }


# Global cache instance
cache = MemoCache(maxsize=settings.cache_size)


def memoized(table: str):
    """Memoize a pure function on its (hashable) positional arguments"""

    def decorator(func):
        @wraps(func)
        def wrapper(*args):
            try:
                hash(args)
            except TypeError:
                return func(*args)
            value = cache.get(table, args, _MISSING)
            if value is not _MISSING:
                return value
            value = func(*args)
            cache.set(table, args, value)
            return value

        return wrapper

    return decorator


def get_cache_health() -> Dict[str, Any]:
    """Get cache health status"""
    stats = cache.get_stats()

    health_status = "healthy"
    if stats["hit_rate_percent"] < 10 and stats["total_requests"] > 1000:
        health_status = "warning"

    return {
        "status": health_status,
        "statistics": stats,
        "cache_type": "memory-lru",
        "max_entries_per_table": cache.maxsize,
    }
