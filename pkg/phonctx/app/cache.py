import threading
from collections import OrderedDict
from functools import wraps
from typing import Any, Hashable, Optional

from phonctx.app.config import settings

_MISSING = object()


class CacheManager:
    """Bounded LRU cache for pure, deterministic lookups."""

    def __init__(self, max_entries: int = settings.CACHE_MAX_ENTRIES):
        self._cache: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = threading.Lock()
        self.max_entries = max_entries
        self.hits = 0
        self.misses = 0

    def get(self, key: Hashable, default: Any = None) -> Any:
        """Get value from cache, refreshing its recency"""
        with self._lock:
            if key in self._cache:
                self._cache.move_to_end(key)
                self.hits += 1
                return self._cache[key]
            self.misses += 1
            return default

    def set(self, key: Hashable, value: Any) -> None:
        with self._lock:
            self._cache[key] = value
            self._cache.move_to_end(key)
            while len(self._cache) > self.max_entries:
                self._cache.popitem(last=False)

    def clear(self) -> None:
        """Clear all cached values"""
        with self._lock:
            self._cache.clear()
            self.hits = 0
            self.misses = 0

    def __len__(self) -> int:
        return len(self._cache)


# Create global cache instance
cache_manager = CacheManager()


def cached(namespace: Optional[str] = None):
    """Memoize a pure function on its positional arguments."""

    def decorator(func):
        prefix = namespace or func.__name__

        @wraps(func)
        def wrapper(*args):
            key = (prefix, args)
            result = cache_manager.get(key, _MISSING)
            if result is not _MISSING:
                return result
            result = func(*args)
            cache_manager.set(key, result)
            return result

        return wrapper

    return decorator
