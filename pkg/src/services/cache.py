"""Disk cache for dense Hamiltonian eigendecompositions.

Eigendecompositions are the expensive part of dense propagation and depend only on
the Hamiltonian matrix, so they are stored with diskcache under a SHA-256 digest of
the matrix structure and values. Entries are evicted least-recently-used once the
cache grows past its size limit.
"""

import hashlib
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from diskcache import Cache
from scipy import sparse
from structlog import get_logger

from ..config.settings import CacheConfig

logger = get_logger(__name__)

Eigensystem = Tuple[np.ndarray, np.ndarray]

_CACHES: Dict[Path, "EigenCache"] = {}


class EigenCache:
    """Persistent store of (eigenvalues, eigenvectors) keyed by matrix digest."""

    def __init__(self, cache_dir: Path, max_size: int = 1024 * 1024 * 1024):
        """Initialize the cache.

        Args:
            cache_dir: Directory to store cache files
            max_size: Maximum cache size in bytes
        """
        self.cache_dir = Path(cache_dir)
        self.max_size = max_size
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.cache = Cache(
            directory=str(self.cache_dir),
            size_limit=max_size,
            eviction_policy="least-recently-used",
        )
        self.cache.stats(enable=True)
        logger.info(
            "cache_initialized", directory=str(self.cache_dir), max_size=max_size
        )

    @staticmethod
    def digest(matrix: sparse.spmatrix) -> str:
        """Stable key for a sparse matrix, independent of how it was assembled."""
        canonical = sparse.csr_matrix(matrix, dtype=complex)
        canonical.sum_duplicates()
        canonical.sort_indices()
        hasher = hashlib.sha256()
        hasher.update(repr(canonical.shape).encode())
        for array in (canonical.indptr, canonical.indices, canonical.data):
            hasher.update(np.ascontiguousarray(array).tobytes())
        return hasher.hexdigest()

    def get(self, matrix: sparse.spmatrix) -> Optional[Eigensystem]:
        key = self.digest(matrix)
        entry = self.cache.get(key)
        if entry is None:
            logger.debug("eigensystem_cache_miss", key=key)
            return None
        logger.debug("eigensystem_cache_hit", key=key)
        return entry

    def set(self, matrix: sparse.spmatrix, eigensystem: Eigensystem) -> None:
        key = self.digest(matrix)
        self.cache.set(key, eigensystem)
        logger.debug(
            "eigensystem_cached", key=key, dimension=int(eigensystem[0].shape[0])
        )

    def delete(self, matrix: sparse.spmatrix) -> None:
        self.cache.delete(self.digest(matrix))

    def clear(self) -> None:
        """Remove every cached eigensystem."""
        self.cache.clear()
        logger.info("cache_cleared")

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics.

        Returns:
            Dict[str, Any]: Cache statistics
        """
        hits, misses = self.cache.stats()
        stats: Dict[str, Any] = {
            "volume": self.cache.volume(),
            "max_size": self.max_size,
            "directory": str(self.cache_dir),
            "entry_count": len(self.cache),
            "hit_count": hits,
            "miss_count": misses,
        }
        lookups = hits + misses
        stats["hit_ratio"] = hits / lookups if lookups else 0.0
        return stats

    def close(self) -> None:
        self.cache.close()


def get_eigen_cache(settings: CacheConfig) -> Optional[EigenCache]:
    """Shared cache for ``settings.directory``, or ``None`` when caching is disabled."""
    if not settings.enabled:
        return None
    directory = Path(settings.directory).resolve()
    if directory not in _CACHES:
        _CACHES[directory] = EigenCache(directory, settings.size_limit)
    return _CACHES[directory]
