"""Counter-based random streams and uniform samplers on spheres and geodesic subspheres.

Streams are addressed by (seed, stream label, chunk index) through independent
Philox keys, so any chunk can be regenerated in isolation: results depend only
on (seed, sample count), never on chunking order or worker count. Raw Gaussian
chunks are memoized (bounded budget), which makes repeated common-random-number
evaluations (volume Newton, finite differences) reuse identical draws at no
generation cost.
"""

from __future__ import annotations

import numpy as np

# Chunk size is part of the reproducibility contract: streams are drawn in
# fixed-size blocks and reduced pairwise, so the worker count cannot change
# the result.
CHUNK = 1 << 18

_MIX = 0x9E3779B97F4A7C15
_MASK = 0xFFFFFFFFFFFFFFFF

_unit_cache: dict[tuple, np.ndarray] = {}
_unit_cache_floats = 0
UNIT_CACHE_BUDGET = 250_000_000  # floats, ~2 GB


def _key(seed: int, label: int, chunk: int) -> np.uint64:
    mixed = (seed & _MASK)
    for part in (label, chunk):
        mixed = ((mixed ^ (part & _MASK)) * _MIX) & _MASK
    return np.uint64(mixed)


def stream(seed: int, label: int, chunk: int = 0) -> np.random.Generator:
    """Philox generator for an independent (seed, label, chunk)-addressed stream."""
    return np.random.Generator(np.random.Philox(key=_key(seed, label, chunk)))


def unit_chunk(seed: int, label: int, chunk: int, count: int, dim: int) -> np.ndarray:
    """Uniform unit directions in R^dim, shape (count, dim), memoized per address."""
    global _unit_cache_floats
    key = (seed, label, chunk, dim)
    arr = _unit_cache.get(key)
    if arr is None or arr.shape[0] < count:
        full = max(CHUNK if count > CHUNK // 2 else count, count)
        arr = stream(seed, label, chunk).standard_normal((full, dim))
        arr /= np.linalg.norm(arr, axis=1, keepdims=True)
        if arr.size <= UNIT_CACHE_BUDGET:
            while (_unit_cache_floats + arr.size > UNIT_CACHE_BUDGET
                   and _unit_cache):
                _, old = _unit_cache.popitem()
                _unit_cache_floats -= old.size
            _unit_cache[key] = arr
            _unit_cache_floats += arr.size
    return arr[:count]


def clear_sample_cache() -> None:
    global _unit_cache_floats
    _unit_cache.clear()
    _unit_cache_floats = 0


def chunk_layout(total: int) -> list[tuple[int, int]]:
    """(chunk index, count) pairs covering `total` samples in fixed-size blocks."""
    out = []
    drawn, chunk = 0, 0
    while drawn < total:
        count = min(CHUNK, total - drawn)
        out.append((chunk, count))
        drawn += count
        chunk += 1
    return out


def pairwise_sum(chunks: list[np.ndarray]) -> np.ndarray:
    """Tree reduction with a deterministic association order."""
    if not chunks:
        raise ValueError("nothing to reduce")
    items = list(chunks)
    while len(items) > 1:
        items = [items[k] + items[k + 1] if k + 1 < len(items) else items[k]
                 for k in range(0, len(items), 2)]
    return items[0]


def unit_sphere_chunk(seed: int, label: int, chunk: int, count: int,
                      ambient_dim: int) -> np.ndarray:
    """Uniform points on the unit sphere in R^ambient_dim, shape (count, ambient_dim)."""
    return unit_chunk(seed, label, chunk, count, ambient_dim)


def unit_sphere(rng_or_seed, count: int, ambient_dim: int,
                label: int = 0) -> np.ndarray:
    """Uniform sphere points; accepts a Generator (ad hoc) or a seed (addressed)."""
    if isinstance(rng_or_seed, np.random.Generator):
        x = rng_or_seed.standard_normal((count, ambient_dim))
        return x / np.linalg.norm(x, axis=1, keepdims=True)
    blocks = [unit_sphere_chunk(rng_or_seed, label, c, m, ambient_dim)
              for c, m in chunk_layout(count)]
    return np.concatenate(blocks) if len(blocks) > 1 else blocks[0]


def subsphere_frame(c: np.ndarray, kappa: float) -> tuple[np.ndarray, float, np.ndarray] | None:
    """Center, radius and tangent frame of S^n cut by the wall <c, x> + kappa = 0.

    The wall sphere lives in the hyperplane <c, x> = -kappa; it is centered at
    -kappa c / |c|^2 with radius sqrt(1 - kappa^2/|c|^2). Returns None when the
    hyperplane misses the unit sphere. For pairs satisfying the compatibility
    constraint |c|^2 = 1 + kappa^2 this reduces to radius 1/sqrt(1 + kappa^2).
    """
    c = np.asarray(c, dtype=float)
    c2 = float(c @ c)
    if c2 <= 0.0:
        return None
    r2 = 1.0 - kappa * kappa / c2
    if r2 <= 0.0:
        return None
    center = -kappa * c / c2
    from .simplex import orthonormal_complement

    frame = orthonormal_complement(c[None, :], c.size)  # columns span c-perp
    return center, float(np.sqrt(r2)), frame


def subsphere_chunk(seed: int, label: int, chunk: int, count: int,
                    center: np.ndarray, radius: float, frame: np.ndarray) -> np.ndarray:
    """Uniform points on the geodesic subsphere described by subsphere_frame."""
    w = unit_chunk(seed, label, chunk, count, frame.shape[1])
    return center[None, :] + radius * (w @ frame.T)
