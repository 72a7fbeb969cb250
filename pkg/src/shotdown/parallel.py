"""Deterministic chunked Monte Carlo.

Work is split into fixed-size chunks, chunk ``i`` draws from
``stream(seed, *key, i)``, and results are returned in chunk order. The
thread count only affects scheduling, so any reduction done over the
returned list is bit-identical across thread counts.
"""

from concurrent.futures import ThreadPoolExecutor

from .rng import stream

CHUNK = 50_000
_threads = 1


def set_threads(k):
    global _threads
    _threads = max(1, int(k))


def get_threads():
    return _threads


def chunk_sizes(n, chunk=CHUNK):
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return sizes


def map_chunks(fn, n, seed, key=(), chunk=CHUNK, threads=None):
    """[fn(rng_i, n_i) for each chunk i], evaluated on a thread pool."""
    sizes = chunk_sizes(n, chunk)
    jobs = [(stream(seed, *key, i), m) for i, m in enumerate(sizes)]
    k = threads or _threads
    if k == 1 or len(jobs) == 1:
        return [fn(r, m) for r, m in jobs]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))
