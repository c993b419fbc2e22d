"""Deterministic random-number substreams.

Replicates are produced in fixed-size blocks; block ``b`` of stream ``name``
always uses the generator keyed by ``(name, b)`` under the master seed.  The
assignment depends only on the block index, never on which worker simulates
the block, so a run is bit-identical for any worker count.
"""

from __future__ import annotations

import numpy as np

BLOCK_SIZE = 16384

# stream namespaces (first spawn-key component)
SIM = 0
PREPASS = 1
GAUSS_U = 2
CHAIN = 3
RETRY = 4

_TWO53 = 1 << 53


def substream(master_seed: int, stream: int, index: int = 0) -> np.random.Generator:
    """Generator for block ``index`` of stream ``stream`` under ``master_seed``."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(stream, index))
    return np.random.Generator(np.random.PCG64(ss))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1): never exactly 0 or 1.

    Values are k / 2^53 for k in {1, ..., 2^53 - 1}, so quantile and
    generator evaluations stay finite.
    """
    return rng.integers(1, _TWO53, size=size).astype(np.float64) / _TWO53


def block_ranges(total: int, block: int = BLOCK_SIZE):
    """Yield (index, start, stop) block partitions of range(total)."""
    for i, start in enumerate(range(0, total, block)):
        yield i, start, min(start + block, total)


def map_blocks(fn, total: int, workers: int = 1, block: int = BLOCK_SIZE):
    """Run ``fn(block_index, block_len)`` over all blocks, in index order.

    ``fn`` must be deterministic given its arguments (it should derive any
    randomness from :func:`substream`).  With ``workers > 1`` the blocks are
    evaluated in a process pool; results are reassembled in block order so
    the output is independent of scheduling.
    """
    jobs = [(i, stop - start) for i, start, stop in block_ranges(total, block)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(i, m) for i, m in jobs]
    from concurrent.futures import ProcessPoolExecutor

    nproc = min(workers, len(jobs))
    with ProcessPoolExecutor(max_workers=nproc) as pool:
        futures = [pool.submit(fn, i, m) for i, m in jobs]
        return [f.result() for f in futures]
