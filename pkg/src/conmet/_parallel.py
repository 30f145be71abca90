"""Deterministic chunked evaluation, optionally threaded.

Work is split into fixed-size chunks and each chunk writes into a
preallocated slice of the output, so results are bit-identical no matter
how many threads run them.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 2048


def map_chunks(fn, total: int, out_shape, threads: int = 1,
               chunk: int = CHUNK) -> np.ndarray:
    """Evaluate fn(slice) for consecutive slices covering range(total) and
    stack the results into an array of out_shape along axis 0."""
    out = np.empty(out_shape)
    slices = [slice(s, min(s + chunk, total)) for s in range(0, total, chunk)]

    def run(sl):
        out[sl] = fn(sl)

    if threads <= 1 or len(slices) <= 1:
        for sl in slices:
            run(sl)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run, slices))
    return out
