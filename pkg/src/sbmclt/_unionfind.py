"""Numba union-find kernels carrying a per-root type tally."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True, nogil=True)
def union_edges(parent, size, tally, us, vs):
    """Merge the endpoints of every edge ``(us[k], vs[k])``; returns the number of merges."""
    merges = 0
    d = tally.shape[1]
    for k in range(us.shape[0]):
        a = find(parent, us[k])
        b = find(parent, vs[k])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
        for j in range(d):
            tally[a, j] += tally[b, j]
        merges += 1
    return merges


def new_forest(types: np.ndarray, d: int):
    """Singleton forest over vertices whose types are given by ``types``."""
    n = types.shape[0]
    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    tally = np.zeros((n, d), dtype=np.int64)
    tally[np.arange(n), types] = 1
    return parent, size, tally


def root_tallies(parent: np.ndarray, tally: np.ndarray) -> np.ndarray:
    roots = np.flatnonzero(parent == np.arange(parent.shape[0]))
    return tally[roots]
