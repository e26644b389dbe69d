"""Sampling SBM graphs and tallying their connected components by type."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import rng as _rng
from ._unionfind import new_forest, root_tallies, union_edges
from .errors import DimensionError, NegativeRateError, SubcriticalError
from .spectral import Frame, Kernel, TypeProfile, solve_rho

EdgeSink = Callable[[np.ndarray, np.ndarray], None]


@dataclass(frozen=True)
class ComponentTally:
    counts: tuple[int, ...]

    @property
    def size(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True, eq=False)
class GraphSample:
    """Component tallies of one SBM draw.

    ``tallies[l, k]`` is the number of type-``k`` vertices in the ``l``-th
    largest component; rows are sorted by decreasing size, ties broken by the
    lexicographically larger count vector first.
    """

    profile: TypeProfile
    tallies: np.ndarray
    seed: int
    n_edges: int

    @property
    def N(self) -> int:
        return int(self.tallies.sum())

    @property
    def sizes(self) -> np.ndarray:
        return self.tallies.sum(axis=1)

    @property
    def giant(self) -> np.ndarray:
        return self.tallies[0]

    @property
    def components(self) -> list[ComponentTally]:
        return [ComponentTally(tuple(int(x) for x in row)) for row in self.tallies]


def edge_prob(kappa: float, n: int) -> float:
    """``1 - exp(-kappa/n)``, computed without cancellation for small ``kappa/n``."""
    return float(-math.expm1(-kappa / n))


def realize_kernel_n(kernel: Kernel, n: int) -> np.ndarray:
    """``K^(n) = K + n^-1/2 Lambda``."""
    Kn = kernel.K + kernel.Lambda / math.sqrt(n)
    if np.any(Kn < 0):
        raise NegativeRateError(f"K + Lambda/sqrt({n}) has negative entries; Lambda is too negative for this n")
    return Kn


def sort_tallies(tallies: np.ndarray) -> np.ndarray:
    tallies = np.asarray(tallies, dtype=np.int64)
    if tallies.shape[0] == 0:
        return tallies
    d = tallies.shape[1]
    keys = [-tallies[:, j] for j in reversed(range(d))] + [-tallies.sum(axis=1)]
    return tallies[np.lexsort(keys)]


def components_from_edges(block_sizes, us, vs) -> np.ndarray:
    """Sorted component tallies of the graph on ``sum(block_sizes)`` vertices with the given edges.

    Vertices are numbered block by block: block ``j`` holds the ids
    ``offset_j .. offset_j + block_sizes[j] - 1``.
    """
    block_sizes = np.asarray(block_sizes, dtype=np.int64)
    types = np.repeat(np.arange(block_sizes.size), block_sizes)
    parent, size, tally = new_forest(types, block_sizes.size)
    union_edges(parent, size, tally, np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64))
    return sort_tallies(root_tallies(parent, tally))


def geometric_positions(gen: np.random.Generator, total: int, p: float) -> np.ndarray:
    """Indices in ``[0, total)`` kept independently with probability ``p``.

    Draws Geometric(p) gaps between successive kept indices, so the cost is
    proportional to the number kept rather than to ``total``.
    """
    if p <= 0.0 or total <= 0:
        return np.empty(0, dtype=np.int64)
    chunks = []
    last = -1
    while True:
        expected = (total - 1 - last) * p
        k = int(expected + 6.0 * math.sqrt(expected) + 16)
        pos = last + np.cumsum(gen.geometric(p, size=k))
        if pos[-1] >= total:
            chunks.append(pos[pos < total])
            break
        chunks.append(pos)
        last = int(pos[-1])
    return np.concatenate(chunks)


def decode_triangular(k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map linear indices ``k = b(b-1)/2 + a`` back to unordered pairs ``a < b``."""
    k = np.asarray(k, dtype=np.int64)
    b = ((1.0 + np.sqrt(1.0 + 8.0 * k.astype(np.float64))) / 2.0).astype(np.int64)
    b -= (b * (b - 1) // 2 > k).astype(np.int64)
    b += ((b + 1) * b // 2 <= k).astype(np.int64)
    a = k - b * (b - 1) // 2
    return a, b


def sample_sbm(
    kernel: Kernel,
    profile: TypeProfile,
    seed: int,
    edge_sink: EdgeSink | None = None,
) -> GraphSample:
    """Draw ``SBM_N(n_1, ..., n_d, P)`` and tally its components.

    Each block pair ``(i, j)``, ``i <= j``, gets its own random substream
    keyed by ``(seed, i, j)``; admissible vertex pairs are included with
    probability ``1 - exp(-K^(N)_ij / N)``. Edges are streamed into the
    union-find forest one block pair at a time and passed to ``edge_sink``
    (global vertex ids) when given.
    """
    if kernel.d != profile.d:
        raise DimensionError(f"kernel has d={kernel.d} but profile has d={profile.d}")
    sizes = profile.block_sizes
    N = int(sizes.sum())
    Kn = realize_kernel_n(kernel, N)
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    types = np.repeat(np.arange(kernel.d), sizes)
    parent, size, tally = new_forest(types, kernel.d)
    n_edges = 0
    for i in range(kernel.d):
        for j in range(i, kernel.d):
            p = edge_prob(Kn[i, j], N)
            gen = _rng.substream(seed, _rng.EDGES, i, j)
            if i == j:
                total = int(sizes[i]) * (int(sizes[i]) - 1) // 2
                idx = geometric_positions(gen, total, p)
                a, b = decode_triangular(idx)
            else:
                total = int(sizes[i]) * int(sizes[j])
                idx = geometric_positions(gen, total, p)
                a, b = np.divmod(idx, sizes[j])
            us = a + offsets[i]
            vs = b + offsets[j]
            if edge_sink is not None:
                edge_sink(us, vs)
            union_edges(parent, size, tally, us, vs)
            n_edges += idx.size
    return GraphSample(profile, sort_tallies(root_tallies(parent, tally)), int(seed), n_edges)


def expected_edge_count(kernel: Kernel, profile: TypeProfile) -> float:
    sizes = profile.block_sizes.astype(float)
    N = int(sizes.sum())
    Kn = realize_kernel_n(kernel, N)
    total = 0.0
    for i in range(kernel.d):
        for j in range(i, kernel.d):
            pairs = sizes[i] * (sizes[i] - 1) / 2 if i == j else sizes[i] * sizes[j]
            total += pairs * edge_prob(Kn[i, j], N)
    return total


def giant_statistic(
    sample: GraphSample,
    kernel: Kernel,
    frame: Frame | str = Frame.K_WEIGHTED,
    rho: np.ndarray | None = None,
    realized_kernel: bool = False,
) -> np.ndarray:
    """The CLT statistic of the largest component.

    RAW: ``sqrt(N)(C/N - M rho)``. K_WEIGHTED: ``sqrt(N)(W C/N - K M rho)``
    with ``W = K`` (default) or ``W = K^(N)`` when ``realized_kernel``.
    """
    frame = Frame(frame)
    profile = sample.profile
    if rho is None:
        sol = solve_rho(kernel, profile)
        if not sol.supercritical:
            raise SubcriticalError(sol.lambda1)
        rho = sol.rho
    N = sample.N
    c1 = sample.giant.astype(float)
    target = profile.mu * np.asarray(rho, dtype=float)
    if frame is Frame.RAW:
        return math.sqrt(N) * (c1 / N - target)
    W = realize_kernel_n(kernel, N) if realized_kernel else kernel.K
    return math.sqrt(N) * (W @ c1 / N - kernel.K @ target)
