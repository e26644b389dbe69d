"""Exponential-clock exploration walk and its multidimensional first hitting times.

Each vertex of type ``j`` carries an Exp(1) clock. For a direction ``v``
and level ``y`` the hitting time ``T(y)`` is the coordinatewise-minimal
solution of

    t_i = v_i y + sum_j K_ij / N * #{l : xi_{l,j} < t_j}.

As ``y`` grows, ``T`` drifts at speed ``v`` and jumps whenever the drift
reaches an unexplored clock; the jump is ``K c / N`` where ``c`` is the type
tally of the avalanche of clocks absorbed, which has the law of one SBM
component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import DimensionError, DomainError
from .graph import GraphSample
from .spectral import TypeProfile


@dataclass(frozen=True, eq=False)
class ClockSet:
    """Sorted Exp(1) clocks, one array per type."""

    xi: tuple[np.ndarray, ...]
    seed: int | None = None

    def __post_init__(self):
        arrays = []
        for a in self.xi:
            a = np.sort(np.asarray(a, dtype=float).reshape(-1))
            if a.size and a[0] <= 0:
                raise DomainError("clocks must be strictly positive")
            a.setflags(write=False)
            arrays.append(a)
        object.__setattr__(self, "xi", tuple(arrays))

    @classmethod
    def from_arrays(cls, *xi) -> ClockSet:
        return cls(tuple(xi))

    @property
    def d(self) -> int:
        return len(self.xi)

    @property
    def block_sizes(self) -> np.ndarray:
        return np.array([a.size for a in self.xi], dtype=np.int64)

    @property
    def N(self) -> int:
        return int(sum(a.size for a in self.xi))

    def counts(self, t, strict: bool) -> np.ndarray:
        """``#{l: xi_{l,j} < t_j}`` (strict) or ``<= t_j`` per type."""
        side = "left" if strict else "right"
        return np.array([np.searchsorted(a, tj, side=side) for a, tj in zip(self.xi, t)], dtype=np.int64)


def sample_clocks(profile: TypeProfile, seed: int) -> ClockSet:
    sizes = profile.block_sizes
    xi = tuple(_rng.substream(seed, _rng.CLOCKS, j).exponential(1.0, size=int(n)) for j, n in enumerate(sizes))
    return ClockSet(xi, int(seed))


def _check(clocks: ClockSet, kernel_n, v=None):
    kn = np.asarray(kernel_n, dtype=float)
    if kn.shape != (clocks.d, clocks.d):
        raise DimensionError(f"kernel_n has shape {kn.shape}, expected {(clocks.d, clocks.d)}")
    if v is None:
        return kn, None
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != clocks.d:
        raise DimensionError(f"v has length {v.size}, expected {clocks.d}")
    if np.any(v <= 0):
        raise DomainError("v must be strictly positive")
    return kn, v


def position(v: np.ndarray, y: float, kn: np.ndarray, counts: np.ndarray, N: int) -> np.ndarray:
    """``v y + K counts / N``; the single formula every hitting-time value goes through."""
    return v * y + (kn @ counts) / N


def z_matrix(clocks: ClockSet, kernel_n, t, left_limit: bool = False) -> np.ndarray:
    """``Z_ij(t_j) = -[i=j] t_j + K_ij N^-1 #{xi_{l,j} <= t_j}`` (``<`` for the left limit)."""
    kn, _ = _check(clocks, kernel_n)
    t = np.asarray(t, dtype=float).reshape(-1)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    c = clocks.counts(t, strict=left_limit)
    return kn * (c / clocks.N)[None, :] - np.diag(t)


def z_eval(clocks: ClockSet, kernel_n, t, left_limit: bool = False) -> np.ndarray:
    """Row sums ``Z_i(t) = -t_i + sum_j K_ij N^-1 #{xi_{l,j} <= t_j}``."""
    kn, _ = _check(clocks, kernel_n)
    t = np.asarray(t, dtype=float).reshape(-1)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    c = clocks.counts(t, strict=left_limit)
    return (kn @ c) / clocks.N - t


def _closure(clocks: ClockSet, kn, v, y, counts):
    """Least fixed point above ``counts`` of ``c -> #{xi < v y + K c / N}``."""
    N = clocks.N
    c = counts
    while True:
        t = position(v, y, kn, c, N)
        nxt = np.maximum(clocks.counts(t, strict=True), c)
        if np.array_equal(nxt, c):
            return t, c
        c = nxt


def hitting_time(clocks: ClockSet, kernel_n, v, y: float, return_counts: bool = False):
    """Coordinatewise-minimal ``t`` with ``Z(t-) = -v y``.

    Knaster-Tarski iteration from ``t = v y``: each sweep recounts the
    clocks strictly below ``t``; the count vector only grows, so at most
    ``N + 1`` sweeps are needed.
    """
    kn, v = _check(clocks, kernel_n, v)
    if y < 0:
        raise DomainError("y must be nonnegative")
    t, c = _closure(clocks, kn, v, float(y), np.zeros(clocks.d, dtype=np.int64))
    return (t, c) if return_counts else t


@dataclass(frozen=True, eq=False)
class HittingPath:
    """Jump decomposition ``T(y) = v y + sum_{l: E_l < y} Delta_l`` on ``[0, horizon]``.

    ``tallies[l]`` is the type count vector behind jump ``l``, so that
    ``jump_vectors[l] = kernel_n @ tallies[l] / N``.
    """

    v: np.ndarray
    jump_locations: np.ndarray
    jump_vectors: np.ndarray
    horizon: float
    tallies: np.ndarray
    kernel_n: np.ndarray = field(repr=False)
    N: int = 0

    def __post_init__(self):
        cum = np.vstack([np.zeros((1, self.v.size), dtype=np.int64), np.cumsum(self.tallies, axis=0)])
        object.__setattr__(self, "_cum", cum)

    @property
    def n_jumps(self) -> int:
        return int(self.jump_locations.size)

    def counts_at(self, y: float) -> np.ndarray:
        return self._cum[np.searchsorted(self.jump_locations, y, side="left")]

    def evaluate(self, y: float) -> np.ndarray:
        """``T(y)``, left-continuous in ``y``."""
        if y > self.horizon:
            raise DomainError(f"y={y} is beyond the path horizon {self.horizon}")
        return position(self.v, float(y), self.kernel_n, self.counts_at(y), self.N)

    def jumps_below(self, y: float) -> int:
        return int(np.searchsorted(self.jump_locations, y, side="left"))

    def largest(self) -> int:
        """Index of the jump with the largest tally (ties: lexicographically larger tally)."""
        if self.n_jumps == 0:
            raise DomainError("path has no jumps")
        t = self.tallies
        keys = [t[:, j] for j in reversed(range(t.shape[1]))] + [t.sum(axis=1)]
        return int(np.lexsort(keys)[-1])

    def largest_jump(self) -> np.ndarray:
        return self.jump_vectors[self.largest()]

    def by_size(self) -> np.ndarray:
        """Jump indices relabelled in decreasing tally size."""
        t = self.tallies
        keys = [-t[:, j] for j in reversed(range(t.shape[1]))] + [-t.sum(axis=1)]
        return np.lexsort(keys)


def _make_path(v, kn, N, locations, tallies, horizon) -> HittingPath:
    d = v.size
    tallies = np.asarray(tallies, dtype=np.int64).reshape(-1, d)
    locations = np.asarray(locations, dtype=float)
    jumps = (tallies @ kn.T) / N
    return HittingPath(v, locations, jumps, float(horizon), tallies, kn, N)


def _last_unabsorbed(xi: float, mass: float, vj: float) -> float:
    """Largest float ``y`` with ``vj * y + mass <= xi`` in floating point.

    Absorption is decided by ``xi < vj * y + mass`` evaluated exactly as in
    :func:`position`, so locating the jump on that boundary keeps the path
    and :func:`hitting_time` bit-identical at every ``y``.
    """
    y = (xi - mass) / vj
    while vj * y + mass > xi:
        y = math.nextafter(y, -math.inf)
    while vj * math.nextafter(y, math.inf) + mass <= xi:
        y = math.nextafter(y, math.inf)
    return y


def hitting_path(clocks: ClockSet, kernel_n, v, y_max: float = math.inf) -> HittingPath:
    """All jumps of ``y -> T(y)`` with location below ``y_max``, found event by event.

    From the current count vector ``c`` the drift reaches the next clock of
    type ``j`` at ``y_j = (xi_{c_j, j} - (K c / N)_j) / v_j``. At the earliest
    such ``y*`` that clock is absorbed and the closure sweep of
    ``hitting_time`` collects the resulting avalanche.
    """
    kn, v = _check(clocks, kernel_n, v)
    if not y_max > 0:
        raise DomainError("y_max must be positive")
    N = clocks.N
    sizes = clocks.block_sizes
    c = np.zeros(clocks.d, dtype=np.int64)
    locations, tallies = [], []
    while True:
        mass = (kn @ c) / N
        best_y, best_j = math.inf, -1
        for j in range(clocks.d):
            if c[j] < sizes[j]:
                yj = _last_unabsorbed(float(clocks.xi[j][c[j]]), float(mass[j]), float(v[j]))
                if yj < best_y:
                    best_y, best_j = yj, j
        if best_j < 0 or best_y >= y_max:
            break
        trig = c.copy()
        trig[best_j] += 1
        _, c_new = _closure(clocks, kn, v, best_y, trig)
        locations.append(best_y)
        tallies.append(c_new - c)
        c = c_new
    return _make_path(v, kn, N, locations, tallies, y_max)


def x_scale_hitting_time(clocks: ClockSet, kernel_n, w, Y: float) -> np.ndarray:
    """Minimal ``s`` solving the unrescaled system with weights ``N^-2/3``.

    ``s_i = w_i Y + sum_j (K_ij / K_ii) N^-2/3 #{xi°_{l,j} < N^1/3 K_jj s_j}``
    with clocks ``xi° = N^2/3 xi`` (mean ``N^2/3``).
    """
    kn, w = _check(clocks, kernel_n, w)
    diag = np.diag(kn)
    if np.any(diag <= 0):
        raise DomainError("diagonal of kernel_n must be positive")
    N = clocks.N
    n13, n23 = N ** (1.0 / 3.0), N ** (2.0 / 3.0)
    raw = tuple(n23 * a for a in clocks.xi)
    weights = kn / diag[:, None]
    c = np.zeros(clocks.d, dtype=np.int64)
    while True:
        s = w * Y + (weights @ c) / n23
        thresh = n13 * diag * s
        nxt = np.array([np.searchsorted(a, th, side="left") for a, th in zip(raw, thresh)], dtype=np.int64)
        nxt = np.maximum(nxt, c)
        if np.array_equal(nxt, c):
            return s
        c = nxt


def scaling_identity_check(clocks: ClockSet, kernel_n, v, y: float) -> float:
    """Sup-norm gap between ``T(y, v, Z)`` and ``N^-1/3 diag(K) T(N^1/3 y, diag(K)^-1 v, X)``."""
    kn, v = _check(clocks, kernel_n, v)
    N = clocks.N
    diag = np.diag(kn)
    if np.any(diag <= 0):
        raise DomainError("diagonal of kernel_n must be positive")
    tz = hitting_time(clocks, kn, v, y)
    sx = x_scale_hitting_time(clocks, kn, v / diag, N ** (1.0 / 3.0) * y)
    return float(np.abs(tz - N ** (-1.0 / 3.0) * diag * sx).max())


def graph_side_path(sample: GraphSample, kernel_n, v, seed: int) -> HittingPath:
    """Jump path built from SBM component tallies with independent Exp(v . C_l) locations."""
    kn = np.asarray(kernel_n, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1)
    d = v.size
    if kn.shape != (d, d) or sample.tallies.shape[1] != d:
        raise DimensionError("kernel_n, v and sample tallies disagree on d")
    if np.any(v <= 0):
        raise DomainError("v must be strictly positive")
    tallies = sample.tallies
    rates = tallies @ v
    gen = _rng.substream(seed, _rng.GRAPH_SIDE)
    locations = gen.exponential(1.0, size=rates.size) / rates
    order = np.argsort(locations, kind="stable")
    return _make_path(v, kn, sample.N, locations[order], tallies[order], math.inf)
