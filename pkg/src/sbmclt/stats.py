"""Mergeable moment accumulators, jackknife standard errors and the two-sample KS test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps


class MomentAccumulator:
    """Streaming count, mean, co-moment matrix and per-coordinate third/fourth central moments.

    Two accumulators combine with :meth:`merge` (pairwise update formulas),
    so partial results from independent workers can be folded together.
    """

    def __init__(self, d: int):
        self.d = d
        self.n = 0
        self.mean = np.zeros(d)
        self.C = np.zeros((d, d))
        self.M3 = np.zeros(d)
        self.M4 = np.zeros(d)

    @classmethod
    def from_block(cls, X: np.ndarray) -> MomentAccumulator:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        acc = cls(X.shape[1])
        if X.shape[0] == 0:
            return acc
        acc.n = X.shape[0]
        acc.mean = X.mean(axis=0)
        Y = X - acc.mean
        acc.C = Y.T @ Y
        acc.M3 = (Y**3).sum(axis=0)
        acc.M4 = (Y**4).sum(axis=0)
        return acc

    @classmethod
    def from_samples(cls, X: np.ndarray, leaf: int = 64) -> MomentAccumulator:
        """Leaf blocks of ``leaf`` rows merged in a fixed balanced tree (order-deterministic)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        parts = [cls.from_block(X[i : i + leaf]) for i in range(0, X.shape[0], leaf)] or [cls(X.shape[1])]
        while len(parts) > 1:
            merged = [parts[i].merged(parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
            if len(parts) % 2:
                merged.append(parts[-1])
            parts = merged
        return parts[0]

    def push(self, x) -> None:
        self.merge(MomentAccumulator.from_block(np.asarray(x, dtype=float).reshape(1, -1)))

    def merged(self, other: MomentAccumulator) -> MomentAccumulator:
        out = MomentAccumulator(self.d)
        out.n, out.mean, out.C, out.M3, out.M4 = self.n, self.mean.copy(), self.C.copy(), self.M3.copy(), self.M4.copy()
        out.merge(other)
        return out

    def merge(self, other: MomentAccumulator) -> None:
        na, nb = self.n, other.n
        if nb == 0:
            return
        if na == 0:
            self.n, self.mean, self.C = nb, other.mean.copy(), other.C.copy()
            self.M3, self.M4 = other.M3.copy(), other.M4.copy()
            return
        n = na + nb
        delta = other.mean - self.mean
        m2a, m2b = np.diag(self.C), np.diag(other.C)
        m4 = (
            self.M4
            + other.M4
            + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
            + 6 * delta**2 * (na * na * m2b + nb * nb * m2a) / n**2
            + 4 * delta * (na * other.M3 - nb * self.M3) / n
        )
        m3 = self.M3 + other.M3 + delta**3 * na * nb * (na - nb) / n**2 + 3 * delta * (na * m2b - nb * m2a) / n
        self.C = self.C + other.C + np.outer(delta, delta) * na * nb / n
        self.mean = self.mean + delta * nb / n
        self.M3, self.M4, self.n = m3, m4, n

    def summary(self) -> MomentSummary:
        if self.n < 2:
            raise ValueError("need at least two observations")
        cov = self.C / (self.n - 1)
        cov = (cov + cov.T) / 2
        m2 = np.diag(self.C) / self.n
        with np.errstate(divide="ignore", invalid="ignore"):
            skew = (self.M3 / self.n) / m2**1.5
            kurt = (self.M4 / self.n) / m2**2 - 3.0
        return MomentSummary(
            sample_mean=self.mean.copy(),
            sample_cov=cov,
            standard_errors=np.sqrt(np.diag(cov) / self.n),
            skewness=skew,
            excess_kurtosis=kurt,
            R=self.n,
        )


@dataclass(frozen=True)
class MomentSummary:
    sample_mean: np.ndarray
    sample_cov: np.ndarray
    standard_errors: np.ndarray
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    R: int

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "sample_mean": self.sample_mean.tolist(),
            "sample_cov": self.sample_cov.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "skewness": self.skewness.tolist(),
            "excess_kurtosis": self.excess_kurtosis.tolist(),
        }


def summarize(X) -> MomentSummary:
    return MomentAccumulator.from_samples(X).summary()


def jackknife_se(x, statistic=np.mean) -> float:
    """Leave-one-out jackknife standard error of ``statistic`` over a 1-d sample."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if statistic is np.mean:
        loo = (x.sum() - x) / (n - 1)
    else:
        loo = np.array([statistic(np.delete(x, i)) for i in range(n)])
    return float(np.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum()))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float


def ks_2samp(x, y) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test: exact sup distance, asymptotic (Smirnov) p-value.

    Ties are handled by evaluating both empirical CDFs at every pooled value
    with right-continuous counts.
    """
    x = np.sort(np.asarray(x, dtype=float).reshape(-1))
    y = np.sort(np.asarray(y, dtype=float).reshape(-1))
    n, m = x.size, y.size
    if n == 0 or m == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([x, y])
    fx = np.searchsorted(x, pooled, side="right") / n
    fy = np.searchsorted(y, pooled, side="right") / m
    D = float(np.abs(fx - fy).max())
    en = n * m / (n + m)
    p = float(np.clip(_sps.kstwobign.sf(np.sqrt(en) * D), 0.0, 1.0))
    return KSResult(D, p)
