"""Deterministic mathematics of the supercritical SBM giant component.

Operators ``T_K f = KMf`` and ``Phi_K f = 1 - exp(-KMf)``, the survival
fixed point ``rho``, the Perron-Frobenius eigenpair of ``KM``, the map
``phi(t) = -t + KM(1 - exp(-t))`` with its Jacobian, and the Gaussian limit
law of the rescaled giant-component tally vector.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    IrreducibilityError,
    ModelError,
    NearCriticalWarning,
    SingularMatrixError,
    SubcriticalError,
)

CRITICAL_WINDOW = 1e-10
DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000


class Frame(str, enum.Enum):
    """Which linear image of the giant tally the CLT statistic describes.

    K_WEIGHTED is ``sqrt(n)(n^-1 K C_n(1) - KM rho)``; RAW is
    ``sqrt(n)(n^-1 C_n(1) - M rho)``.
    """

    K_WEIGHTED = "K_WEIGHTED"
    RAW = "RAW"


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.array(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ModelError(f"{name} has non-finite entries")
    return a


def is_irreducible(A: np.ndarray) -> bool:
    """True if the support digraph of ``A`` is strongly connected."""
    A = np.asarray(A)
    d = A.shape[0]
    adj = A != 0
    reach = np.eye(d, dtype=bool)
    # Boolean closure by repeated squaring of (I + adj).
    step = reach | adj
    for _ in range(max(1, math.ceil(math.log2(max(d, 2))))):
        step = (step.astype(np.int64) @ step.astype(np.int64)) > 0
    return bool(step.all())


@dataclass(frozen=True, eq=False)
class Kernel:
    """Symmetric connection-rate matrix ``K`` and its ``n^-1/2`` perturbation ``Lambda``."""

    K: np.ndarray
    Lambda: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        K = _as_matrix(self.K, "K")
        d = K.shape[0]
        Lam = np.zeros((d, d)) if self.Lambda is None else _as_matrix(self.Lambda, "Lambda")
        if Lam.shape != K.shape:
            raise DimensionError(f"Lambda shape {Lam.shape} does not match K shape {K.shape}")
        scale = max(1.0, float(np.abs(K).max()))
        if not np.allclose(K, K.T, rtol=0.0, atol=1e-12 * scale):
            raise ModelError("K is not symmetric")
        if not np.allclose(Lam, Lam.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(Lam).max()))):
            raise ModelError("Lambda is not symmetric")
        if np.any(K < 0):
            raise ModelError("K has negative entries")
        if np.any(np.diag(K) <= 0):
            raise ModelError("K must have strictly positive diagonal entries")
        if not is_irreducible(K):
            raise IrreducibilityError("K is not irreducible")
        K = (K + K.T) / 2
        Lam = (Lam + Lam.T) / 2
        K.setflags(write=False)
        Lam.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Lambda", Lam)

    @property
    def d(self) -> int:
        return self.K.shape[0]

    def __repr__(self):
        return f"Kernel(K={self.K.tolist()}, Lambda={self.Lambda.tolist()})"


@dataclass(frozen=True, eq=False)
class TypeProfile:
    """Type proportions ``mu``, second-order corrections ``beta`` and optionally a size ``n``.

    Block sizes are ``round(mu_j n + beta_j sqrt(n))`` (half rounds up),
    clamped to at least one. Downstream code uses the realised total
    ``N = sum(block_sizes)`` as the graph size.
    """

    mu: np.ndarray
    beta: np.ndarray = None  # type: ignore[assignment]
    n: int | None = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        d = mu.size
        if d == 0:
            raise DimensionError("mu must be non-empty")
        beta = np.zeros(d) if self.beta is None else np.array(self.beta, dtype=float).reshape(-1)
        if beta.size != d:
            raise DimensionError(f"beta has length {beta.size}, expected {d}")
        if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(beta)):
            raise ModelError("mu and beta must be finite")
        if np.any(mu <= 0):
            raise ModelError("mu must have strictly positive entries")
        if abs(mu.sum() - 1.0) > 1e-12:
            raise ModelError(f"mu must sum to 1 (sum is {mu.sum()!r})")
        if self.n is not None and int(self.n) < 1:
            raise ModelError("n must be a positive integer")
        mu.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "beta", beta)
        if self.n is not None:
            object.__setattr__(self, "n", int(self.n))

    @property
    def d(self) -> int:
        return self.mu.size

    def with_n(self, n: int) -> TypeProfile:
        return TypeProfile(self.mu, self.beta, int(n))

    @property
    def block_sizes(self) -> np.ndarray:
        if self.n is None:
            raise ModelError("profile has no size n; use with_n()")
        raw = self.mu * self.n + self.beta * math.sqrt(self.n)
        sizes = np.floor(raw + 0.5).astype(np.int64)
        return np.maximum(sizes, 1)

    @property
    def N(self) -> int:
        return int(self.block_sizes.sum())

    def __repr__(self):
        return f"TypeProfile(mu={self.mu.tolist()}, beta={self.beta.tolist()}, n={self.n})"


@dataclass(frozen=True)
class RhoSolution:
    rho: np.ndarray
    iterations: int
    residual: float
    supercritical: bool
    lambda1: float


@dataclass(frozen=True)
class LimitLaw:
    mean: np.ndarray
    covariance: np.ndarray
    J: np.ndarray
    D: np.ndarray
    frame: Frame
    rho: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]


def _check(kernel: Kernel, profile: TypeProfile, f=None) -> np.ndarray | None:
    if kernel.d != profile.d:
        raise DimensionError(f"kernel has d={kernel.d} but profile has d={profile.d}")
    if f is None:
        return None
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size != kernel.d:
        raise DimensionError(f"vector has length {f.size}, expected {kernel.d}")
    return f


def km(kernel: Kernel, profile: TypeProfile) -> np.ndarray:
    """The matrix ``K diag(mu)``."""
    _check(kernel, profile)
    return kernel.K * profile.mu[None, :]


def apply_TK(kernel: Kernel, profile: TypeProfile, f) -> np.ndarray:
    f = _check(kernel, profile, f)
    if not np.all(np.isfinite(f)):
        raise DomainError("f must be finite")
    return km(kernel, profile) @ f


def apply_PhiK(kernel: Kernel, profile: TypeProfile, f) -> np.ndarray:
    f = _check(kernel, profile, f)
    if np.any(f < 0):
        raise DomainError("Phi_K is only defined for nonnegative f")
    return -np.expm1(-apply_TK(kernel, profile, f))


def perron(A, mu=None, *, max_iter: int = 100_000) -> tuple[float, np.ndarray]:
    """Perron-Frobenius eigenpair of a nonnegative irreducible matrix.

    Power iteration on ``A + I`` (primitive whenever ``A`` is irreducible,
    same eigenvector) from the all-ones vector, stopped once the residual
    ``||A a - lambda a||_inf`` with Rayleigh-quotient ``lambda`` is below
    ``1e-12 ||A||_inf``. The eigenvector is scaled so that
    ``sum_i a_i mu_i == 1``; ``mu`` defaults to uniform weights ``1/d``.
    """
    A = _as_matrix(A, "A")
    d = A.shape[0]
    if np.any(A < 0):
        raise DomainError("perron requires a nonnegative matrix")
    if not is_irreducible(A):
        raise IrreducibilityError("matrix is reducible")
    w = np.full(d, 1.0 / d) if mu is None else np.asarray(mu, dtype=float).reshape(-1)
    if w.size != d:
        raise DimensionError(f"weights have length {w.size}, expected {d}")

    norm_A = float(np.abs(A).sum(axis=1).max())
    target = 1e-12 * norm_A
    B = A + np.eye(d)
    x = np.ones(d)
    for _ in range(max_iter):
        Ax = A @ x
        lam = float(x @ Ax) / float(x @ x)
        # residual of the returned vector x / (w @ x), not of x itself
        if np.abs(Ax - lam * x).max() <= target * abs(float(w @ x)):
            break
        y = B @ x
        x = y / np.abs(y).max()
    else:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")
    return lam, x / float(w @ x)


def phi_iterates(kernel: Kernel, profile: TypeProfile, f0=None) -> Iterator[np.ndarray]:
    """Yield ``f, Phi_K(f), Phi_K^2(f), ...`` starting from ``f0`` (default all-ones)."""
    M = km(kernel, profile)
    f = np.ones(kernel.d) if f0 is None else np.asarray(f0, dtype=float).copy()
    while True:
        yield f
        f = -np.expm1(-(M @ f))


def solve_rho(
    kernel: Kernel,
    profile: TypeProfile,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RhoSolution:
    """Largest fixed point of ``Phi_K`` by monotone iteration from all-ones.

    The iteration stops once the sup-norm step is below ``tol * (1 - r)``,
    where ``r`` is the observed contraction ratio of successive steps, so
    that the distance to the fixed point (not merely the step) is below
    ``tol``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    M = km(kernel, profile)
    lam1, _ = perron(M, profile.mu)
    d = kernel.d
    if abs(lam1 - 1.0) <= CRITICAL_WINDOW:
        warnings.warn(
            f"Perron eigenvalue {lam1!r} is within {CRITICAL_WINDOW} of 1", NearCriticalWarning, stacklevel=2
        )
        return RhoSolution(np.zeros(d), 0, 0.0, False, lam1)
    if lam1 < 1.0:
        return RhoSolution(np.zeros(d), 0, 0.0, False, lam1)

    f = np.ones(d)
    prev_step = math.inf
    for it in range(1, max_iter + 1):
        g = -np.expm1(-(M @ f))
        step = float(np.abs(g - f).max())
        f = g
        ratio = min(step / prev_step, 0.999999) if prev_step > 0 else 0.0
        if step == 0.0 or step <= tol * (1.0 - ratio):
            break
        prev_step = step
    else:
        raise ConvergenceError(f"rho iteration did not converge in {max_iter} iterations (lambda1={lam1:.6g})")
    residual = float(np.abs(-np.expm1(-(M @ f)) - f).max())
    return RhoSolution(f, it, residual, True, lam1)


def _supercritical_rho(kernel: Kernel, profile: TypeProfile, tol: float = DEFAULT_TOL) -> RhoSolution:
    sol = solve_rho(kernel, profile, tol)
    if not sol.supercritical:
        raise SubcriticalError(sol.lambda1)
    return sol


def phi_eval(kernel: Kernel, profile: TypeProfile, t) -> np.ndarray:
    t = _check(kernel, profile, t)
    if np.any(t < 0):
        raise DomainError("phi is evaluated on the nonnegative orthant")
    return -t + km(kernel, profile) @ (-np.expm1(-t))


def phi_jacobian(kernel: Kernel, profile: TypeProfile, t) -> np.ndarray:
    """Analytic Jacobian ``-I + KM diag(exp(-t))`` of ``phi``."""
    t = _check(kernel, profile, t)
    return km(kernel, profile) * np.exp(-t)[None, :] - np.eye(kernel.d)


def t_zero(kernel: Kernel, profile: TypeProfile, tol: float = DEFAULT_TOL) -> np.ndarray:
    """The nonzero root ``KM rho`` of ``phi``."""
    sol = _supercritical_rho(kernel, profile, tol)
    return km(kernel, profile) @ sol.rho


def min_phi_level_point(kernel: Kernel, profile: TypeProfile, y: float, direction=None, max_iter: int = 1_000_000):
    """Coordinatewise-minimal ``t >= 0`` with ``phi(t) = -y * direction``.

    ``direction`` defaults to the Perron vector ``a`` of ``KM``. The system
    ``t = y a + KM(1 - exp(-t))`` has a monotone right side, so iterating
    from ``t = y a`` climbs to its least solution. As ``y`` decreases to 0
    the result approaches ``t_zero``.
    """
    if y <= 0:
        raise DomainError("y must be positive")
    M = km(kernel, profile)
    if direction is None:
        _, direction = perron(M, profile.mu)
    a = np.asarray(direction, dtype=float)
    t = y * a
    for _ in range(max_iter):
        nxt = y * a + M @ (-np.expm1(-t))
        if np.abs(nxt - t).max() <= 1e-15 * max(1.0, float(np.abs(nxt).max())):
            return nxt
        t = nxt
    raise ConvergenceError("level-set iteration did not converge")


def jacobian_J(kernel: Kernel, profile: TypeProfile, rho) -> np.ndarray:
    """``J = KM(I - diag(rho)) - I``."""
    rho = _check(kernel, profile, rho)
    J = km(kernel, profile) * (1.0 - rho)[None, :] - np.eye(kernel.d)
    if abs(np.linalg.det(J)) < 1e-14:
        raise SingularMatrixError("J is singular; the model is (numerically) critical")
    return J


def limit_law(
    kernel: Kernel,
    profile: TypeProfile,
    frame: Frame | str = Frame.K_WEIGHTED,
    tol: float = DEFAULT_TOL,
) -> LimitLaw:
    """Mean and covariance of the Gaussian limit of the rescaled giant tally.

    In the K_WEIGHTED frame the limit of ``sqrt(n)(n^-1 K C_n(1) - KM rho)``
    is ``J^-1 K zeta - J^-1 (KB + Lambda M) rho - Lambda M rho`` with
    independent centred ``zeta_j`` of variance ``mu_j rho_j (1 - rho_j)``.
    The RAW frame is the image of that law under ``K^-1``.
    """
    frame = Frame(frame)
    sol = _supercritical_rho(kernel, profile, tol)
    rho = sol.rho
    K, Lam, mu, beta = kernel.K, kernel.Lambda, profile.mu, profile.beta
    J = jacobian_J(kernel, profile, rho)
    D = np.diag(mu * rho * (1.0 - rho))

    shift = K @ (beta * rho) + Lam @ (mu * rho)
    mean = -np.linalg.solve(J, shift) - Lam @ (mu * rho)
    G = np.linalg.solve(J, K)
    if frame is Frame.RAW:
        if abs(np.linalg.det(K)) < 1e-14 * max(1.0, float(np.abs(K).max())) ** kernel.d:
            raise SingularMatrixError("RAW frame needs an invertible K")
        mean = np.linalg.solve(K, mean)
        G = np.linalg.solve(K, G)
    cov = G @ D @ G.T
    cov = (cov + cov.T) / 2
    return LimitLaw(mean=mean, covariance=cov, J=J, D=D, frame=frame, rho=rho)


def er_kernel(c: float, lam: float = 0.0) -> tuple[Kernel, TypeProfile]:
    """Single-type model ``K=[[c]]``, ``Lambda=[[lam]]``, ``mu=[1]``."""
    return Kernel([[c]], [[lam]]), TypeProfile([1.0])


def stepanov_sigma2(c: float, tol: float = DEFAULT_TOL) -> float:
    """Limit variance ``rho(1-rho)/(1-c(1-rho))^2`` of the Erdos-Renyi giant."""
    if c <= 1:
        raise SubcriticalError(c)
    kernel, profile = er_kernel(c)
    rho = float(_supercritical_rho(kernel, profile, tol).rho[0])
    return rho * (1 - rho) / (1 - c * (1 - rho)) ** 2


@dataclass(frozen=True)
class D1Check:
    c: float
    lam: float
    variance_residual: float
    mean_residual: float
    tolerance: float = 1e-12

    @property
    def ok(self) -> bool:
        return self.variance_residual < self.tolerance and self.mean_residual < self.tolerance


def reduce_d1_check(c: float, lam: float = 0.0) -> D1Check:
    """Compare the d-type limit law at ``d=1`` against the scalar Erdos-Renyi formulas."""
    if c <= 1:
        raise SubcriticalError(c)
    kernel, profile = er_kernel(c, lam)
    law = limit_law(kernel, profile, Frame.RAW)
    rho = float(law.rho[0])
    q = 1 - c * (1 - rho)
    var_res = abs(float(law.covariance[0, 0]) - stepanov_sigma2(c))
    mean_res = abs(float(law.mean[0]) - lam * rho * (1 - rho) / q)
    return D1Check(c, lam, var_res, mean_res)
