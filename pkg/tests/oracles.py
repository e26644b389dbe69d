"""Reference computations written independently of the package, in mpmath.

They share no code with ``sbmclt``: roots come from bisection or Newton
(mpmath.findroot) instead of monotone iteration, the limit mean from a
finite difference of the law-of-large-numbers vector under perturbed
parameters, and the limit covariance from perturbing the root of
``t -> -t + KM(1 - exp(-t))``.
"""

from __future__ import annotations

import mpmath as mp

DPS = 50


def _mat(A):
    return mp.matrix([[mp.mpf(x) for x in row] for row in A])


def _vec(v):
    return mp.matrix([mp.mpf(x) for x in v])


def _column(x, d):
    # findroot returns a scalar for one unknown and a column matrix otherwise
    if isinstance(x, mp.matrix):
        return mp.matrix([x[i] for i in range(d)])
    return mp.matrix([x])


def rho_bisection(c, iterations=400):
    """Positive root of ``1 - exp(-c r) = r`` for ``c > 1`` by bisection."""
    with mp.workdps(DPS):
        c = mp.mpf(c)
        g = lambda r: -mp.expm1(-c * r) - r
        lo, hi = mp.mpf("1e-40"), mp.mpf(1)
        assert g(lo) > 0 and g(hi) < 0
        for _ in range(iterations):
            mid = (lo + hi) / 2
            if g(mid) > 0:
                lo = mid
            else:
                hi = mid
        return float((lo + hi) / 2)


def _rho_mp(K, mu):
    d = len(mu)
    KM = _mat(K) * mp.diag(_vec(mu))

    def F(*r):
        r = mp.matrix(r)
        s = KM * r
        return [r[i] - (1 - mp.exp(-s[i])) for i in range(d)]

    r = _column(mp.findroot(F, [mp.mpf(1)] * d), d)
    assert all(r[i] > mp.mpf("1e-20") for i in range(d)), "Newton converged to the trivial root"
    return r


def rho_newton(K, mu):
    """Strictly positive fixed point of ``r = 1 - exp(-KMr)`` by Newton's method from all-ones."""
    with mp.workdps(DPS):
        r = _rho_mp(K, mu)
        return [float(x) for x in r]


def sigma2_er(c):
    rho = mp.mpf(rho_bisection(c))
    with mp.workdps(DPS):
        # refine to working precision; bisection already gives ~1e-17
        rho = mp.findroot(lambda r: -mp.expm1(-mp.mpf(c) * r) - r, rho)
        return float(rho * (1 - rho) / (1 - c * (1 - rho)) ** 2)


def lln_vector(K, Lam, mu, beta, eps):
    """``M_eps rho_eps`` for kernel ``K + eps Lam`` and type shares ``mu + eps beta``."""
    d = len(mu)
    Ke = _mat(K) + eps * _mat(Lam)
    mue = _vec(mu) + eps * _vec(beta)
    r = _rho_mp(Ke.tolist(), list(mue))
    return mp.matrix([mue[i] * r[i] for i in range(d)])


def limit_mean(K, Lam, mu, beta, weighted=True):
    """Derivative at 0 of ``eps -> M_eps rho_eps`` (left-multiplied by K when ``weighted``)."""
    with mp.workdps(DPS):
        h = mp.mpf("1e-20")
        g = (lln_vector(K, Lam, mu, beta, h) - lln_vector(K, Lam, mu, beta, -h)) / (2 * h)
        if weighted:
            g = _mat(K) * g
        return [float(x) for x in g]


def limit_cov(K, mu, weighted=True):
    """Covariance from the linear response of the root ``t0`` of ``phi`` to ``phi = eps K e_j``.

    ``cov = sum_j mu_j rho_j (1 - rho_j) g_j g_j^T`` with ``g_j = dt/deps``.
    """
    with mp.workdps(DPS):
        d = len(mu)
        Km = _mat(K)
        KM = Km * mp.diag(_vec(mu))
        rho = _rho_mp(K, mu)
        t0 = KM * rho

        def root(rhs):
            def F(*t):
                t = mp.matrix(t)
                s = KM * mp.matrix([1 - mp.exp(-t[i]) for i in range(d)])
                return [-t[i] + s[i] - rhs[i] for i in range(d)]

            return _column(mp.findroot(F, list(t0)), d)

        h = mp.mpf("1e-20")
        cov = mp.zeros(d, d)
        for j in range(d):
            e = Km * mp.matrix([1 if k == j else 0 for k in range(d)])
            g = (root(h * e) - root(-h * e)) / (2 * h)
            if not weighted:
                g = mp.lu_solve(Km, g)
            w = mu[j] * rho[j] * (1 - rho[j])
            cov += w * (g * g.T)
        return [[float(cov[i, k]) for k in range(d)] for i in range(d)]
