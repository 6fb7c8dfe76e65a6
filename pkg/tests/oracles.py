"""Reference computations that share no code with the package."""

import numpy as np
from scipy import integrate, special, stats


def stratified_increment_density(d, mu, tau, alpha, beta, n=1_000_000, seed=0):
    """Monte Carlo estimate of the density of delta * w at each point of ``d``.

    Conditional on w, delta * w is N(mu w, (tau w)^2), so the density is the
    average of that conditional density over w ~ Gamma(alpha, rate beta).
    Stratifying the uniforms that drive the gamma quantile keeps the
    estimator's noise far below the tolerances used in the tests.
    """
    rng = np.random.default_rng(seed)
    u = (np.arange(n) + rng.random(n)) / n
    w = special.gammaincinv(alpha, u) / beta
    d = np.atleast_1d(np.asarray(d, dtype=float))
    out = np.empty(len(d))
    for i, di in enumerate(d):
        out[i] = np.mean(stats.norm.pdf(di, loc=mu * w, scale=tau * w))
    return out


def increment_density_at_zero(mu, tau, alpha, beta):
    """Exact density of delta * w at 0 for alpha > 1.

    p(0) = N(0; mu, tau) * E[1/w] and E[1/w] = beta / (alpha - 1).
    """
    return stats.norm.pdf(0.0, mu, tau) * beta / (alpha - 1.0)


def basis_cross_integral_gl(j, k, x, order=64):
    """int_0^x phi_j phi_k ds by Gauss-Legendre with ``order`` nodes."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = 0.5 * (nodes[None, :] + 1.0) * x[:, None]

    def phi(m, t):
        return np.ones_like(t) if m == 0 else np.sqrt(2.0) * np.cos(np.pi * m * t)

    return 0.5 * x * np.sum(weights[None, :] * phi(j, s) * phi(k, s), axis=1)


def basis_cross_integral_trapezoid(j, k, x, nodes=10_001):
    out = []
    for xi in np.atleast_1d(x):
        s = np.linspace(0.0, xi, nodes)
        a = np.ones_like(s) if j == 0 else np.sqrt(2.0) * np.cos(np.pi * j * s)
        b = np.ones_like(s) if k == 0 else np.sqrt(2.0) * np.cos(np.pi * k * s)
        out.append(integrate.trapezoid(a * b, s))
    return np.array(out)


def conjugate_normal_mean_loo(y, sigma, prior_sd):
    """Exact LOO log predictive densities for y_i ~ N(m, sigma^2), m ~ N(0, prior_sd^2)."""
    y = np.asarray(y, dtype=float)
    out = np.empty(len(y))
    for i in range(len(y)):
        rest = np.delete(y, i)
        prec = 1.0 / prior_sd**2 + len(rest) / sigma**2
        mean = rest.sum() / sigma**2 / prec
        out[i] = stats.norm.logpdf(y[i], mean, np.sqrt(sigma**2 + 1.0 / prec))
    return out
