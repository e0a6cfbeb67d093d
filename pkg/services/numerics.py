# services/numerics.py
"""
Special functions, Gauss-Legendre quadrature, bracketing root finder and a
multistart Nelder-Mead minimizer working in transformed unconstrained
coordinates. Every function is pure and safe to call from several threads.
"""
import logging
from functools import lru_cache

import numpy as np
from scipy import optimize, special

import config
from exceptions import DomainError, OptimizationError, RootBracketingError
from models import OptimizerReport, QuadratureRule

logger = logging.getLogger(__name__)


# ===== Special functions =====

def std_normal_cdf(x):
    """Standard normal CDF (saturates to 0/1 in the far tails)"""
    return special.ndtr(x)


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / np.sqrt(2.0 * np.pi)


def std_normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise DomainError("std_normal_quantile requires 0 < p < 1")
    z = special.ndtri(p)
    return z if z.ndim else float(z)


def regularized_incomplete_beta(x, a, b):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)):
        raise DomainError("regularized_incomplete_beta requires 0 <= x <= 1")
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise DomainError("regularized_incomplete_beta requires a > 0 and b > 0")
    return special.betainc(a, b, x)


def student_t_cdf(x, nu):
    """Student t CDF through I_{nu/(nu+x^2)}(nu/2, 1/2)"""
    if np.any(np.asarray(nu) <= 0):
        raise DomainError("student_t_cdf requires nu > 0")
    x = np.asarray(x, dtype=float)
    tail = 0.5 * special.betainc(0.5 * nu, 0.5, nu / (nu + np.square(x)))
    return np.where(x >= 0.0, 1.0 - tail, tail)


def student_t_quantile(p, nu):
    return special.stdtrit(nu, p)


# ===== Quadrature =====

@lru_cache(maxsize=64)
def gauss_legendre(order):
    if order < 1:
        raise DomainError("gauss_legendre requires order >= 1")
    nodes, weights = np.polynomial.legendre.leggauss(int(order))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=int(order))


def bivariate_normal_cdf(x, y, rho, order=None):
    """
    Phi_2(x, y; rho) = Phi(x)Phi(y) + (1/2pi) int_0^{asin rho}
    exp(-(x^2 - 2xy sin t + y^2) / (2 cos^2 t)) dt, Gauss-Legendre in t.
    """
    if np.ndim(rho) != 0:
        raise DomainError("bivariate_normal_cdf takes a scalar rho")
    rho = float(rho)
    if abs(rho) >= 1.0:
        raise DomainError("bivariate_normal_cdf requires |rho| < 1")
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    result = special.ndtr(x) * special.ndtr(y)
    if rho != 0.0:
        finite = np.isfinite(x) & np.isfinite(y)
        xf, yf = x[finite, None], y[finite, None]
        theta_max = np.arcsin(rho)
        t, w = gauss_legendre(order or config.BVN_ORDER).scaled(0.0, theta_max)
        sin_t, cos2_t = np.sin(t), np.cos(t) ** 2
        integrand = np.exp(-(xf ** 2 - 2.0 * xf * yf * sin_t + yf ** 2) / (2.0 * cos2_t))
        result[finite] += integrand @ w / (2.0 * np.pi)
    result = np.clip(result, 0.0, 1.0).reshape(shape)
    return result if result.ndim else float(result)


# ===== Root finding =====

def find_root(f, lo, hi, tolerance=None):
    """Brent's method on [lo, hi]; non-finite end values are nudged inward"""
    tolerance = tolerance or config.ROOT_TOLERANCE
    width = hi - lo
    f_lo, f_hi = f(lo), f(hi)
    if not np.isfinite(f_lo):
        lo = lo + 1e-12 * width
        f_lo = f(lo)
    if not np.isfinite(f_hi):
        hi = hi - 1e-12 * width
        f_hi = f(hi)
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or np.sign(f_lo) == np.sign(f_hi):
        raise RootBracketingError(f"No sign change on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")
    return float(optimize.brentq(f, lo, hi, xtol=min(tolerance, 1e-12), rtol=4 * np.finfo(float).eps,
                                 maxiter=500))


# ===== Bounded minimization =====

class ParameterTransform:
    """Maps box-constrained parameters to R^d and back"""

    def __init__(self, bounds):
        self.bounds = [(float(lo), float(hi)) for lo, hi in bounds]

    def to_free(self, theta):
        free = []
        for t, (lo, hi) in zip(theta, self.bounds):
            if np.isfinite(lo) and np.isfinite(hi):
                r = np.clip((t - lo) / (hi - lo), 1e-12, 1 - 1e-12)
                free.append(np.log(r / (1.0 - r)))
            elif np.isfinite(lo):
                free.append(np.log(max(t - lo, 1e-300)))
            elif np.isfinite(hi):
                free.append(np.log(max(hi - t, 1e-300)))
            else:
                free.append(t)
        return np.array(free, dtype=float)

    def to_bounded(self, free):
        theta = []
        for s, (lo, hi) in zip(free, self.bounds):
            if np.isfinite(lo) and np.isfinite(hi):
                theta.append(lo + (hi - lo) * special.expit(s))
            elif np.isfinite(lo):
                theta.append(lo + np.exp(min(s, 700.0)))
            elif np.isfinite(hi):
                theta.append(hi - np.exp(min(s, 700.0)))
            else:
                theta.append(s)
        return np.array(theta, dtype=float)


def _start_points(x0, transform, multistart):
    """Deterministic multistart points in the free coordinates"""
    base = transform.to_free(x0)
    rng = np.random.Generator(np.random.Philox(key=12345))
    starts = [base]
    for _ in range(max(multistart, 1) - 1):
        starts.append(base + rng.normal(scale=1.0, size=base.size))
    return starts


def minimize(objective, bounds, x0=None, multistart=None, tolerance=None, max_evaluations=20000):
    """
    Minimize `objective(theta)` over the box `bounds` with restarted Nelder-Mead
    simplex descent in transformed coordinates. Returns an OptimizerReport
    holding the best result over all starts.
    """
    multistart = multistart or config.MULTISTART
    tolerance = tolerance or config.OPTIMIZER_TOLERANCE
    transform = ParameterTransform(bounds)
    if x0 is None:
        x0 = [_default_start(lo, hi) for lo, hi in transform.bounds]
    evaluations = 0

    def free_objective(s):
        nonlocal evaluations
        evaluations += 1
        value = objective(transform.to_bounded(s))
        return float(value) if np.isfinite(value) else np.inf

    best_s, best_value, converged, restarts = None, np.inf, False, 0
    start_values = []
    for s0 in _start_points(np.asarray(x0, dtype=float), transform, multistart):
        value0 = free_objective(s0)
        start_values.append(value0)
        if not np.isfinite(value0):
            logger.warning(f"Skipping multistart point with non-finite objective at {transform.to_bounded(s0)}")
            continue
        restarts += 1
        s, value, ok = s0, value0, False
        # Restart from the previous optimum until the simplex stops improving
        for _ in range(4):
            result = optimize.minimize(free_objective, s, method='Nelder-Mead',
                                       options={'xatol': tolerance, 'fatol': tolerance * 1e-2,
                                                'maxfev': max_evaluations, 'adaptive': s.size > 2})
            improved = value - result.fun
            if result.fun <= value:
                s, value = result.x, result.fun
            ok = bool(result.success)
            if improved <= tolerance:
                break
        logger.debug(f"Start {restarts}: value={value:.12g} at {transform.to_bounded(s)}")
        if value < best_value:
            best_s, best_value, converged = s, value, ok

    if best_s is None:
        report = OptimizerReport(np.asarray(x0, dtype=float), np.inf, evaluations, False, 0, tuple(start_values))
        raise OptimizationError("All multistart points produced a non-finite objective", report)

    return OptimizerReport(
        argmin=transform.to_bounded(best_s),
        value=float(best_value),
        evaluations=evaluations,
        converged=converged,
        restarts=restarts,
        start_values=tuple(start_values),
    )


def _default_start(lo, hi):
    if np.isfinite(lo) and np.isfinite(hi):
        return 0.5 * (lo + hi)
    if np.isfinite(lo):
        return lo + 1.0
    if np.isfinite(hi):
        return hi - 1.0
    return 0.0
