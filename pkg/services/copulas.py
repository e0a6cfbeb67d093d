# services/copulas.py
"""
Parametric bivariate copula families with CDF C(u, v; theta) and the
h-functions C_{1|2}(u|v) = dC/dv and C_{2|1}(v|u) = dC/du.

Conventions follow Joe (2014, Dependence Modeling with Copulas, ch. 4).
Every family is evaluated elementwise on broadcast numpy arrays.
"""
import logging

import numpy as np
from scipy import special

from exceptions import DomainError, ParameterDomainError
from models import CopulaFamily, CopulaSpec
from services.numerics import bivariate_normal_cdf, gauss_legendre, student_t_cdf, student_t_quantile

logger = logging.getLogger(__name__)

_EPS = 1e-15
_FD_STEP = 1e-6
INF = np.inf


def _log_sum_minus_one(la, lb):
    """log(exp(la) + exp(lb) - 1) for la, lb >= 0"""
    total = np.logaddexp(la, lb)
    return total + np.log1p(-np.exp(-total))


class BivariateFamily:
    """Base class: subclasses define _cdf and _h12 (dC/dv) on the open square"""
    tag = ''
    n_params = 0
    # (lo, hi, lo_closed, hi_closed) per parameter
    domain = ()
    search_bounds = ()
    start = ()
    exchangeable = True

    def check(self, theta):
        if len(theta) != self.n_params:
            raise ParameterDomainError(f"{self.tag}: {self.n_params} parameter(s) expected, got {len(theta)}")
        for i, (t, (lo, hi, lo_closed, hi_closed)) in enumerate(zip(theta, self.domain)):
            below = t < lo if lo_closed else t <= lo
            above = t > hi if hi_closed else t >= hi
            if not np.isfinite(t) or below or above:
                lb = '[' if lo_closed else '('
                rb = ']' if hi_closed else ')'
                raise ParameterDomainError(f"{self.tag}: parameter {i + 1} = {t} outside {lb}{lo}, {hi}{rb}")

    def _cdf(self, theta, u, v):
        raise NotImplementedError

    def _h12(self, theta, u, v):
        raise NotImplementedError

    def _h21(self, theta, u, v):
        # dC/du; exchangeable families reuse dC/dv with the arguments swapped
        return self._h12(theta, v, u)


class Independence(BivariateFamily):
    tag = 'independence'

    def _cdf(self, theta, u, v):
        return u * v

    def _h12(self, theta, u, v):
        return u * np.ones_like(v)


class Gaussian(BivariateFamily):
    tag = 'gaussian'
    n_params = 1
    domain = ((-1.0, 1.0, False, False),)
    search_bounds = ((-1.0, 1.0),)
    start = (0.5,)

    def _cdf(self, theta, u, v):
        return bivariate_normal_cdf(special.ndtri(u), special.ndtri(v), theta[0])

    def _h12(self, theta, u, v):
        rho = theta[0]
        return special.ndtr((special.ndtri(u) - rho * special.ndtri(v)) / np.sqrt(1.0 - rho * rho))


class StudentT(BivariateFamily):
    tag = 't'
    n_params = 2
    domain = ((-1.0, 1.0, False, False), (1.0, 50.0, False, True))
    search_bounds = ((-1.0, 1.0), (1.0, 50.0))
    start = (0.5, 10.0)

    def _h12(self, theta, u, v):
        rho, nu = theta
        x = student_t_quantile(u, nu)
        y = student_t_quantile(v, nu)
        scale = np.sqrt((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0))
        return student_t_cdf((x - rho * y) / scale, nu + 1.0)

    def _cdf(self, theta, u, v):
        """C(u, v) = int_0^v C_{1|2}(u|w) dw, split where the h-function turns over"""
        rho, nu = theta
        u, v = np.broadcast_arrays(u, v)
        shape = u.shape
        u, v = u.ravel(), v.ravel()
        rule = gauss_legendre(64)
        if rho > 0:
            w_turn = student_t_cdf(student_t_quantile(u, nu) / rho, nu)
        else:
            w_turn = np.full_like(v, 0.5)
        split = np.clip(w_turn, 0.0, v)
        out = np.zeros_like(v)
        # lower piece in r with w = split * r^4, which smooths the w -> 0 tail
        r, wr = rule.scaled(0.0, 1.0)
        w_low = split[:, None] * r ** 4
        jac = 4.0 * split[:, None] * r ** 3
        out += np.sum(wr * jac * self._h12(theta, u[:, None], np.clip(w_low, _EPS, 1 - _EPS)), axis=1)
        # upper piece on [split, v]
        half = 0.5 * (v - split)
        w_up = split[:, None] + half[:, None] * (rule.nodes + 1.0)
        out += half * np.sum(rule.weights * self._h12(theta, u[:, None], np.clip(w_up, _EPS, 1 - _EPS)), axis=1)
        return out.reshape(shape)


class Frank(BivariateFamily):
    tag = 'frank'
    n_params = 1
    domain = ((-INF, INF, False, False),)
    search_bounds = ((-60.0, 60.0),)
    start = (3.0,)

    def check(self, theta):
        super().check(theta)
        if theta[0] == 0.0:
            raise ParameterDomainError("frank: parameter must be nonzero")

    def _cdf(self, theta, u, v):
        t = theta[0]
        if abs(t) < 1e-10:
            return u * v
        return -np.log1p(np.expm1(-t * u) * np.expm1(-t * v) / np.expm1(-t)) / t

    def _h12(self, theta, u, v):
        t = theta[0]
        if abs(t) < 1e-10:
            return u * np.ones_like(v)
        if t > 0:
            num = -np.expm1(t * u)
            den = np.exp(t * (u + v - 1.0)) - np.exp(t * v) - np.exp(t * u) + 1.0
            return num / den
        num = np.exp(-t * v) * np.expm1(-t * u)
        den = np.expm1(-t) + np.expm1(-t * u) * np.expm1(-t * v)
        return num / den


class Plackett(BivariateFamily):
    tag = 'plackett'
    n_params = 1
    domain = ((0.0, INF, False, False),)
    search_bounds = ((0.0, INF),)
    start = (3.0,)

    def _parts(self, eta, u, v):
        s = 1.0 + (eta - 1.0) * (u + v)
        r = np.sqrt(np.maximum(s * s - 4.0 * eta * (eta - 1.0) * u * v, 0.0))
        return s, r

    def _cdf(self, theta, u, v):
        eta = theta[0]
        s, r = self._parts(eta, u, v)
        return 2.0 * eta * u * v / (s + r)

    def _h12(self, theta, u, v):
        eta = theta[0]
        s, r = self._parts(eta, u, v)
        return 0.5 * (1.0 - (s - 2.0 * eta * u) / r)


class Gumbel(BivariateFamily):
    tag = 'gumbel'
    n_params = 1
    domain = ((1.0, INF, True, False),)
    search_bounds = ((1.0, INF),)
    start = (1.5,)

    def _cdf(self, theta, u, v):
        d = theta[0]
        a = (-np.log(u)) ** d + (-np.log(v)) ** d
        return np.exp(-a ** (1.0 / d))

    def _h12(self, theta, u, v):
        d = theta[0]
        x, y = -np.log(u), -np.log(v)
        a = x ** d + y ** d
        log_h = -a ** (1.0 / d) + (1.0 / d - 1.0) * np.log(a) + (d - 1.0) * np.log(y) + y
        return np.exp(log_h)


class Clayton(BivariateFamily):
    tag = 'clayton'
    n_params = 1
    domain = ((0.0, INF, False, False),)
    search_bounds = ((0.0, INF),)
    start = (1.0,)

    def _log_s(self, d, u, v):
        return _log_sum_minus_one(-d * np.log(u), -d * np.log(v))

    def _cdf(self, theta, u, v):
        d = theta[0]
        return np.exp(-self._log_s(d, u, v) / d)

    def _h12(self, theta, u, v):
        d = theta[0]
        return np.exp((-d - 1.0) * np.log(v) + (-1.0 / d - 1.0) * self._log_s(d, u, v))


class Joe(BivariateFamily):
    tag = 'joe'
    n_params = 1
    domain = ((1.0, INF, True, False),)
    search_bounds = ((1.0, INF),)
    start = (1.5,)

    def _cdf(self, theta, u, v):
        d = theta[0]
        ud, vd = (1.0 - u) ** d, (1.0 - v) ** d
        return 1.0 - (ud + vd - ud * vd) ** (1.0 / d)

    def _h12(self, theta, u, v):
        d = theta[0]
        ud, vd = (1.0 - u) ** d, (1.0 - v) ** d
        a = ud + vd - ud * vd
        return a ** (1.0 / d - 1.0) * (1.0 - v) ** (d - 1.0) * (1.0 - ud)


class BB1(BivariateFamily):
    tag = 'bb1'
    n_params = 2
    domain = ((0.0, INF, False, False), (1.0, INF, True, False))
    search_bounds = ((0.0, INF), (1.0, INF))
    start = (0.5, 1.5)

    def _log_s(self, th, d, u, v):
        lx = d * np.log(np.expm1(-th * np.log(u)))
        ly = d * np.log(np.expm1(-th * np.log(v)))
        return np.logaddexp(lx, ly)

    def _cdf(self, theta, u, v):
        th, d = theta
        return np.exp(-np.log1p(np.exp(self._log_s(th, d, u, v) / d)) / th)

    def _h12(self, theta, u, v):
        th, d = theta
        ls = self._log_s(th, d, u, v)
        log_h = ((-1.0 / th - 1.0) * np.log1p(np.exp(ls / d)) + (1.0 / d - 1.0) * ls
                 + (d - 1.0) * np.log(np.expm1(-th * np.log(v))) + (-th - 1.0) * np.log(v))
        return np.exp(log_h)


class BB7(BivariateFamily):
    tag = 'bb7'
    n_params = 2
    domain = ((1.0, INF, True, False), (0.0, INF, False, False))
    search_bounds = ((1.0, INF), (0.0, INF))
    start = (1.5, 0.5)

    def _parts(self, th, d, u, v):
        log_a = np.log(-np.expm1(th * np.log1p(-u)))
        log_b = np.log(-np.expm1(th * np.log1p(-v)))
        log_s = _log_sum_minus_one(-d * log_a, -d * log_b)
        return log_b, log_s

    def _cdf(self, theta, u, v):
        th, d = theta
        _, log_s = self._parts(th, d, u, v)
        one_minus_t = -np.expm1(-log_s / d)
        return 1.0 - one_minus_t ** (1.0 / th)

    def _h12(self, theta, u, v):
        th, d = theta
        log_b, log_s = self._parts(th, d, u, v)
        one_minus_t = -np.expm1(-log_s / d)
        log_h = ((1.0 / th - 1.0) * np.log(one_minus_t) + (-1.0 / d - 1.0) * log_s
                 + (-d - 1.0) * log_b + (th - 1.0) * np.log1p(-v))
        return np.exp(log_h)


class BB8(BivariateFamily):
    tag = 'bb8'
    n_params = 2
    domain = ((1.0, INF, True, False), (0.0, 1.0, False, True))
    search_bounds = ((1.0, INF), (0.0, 1.0))
    start = (2.0, 0.7)

    def _parts(self, th, d, u, v):
        eta = -np.expm1(th * np.log1p(-d))
        x = -np.expm1(th * np.log1p(-d * u))
        y = -np.expm1(th * np.log1p(-d * v))
        return eta, x, y, 1.0 - x * y / eta

    def _cdf(self, theta, u, v):
        th, d = theta
        _, _, _, a = self._parts(th, d, u, v)
        return -np.expm1(np.log(a) / th) / d

    def _h12(self, theta, u, v):
        th, d = theta
        eta, x, _, a = self._parts(th, d, u, v)
        return a ** (1.0 / th - 1.0) * (x / eta) * (1.0 - d * v) ** (th - 1.0)


class BB10(BivariateFamily):
    tag = 'bb10'
    n_params = 2
    domain = ((0.0, INF, False, False), (0.0, 1.0, False, True))
    search_bounds = ((0.0, INF), (0.0, 1.0))
    start = (1.0, 0.5)

    def _parts(self, th, p, u, v):
        a = -np.expm1(np.log(u) / th)
        b = -np.expm1(np.log(v) / th)
        return a, 1.0 - p * a * b

    def _cdf(self, theta, u, v):
        th, p = theta
        _, dd = self._parts(th, p, u, v)
        return u * v * dd ** (-th)

    def _h12(self, theta, u, v):
        th, p = theta
        a, dd = self._parts(th, p, u, v)
        return u * dd ** (-th - 1.0) * (1.0 - p * a)


class AsymmetricGumbel(BivariateFamily):
    """Khoudraji asymmetrization u^(1-a1) v^(1-a2) C_G(u^a1, v^a2; delta)"""
    tag = 'asym-gumbel'
    n_params = 3
    domain = ((1.0, INF, True, False), (0.0, 1.0, False, True), (0.0, 1.0, False, True))
    search_bounds = ((1.0, INF), (0.0, 1.0), (0.0, 1.0))
    start = (2.0, 0.8, 0.6)
    exchangeable = False
    _core = Gumbel()

    def _cdf(self, theta, u, v):
        d, a1, a2 = theta
        return u ** (1.0 - a1) * v ** (1.0 - a2) * self._core._cdf((d,), u ** a1, v ** a2)

    def _h12(self, theta, u, v):
        d, a1, a2 = theta
        p, q = u ** a1, v ** a2
        core = self._core._cdf((d,), p, q)
        return u ** (1.0 - a1) * ((1.0 - a2) * v ** (-a2) * core + a2 * self._core._h12((d,), p, q))

    def _h21(self, theta, u, v):
        d, a1, a2 = theta
        p, q = u ** a1, v ** a2
        core = self._core._cdf((d,), p, q)
        return v ** (1.0 - a2) * ((1.0 - a1) * u ** (-a1) * core + a1 * self._core._h12((d,), q, p))


FAMILIES = {fam.tag: fam for fam in (
    Independence(), Gaussian(), StudentT(), Frank(), Plackett(), Gumbel(), Clayton(),
    Joe(), BB1(), BB7(), BB8(), BB10(), AsymmetricGumbel(),
)}

# Radially symmetric families: the survival version is the same copula
RADIALLY_SYMMETRIC = frozenset({'independence', 'gaussian', 't', 'frank', 'plackett'})


def get_family(family):
    """Registry lookup by CopulaFamily or name"""
    if isinstance(family, str):
        family = CopulaFamily.from_name(family)
    if family.tag not in FAMILIES:
        raise ParameterDomainError(f"Unknown copula family: {family.tag!r}")
    if family.rotation not in ('none', 'survival'):
        raise ParameterDomainError(f"Unknown rotation: {family.rotation!r}")
    return FAMILIES[family.tag]


def n_params(family):
    return get_family(family).n_params


def make_spec(family, theta=()):
    """Validated CopulaSpec"""
    if isinstance(family, str):
        family = CopulaFamily.from_name(family)
    theta = tuple(float(t) for t in np.atleast_1d(theta)) if len(np.atleast_1d(theta)) else ()
    get_family(family).check(theta)
    return CopulaSpec(family, theta)


def _prepare(spec, u, v):
    fam = get_family(spec.family)
    fam.check(spec.theta)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return fam, u, v


def _base_cdf(fam, theta, u, v):
    with np.errstate(all='ignore'):
        c = fam._cdf(theta, np.clip(u, _EPS, 1 - _EPS), np.clip(v, _EPS, 1 - _EPS))
    c = np.where(np.isfinite(c), c, 0.0)
    # Frechet-Hoeffding bounds
    return np.clip(c, np.maximum(u + v - 1.0, 0.0), np.minimum(u, v))


def _base_h(fam, theta, u, v, which):
    uc, vc = np.clip(u, _EPS, 1 - _EPS), np.clip(v, _EPS, 1 - _EPS)
    with np.errstate(all='ignore'):
        h = fam._h12(theta, uc, vc) if which == 12 else fam._h21(theta, uc, vc)
    bad = ~np.isfinite(h)
    if np.any(bad):
        logger.debug(f"{fam.tag}: {int(bad.sum())} h-function value(s) fall back to finite differences")
        h = np.where(bad, _finite_difference_h(fam, theta, uc, vc, which), h)
    return np.clip(h, 0.0, 1.0)


def _finite_difference_h(fam, theta, u, v, which):
    """Central difference of the CDF in the conditioning argument"""
    with np.errstate(all='ignore'):
        if which == 12:
            lo, hi = np.clip(v - _FD_STEP, _EPS, 1 - _EPS), np.clip(v + _FD_STEP, _EPS, 1 - _EPS)
            return (fam._cdf(theta, u, hi) - fam._cdf(theta, u, lo)) / (hi - lo)
        lo, hi = np.clip(u - _FD_STEP, _EPS, 1 - _EPS), np.clip(u + _FD_STEP, _EPS, 1 - _EPS)
        return (fam._cdf(theta, hi, v) - fam._cdf(theta, lo, v)) / (hi - lo)


def _scalar(result):
    return float(result) if np.ndim(result) == 0 else result


def copula_cdf(spec, u, v):
    """C(u, v; theta) with exact values on the boundary of the unit square"""
    fam, u, v = _prepare(spec, u, v)
    if np.any((u < 0) | (u > 1) | (v < 0) | (v > 1)):
        raise DomainError("copula_cdf requires u, v in [0, 1]")
    if spec.family.rotation == 'survival':
        c = u + v - 1.0 + _base_cdf(fam, spec.theta, 1.0 - u, 1.0 - v)
    else:
        c = _base_cdf(fam, spec.theta, u, v)
    c = np.where((u <= 0) | (v <= 0), 0.0, c)
    c = np.where(u >= 1, v, c)
    c = np.where(v >= 1, u, c)
    return _scalar(np.clip(c, 0.0, 1.0))


def _conditional(spec, u, v, which):
    fam, u, v = _prepare(spec, u, v)
    cond = v if which == 12 else u
    free = u if which == 12 else v
    if np.any((cond <= 0) | (cond >= 1)):
        raise DomainError("conditioning argument must lie strictly inside (0, 1)")
    if np.any((free < 0) | (free > 1)):
        raise DomainError("conditional argument must lie in [0, 1]")
    if spec.family.rotation == 'survival':
        h = 1.0 - _base_h(fam, spec.theta, 1.0 - u, 1.0 - v, which)
    else:
        h = _base_h(fam, spec.theta, u, v, which)
    h = np.where(free <= 0, 0.0, h)
    h = np.where(free >= 1, 1.0, h)
    return _scalar(np.clip(h, 0.0, 1.0))


def copula_cond_1g2(spec, u, v):
    """C_{1|2}(u|v) = dC(u, v)/dv"""
    return _conditional(spec, u, v, 12)


def copula_cond_2g1(spec, u, v):
    """C_{2|1}(v|u) = dC(u, v)/du"""
    return _conditional(spec, u, v, 21)


def rotate_survival(spec):
    rotation = 'none' if spec.family.rotation == 'survival' else 'survival'
    return CopulaSpec(CopulaFamily(spec.family.tag, rotation), spec.theta)


# ===== Family ladder =====

LADDER_GROUPS = (
    ('baseline', ('gaussian',)),
    ('tail-asymmetric', ('gumbel', 'survival-gumbel', 'joe', 'survival-joe', 'clayton', 'survival-clayton',
                         'bb1', 'survival-bb1', 'bb7', 'survival-bb7')),
    ('tail-quadrant-independent', ('frank', 'plackett', 'bb8', 'survival-bb8', 'bb10', 'survival-bb10')),
    ('both-tails', ('t',)),
    ('permutation-asymmetric', ('asym-gumbel',)),
)


def ladder_groups():
    return [(group, [CopulaFamily.from_name(name) for name in names]) for group, names in LADDER_GROUPS]


def default_ladder():
    return [family for _, families in ladder_groups() for family in families]


def ladder_group_of(family):
    for group, names in LADDER_GROUPS:
        if family.name in names:
            return group
    return 'other'
