# models.py

from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import betainc
from scipy.stats import rankdata

import config
from exceptions import ConfigError

SURVIVAL_PREFIX = 'survival-'


# ===== Numerics =====

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Legendre rule on [-1, 1]"""
    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def scaled(self, lo, hi):
        """Nodes and weights mapped onto [lo, hi]"""
        half = 0.5 * (hi - lo)
        return lo + half * (self.nodes + 1.0), half * self.weights

    def integrate(self, f, lo=-1.0, hi=1.0):
        x, w = self.scaled(lo, hi)
        return float(np.sum(w * f(x)))


@dataclass(frozen=True, eq=False)
class OptimizerReport:
    argmin: np.ndarray
    value: float
    evaluations: int
    converged: bool
    restarts: int
    start_values: Tuple[float, ...] = ()

    def to_dict(self):
        return {
            'argmin': [float(a) for a in self.argmin],
            'value': float(self.value),
            'evaluations': int(self.evaluations),
            'converged': bool(self.converged),
            'restarts': int(self.restarts),
        }


# ===== Copulas =====

@dataclass(frozen=True)
class CopulaFamily:
    tag: str
    rotation: str = 'none'

    @property
    def name(self):
        if self.rotation == 'survival':
            return f'{SURVIVAL_PREFIX}{self.tag}'
        return self.tag

    @classmethod
    def from_name(cls, name):
        name = name.strip().lower()
        if name.startswith(SURVIVAL_PREFIX):
            return cls(name[len(SURVIVAL_PREFIX):], 'survival')
        return cls(name)

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class CopulaSpec:
    family: CopulaFamily
    theta: Tuple[float, ...] = ()

    def to_dict(self):
        return {
            'family': self.family.tag,
            'rotation': self.family.rotation,
            'theta': [float(t) for t in self.theta],
        }


# ===== Samples =====

@dataclass(frozen=True, eq=False)
class MixedPairSample:
    """Paired ordinal codes x in 1..k and continuous y"""
    x: np.ndarray
    y: np.ndarray
    labels: Tuple
    counts: np.ndarray

    @property
    def n(self):
        return int(self.x.size)

    @property
    def k(self):
        return len(self.labels)

    def category_values(self, j):
        return self.y[self.x == j]


@dataclass(frozen=True, eq=False)
class ContinuousMargin:
    """Piecewise-linear CDF of y through its pseudo-observation levels, with the exact inverse"""
    knots_y: np.ndarray
    knots_p: np.ndarray

    @classmethod
    def from_values(cls, y, u=None):
        """Knots at the distinct y; `u` holds their CDF levels (midrank/(n+1) by default)"""
        y = np.asarray(y, dtype=float)
        u = rankdata(y, method='average') / (y.size + 1) if u is None else np.asarray(u, dtype=float)
        knots_y, inverse = np.unique(y, return_inverse=True)
        knots_p = np.bincount(inverse, weights=u) / np.bincount(inverse)
        if knots_y.size == 1:
            knots_y = np.array([knots_y[0], knots_y[0] + 1.0])
            knots_p = np.array([knots_p[0], 1.0])
        return cls(knots_y, knots_p)

    def cdf(self, y):
        return np.interp(y, self.knots_y, self.knots_p)

    def quantile(self, p):
        return np.interp(p, self.knots_p, self.knots_y)


@dataclass(frozen=True, eq=False)
class PseudoObs:
    u_plus: np.ndarray
    u_minus: np.ndarray
    u_y: np.ndarray
    cutpoints: np.ndarray
    cum_x: np.ndarray
    x: np.ndarray
    counts: np.ndarray
    margin: ContinuousMargin

    @property
    def n(self):
        return int(self.u_y.size)

    @property
    def k(self):
        return int(self.counts.size)


# ===== Latent scores =====

@dataclass(frozen=True, eq=False)
class LatentScoreSet:
    u_z: np.ndarray
    z: np.ndarray
    rho_n: float
    seed: int
    u_w: Optional[np.ndarray] = None


# ===== Fitting =====

@dataclass(frozen=True, eq=False)
class FitResult:
    spec: CopulaSpec
    loglik: float
    aic: float
    bic: float
    n: int
    optimizer: Optional[OptimizerReport] = None

    @property
    def n_params(self):
        return len(self.spec.theta)

    def to_dict(self):
        return {
            **self.spec.to_dict(),
            'loglik': float(self.loglik),
            'aic': float(self.aic),
            'bic': float(self.bic),
            'n': int(self.n),
        }


@dataclass(frozen=True, eq=False)
class EmpiricalBetaCopula:
    """Empirical beta copula of rank pairs (r_z, r_y)"""
    r_z: np.ndarray
    r_y: np.ndarray
    n: int

    @classmethod
    def from_pseudo(cls, u_z, u_y):
        r_z = rankdata(u_z, method='ordinal').astype(int)
        r_y = rankdata(u_y, method='ordinal').astype(int)
        return cls(r_z, r_y, int(r_z.size))

    @property
    def members(self):
        return (self,)

    def cdf(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        shape = u.shape
        u = np.clip(u.reshape(-1, 1), 0.0, 1.0)
        v = np.clip(v.reshape(-1, 1), 0.0, 1.0)
        n = self.n
        bz = betainc(self.r_z, n + 1 - self.r_z, u)
        by = betainc(self.r_y, n + 1 - self.r_y, v)
        return np.mean(bz * by, axis=1).reshape(shape)

    def empirical_cdf(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        shape = u.shape
        n = self.n
        iz = (self.r_z / n) <= u.reshape(-1, 1)
        iy = (self.r_y / n) <= v.reshape(-1, 1)
        return np.mean(iz & iy, axis=1).reshape(shape)


@dataclass(frozen=True, eq=False)
class AveragedBetaCopula:
    """Empirical beta copulas from several latent-score seeds, CDFs averaged"""
    members: Tuple[EmpiricalBetaCopula, ...]

    @property
    def n(self):
        return self.members[0].n

    def cdf(self, u, v):
        return np.mean([m.cdf(u, v) for m in self.members], axis=0)


# ===== Diagnostics =====

@dataclass(frozen=True, eq=False)
class QQPanel:
    """Conditional Q-Q data for one category; *_pit are the values on the F_Y scale"""
    category: int
    label: object
    probs: np.ndarray
    model_q: np.ndarray
    empirical_q: np.ndarray
    model_pit: np.ndarray
    empirical_pit: np.ndarray
    discrepancy: float = float('nan')

    @property
    def size(self):
        return int(self.probs.size)

    def to_frame(self):
        return pd.DataFrame({'q': self.probs, 'model': self.model_q, 'empirical': self.empirical_q})


# ===== KL atlas =====

@dataclass(frozen=True)
class MixtureModel:
    """Finite mixture g(i, y) = pi_i * component_i(y)"""
    pi: Tuple[float, ...]
    component: str = 'normal'
    mu: Tuple[float, ...] = ()
    sigma: Tuple[float, ...] = ()
    nu: Tuple[float, ...] = ()
    alpha: Tuple[float, ...] = ()
    kind: str = field(default='mixture', init=False)

    @property
    def k(self):
        return len(self.pi)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ConditionalRegressionModel:
    """Cumulative link model P(X <= i | y) = F(a*y + b_i), Y from y_margin"""
    y_margin: str = 'normal'
    link: str = 'probit'
    a: float = 1.0
    b: Tuple[float, ...] = (0.0,)
    nu: Optional[float] = None
    kind: str = field(default='regression', init=False)

    @property
    def k(self):
        return len(self.b) + 1

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TableRow:
    """One published benchmark model with the family and KL reported for it"""
    case: str
    table: str
    model: object
    reported_family: str
    reported_label: str
    reported_kl: float
    typo: bool = False
    reproduced: bool = True


@dataclass(frozen=True, eq=False)
class KlResult:
    family: CopulaFamily
    theta_hat: Tuple[float, ...]
    kl: float
    quadrature_order: int
    optimizer: Optional[OptimizerReport] = None
    group: str = ''
    error: Optional[str] = None

    @property
    def success(self):
        return self.error is None

    def to_dict(self):
        return {
            'family': self.family.name,
            'group': self.group,
            'theta': [float(t) for t in self.theta_hat],
            'kl': float(self.kl),
            'quadrature_order': int(self.quadrature_order),
            'success': self.success,
            'error': self.error,
        }


# ===== CLI =====

COMMANDS = ('simulate', 'nscore', 'fit', 'qq', 'kl-table', 'automobile-demo')
EMIT_FORMATS = ('csv', 'json', 'svg')


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    output: Optional[str] = None
    model: Optional[str] = None
    n: Optional[int] = None
    seed: int = field(default_factory=lambda: config.DEFAULT_SEED)
    x_col: str = 'x'
    y_col: str = 'y'
    merge: dict = field(default_factory=dict)
    order: Optional[Tuple[str, ...]] = None
    family: Tuple[str, ...] = ()
    criterion: str = 'aic'
    beta: bool = False
    beta_seeds: int = 1
    emit: str = 'csv'
    which: str = 'all'
    strict: bool = False
    summary: bool = False
    mode: str = 'exhaustive'
    jobs: Optional[int] = None

    _required = {
        'simulate': ('model', 'n', 'output'),
        'nscore': ('input', 'output'),
        'fit': ('input',),
        'qq': ('input', 'output'),
        'kl-table': ('output',),
        'automobile-demo': ('output',),
    }

    def validate(self):
        """Check required fields for the command before execution"""
        if self.command not in COMMANDS:
            raise ConfigError(f"Unknown command: {self.command}")
        missing = [name for name in self._required[self.command] if getattr(self, name) in (None, '')]
        if missing:
            raise ConfigError(f"{self.command}: missing required option(s): {', '.join(missing)}")
        if self.emit not in EMIT_FORMATS:
            raise ConfigError(f"--emit must be one of {EMIT_FORMATS}, got {self.emit!r}")
        if self.criterion not in ('aic', 'bic'):
            raise ConfigError(f"--criterion must be aic or bic, got {self.criterion!r}")
        if self.which not in ('two', 'three', 'all'):
            raise ConfigError(f"--which must be two, three or all, got {self.which!r}")
        if self.command == 'simulate' and int(self.n) < 1:
            raise ConfigError(f"--n must be a positive integer, got {self.n}")
        if self.mode not in ('exhaustive', 'staged'):
            raise ConfigError(f"--mode must be exhaustive or staged, got {self.mode!r}")
        if self.beta_seeds < 1:
            raise ConfigError("--beta-seeds must be at least 1")
        return self


