# services/diagnose_service.py
import logging

import numpy as np

from exceptions import DiagnosticError, DomainError, RootBracketingError
from models import CopulaSpec, QQPanel
from services.copulas import copula_cdf
from services.numerics import find_root

logger = logging.getLogger(__name__)

_ROOT_LO, _ROOT_HI = 1e-10, 1.0 - 1e-10


def copula_evaluator(estimate):
    """C(u, v) callable for a CopulaSpec, a fitted (beta) copula or a plain function"""
    if isinstance(estimate, CopulaSpec):
        return lambda u, v: copula_cdf(estimate, u, v)
    if hasattr(estimate, 'cdf'):
        return estimate.cdf
    if callable(estimate):
        return estimate
    raise DomainError(f"Cannot evaluate a copula from {type(estimate).__name__}")


class DiagnoseService:
    """Conditional distributions of Y given X = j under an estimated copula"""

    def _bin(self, pseudo, j):
        if not 1 <= j <= pseudo.k:
            raise DomainError(f"Category {j} outside 1..{pseudo.k}")
        mass = pseudo.counts[j - 1] / pseudo.n
        if mass <= 0:
            raise DiagnosticError(f"Category {j} is empty")
        lower = pseudo.cum_x[j - 2] if j > 1 else 0.0
        return lower, pseudo.cum_x[j - 1], mass

    def cond_cdf_v(self, estimate, pseudo, j, v):
        """F_Y|X on the v = F_Y(y) scale"""
        evaluate = copula_evaluator(estimate)
        lower, upper, mass = self._bin(pseudo, j)
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        value = (np.clip(evaluate(upper, v), 0.0, 1.0) - np.clip(evaluate(lower, v), 0.0, 1.0)) / mass
        value = np.clip(value, 0.0, 1.0)
        return float(value) if value.ndim == 0 else value

    def cond_cdf(self, estimate, pseudo, j, y):
        """[C(F_X(j), F_Y(y)) - C(F_X(j-1), F_Y(y))] / (n_j/n)"""
        return self.cond_cdf_v(estimate, pseudo, j, pseudo.margin.cdf(y))

    def cond_quantile_v(self, estimate, pseudo, j, q):
        if not 0.0 < q < 1.0:
            raise DomainError(f"Quantile level must lie in (0, 1), got {q}")
        evaluate = copula_evaluator(estimate)
        try:
            return find_root(lambda v: self.cond_cdf_v(evaluate, pseudo, j, v) - q, _ROOT_LO, _ROOT_HI)
        except RootBracketingError as e:
            raise DiagnosticError(f"Conditional quantile q={q} for category {j}: {str(e)}")

    def cond_quantile(self, estimate, pseudo, j, q, y_inverse=None):
        """Root v of F_Y|X(v | j) = q mapped back through the inverse margin"""
        y_inverse = y_inverse or pseudo.margin.quantile
        return float(y_inverse(self.cond_quantile_v(estimate, pseudo, j, q)))

    def qq_panels(self, estimate, sample, pseudo):
        """One panel per category: model quantiles at (m - 0.5)/n_j against sorted y"""
        evaluate = copula_evaluator(estimate)
        panels = []
        for j in range(1, sample.k + 1):
            n_j = int(sample.counts[j - 1])
            probs = (np.arange(1, n_j + 1) - 0.5) / n_j
            model_v = np.array([self.cond_quantile_v(evaluate, pseudo, j, q) for q in probs])
            empirical = np.sort(sample.category_values(j))
            panel = QQPanel(
                category=j,
                label=sample.labels[j - 1],
                probs=probs,
                model_q=pseudo.margin.quantile(model_v),
                empirical_q=empirical,
                model_pit=model_v,
                empirical_pit=pseudo.margin.cdf(empirical),
            )
            discrepancy = self.qq_discrepancy(panel)
            logger.info(f"Q-Q panel {sample.labels[j - 1]}: n_j={n_j}, discrepancy={discrepancy:.4f}")
            panels.append(QQPanel(**{**panel.__dict__, 'discrepancy': discrepancy}))
        return panels

    def qq_discrepancy(self, panel):
        """max_m |F_Y(model_q_m) - F_Y(empirical_q_m)|"""
        if panel.size == 0:
            return 0.0
        return float(np.max(np.abs(panel.model_pit - panel.empirical_pit)))
