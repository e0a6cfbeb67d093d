# services/fit_service.py
import logging

import numpy as np
from joblib import Parallel, delayed

import config
from exceptions import FitError, OptimizationError, OrdcopError, ParameterDomainError, SelectionError
from models import AveragedBetaCopula, CopulaFamily, CopulaSpec, EmpiricalBetaCopula, FitResult
from services.copulas import copula_cond_1g2, get_family
from services.latent_service import LatentService
from services.numerics import minimize

logger = logging.getLogger(__name__)


def _as_family(family):
    return CopulaFamily.from_name(family) if isinstance(family, str) else family


class FitService:
    """Maximum likelihood copula fits on the mixed rectangle likelihood"""

    def __init__(self):
        self.latent = LatentService()

    def mixed_loglik(self, spec, pseudo):
        """sum_i log{C_1|2(u+_i | u_iY) - C_1|2(u-_i | u_iY)}"""
        upper = copula_cond_1g2(spec, pseudo.u_plus, pseudo.u_y)
        lower = copula_cond_1g2(spec, pseudo.u_minus, pseudo.u_y)
        return float(np.sum(np.log(np.maximum(upper - lower, config.LIKELIHOOD_FLOOR))))

    def _negative_loglik(self, family, pseudo):
        def objective(theta):
            try:
                return -self.mixed_loglik(CopulaSpec(family, tuple(float(t) for t in theta)), pseudo)
            except ParameterDomainError:
                return np.inf
        return objective

    def _result(self, spec, pseudo, report=None):
        loglik = self.mixed_loglik(spec, pseudo)
        d, n = len(spec.theta), pseudo.n
        return FitResult(spec=spec, loglik=loglik, aic=2 * d - 2 * loglik, bic=d * np.log(n) - 2 * loglik,
                         n=n, optimizer=report)

    def fit_family(self, family, pseudo, multistart=None):
        """MLE of one family; raises FitError carrying the best-so-far report"""
        family = _as_family(family)
        fam = get_family(family)
        if fam.n_params == 0:
            return self._result(CopulaSpec(family, ()), pseudo)

        objective = self._negative_loglik(family, pseudo)
        try:
            if fam.tag == 't':
                report = self._fit_student_t(objective, fam, multistart)
            else:
                report = minimize(objective, fam.search_bounds, x0=fam.start, multistart=multistart)
        except OptimizationError as e:
            logger.error(f"Fit of {family.name} failed: {str(e)}")
            raise FitError(f"Fit of {family.name} failed: {str(e)}", e.report)

        spec = CopulaSpec(family, tuple(float(t) for t in report.argmin))
        result = self._result(spec, pseudo, report)
        logger.info(f"Fitted {family.name}: theta={np.round(spec.theta, 4).tolist()}, loglik={result.loglik:.4f}")
        return result

    def _fit_student_t(self, objective, fam, multistart):
        """Profile nu over a grid with rho optimized, then polish both jointly"""
        rho_bounds, nu_bounds = fam.search_bounds
        best = None
        for nu in config.T_NU_GRID:
            report = minimize(lambda t, nu=nu: objective((t[0], nu)), [rho_bounds], x0=[fam.start[0]],
                              multistart=1)
            if best is None or report.value < best[1].value:
                best = (nu, report)
        nu, profile = best
        logger.debug(f"t profile: nu={nu}, rho={profile.argmin[0]:.4f}, value={profile.value:.6f}")
        polished = minimize(objective, fam.search_bounds, x0=[profile.argmin[0], min(nu, nu_bounds[1] - 1e-3)],
                            multistart=multistart)
        return polished

    def select_model(self, families, pseudo, criterion='aic', n_jobs=None):
        """Fits every family and ranks by criterion, then parameter count, then name"""
        outcome = self.compare_families(families, pseudo, criterion, n_jobs)
        if not outcome['success']:
            raise SelectionError(outcome['error'])
        return outcome['results']

    def compare_families(self, families, pseudo, criterion='aic', n_jobs=None):
        """Like select_model but reports per-family failures instead of raising"""
        if criterion not in ('aic', 'bic'):
            raise ParameterDomainError(f"Unknown criterion {criterion!r}")
        families = [_as_family(f) for f in families]
        if not families:
            raise SelectionError("No copula families to compare")

        outcomes = Parallel(n_jobs=n_jobs or config.N_JOBS)(
            delayed(self._try_fit)(family, pseudo) for family in families
        )
        results = [r for r in outcomes if isinstance(r, FitResult)]
        failures = [r for r in outcomes if isinstance(r, dict)]
        results.sort(key=lambda r: (getattr(r, criterion), r.n_params, r.spec.family.name))
        if not results:
            return {'success': False, 'error': 'All copula fits failed', 'results': [], 'failures': failures}
        return {'success': True, 'results': results, 'failures': failures}

    def _try_fit(self, family, pseudo):
        try:
            return self.fit_family(family, pseudo)
        except OrdcopError as e:
            logger.warning(f"Skipping {family.name}: {str(e)}")
            return {'family': family.name, 'error': str(e)}

    # ===== Empirical copulas =====

    def fit_beta_copula(self, pseudo, x=None, seed=None, seeds=None, rho_n=None):
        """Empirical beta copula of (u_Z, u_Y); averaged over `seeds` latent draws when > 1"""
        seed = config.DEFAULT_SEED if seed is None else int(seed)
        seeds = config.BETA_COPULA_SEEDS if seeds is None else int(seeds)
        if rho_n is None:
            rho_n = self.latent.polyserial_mle(pseudo, x)
        members = []
        for offset in range(seeds):
            scores = self.latent.gen_latent_scores(pseudo, x, rho_n, seed + offset)
            members.append(EmpiricalBetaCopula.from_pseudo(scores.u_z, pseudo.u_y))
        logger.info(f"Empirical beta copula: n={pseudo.n}, seeds={seeds}, first seed={seed}")
        return members[0] if seeds == 1 else AveragedBetaCopula(tuple(members))

    def beta_copula_cdf(self, beta, u_z, u_y):
        return beta.cdf(u_z, u_y)

    def empirical_copula_cdf(self, beta, u_z, u_y):
        return np.mean([m.empirical_cdf(u_z, u_y) for m in beta.members], axis=0)
