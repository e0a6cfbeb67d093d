# services/latent_service.py
"""
Polyserial correlation and latent normal scores for the ordinal variable.

The latent uniforms u_Z are drawn so that, inside every category j, they are
uniform on (F_X(j-1), F_X(j)] and carry the within-category ranks of a
Gaussian-copula draw given the continuous pseudo-observations.
"""
import logging

import numpy as np
import pandas as pd
from scipy import special

import config
from exceptions import SampleValidationError
from models import LatentScoreSet
from services.numerics import minimize

logger = logging.getLogger(__name__)


class LatentService:

    def polyserial_loglik(self, rho, pseudo, x=None):
        """Log-likelihood of the latent-Gaussian model at correlation rho"""
        x = pseudo.x if x is None else np.asarray(x)
        ny = special.ndtri(pseudo.u_y)
        s = np.sqrt(1.0 - rho * rho)
        upper = special.ndtr((pseudo.cutpoints[x] - rho * ny) / s)
        lower = special.ndtr((pseudo.cutpoints[x - 1] - rho * ny) / s)
        density = -0.5 * ny * ny - 0.5 * np.log(2.0 * np.pi)
        return float(np.sum(density + np.log(np.maximum(upper - lower, config.LIKELIHOOD_FLOOR))))

    def polyserial_mle(self, pseudo, x=None, multistart=None):
        """Maximum likelihood polyserial correlation rho_N"""
        x = pseudo.x if x is None else np.asarray(x)
        if np.unique(x).size < 2:
            raise SampleValidationError("Polyserial correlation needs at least 2 observed categories")
        if np.any((pseudo.u_y <= 0) | (pseudo.u_y >= 1)):
            raise SampleValidationError("Continuous pseudo-observations must lie strictly inside (0, 1)")

        start = np.corrcoef(x, special.ndtri(pseudo.u_y))[0, 1]
        start = float(np.clip(np.nan_to_num(start), -0.9, 0.9))
        report = minimize(lambda t: -self.polyserial_loglik(t[0], pseudo, x), [(-1.0, 1.0)],
                          x0=[start], multistart=multistart)
        rho = float(report.argmin[0])
        logger.info(f"Polyserial correlation rho_N={rho:.6f} (loglik={-report.value:.4f})")
        return rho

    def gen_latent_scores(self, pseudo, x=None, rho_n=None, seed=None):
        """
        Latent uniforms and normal scores for the ordinal variable.
        Deterministic given `seed`.
        """
        x = pseudo.x if x is None else np.asarray(x)
        seed = config.DEFAULT_SEED if seed is None else int(seed)
        if rho_n is None:
            rho_n = self.polyserial_mle(pseudo, x)
        if abs(rho_n) > config.RHO_CLIP:
            logger.warning(f"rho_N={rho_n:.6f} clipped to +/-{config.RHO_CLIP}")
            rho_n = float(np.sign(rho_n) * config.RHO_CLIP)

        rng = np.random.Generator(np.random.Philox(seed))
        cum = np.concatenate(([0.0], pseudo.cum_x))
        s = np.sqrt(1.0 - rho_n * rho_n)
        ny = special.ndtri(pseudo.u_y)
        u_w = np.empty(pseudo.n)
        u_z = np.empty(pseudo.n)

        for j in range(1, cum.size):
            idx = np.flatnonzero(x == j)
            if idx.size == 0:
                continue
            # Step 2: Gaussian-copula draw given u_Y
            omega = rng.random(idx.size)
            u_w[idx] = special.ndtr(s * special.ndtri(omega) + rho_n * ny[idx])
            # Step 3: uniforms on the bin (F_X(j-1), F_X(j)]
            low, high = cum[j - 1], cum[j]
            psi = np.sort(high - (high - low) * rng.random(idx.size))
            # Step 4: psi of matching within-category rank
            ranked = idx[np.argsort(u_w[idx], kind='stable')]
            u_z[ranked] = psi

        # Step 5: normal scores
        z = special.ndtri(np.minimum(u_z, 1.0 - np.finfo(float).epsneg))
        return LatentScoreSet(u_z=u_z, z=z, rho_n=float(rho_n), seed=seed, u_w=u_w)

    def normal_score_pairs(self, scores, pseudo):
        """Pairs (z_i, Phi^-1(u_iY)) as a frame with columns z, ny"""
        if scores.z.size != pseudo.n:
            raise SampleValidationError(f"Latent scores ({scores.z.size}) and pseudo-observations ({pseudo.n}) differ in length")
        return pd.DataFrame({'z': scores.z, 'ny': special.ndtri(pseudo.u_y)})

    def normal_score_report(self, scores, pseudo):
        """Correlation of the emitted normal-score pairs next to rho_N"""
        pairs = self.normal_score_pairs(scores, pseudo)
        pearson = float(pairs['z'].corr(pairs['ny'])) if len(pairs) > 2 else float('nan')
        return {
            'n': int(len(pairs)),
            'seed': scores.seed,
            'rho_n': scores.rho_n,
            'pearson': pearson,
        }
