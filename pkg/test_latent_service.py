# test_latent_service.py
import numpy as np
import pytest
from scipy import optimize, stats

from exceptions import SampleValidationError
from services import kl_service, latent_service, sample_service
from services.model_registry import SIMULATION_CASES, get_model


def latent_gaussian_sample(rho, cuts, n, seed):
    """Ordinal X from cutting Z, with (Z, Y) standard bivariate normal"""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    y = rho * z + np.sqrt(1 - rho * rho) * rng.standard_normal(n)
    x = np.digitize(z, cuts) + 1
    return sample_service.build_sample(x, y)


@pytest.fixture(scope='module')
def correlated():
    sample = latent_gaussian_sample(0.5, [-0.5, 0.5], 10_000, seed=21)
    return sample, sample_service.pseudo_observations(sample)


def test_polyserial_recovers_latent_correlation(correlated):
    _, pseudo = correlated
    assert latent_service.polyserial_mle(pseudo) == pytest.approx(0.5, abs=0.05)


def test_polyserial_near_zero_under_independence():
    rng = np.random.default_rng(4)
    sample = sample_service.build_sample(rng.integers(1, 4, 10_000), rng.normal(size=10_000))
    pseudo = sample_service.pseudo_observations(sample)
    assert abs(latent_service.polyserial_mle(pseudo)) < 0.05


def test_polyserial_matches_one_dimensional_search():
    sample = latent_gaussian_sample(0.3, [0.0], 400, seed=2)
    pseudo = sample_service.pseudo_observations(sample)
    golden = optimize.minimize_scalar(lambda r: -latent_service.polyserial_loglik(r, pseudo),
                                      bounds=(-0.99, 0.99), method='bounded', options={'xatol': 1e-9})
    assert latent_service.polyserial_mle(pseudo) == pytest.approx(golden.x, abs=1e-5)


def test_polyserial_requires_two_categories(correlated):
    _, pseudo = correlated
    with pytest.raises(SampleValidationError):
        latent_service.polyserial_mle(pseudo, x=np.ones(pseudo.n, dtype=int))


def test_latent_uniforms_stay_in_their_category(correlated):
    _, pseudo = correlated
    scores = latent_service.gen_latent_scores(pseudo, rho_n=0.5, seed=9)
    cum = np.concatenate(([0.0], pseudo.cum_x))
    assert np.all(scores.u_z > cum[pseudo.x - 1])
    assert np.all(scores.u_z <= cum[pseudo.x])
    assert np.all(np.isfinite(scores.z))


def test_latent_scores_are_deterministic(correlated):
    _, pseudo = correlated
    a = latent_service.gen_latent_scores(pseudo, rho_n=0.5, seed=9)
    b = latent_service.gen_latent_scores(pseudo, rho_n=0.5, seed=9)
    c = latent_service.gen_latent_scores(pseudo, rho_n=0.5, seed=10)
    assert np.array_equal(a.u_z, b.u_z)
    assert not np.array_equal(a.u_z, c.u_z)


def test_latent_uniforms_follow_gaussian_copula_ranks(correlated):
    _, pseudo = correlated
    scores = latent_service.gen_latent_scores(pseudo, rho_n=0.5, seed=9)
    for j in range(1, pseudo.k + 1):
        idx = pseudo.x == j
        assert np.array_equal(stats.rankdata(scores.u_z[idx]), stats.rankdata(scores.u_w[idx]))


def test_pooled_latent_uniforms_are_uniform(correlated):
    _, pseudo = correlated
    scores = latent_service.gen_latent_scores(pseudo, rho_n=0.5, seed=9)
    assert stats.kstest(scores.u_z, 'uniform').pvalue > 0.01


def test_rho_is_clipped(correlated):
    _, pseudo = correlated
    scores = latent_service.gen_latent_scores(pseudo, rho_n=1.0, seed=1)
    assert scores.rho_n == pytest.approx(0.999)


def test_normal_score_pairs(correlated):
    _, pseudo = correlated
    scores = latent_service.gen_latent_scores(pseudo, seed=3)
    pairs = latent_service.normal_score_pairs(scores, pseudo)
    assert list(pairs.columns) == ['z', 'ny']
    assert len(pairs) == pseudo.n
    for j in range(1, pseudo.k + 1):
        idx = pseudo.x == j
        via_z = stats.spearmanr(pairs['z'][idx], pairs['ny'][idx])[0]
        via_w = stats.spearmanr(scores.u_w[idx], pseudo.u_y[idx])[0]
        assert via_z == pytest.approx(via_w, abs=1e-12)

    summary = latent_service.normal_score_report(scores, pseudo)
    assert summary['n'] == pseudo.n
    assert summary['seed'] == 3
    assert summary['pearson'] == pytest.approx(0.5, abs=0.07)


@pytest.mark.slow
@pytest.mark.parametrize('case', SIMULATION_CASES)
def test_latent_scores_on_benchmark_mixtures(case):
    uniform = 0
    for seed in range(1, 21):
        sample = kl_service.sample_from_model(get_model(case), 1000, seed=seed)
        pseudo = sample_service.pseudo_observations(sample)
        scores = latent_service.gen_latent_scores(pseudo, seed=seed)
        cum = np.concatenate(([0.0], pseudo.cum_x))
        assert np.all((scores.u_z > cum[pseudo.x - 1]) & (scores.u_z <= cum[pseudo.x]))
        for j in range(1, pseudo.k + 1):
            idx = pseudo.x == j
            assert np.array_equal(stats.rankdata(scores.u_z[idx]), stats.rankdata(scores.u_w[idx]))
        uniform += stats.kstest(scores.u_z, 'uniform').pvalue > 0.01
    assert uniform >= 18
