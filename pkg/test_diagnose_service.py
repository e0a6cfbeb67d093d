# test_diagnose_service.py
import numpy as np
import pytest
from scipy import integrate, special

from exceptions import DomainError
from models import QQPanel
from services import diagnose_service, fit_service, kl_service, sample_service
from services.copulas import default_ladder, make_spec
from services.model_registry import SIMULATION_CASES, get_model


def _gaussian_pair(rho, cuts, n, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    y = rho * z + np.sqrt(1 - rho * rho) * rng.standard_normal(n)
    sample = sample_service.build_sample(np.digitize(z, cuts) + 1, y)
    return sample, sample_service.pseudo_observations(sample)


@pytest.fixture(scope='module')
def pair():
    return _gaussian_pair(0.6, [-0.4, 0.5], 300, seed=12)


def test_independence_gives_marginal_cdf(pair):
    sample, pseudo = pair
    spec = make_spec('independence')
    y = np.quantile(sample.y, [0.1, 0.5, 0.9])
    for j in range(1, sample.k + 1):
        assert np.allclose(diagnose_service.cond_cdf(spec, pseudo, j, y), pseudo.margin.cdf(y), atol=1e-12)


@pytest.mark.parametrize('estimate', ['gaussian', 'beta'])
def test_conditional_cdfs_mix_back_to_the_margin(pair, estimate):
    sample, pseudo = pair
    if estimate == 'beta':
        model = fit_service.fit_beta_copula(pseudo, seed=5)
    else:
        model = make_spec('gaussian', 0.6)
    y = np.quantile(sample.y, [0.05, 0.3, 0.5, 0.8])
    weights = sample.counts / sample.n
    mixed = sum(w * diagnose_service.cond_cdf(model, pseudo, j + 1, y) for j, w in enumerate(weights))
    assert np.allclose(mixed, pseudo.margin.cdf(y), atol=1e-9)


def test_margin_uses_the_fitting_scale(pair):
    sample, pseudo = pair
    assert np.allclose(pseudo.margin.cdf(sample.y), pseudo.u_y, atol=1e-12)
    spec = make_spec('gaussian', 0.6)
    for j in range(1, sample.k + 1):
        assert np.allclose(diagnose_service.cond_cdf(spec, pseudo, j, sample.y[:20]),
                           diagnose_service.cond_cdf_v(spec, pseudo, j, pseudo.u_y[:20]), atol=1e-12)


def test_margin_averages_tied_levels():
    sample = sample_service.build_sample([1, 1, 2, 2, 2, 1], [0.5, 1.0, 1.0, 2.0, 3.0, -1.0], min_size=1)
    pseudo = sample_service.pseudo_observations(sample)
    assert pseudo.margin.cdf(1.0) == pytest.approx(3.5 / 7)
    assert pseudo.margin.quantile(3.5 / 7) == pytest.approx(1.0)


def test_gaussian_conditional_cdf_oracle():
    sample, pseudo = _gaussian_pair(0.6, [0.0], 400, seed=3)
    spec = make_spec('gaussian', 0.6)
    y_med = float(np.median(sample.y))
    v = float(pseudo.margin.cdf(y_med))
    b = special.ndtri(v)
    s = np.sqrt(1 - 0.36)
    # Phi_2(Phi^-1(c), b; rho) with c = F_X(1)
    a = special.ndtri(pseudo.cum_x[0])
    joint, _ = integrate.quad(lambda t: np.exp(-t * t / 2) / np.sqrt(2 * np.pi) * special.ndtr((a - 0.6 * t) / s),
                              -np.inf, b, epsabs=1e-13)
    expected = (v - joint) / (1 - pseudo.cum_x[0])
    assert diagnose_service.cond_cdf(spec, pseudo, 2, y_med) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize('q', [0.1, 0.5, 0.9])
def test_conditional_quantile_inverts_the_cdf(pair, q):
    sample, pseudo = pair
    spec = make_spec('clayton', 1.5)
    for j in range(1, sample.k + 1):
        y_q = diagnose_service.cond_quantile(spec, pseudo, j, q)
        assert diagnose_service.cond_cdf(spec, pseudo, j, y_q) == pytest.approx(q, abs=1e-6)


def test_independence_quantile_is_marginal_quantile(pair):
    _, pseudo = pair
    y_q = diagnose_service.cond_quantile(make_spec('independence'), pseudo, 1, 0.25)
    assert y_q == pytest.approx(float(pseudo.margin.quantile(0.25)), abs=1e-8)


def test_conditional_quantile_rejects_bad_levels(pair):
    _, pseudo = pair
    with pytest.raises(DomainError):
        diagnose_service.cond_quantile(make_spec('gaussian', 0.5), pseudo, 1, 1.0)
    with pytest.raises(DomainError):
        diagnose_service.cond_cdf(make_spec('gaussian', 0.5), pseudo, 4, 0.0)


def test_qq_panels_shapes(pair):
    sample, pseudo = pair
    panels = diagnose_service.qq_panels(make_spec('gaussian', 0.6), sample, pseudo)
    assert [p.category for p in panels] == [1, 2, 3]
    for panel in panels:
        assert panel.size == sample.counts[panel.category - 1]
        assert np.all(np.diff(panel.empirical_q) >= 0)
        assert np.all(np.diff(panel.model_q) >= -1e-9)
        assert 0.0 <= panel.discrepancy <= 1.0
        assert list(panel.to_frame().columns) == ['q', 'model', 'empirical']


def test_single_observation_category():
    rng = np.random.default_rng(2)
    sample = sample_service.build_sample([1] * 9 + [2], rng.normal(size=10))
    pseudo = sample_service.pseudo_observations(sample)
    panels = diagnose_service.qq_panels(make_spec('gaussian', 0.3), sample, pseudo)
    assert panels[1].probs.tolist() == [0.5]


def test_qq_discrepancy():
    probs = (np.arange(1, 101) - 0.5) / 100
    pit = np.linspace(0.01, 0.99, 100)
    same = QQPanel(1, 'a', probs, pit, pit, pit, pit)
    assert diagnose_service.qq_discrepancy(same) == 0.0
    shifted = QQPanel(1, 'a', probs, pit, pit, pit + 0.01, pit)
    assert diagnose_service.qq_discrepancy(shifted) == pytest.approx(0.01)


@pytest.mark.slow
def test_true_model_panels_hug_the_diagonal():
    sample, pseudo = _gaussian_pair(0.6, [-0.4, 0.5], 1000, seed=31)
    spec = fit_service.fit_family('gaussian', pseudo).spec
    for panel in diagnose_service.qq_panels(spec, sample, pseudo):
        assert np.mean(np.abs(panel.model_pit - panel.empirical_pit)) <= 0.05


@pytest.mark.slow
def test_beta_copula_tracks_a_poorly_fitted_model():
    sample = kl_service.sample_from_model(get_model('E4'), 1000, seed=17)
    pseudo = sample_service.pseudo_observations(sample)
    gaussian = fit_service.fit_family('gaussian', pseudo).spec
    beta = fit_service.fit_beta_copula(pseudo, seed=17)
    worst = lambda est: max(p.discrepancy for p in diagnose_service.qq_panels(est, sample, pseudo))
    assert worst(beta) < worst(gaussian)


def _worst_panels(case, seed, estimate):
    sample = kl_service.sample_from_model(get_model(case), 1000, seed=seed)
    pseudo = sample_service.pseudo_observations(sample)
    if estimate == 'beta':
        model = fit_service.fit_beta_copula(pseudo, seed=seed)
    else:
        model = fit_service.select_model([f.name for f in default_ladder()], pseudo)[0].spec
    return max(p.discrepancy for p in diagnose_service.qq_panels(model, sample, pseudo))


@pytest.mark.slow
@pytest.mark.parametrize('case', ['E3', 'E4'])
def test_best_parametric_fit_misses_heterogeneous_mixtures(case):
    # a single run can sit just under 0.1
    assert max(_worst_panels(case, seed, 'parametric') for seed in (1, 2)) > 0.1


@pytest.mark.slow
@pytest.mark.parametrize('case', SIMULATION_CASES)
def test_beta_copula_panels_stay_close(case):
    close = sum(_worst_panels(case, seed, 'beta') <= 0.06 for seed in range(1, 21))
    assert close >= 16
