# test_sample_service.py
import numpy as np
import pytest

from exceptions import SampleValidationError
from services import sample_service


def _sample(x, y, **kwargs):
    return sample_service.build_sample(x, y, **kwargs)


def test_build_sample_merges_sparse_categories():
    x = [3, 4, 4, 6, 8, 5, 6, 8, 4, 8]
    sample = _sample(x, np.arange(10.0), merges={3: 4, 5: 6})
    assert sample.labels == (4, 6, 8)
    assert sample.k == 3
    assert sample.counts.tolist() == [4, 3, 3]
    assert sample.x.tolist() == [1, 1, 1, 2, 3, 2, 2, 3, 1, 3]


def test_build_sample_text_labels_and_explicit_order():
    x = ['low', 'high', 'mid', 'low', 'mid', 'high', 'low', 'mid', 'high', 'low']
    sample = _sample(x, np.linspace(0, 1, 10), order=['low', 'mid', 'high'])
    assert sample.labels == ('low', 'mid', 'high')
    assert sample.counts.tolist() == [4, 3, 3]
    with pytest.raises(SampleValidationError):
        _sample(x, np.linspace(0, 1, 10), order=['low', 'mid'])


def test_build_sample_min_size_keyword():
    sample = _sample(['a', 'a', 'b', 'b'], [1.0, 2.0, 3.0, 4.0], min_size=4)
    assert sample.k == 2
    assert sample.counts.tolist() == [2, 2]


@pytest.mark.parametrize('x,y,kwargs', [
    ([], [], {}),
    ([1, 2], [0.1, 0.2], {}),
    ([1, 2, 1], [0.1, 0.2], {'min_size': 2}),
    ([1] * 12, np.arange(12.0), {}),
    ([1, 2] * 6, [0.0] * 11 + [np.nan], {}),
    ([1, 2] * 5 + [None, 1], np.arange(12.0), {}),
])
def test_build_sample_rejects_invalid_input(x, y, kwargs):
    with pytest.raises(SampleValidationError):
        _sample(x, y, **kwargs)


def test_empty_category_in_order_is_rejected():
    with pytest.raises(SampleValidationError):
        _sample([1, 3] * 6, np.arange(12.0), order=[1, 2, 3])


def test_pseudo_observations_rank_pit():
    sample = _sample([1, 1, 2], [1.0, 2.0, 3.0], min_size=3)
    pseudo = sample_service.pseudo_observations(sample)
    assert np.allclose(pseudo.u_y, [0.25, 0.5, 0.75])
    assert pseudo.cutpoints[0] == -np.inf and pseudo.cutpoints[-1] == np.inf

    tied = _sample([1, 1, 2, 2], [1.0, 2.0, 2.0, 3.0], min_size=4)
    assert np.allclose(sample_service.pseudo_observations(tied).u_y, [0.2, 0.5, 0.5, 0.8])


def test_pseudo_observations_category_bounds():
    sample = _sample([1, 1, 2, 2], [4.0, 1.0, 3.0, 2.0], min_size=4)
    pseudo = sample_service.pseudo_observations(sample)
    assert set(pseudo.u_plus.tolist()) == {0.5, 1.0}
    assert pseudo.cutpoints[1] == 0.0
    assert np.allclose(pseudo.u_plus - pseudo.u_minus, sample.counts[sample.x - 1] / sample.n)


def test_pseudo_observations_ignore_monotone_transforms_of_y():
    rng = np.random.default_rng(5)
    x = rng.integers(1, 4, 50)
    y = rng.normal(size=50)
    base = sample_service.pseudo_observations(_sample(x, y))
    moved = sample_service.pseudo_observations(_sample(x, np.exp(y)))
    assert np.array_equal(base.u_y, moved.u_y)


def test_pseudo_observations_jitter_and_parametric_margin():
    sample = _sample([1, 2] * 6, [1.0, 1.0, 2.0, 2.0] * 3)
    jittered = sample_service.pseudo_observations(sample, jitter_seed=3)
    assert np.unique(jittered.u_y).size == sample.n
    parametric = sample_service.pseudo_observations(sample, y_cdf=lambda y: y / 3.0)
    assert np.allclose(parametric.u_y, sample.y / 3.0)
    with pytest.raises(SampleValidationError):
        sample_service.pseudo_observations(sample, y_cdf=lambda y: y / 2.0)


def test_spearman_rho():
    x = [1, 1, 2, 2, 3, 3, 3, 1, 2, 3]
    concordant = _sample(x, np.array(x) * 10.0 + np.arange(10) * 0.01)
    assert sample_service.spearman_rho(concordant) > 0.9
    constant = _sample(x, np.ones(10))
    with pytest.raises(SampleValidationError):
        sample_service.spearman_rho(constant)

    rng = np.random.default_rng(8)
    independent = _sample(rng.integers(1, 4, 10_000), rng.normal(size=10_000))
    assert abs(sample_service.spearman_rho(independent)) < 0.03


def test_orient_positive():
    x = [1, 1, 2, 2, 3, 3, 1, 2, 3, 3]
    negative = _sample(x, -np.array(x, dtype=float) + np.arange(10) * 0.01)
    oriented, flipped_x, flipped_y = sample_service.orient_positive(negative)
    assert flipped_x and not flipped_y
    assert oriented.labels == (3, 2, 1)
    assert sample_service.spearman_rho(oriented) > 0
    again, flipped_x, _ = sample_service.orient_positive(oriented)
    assert not flipped_x and again is oriented

    _, _, flipped_y = sample_service.orient_positive(negative, flip='y')
    assert flipped_y


def test_conditional_summary():
    y = np.array([1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0])
    sample = _sample([1] * 4 + [2] * 6, y)
    summary = sample_service.conditional_summary(sample, 'weight')
    assert summary['subset'].tolist() == ['overall', 1, 2]
    assert summary['n'].tolist() == [10, 4, 6]
    first = summary.iloc[1]
    assert first['mean'] == pytest.approx(2.5)
    assert first['median'] == pytest.approx(2.5)
    assert first['q1'] == pytest.approx(np.quantile([1, 2, 3, 4], 0.25))
    assert first['sd'] == pytest.approx(np.std([1, 2, 3, 4], ddof=1))
    assert summary.iloc[0]['max'] == 60.0
