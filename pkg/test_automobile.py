# test_automobile.py
import pytest
import requests

import config
from exceptions import MissingDataError
from services import automobile_service, fit_service, sample_service
from services.copulas import default_ladder

UCI_ROWS = '''18.0   8   307.0      130.0      3504.      12.0   70  1\t"chevrolet chevelle malibu"
15.0   8   350.0      165.0      3693.      11.5   70  1\t"buick skylark 320"
16.0   8   304.0      150.0      3433.      12.0   70  1\t"amc rebel sst"
19.0   6   250.0      100.0      3282.      15.0   71  1\t"pontiac firebird"
21.0   6   199.0      90.00      2648.      15.0   70  1\t"amc gremlin"
20.3   5   131.0      103.0      2830.      15.9   78  2\t"audi 5000"
25.0   4   98.00      ?          2046.      19.0   71  1\t"ford pinto"
26.0   4   97.00      46.00      1835.      20.5   70  2\t"volkswagen 1131 deluxe sedan"
27.0   4   97.00      88.00      2130.      14.5   70  3\t"datsun pl510"
24.0   4   113.0      95.00      2372.      15.0   70  3\t"toyota corona mark ii"
23.7   3   70.00      100.0      2420.      12.5   80  3\t"mazda rx-7 gs"
31.0   4   71.00      65.00      1773.      19.0   71  3\t"toyota corolla 1200"
'''


@pytest.fixture
def uci_file(tmp_path):
    path = tmp_path / 'auto-mpg.data'
    path.write_text(UCI_ROWS)
    return path


def test_load_uci_layout(uci_file):
    frame = automobile_service.load(str(uci_file))
    assert len(frame) == 12
    assert int(frame['horsepower'].isna().sum()) == 1
    assert frame.loc[0, 'car_name'] == 'chevrolet chevelle malibu'


def test_sign_changes_and_merges(uci_file):
    frame = automobile_service.load(str(uci_file))
    table = automobile_service.spearman_table(frame).set_index('variable')
    assert table.loc['weight', 'rho'] < 0 and table.loc['weight', 'sign_change']
    assert table.loc['cylinders', 'rho'] < 0 and table.loc['cylinders', 'sign_change']
    assert table.loc['horsepower', 'n'] == 11

    sample = automobile_service.build_pair(frame, 'cylinders')
    # 3 -> 4 and 5 -> 6, then reversed so that fewer cylinders rank higher
    assert sample.labels == (8, 6, 4)
    assert sample.counts.tolist() == [3, 3, 6]
    assert sample_service.spearman_rho(sample) > 0

    origin = automobile_service.build_pair(frame, 'origin')
    assert origin.labels == (1, 2, 3)
    assert sample_service.spearman_rho(origin) > 0


def test_missing_file_is_downloaded(tmp_path, monkeypatch):
    class Response:
        content = UCI_ROWS.encode()

        def raise_for_status(self):
            pass

    calls = []
    monkeypatch.setattr(requests, 'get', lambda url, timeout: calls.append(url) or Response())
    path = tmp_path / 'data' / 'auto-mpg.data'
    frame = automobile_service.load(str(path))
    assert len(frame) == 12
    assert path.exists()
    assert calls == [config.AUTO_MPG_URL]


def test_failed_download(tmp_path, monkeypatch):
    def refuse(url, timeout):
        raise requests.ConnectionError('offline')

    monkeypatch.setattr(requests, 'get', refuse)
    with pytest.raises(MissingDataError):
        automobile_service.load(str(tmp_path / 'auto-mpg.data'))

    monkeypatch.setattr(config, 'AUTO_MPG_DOWNLOAD', False)
    with pytest.raises(MissingDataError):
        automobile_service.load(str(tmp_path / 'auto-mpg.data'))


# ===== Full data set (fetched on first use) =====

@pytest.fixture(scope='module')
def frame():
    try:
        return automobile_service.load()
    except MissingDataError as e:
        pytest.skip(str(e))


def test_record_count(frame):
    assert len(frame) == 398
    assert int(frame['horsepower'].isna().sum()) == 6


def test_spearman_with_mpg(frame):
    table = automobile_service.spearman_table(frame).set_index('variable')
    # published association column
    expected = {'weight': -0.832, 'acceleration': 0.420, 'model_year': 0.579, 'origin': 0.563}
    for variable, r in expected.items():
        assert table.loc[variable, 'pearson'] == pytest.approx(r, abs=0.005)
        assert (table.loc[variable, 'rho'] > 0) == (r > 0)
    for variable in ('cylinders', 'horsepower', 'weight'):
        assert table.loc[variable, 'rho'] < -0.75
        assert table.loc[variable, 'sign_change']
    assert not table.loc['origin', 'sign_change']
    assert table.loc['horsepower', 'n'] == 392


def test_weight_summaries(frame):
    summaries = automobile_service.weight_summaries(frame).set_index('subset')
    assert summaries.loc['overall', 'n'] == 398
    four = summaries.loc['cylinders = 4']
    assert four['n'] == 208
    assert four['mean'] == pytest.approx(2310, abs=15)
    assert four['sd'] == pytest.approx(345, abs=15)
    assert summaries.loc['origin = 1', 'n'] == 249
    assert summaries.loc['origin = 1', 'mean'] == pytest.approx(3362, abs=15)


def test_cylinder_categories_are_merged_and_oriented(frame):
    sample = automobile_service.build_pair(frame, 'cylinders')
    assert sample.k == 3
    assert sample.labels == (8, 6, 4)
    # 4 three-cylinder cars join the 4s, 3 five-cylinder cars join the 6s
    assert sample.counts.tolist() == [103, 87, 208]
    assert sample_service.spearman_rho(sample) > 0


@pytest.mark.slow
def test_weight_cylinders_gaussian_fit(frame):
    sample = automobile_service.build_pair(frame, 'cylinders')
    result = fit_service.fit_family('gaussian', sample_service.pseudo_observations(sample))
    assert result.spec.theta[0] == pytest.approx(0.97, abs=0.02)


@pytest.mark.slow
def test_weight_origin_prefers_lower_tail_dependence(frame):
    sample = automobile_service.build_pair(frame, 'origin')
    ranked = fit_service.select_model([f.name for f in default_ladder()], sample_service.pseudo_observations(sample))
    best = max(ranked, key=lambda r: r.loglik)
    assert best.spec.family.name in ('clayton', 'bb1', 'bb7')
