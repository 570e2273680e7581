import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import lngca.qtest as QT
from lngca import InputError
from lngca.linalg import center_whiten
from lngca.qtest import (
    KTestResult,
    TestConfig,
    n_binary_tests,
    pvalue,
    select_q,
    select_q_binary,
    select_q_sweep,
    test_k as run_test_k,
)
from lngca.simulation import make_instance
from lngca.sources import gen_gaussian


def _fake(k, p):
    r = np.zeros(4)
    return KTestResult(k, 0.0, 0.0, r, r, p, p)


def _threshold_tester(q_true):
    """Rejects H0(k) exactly when k <= q_true."""

    def tester(Z, k, cfg):
        return _fake(k, 0.0 if k <= q_true else 1.0)

    return tester


def test_pvalue_counting_rule():
    assert pvalue(0.5, np.ones(200)) == 1.0
    assert pvalue(2.0, np.ones(200)) == 0.0
    res = np.r_[np.full(10, 3.0), np.zeros(190)]
    assert pvalue(1.0, res) == 0.05
    # ties count as at least as large
    assert pvalue(3.0, res) == 0.05


def test_config_validation():
    with pytest.raises(InputError):
        TestConfig(B=0)
    with pytest.raises(InputError):
        TestConfig(alpha=1.0)
    with pytest.raises(InputError):
        TestConfig(mode="both")
    cfg = TestConfig(kind="jb")
    assert cfg.estimator_opts.kind.tag == "JB"
    assert cfg.estimator_opts.restarts == 1


@pytest.fixture(scope="module")
def planted():
    return make_instance(["c", "g"], 4, 1500, np.random.default_rng(0))


def test_test_k_contract_and_determinism(planted):
    cfg = TestConfig(kind="JB", B=20, seed=5)
    a = run_test_k(planted.Z, 3, cfg)
    b = run_test_k(planted.Z, 3, cfg)
    assert np.array_equal(a.resampled_curr, b.resampled_curr)
    assert a.p_curr == b.p_curr and a.p_cumu == b.p_cumu
    for p, obs, res in (
        (a.p_curr, a.observed_curr, a.resampled_curr),
        (a.p_cumu, a.observed_cumu, a.resampled_cumu),
    ):
        assert 0 <= p <= 1
        assert (p * 20) == round(p * 20)
        assert p == np.count_nonzero(res >= obs) / 20
    assert a.observed_cumu >= a.observed_curr


def test_test_k_rejects_planted_signal(planted):
    res = run_test_k(planted.Z, 2, TestConfig(kind="JB", B=20, seed=1))
    assert res.p_curr == 0.0


def test_test_k_replicate_retry(monkeypatch, planted):
    calls = {"n": 0}
    real = QT._replicate

    def flaky(*args):
        calls["n"] += 1
        if calls["n"] == 1:
            raise np.linalg.LinAlgError("synthetic")
        return real(*args)

    monkeypatch.setattr(QT, "_replicate", flaky)
    res = run_test_k(planted.Z, 3, TestConfig(kind="JB", B=3, seed=0))
    assert calls["n"] == 4
    assert res.resampled_curr.shape == (3,)


def test_test_k_replicate_fails_twice(monkeypatch, planted):
    def broken(*args):
        raise np.linalg.LinAlgError("synthetic")

    monkeypatch.setattr(QT, "_replicate", broken)
    with pytest.raises(np.linalg.LinAlgError):
        run_test_k(planted.Z, 3, TestConfig(kind="JB", B=3))


def test_test_k_bounds(planted):
    with pytest.raises(InputError):
        run_test_k(planted.Z, 0, TestConfig(kind="JB", B=2))
    with pytest.raises(InputError):
        run_test_k(planted.Z, 5, TestConfig(kind="JB", B=2))


def test_gaussian_data_k1_size():
    rejections = 0
    for t in range(30):
        Z = center_whiten(gen_gaussian(500, 2, t)).Z
        res = run_test_k(Z, 1, TestConfig(kind="JB", B=40, seed=t))
        rejections += res.p_curr < 0.05
    assert rejections <= 5


@pytest.mark.parametrize("q_true", [0, 1, 3, 6])
def test_sweep_stops_at_first_non_rejection(q_true):
    Z = np.random.default_rng(0).standard_normal((20, 6))
    sel = select_q_sweep(Z, TestConfig(kind="JB"), tester=_threshold_tester(q_true))
    assert sel.q_selected == q_true
    assert sel.path == list(range(1, min(q_true + 1, 6) + 1))


def test_sweep_non_contiguous_rejections_stop_early():
    pv = {1: 0.0, 2: 0.5, 3: 0.0}
    Z = np.zeros((10, 3)) + np.arange(30).reshape(10, 3) ** 1.5
    sel = select_q_sweep(Z, TestConfig(kind="JB"), tester=lambda Z, k, c: _fake(k, pv[k]))
    assert sel.q_selected == 1
    assert sel.path == [1, 2]


def test_sweep_single_column():
    Z = np.random.default_rng(1).uniform(size=(50, 1))
    sel = select_q_sweep(Z, TestConfig(kind="JB"), tester=_threshold_tester(1))
    assert sel.q_selected == 1 and len(sel.path) <= 2


def test_binary_search_reproduces_eeg_path():
    Z = np.random.default_rng(2).standard_normal((130, 125))
    sel = select_q_binary(Z, TestConfig(kind="JB"), tester=_threshold_tester(115))
    assert sel.path == [63, 94, 110, 118, 114, 116, 115]
    assert sel.q_selected == 115
    assert sel.alpha_corrected == pytest.approx(0.05 / 7, abs=1e-15)


def test_binary_search_uses_corrected_level():
    Z = np.random.default_rng(3).standard_normal((40, 8))
    # p = 0.02 rejects at alpha but not at alpha / 3
    sel = select_q_binary(Z, TestConfig(kind="JB"), tester=lambda Z, k, c: _fake(k, 0.02))
    assert sel.alpha_corrected == pytest.approx(0.05 / 3)
    assert sel.q_selected == 0


def test_binary_search_p1_single_test():
    Z = np.random.default_rng(4).uniform(size=(30, 1))
    sel = select_q_binary(Z, TestConfig(kind="JB"), tester=_threshold_tester(1))
    assert sel.path == [1] and sel.q_selected == 1
    assert sel.alpha_corrected == 0.05


@settings(max_examples=200, deadline=None)
@given(p=st.integers(1, 300), data=st.data())
def test_binary_search_brackets_and_path_length(p, data):
    q_true = data.draw(st.integers(0, p))
    calls = []

    def tester(Z, k, cfg):
        calls.append(k)
        return _fake(k, 0.0 if k <= q_true else 1.0)

    sel = select_q_binary(np.zeros((2, p)) + np.eye(2, p), TestConfig(kind="JB"), tester=tester)
    assert sel.q_selected == q_true
    assert len(sel.path) <= math.ceil(math.log2(p)) + 1
    assert len(sel.path) <= math.ceil(math.log2(p + 1))
    assert sel.path == calls
    assert n_binary_tests(p) == max(1, math.ceil(math.log2(p)))


def test_select_q_dispatch():
    Z = np.random.default_rng(5).standard_normal((20, 3))
    assert select_q(Z, TestConfig(kind="JB"), "binary", _threshold_tester(2)).search == "binary"
    with pytest.raises(InputError):
        select_q(Z, TestConfig(kind="JB"), "linear")


def test_selection_result_serializes(planted):
    sel = select_q_sweep(planted.Z, TestConfig(kind="JB", B=5), tester=_threshold_tester(2))
    d = sel.to_dict()
    assert d["q_selected"] == 2 and d["path"] == [1, 2, 3]
    assert len(d["tests"]) == 3
