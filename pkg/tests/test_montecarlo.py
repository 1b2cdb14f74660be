import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from xtalk.cancelers import Canceler
from xtalk.channel import ChannelRealization, DirectModelParams, FextModelParams, RngSpec, generate_realization
from xtalk.errors import InvalidDimensionError
from xtalk.montecarlo import (
    EnsembleStats,
    RunningStats,
    SequenceSpec,
    build_sigma_n,
    convergence_experiment,
    gamma_tilde,
    ordered_map,
    scatter_experiment,
    thread_count,
)


def test_sigma_n_at_target_size_equals_plain_realization():
    fext = FextModelParams.calibrated(0.3, 6)
    a = build_sigma_n(6, 6, fext, RngSpec(1, 2))
    b = generate_realization(DirectModelParams(0.0, 0.0), fext, 6, RngSpec(1, 2))
    assert np.array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.d, 1.0)


def test_sigma_n_scaling_factor():
    fext = FextModelParams.calibrated(0.3, 5)
    a = build_sigma_n(2, 5, fext, RngSpec(3))
    b = generate_realization(DirectModelParams(0.0, 0.0), fext, 2, RngSpec(3))
    np.testing.assert_allclose(np.abs(a.q) ** 2, 4.0 * np.abs(b.q) ** 2, rtol=1e-14)


def test_row_power_constant_across_n():
    m_target = 200
    fext = FextModelParams.calibrated(0.3, m_target)
    means = {}
    for n in (10, 50, 200):
        draws = 10_000 // n + 1
        rows = [build_sigma_n(n, m_target, fext, RngSpec(4, k, (n,))).fext_power_per_user() for k in range(draws)]
        means[n] = float(np.mean(rows))
    for n, v in means.items():
        assert v == pytest.approx(0.3, rel=2e-2), (n, v)


def test_sigma_n_validation():
    with pytest.raises(InvalidDimensionError):
        build_sigma_n(1, 5, FextModelParams(1.0, 0.0), RngSpec(0))


def test_gamma_tilde_identity():
    r = ChannelRealization(np.ones(7), np.zeros((7, 7)))
    assert gamma_tilde(r, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert gamma_tilde(r, math.inf) == pytest.approx(1.0, rel=1e-15)


def test_gamma_tilde_zf_average_near_asymptote():
    fext = FextModelParams.calibrated(0.3, 200)
    vals = [gamma_tilde(build_sigma_n(200, 200, fext, RngSpec(5, k)), math.inf) for k in range(200)]
    assert np.mean(vals) == pytest.approx(1 / 0.7, rel=5e-2)


def test_convergence_error_shrinks():
    spec = SequenceSpec(200, (10, 20, 50, 100, 200), FextModelParams.calibrated(0.3, 200))
    rows = convergence_experiment(spec, math.inf, trials=200, seed=1)
    err = [abs(st_.mean_gamma_bar - st_.gamma_det) for _, st_ in rows]
    sem = [st_.std_gamma_bar / math.sqrt(st_.trials) for _, st_ in rows]
    for k in range(1, len(rows)):
        assert err[k] <= err[k - 1] + 3 * (sem[k] + sem[k - 1])
    assert err[-1] / rows[-1][1].gamma_det < 0.05


def test_single_trial_statistics():
    spec = SequenceSpec(20, (20,), FextModelParams.calibrated(0.4, 20))
    (_, st_), = convergence_experiment(spec, math.inf, trials=1, seed=2)
    assert st_.std_gamma_bar == 0.0
    assert st_.coeff_variation == pytest.approx(abs(st_.mean_gamma_bar - st_.gamma_det) / st_.mean_gamma_bar,
                                                rel=1e-14)


def test_cov_shrinks_with_size_mmse():
    out = {}
    for m in (20, 100):
        spec = SequenceSpec(m, (m,), FextModelParams.calibrated(0.5, m))
        (_, st_), = convergence_experiment(spec, 10.0, trials=200, seed=3)
        out[m] = st_.coeff_variation
    assert out[100] < out[20]


def test_cov_infinite_for_divergent_zf():
    st_ = EnsembleStats.from_samples([1.0, 2.0], math.inf)
    assert math.isinf(st_.coeff_variation)


def test_scatter_rows_and_zero_sigma():
    rows = scatter_experiment([10, 20], [0.0, 0.2, 0.4], eta_db=10.0, trials=20, seed=4)
    assert len(rows) == 2 * 3 * 2
    zero = [r for r in rows if r.sigma2 == 0.0 and r.canceler is Canceler.ZF]
    for r in zero:
        assert r.gamma_det == 1.0 and r.gamma_emp == pytest.approx(1.0, rel=1e-14)
    mm = [r for r in rows if r.sigma2 == 0.0 and r.canceler is Canceler.MMSE]
    for r in mm:
        assert r.gamma_det == pytest.approx(10 / 11, rel=1e-12)


def test_scatter_zf_accurate_below_half():
    rows = scatter_experiment([50], [0.1, 0.3, 0.5], eta_db=30.0, trials=100, seed=5)
    for r in rows:
        if r.canceler is Canceler.ZF:
            assert r.gamma_emp == pytest.approx(r.gamma_det, rel=5e-2)


def test_parallel_schedule_independence():
    spec = SequenceSpec(30, (10, 30), FextModelParams.calibrated(0.3, 30))
    a = convergence_experiment(spec, 100.0, trials=12, seed=6, threads=1)
    b = convergence_experiment(spec, 100.0, trials=12, seed=6, threads=4)
    assert a == b


def test_thread_count(monkeypatch):
    monkeypatch.setenv("XTALK_THREADS", "3")
    assert thread_count() == 3
    assert thread_count(2) == 2
    monkeypatch.setenv("XTALK_THREADS", "0")
    assert thread_count() == 1


def test_ordered_map_preserves_order():
    assert ordered_map(lambda x: x * x, range(50), threads=4) == [x * x for x in range(50)]


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=200))
def test_welford_matches_two_pass(xs):
    acc = RunningStats().extend(xs)
    mean = sum(xs) / len(xs)
    var = sum((x - mean) ** 2 for x in xs) / len(xs)
    assert acc.mean == pytest.approx(mean, rel=1e-10, abs=1e-10 * max(map(abs, xs)))
    assert acc.variance == pytest.approx(var, rel=1e-10, abs=1e-10 * max(x * x for x in xs))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_welford_merge(xs, ys):
    merged = RunningStats().extend(xs).merge(RunningStats().extend(ys))
    whole = RunningStats().extend(xs + ys)
    assert merged.count == whole.count
    assert merged.mean == pytest.approx(whole.mean, rel=1e-10, abs=1e-9)
    assert merged.variance == pytest.approx(whole.variance, rel=1e-8, abs=1e-8)
