import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from oracles import bisect, central_difference, grid_argmin, rho_root_mp, sign_changes_on_positive_axis, t_root_mp
from xtalk.asymptotics import (
    INFINITE,
    Regime,
    VarianceProfile,
    asymptotic_rate,
    asymptotic_sinr,
    extremal_interval,
    gamma_deterministic,
    hachem_fixed_point,
    mmse_cubic_spq,
    mmse_extremal_sigma,
    mmse_regime_approx,
    mmse_snr_asymptotic,
    mmse_snr_cardano,
    mmse_snr_derivative,
    mmse_snr_residual,
    theorem2_bounds,
    wireless_mmse_snr,
    zf_gamma_asymptotic,
)
from xtalk.cancelers import Canceler
from xtalk.errors import DerivativeSingularError, NoConvergenceError, OutOfDomainError

etas = st.floats(1e-6, 1e8)
sigma2s = st.floats(0.0, 20.0)


# ---- gamma_deterministic ---------------------------------------------------

def test_gamma_no_fext():
    assert gamma_deterministic(0.0, 9.0).gamma_o == pytest.approx(0.9, rel=1e-15)


def test_gamma_unit_case_against_bisection():
    ref = bisect(lambda t: t ** 3 + 2 * t ** 2 + t - 1, 0.0, 1.0)
    res = gamma_deterministic(1.0, 1.0)
    assert abs(res.gamma_o - ref) < 1e-10
    assert res.gamma_o == pytest.approx(0.46557, abs=5e-6)
    assert res.solver_residual < 1e-12


def test_gamma_large_xi_approaches_zf():
    assert gamma_deterministic(0.25, 1e9).gamma_o == pytest.approx(4 / 3, rel=1e-6)
    for s2 in (0.1, 0.5, 0.9):
        assert gamma_deterministic(s2, 1e10).gamma_o == pytest.approx(1 / (1 - s2), rel=1e-5)


def test_gamma_infinite_xi_routes_to_zf():
    res = gamma_deterministic(0.5, INFINITE)
    assert res.gamma_o == 2.0 and not res.divergent
    assert gamma_deterministic(1.0, INFINITE).divergent


@given(sigma2s, etas)
def test_gamma_matches_high_precision_root(s2, xi):
    res = gamma_deterministic(s2, xi)
    assert res.gamma_o == pytest.approx(t_root_mp(s2, xi), rel=1e-11)
    assert res.solver_residual < 1e-10
    assert 0 < res.gamma_o < xi


def test_gamma_array_path():
    s2 = np.array([0.0, 0.5, 2.0])
    g, resid = gamma_deterministic(s2, 10.0)
    for k, s in enumerate(s2):
        assert g[k] == pytest.approx(gamma_deterministic(float(s), 10.0).gamma_o, rel=1e-14)
    assert np.all(resid < 1e-10)


@pytest.mark.parametrize("s2,xi", [(-0.1, 1.0), (0.1, 0.0), (0.1, -3.0)])
def test_gamma_domain(s2, xi):
    with pytest.raises(OutOfDomainError):
        gamma_deterministic(s2, xi)


# ---- ZF --------------------------------------------------------------------

def test_zf_values():
    assert zf_gamma_asymptotic(0.0).gamma == 1.0
    assert zf_gamma_asymptotic(0.5).gamma == 2.0
    z = zf_gamma_asymptotic(1.25)
    assert z.divergent and math.isinf(z.gamma)
    assert z.divergence_rate == pytest.approx(0.4, rel=1e-15)
    assert zf_gamma_asymptotic(1.0).divergent


def test_zf_divergence_rate_matches_t_growth():
    # t/sqrt(xi) tends to the reported rate for sigma2 > 1
    s2 = 2.0
    xi = 1e12
    t = gamma_deterministic(s2, xi).gamma_o
    assert t / math.sqrt(xi) == pytest.approx(zf_gamma_asymptotic(s2).divergence_rate, rel=1e-4)


# ---- MMSE ------------------------------------------------------------------

def test_mmse_examples():
    assert mmse_snr_asymptotic(5.0, 0.0) == pytest.approx(5.0, rel=1e-14)
    assert mmse_snr_asymptotic(1e-6, 1e6) == pytest.approx(-0.5 + 0.5 * math.sqrt(5), rel=1e-5)
    assert mmse_snr_asymptotic(1e6, 0.5) == pytest.approx(0.5e6, rel=5e-3)


@given(etas, sigma2s)
def test_mmse_matches_high_precision_root(eta, s2):
    rho = mmse_snr_asymptotic(eta, s2)
    assert rho == pytest.approx(rho_root_mp(eta, s2), rel=1e-11)
    assert float(mmse_snr_residual(eta, s2, rho)) < 1e-10


@given(etas, sigma2s)
def test_mmse_consistent_with_t_cubic(eta, s2):
    rho = mmse_snr_asymptotic(eta, s2)
    gamma = gamma_deterministic(s2, eta).gamma_o
    assert rho == pytest.approx(eta / gamma - 1.0, rel=1e-9, abs=1e-9 * eta)


@given(st.floats(1e-4, 1e6), st.floats(0.0, 10.0))
def test_mmse_cubic_has_one_positive_root(eta, s2):
    S, Q, P = (float(v) for v in mmse_cubic_spq(eta, s2))
    assert sign_changes_on_positive_axis([1.0, -S, Q, -P], 4 * (eta * (1 + s2) + 1)) == 1


@pytest.mark.parametrize("eta,s2", [(1e-4, 0.5), (0.3, 2.0), (10.0, 0.5), (1e3, 0.99), (1e3, 1.01),
                                    (1e6, 3.0), (2.0, 0.0)])
def test_cardano_cross_check(eta, s2):
    c = mmse_snr_cardano(eta, s2)
    assert c.rho == pytest.approx(mmse_snr_asymptotic(eta, s2), rel=1e-6)
    assert c.branch in (0, 1, 2)
    assert abs(c.imag) <= 1e-6 * c.rho


def test_mmse_vectorizes():
    eta = np.array([[1.0], [100.0]])
    s2 = np.array([0.0, 0.5, 2.0])
    out = mmse_snr_asymptotic(eta, s2)
    assert out.shape == (2, 3)
    assert out[1, 1] == pytest.approx(mmse_snr_asymptotic(100.0, 0.5), rel=1e-14)


# ---- regimes ---------------------------------------------------------------

def test_regime_examples():
    low = mmse_regime_approx(1e-4, 0.5)
    assert low.regime is Regime.LOW_SNR and low.value == pytest.approx(1.5e-4, rel=1e-14)
    crit = mmse_regime_approx(1e6, 1.0)
    assert crit.regime is Regime.HIGH_SNR_CRIT and crit.value == pytest.approx(1e4, rel=1e-12)
    small = mmse_regime_approx(0.01, 0.001)
    assert small.regime is Regime.SMALL_SIGMA
    assert small.value == pytest.approx(0.01 + 0.01 * (0.99 / 1.01) * 0.001, rel=1e-14)
    assert mmse_regime_approx(1e6, 0.5).regime is Regime.HIGH_SNR_SUB
    assert mmse_regime_approx(1e6, 4.0).regime is Regime.HIGH_SNR_SUPER
    assert mmse_regime_approx(1e6, 400.0).regime is Regime.LARGE_SIGMA
    mid = mmse_regime_approx(3.0, 0.5)
    assert mid.regime is Regime.EXACT and mid.value == mmse_snr_asymptotic(3.0, 0.5)


def test_high_snr_approximations_track_root():
    assert mmse_regime_approx(1e8, 0.5).value == pytest.approx(mmse_snr_asymptotic(1e8, 0.5), rel=1e-3)
    assert mmse_regime_approx(1e8, 4.0).value == pytest.approx(mmse_snr_asymptotic(1e8, 4.0), rel=1e-3)
    assert mmse_regime_approx(1e-6, 2.0).value == pytest.approx(mmse_snr_asymptotic(1e-6, 2.0), rel=1e-4)


# ---- derivative and extremum -------------------------------------------------

def test_derivative_examples():
    assert mmse_snr_derivative(3.0, 0.0, 3.0) == pytest.approx(-1.5, rel=1e-14)
    assert mmse_snr_derivative(1.0, 0.0, 1.0) == 0.0


def test_derivative_against_finite_differences():
    rng = np.random.default_rng(21)
    errs = []
    for _ in range(1000):
        eta = 10 ** rng.uniform(-3, 6)
        s2 = rng.uniform(0.01, 5.0)
        rho = mmse_snr_asymptotic(eta, s2)
        try:
            d = mmse_snr_derivative(eta, s2, rho)
        except DerivativeSingularError:
            continue
        h = 1e-6 * max(1.0, s2)
        fd = central_difference(lambda x: mmse_snr_asymptotic(eta, x), s2, h)
        scale = max(abs(d), 1e-6 * rho / max(s2, 1.0))
        errs.append(abs(fd - d) / scale)
    assert len(errs) > 900
    assert max(errs) < 1e-4


def test_derivative_singular_denominator():
    # den = 3 rho^2 - 2 S rho + 1 - 2 eta vanishes at eta = 0.5, rho = 0, sigma2 = 0
    with pytest.raises(DerivativeSingularError):
        mmse_snr_derivative(0.5, 0.0, 0.0)


@pytest.mark.parametrize("eta", [0.2, 0.5, 1.0])
def test_no_extremum_for_small_eta(eta):
    assert mmse_extremal_sigma(eta) is None
    grid = np.arange(0.0, 10.0 + 5e-4, 1e-3)
    assert np.all(np.diff(mmse_snr_asymptotic(eta, grid)) > 0)


def test_extremum_high_snr():
    ext = mmse_extremal_sigma(1e6)
    lo, hi = extremal_interval(1e6)
    assert 1.9 <= ext.sigma_star2 <= 2.0
    assert lo < ext.sigma_star2 < hi
    # stationarity: rho*^2 = 2 eta sigma*^2 + 1
    assert ext.rho_star ** 2 == pytest.approx(2e6 * ext.sigma_star2 + 1, rel=1e-8)


def test_extremum_eta_10_against_grid_scan():
    lo, hi = extremal_interval(10.0)
    assert (lo, hi) == pytest.approx((0.9, 1 - 0.2 + math.sqrt(1 - 0.2 + 0.02)), rel=1e-14)
    ext = mmse_extremal_sigma(10.0)
    s_grid, _ = grid_argmin(lambda s: mmse_snr_asymptotic(10.0, s), 0.0, 3.0, 1e-4)
    assert abs(ext.sigma_star2 - s_grid) <= 1e-4
    assert lo < ext.sigma_star2 < hi


@given(st.floats(1.5, 1e7))
def test_single_local_minimum_inside_interval(eta):
    grid = np.arange(0.0, 10.0 + 5e-4, 1e-3)
    rho = mmse_snr_asymptotic(eta, grid)
    d = np.diff(rho)
    turns = np.nonzero((d[:-1] < 0) & (d[1:] >= 0))[0]
    assert len(turns) <= 1
    ext = mmse_extremal_sigma(eta)
    lo, hi = extremal_interval(eta)
    assert lo - 1e-12 <= ext.sigma_star2 <= hi + 1e-12
    if len(turns) == 1:
        assert abs(grid[turns[0] + 1] - ext.sigma_star2) <= 2e-3


def test_derivative_at_zero_closed_form():
    for eta in (0.2, 0.5, 1.0, 3.0, 1e6):
        rho0 = mmse_snr_asymptotic(eta, 0.0)
        assert mmse_snr_derivative(eta, 0.0, rho0) == pytest.approx(eta * (1 - eta) / (eta + 1), rel=1e-8,
                                                                     abs=1e-12)


# ---- wireless limit --------------------------------------------------------

def test_wireless_examples():
    assert wireless_mmse_snr(0.0) == 0.0
    assert wireless_mmse_snr(2.0) == pytest.approx(1.0, rel=1e-15)
    assert mmse_snr_asymptotic(1e-8, 2e8) == pytest.approx(wireless_mmse_snr(2.0), rel=1e-4)


@given(st.floats(0.0, 1e6))
def test_wireless_formula(c):
    assert wireless_mmse_snr(c) == pytest.approx(-0.5 + 0.5 * math.sqrt(1 + 4 * c), rel=1e-12, abs=1e-15)


# ---- fixed point -------------------------------------------------------------

def test_fixed_point_zero_profile():
    res = hachem_fixed_point(VarianceProfile(np.zeros((4, 4))), 3.0)
    np.testing.assert_allclose(res.t, 0.75, rtol=1e-12)


@pytest.mark.parametrize("n", [10, 50])
@pytest.mark.parametrize("xi", [1.0, 100.0, 1e6])
@pytest.mark.parametrize("s2", [0.3, 0.8])
def test_fixed_point_homogeneous_matches_cubic(n, xi, s2):
    res = hachem_fixed_point(VarianceProfile.homogeneous(n, s2), xi)
    assert res.mean_t == pytest.approx(gamma_deterministic(s2, xi).gamma_o, rel=1e-8)
    np.testing.assert_allclose(res.t, res.t_tilde, rtol=1e-10)


def test_fixed_point_heterogeneous_sandwich():
    rng = np.random.default_rng(2)
    n = 60
    p = rng.uniform(0.2, 0.5, (n, n))
    res = hachem_fixed_point(VarianceProfile.from_total_powers(p), 1e6)
    b = theorem2_bounds(0.5, 0.2)
    assert b.lower * (1 - 1e-3) <= res.mean_t <= b.upper * (1 + 1e-3)


def test_fixed_point_reports_non_convergence():
    with pytest.raises(NoConvergenceError) as exc:
        hachem_fixed_point(VarianceProfile.homogeneous(10, 0.9), 1e6, max_iter=3)
    assert exc.value.iterations == 3


def test_profile_validation():
    with pytest.raises(OutOfDomainError):
        VarianceProfile(np.ones((3, 3)))
    with pytest.raises(OutOfDomainError):
        VarianceProfile(-np.ones((3, 3)) + np.eye(3))


def test_theorem2_bounds():
    assert theorem2_bounds(0.0, 0.0) == (1.0, 1.0)
    assert theorem2_bounds(0.5, 0.2) == pytest.approx((2.0, 1.25))
    assert theorem2_bounds(0.3, 0.3) == pytest.approx((1 / 0.7, 1 / 0.7))
    with pytest.raises(OutOfDomainError):
        theorem2_bounds(1.0, 0.2)


# ---- rates -------------------------------------------------------------------

def test_rate_examples():
    assert asymptotic_rate(100.0, 0.0, "ZF") == pytest.approx(math.log2(101.0), rel=1e-15)
    assert asymptotic_rate(100.0, 1.0, Canceler.ZF) == 0.0
    assert asymptotic_rate(100.0, 2.5, Canceler.ZF) == 0.0
    rho = mmse_snr_asymptotic(1e3, 2.0)
    assert asymptotic_rate(1e3, 2.0, "MMSE") == pytest.approx(math.log2(1 + rho), rel=1e-15)
    approx = 2.0 / math.sqrt(1.0) * math.sqrt(1e3)
    assert rho == pytest.approx(approx, rel=0.1)


@given(etas, sigma2s)
def test_zf_never_beats_mmse(eta, s2):
    assume(eta * s2 < 1e12)
    assert asymptotic_sinr(eta, s2, "ZF") <= asymptotic_sinr(eta, s2, "MMSE") * (1 + 1e-12)
