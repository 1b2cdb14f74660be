import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import t_root_mp
from xtalk import _accel, kernels

positive = st.floats(1e-6, 1e8)
sigma2s = st.floats(0.0, 50.0)


def _t_coeffs(s, xi):
    s = np.asarray(s, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return s * s, 2 * s, 1 + xi - xi * s, -xi


def test_backends_agree_on_cubic_batch():
    rng = np.random.default_rng(0)
    s = rng.uniform(0, 5, 500)
    xi = 10 ** rng.uniform(-4, 9, 500)
    c = _t_coeffs(s, xi)
    r_np, _ = kernels.cubic_positive_root_numpy(*c, xi, np.minimum(xi, 1.0))
    r_jit, _ = kernels.cubic_positive_root_jit(*c, xi, np.minimum(xi, 1.0))
    np.testing.assert_allclose(r_np, r_jit, rtol=1e-13)


def test_cubic_without_initial_guess():
    roots, _ = kernels.cubic_positive_root(*_t_coeffs(1.0, 1.0), 1.0)
    assert roots.shape == (1,)
    assert roots[0] == pytest.approx(0.465571231876768, rel=1e-12)


@given(sigma2s, positive)
def test_cubic_root_matches_high_precision(s, xi):
    roots, _ = kernels.cubic_positive_root(*_t_coeffs(s, xi), xi)
    assert roots[0] == pytest.approx(t_root_mp(s, xi), rel=1e-11)


@given(sigma2s, positive)
def test_cubic_residual_small(s, xi):
    c = _t_coeffs(s, xi)
    roots, _ = kernels.cubic_positive_root(*c, xi)
    assert kernels.cubic_relative_residual(*c, roots)[0] < 1e-10


def test_cubic_root_is_below_bracket_and_positive():
    s = np.linspace(0, 10, 101)
    xi = np.full_like(s, 1e3)
    roots, _ = kernels.cubic_positive_root(*_t_coeffs(s, xi), xi)
    assert np.all(roots > 0) and np.all(roots < xi)


def test_fixed_point_backends_agree():
    rng = np.random.default_rng(3)
    var = rng.uniform(0.1, 0.9, (30, 30))
    np.fill_diagonal(var, 0.0)
    a = kernels.fixed_point_numpy(var, 50.0, 0.5, 1e-12, 100_000, 1.0)
    b = kernels.fixed_point_jit(var, 50.0, 0.5, 1e-12, 100_000, 1.0)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-11)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-11)
    assert a[3] < 1e-12 and b[3] < 1e-12


def test_fixed_point_zero_profile_decouples():
    xi = 4.0
    t, tt, iters, resid = kernels.fixed_point(np.zeros((5, 5)), xi, init=1.0)
    np.testing.assert_allclose(t, xi / (1 + xi), rtol=1e-12)
    np.testing.assert_allclose(tt, xi / (1 + xi), rtol=1e-12)


def test_backend_name_reflects_flag():
    assert _accel.backend_name() in ("numba", "numpy")
    assert _accel.NUMBA_ENABLED == (_accel.backend_name() == "numba")


def test_numpy_fallback_via_env(tmp_path):
    import subprocess
    import sys

    code = ("from xtalk import _accel, asymptotics; "
            "print(_accel.backend_name(), repr(asymptotics.gamma_deterministic(1.0, 1.0).gamma_o))")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={**__import__("os").environ, "XTALK_NUMBA": "0"}, check=True).stdout.split()
    assert out[0] == "numpy"
    assert float(out[1]) == pytest.approx(0.465571231876768, rel=1e-12)
