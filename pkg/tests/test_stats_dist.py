import math
import time

import mpmath
import numpy as np
import pytest

from mqr.errors import InvalidIntervalError
from mqr.stats_dist import (
    GAUSSIAN,
    GUMBEL,
    NoiseSpec,
    RngStream,
    check_assumption1,
    default_assumption_grid,
    gaussian_cdf,
    gaussian_sample,
    gumbel_cdf,
    gumbel_ppf,
    gumbel_sample,
    integrate,
    noise_moments,
)

mpmath.mp.dps = 50


def _mp_ncdf(x):
    return float(mpmath.ncdf(mpmath.mpf(x)))


# ---- gaussian_cdf -----------------------------------------------------------


def test_gaussian_cdf_against_mpmath():
    xs = np.concatenate([np.linspace(-38, 38, 761), [0.2121, -0.2121, 8.0, -8.0, 1e-9]])
    got = gaussian_cdf(xs)
    ref = np.array([_mp_ncdf(x) for x in xs])
    assert np.max(np.abs(got - ref)) <= 1e-12


def test_gaussian_cdf_examples():
    assert gaussian_cdf(0.0) == 0.5
    # 1 - Phi(8) = 6.2210e-16 (erfc oracle); near 1 doubles are spaced 1.1e-16 apart
    assert abs((1.0 - gaussian_cdf(8.0)) - 6.22e-16) <= 1.2e-16
    assert gaussian_cdf(-8.0) == pytest.approx(6.2210e-16, rel=1e-4)
    assert gaussian_cdf(8.0) >= 1 - 1e-15
    assert gaussian_cdf(0.2121) == pytest.approx(0.5840, abs=5e-5)


def test_gaussian_cdf_symmetry_and_monotone():
    x = np.linspace(-10, 10, 20001)
    f = gaussian_cdf(x)
    assert np.max(np.abs(f + gaussian_cdf(-x) - 1.0)) <= 1e-14
    assert np.all(np.diff(f) >= 0)


# ---- sampling ---------------------------------------------------------------


def _ks_stat(sample, cdf):
    s = np.sort(sample)
    n = len(s)
    f = cdf(s)
    return max(np.max(np.arange(1, n + 1) / n - f), np.max(f - np.arange(n) / n))


def test_gaussian_sample_moments():
    x = gaussian_sample(RngStream(11), 10**6)
    assert abs(x.mean()) < 0.005
    assert 0.99 <= x.var(ddof=1) <= 1.01


def test_gaussian_sample_ks():
    x = gaussian_sample(RngStream(12), 10**5)
    # asymptotic 99% critical value of the one-sample KS statistic
    assert _ks_stat(x, gaussian_cdf) < 1.6276 / math.sqrt(len(x))


def test_stream_determinism_and_independence():
    a = RngStream(5, 3).uniform(1000)
    b = RngStream(5, 3).uniform(1000)
    c = RngStream(5, 4).uniform(1000)
    d = RngStream(5, 3).child(1).uniform(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_stream_rejects_bad_seed():
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(2**64)
    RngStream(2**64 - 1, 2**64 - 1).uniform(3)


def test_uniform_clamped_open_interval():
    u = RngStream(1).uniform(10**5)
    assert u.min() > 0 and u.max() < 1


# ---- Gumbel -----------------------------------------------------------------


def test_gumbel_cdf_examples():
    assert gumbel_cdf(0.0) == pytest.approx(0.367879, abs=1e-6)
    assert abs(gumbel_cdf(40.0) - 1.0) <= 1e-15
    assert gumbel_cdf(-1.0) == pytest.approx(0.065988, abs=1e-6)
    assert gumbel_cdf(0.0) == math.exp(-1.0)


def test_gumbel_ppf_inverse():
    assert gumbel_ppf(math.exp(-1.0)) == pytest.approx(0.0, abs=1e-15)
    u = np.linspace(0.001, 0.999, 999)
    assert np.allclose(gumbel_cdf(gumbel_ppf(u)), u, atol=1e-14, rtol=0)


def test_gumbel_sample_moments():
    x = gumbel_sample(RngStream(21), 10**6)
    assert 0.570 <= x.mean() <= 0.585
    assert 1.27 <= x.std(ddof=1) <= 1.30


def test_gumbel_sample_ks():
    x = gumbel_sample(RngStream(22), 10**5)
    assert _ks_stat(x, gumbel_cdf) < 1.6276 / math.sqrt(len(x))


# ---- NoiseSpec and moments --------------------------------------------------


def test_noise_moments():
    assert noise_moments(GAUSSIAN) == (0.0, 1.0)
    m, s = noise_moments(GUMBEL)
    # oracle: numerical integration of x dF and x^2 dF
    pdf = lambda x: np.exp(-x - np.exp(-x))
    m_num = integrate(lambda x: x * pdf(x), -6, 40, 400)
    v_num = integrate(lambda x: (x - m_num) ** 2 * pdf(x), -6, 40, 400)
    assert m == pytest.approx(m_num, abs=1e-4)
    assert s == pytest.approx(math.sqrt(v_num), abs=1e-4)
    assert (m, s) == pytest.approx((0.57722, 1.28255), abs=1e-4)
    for spec in (GAUSSIAN, GUMBEL):
        assert spec.moments()[0] >= 0


def test_noise_spec_parse_and_log_tails():
    assert NoiseSpec.parse("Gaussian") == GAUSSIAN
    assert NoiseSpec.parse("gumbel") == GUMBEL
    with pytest.raises(ValueError):
        NoiseSpec.parse("cauchy")
    x = np.linspace(-5, 5, 101)
    for spec in (GAUSSIAN, GUMBEL):
        assert np.allclose(np.exp(spec.logcdf(x)), spec.cdf(x), rtol=1e-12)
        assert np.allclose(np.exp(spec.logsf(x)), 1 - spec.cdf(x), rtol=1e-9, atol=1e-15)


# ---- tail conditions --------------------------------------------------------


@pytest.mark.parametrize("spec", [GAUSSIAN, GUMBEL], ids=["gaussian", "gumbel"])
def test_assumption1_holds(spec):
    t0 = time.perf_counter()
    rep = check_assumption1(spec, default_assumption_grid(40.0, 0.01))
    assert rep.n_points == 4001
    assert rep.ok, rep.violations[:5]
    assert time.perf_counter() - t0 < 5


def test_assumption1_synthetic_heavy_tail_violates():
    # F(x) = x / (1 + x) on x >= 0, mirrored as 1/2 + x / (2 (1 + |x|))
    cdf = lambda x: 0.5 + np.asarray(x) / (2.0 * (1.0 + np.abs(x)))
    rep = check_assumption1(cdf, default_assumption_grid())
    assert not rep.ok
    # the polynomial left tail cannot sit below exp(-x^2/2)/2
    assert any(v[0] == 2 for v in rep.violations)
    # oracle for the x = 8 point of the tail condition
    assert cdf(-8.0) > 0.5 * math.exp(-32.0)


def test_assumption1_grid_must_be_nonnegative():
    with pytest.raises(ValueError):
        check_assumption1(GAUSSIAN, [-1.0, 0.0])


# ---- quadrature -------------------------------------------------------------


def test_integrate_examples():
    assert integrate(lambda x: np.ones_like(x), 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert abs(integrate(lambda x: x**2, 0.0, 1.0, n_nodes=2) - 1.0 / 3.0) < 1e-14
    pdf = lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    assert abs(integrate(pdf, -8.0, 8.0, n_nodes=64) - 1.0) < 1e-10


def test_integrate_errors():
    with pytest.raises(InvalidIntervalError):
        integrate(np.sin, 1.0, 1.0)
    with pytest.raises(InvalidIntervalError):
        integrate(np.sin, 2.0, 1.0)
    with pytest.raises(ValueError):
        integrate(np.sin, 0.0, 1.0, n_nodes=1)
