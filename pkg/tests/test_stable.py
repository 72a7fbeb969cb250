import math

import numpy as np
import pytest
from scipy import integrate

from shotdown import StableLaw
from shotdown.stable import (
    StableError, density, fourier_density_1, levy_constant, positive_stable_logpdf_direct,
    series_density_1, subordinator_logpdf,
)
from shotdown.rng import stream


def test_levy_constant_cauchy():
    # d = 1, alpha = 1: nu(z) = 1 / (pi z^2)
    assert levy_constant(1, 1.0) == pytest.approx(1 / math.pi)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_subordinator_laplace_transform(alpha):
    law = StableLaw(2, alpha)
    s = law.sample_subordinator(1.0, stream(3), 200_000)
    for lam in (0.5, 1.0, 2.0):
        v = np.exp(-lam * s)
        se = v.std() / math.sqrt(len(v))
        assert abs(v.mean() - math.exp(-lam ** (alpha / 2))) < 4 * se


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_subordinator_density_integrates_to_one(alpha):
    f = lambda s: math.exp(subordinator_logpdf(alpha, 1.0, s))
    total = integrate.quad(f, 0, np.inf, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-4)


def test_subordinator_density_scales_in_t():
    a, t, s = 1.2, 0.3, np.array([0.05, 0.4, 2.0])
    b = a / 2
    direct = subordinator_logpdf(a, 1.0, s / t ** (1 / b)) - math.log(t ** (1 / b))
    assert np.allclose(subordinator_logpdf(a, t, s), direct)
    assert np.allclose(subordinator_logpdf(a, np.full(3, t), s), direct)


def test_kanter_direct_matches_table():
    x = np.array([0.3, 1.0, 4.0])
    assert np.allclose(positive_stable_logpdf_direct(0.6, x), subordinator_logpdf(1.2, 1.0, x), atol=1e-6)


def test_cauchy_pdf_closed_form():
    law = StableLaw(1, 1.0)
    x = np.array([[0.0], [1.0], [3.0]])
    assert np.allclose(law.pdf(1.0, x), 1 / (math.pi * (1 + x[:, 0] ** 2)))


@pytest.mark.parametrize("d,alpha", [(1, 0.7), (2, 1.5), (2, 0.5)])
def test_density_routes_agree(d, alpha):
    for rho in (0.5, 3.0, 10.0):
        f, _ = fourier_density_1(d, alpha, rho)
        # the series converges for alpha < 1 and is only asymptotic above
        if rho >= (3.0 if alpha < 1 else 10.0):
            assert series_density_1(d, alpha, rho)[0] == pytest.approx(f, rel=1e-6 if alpha < 1 else 1e-4)
        law = StableLaw(d, alpha)
        x = np.zeros(d)
        x[0] = rho
        assert law.pdf(1.0, x) == pytest.approx(f, rel=1e-5)


def test_density_normalised_d1():
    law = StableLaw(1, 1.3)
    total = integrate.quad(lambda x: float(law.pdf(1.0, np.array([x]))), -np.inf, np.inf, limit=200)[0]
    assert total == pytest.approx(1.0, abs=1e-5)


def test_density_certified():
    law = StableLaw(2, 1.0)
    ev = density(law, 0.5, np.array([0.3, 0.4]))
    assert ev.abs_error_bound == 0.0
    assert ev.value == pytest.approx(float(law.pdf(0.5, np.array([0.3, 0.4]))), rel=1e-8)
    other = density(StableLaw(2, 1.4), 0.5, np.array([0.3, 0.4]))
    assert other.abs_error_bound <= 1e-10


def test_increment_scaling():
    law = StableLaw(2, 1.5)
    a = law.sample_increment(4.0, stream(5), 200_000)
    b = law.sample_increment(1.0, stream(6), 200_000) * 4 ** (1 / 1.5)
    qa = np.quantile(np.linalg.norm(a, axis=1), [0.25, 0.5, 0.75])
    qb = np.quantile(np.linalg.norm(b, axis=1), [0.25, 0.5, 0.75])
    assert np.allclose(qa, qb, rtol=0.02)


def test_big_jumps_exceed_cutoff():
    law = StableLaw(2, 0.8)
    wait, z = law.sample_big_jump(0.3, stream(7), 10_000)
    assert np.all(np.linalg.norm(z, axis=1) >= 0.3)
    assert wait.mean() == pytest.approx(1 / law.big_jump_rate(0.3), rel=0.05)


def test_levy_measure_tail_consistent():
    law = StableLaw(2, 1.2)
    assert law.big_jump_rate(0.5) == pytest.approx(2 * math.pi * float(law.radial_tail(0.5)))


@pytest.mark.parametrize("alpha", [0.0, 2.0, 2.5, -1])
def test_alpha_range(alpha):
    with pytest.raises(StableError):
        StableLaw(2, alpha)


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (1, 1.5), (2, 0.5), (2, 1.0), (2, 1.5)])
def test_density_is_comparable_to_envelope(d, alpha):
    # calibrated band: observed ratios lie in [0.029, 1.91] over t in [0.1, 3], rho in [1e-2, 30]
    law = StableLaw(d, alpha)
    for t in (0.1, 1.0, 3.0):
        for rho in np.geomspace(1e-2, 30, 9):
            x = np.zeros(d)
            x[0] = rho
            q = float(law.pdf(t, x)) / float(law.envelope(t, x))
            assert 0.02 < q < 2.5
