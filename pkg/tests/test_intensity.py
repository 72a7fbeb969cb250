import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from shotdown import StableLaw, annulus
from shotdown.geometry import HalfSpace, Domain, ball, harnack7
from shotdown.intensity import (
    IntensityError, difference_profile, intensities, iota_monte_carlo, nu_mass_ball,
)
from shotdown.rng import stream


def test_half_line_closed_form():
    # D = (0, inf) in d = 1, alpha = 1: kappa(x) = iota(x) = A / (alpha x) = 1 / (pi x)
    law = StableLaw(1, 1.0)
    D = Domain(HalfSpace((-1.0,), 0.0), 1)
    v = intensities(law, D, np.array([0.5]))
    assert v.kappa == pytest.approx(2 / math.pi)
    assert v.iota == pytest.approx(2 / math.pi)


def test_disc_kappa_at_center():
    # from the centre of B(0, R) every ray leaves at R: kappa = 2 pi A / (alpha R^alpha)
    law = StableLaw(2, 1.3)
    v = intensities(law, ball((0.0, 0.0), 2.0), np.zeros(2))
    assert v.kappa == pytest.approx(2 * math.pi * law.A / (1.3 * 2**1.3), rel=1e-9)
    assert v.iota == v.kappa


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(1.001, 1.999), st.sampled_from([0.5, 1.0, 1.5]))
def test_iota_dominates_kappa_on_annulus(theta, r, alpha):
    law = StableLaw(2, alpha)
    x = np.array([r * math.cos(theta), r * math.sin(theta)])
    v = intensities(law, annulus(), x, 1e-9)
    assert v.iota >= v.kappa - 10 * (v.iota_err + v.kappa_err)


def test_iota_dominates_on_pinched_domain():
    law = StableLaw(2, 0.5)
    D = harnack7()
    for p in D.sample_uniform(stream(1), 40)[0]:
        v = intensities(law, D, p, 1e-9)
        assert v.iota >= v.kappa - 10 * (v.iota_err + v.kappa_err)


def test_kappa_against_brute_force(ann):
    law = StableLaw(2, 1.0)
    x = np.array([1.3, 0.4])

    def ray(th):
        om = np.array([math.cos(th), math.sin(th)])
        # integrate A r^{-1-alpha} over the D^c part of the ray numerically
        lo, hi = ann.complement_intervals(x[None, :], om[None, :])
        tot = 0.0
        for a, b in zip(lo[0], hi[0]):
            if b > 0 and a <= b:
                tot += integrate.quad(lambda r: law.A * r**-2, max(a, 0), b if np.isfinite(b) else np.inf)[0]
        return tot

    brute = integrate.quad(ray, 0, 2 * math.pi, limit=400, points=None)[0]
    assert intensities(law, ann, x).kappa == pytest.approx(brute, rel=1e-6)


def test_iota_monte_carlo_agrees(ann):
    law = StableLaw(2, 1.0)
    x = np.array([1.5, 0.0])
    mc = iota_monte_carlo(law, ann, x, 0.2, stream(2), 400_000)
    q = intensities(law, ann, x).iota
    assert abs(mc.value - q) < 4 * mc.stderr


def test_difference_profile_trends(ann):
    law = StableLaw(2, 1.5)
    prof = difference_profile(law, ann, (1.0, 0.0), (1.0, 0.0), np.geomspace(1e-1, 1e-4, 7))
    assert np.all(prof.diff > 0)
    assert np.all(np.diff(prof.diff) > 0)
    rel = prof.diff / prof.kappa
    assert np.all(np.diff(rel) < 0)


def test_convex_profile_is_zero():
    law = StableLaw(2, 1.0)
    prof = difference_profile(law, ball((0.0, 0.0), 2.0), (2.0, 0.0), (-1.0, 0.0), [1e-2, 1e-4])
    assert np.all(prof.diff == 0)


def test_nu_mass_ball_against_dblquad():
    law = StableLaw(2, 1.0)
    c, r = np.array([-4.0, 0.0]), 1.0
    x = np.array([1.1, 0.2])
    f = lambda rr, th: law.A * np.linalg.norm(c + rr * np.array([math.cos(th), math.sin(th)]) - x) ** -3 * rr
    ref = integrate.dblquad(f, 0, 2 * math.pi, 0, r, epsabs=1e-12)[0]
    assert nu_mass_ball(law, x, c, r)[0] == pytest.approx(ref, rel=1e-7)


def test_outside_point_rejected(ann):
    with pytest.raises(IntensityError):
        intensities(StableLaw(2, 1.0), ann, np.array([0.5, 0.0]))
