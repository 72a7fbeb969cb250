import math

import numpy as np
import pytest

from shotdown import SimScheme, StableLaw, annulus
from shotdown.geometry import ball, harnack7
from shotdown.kernels import (
    BOOST_MIX, BoxTarget, CellGrid, KernelError, auto_boost, bridge_kernels, chapman_kolmogorov, green, green_bridge,
    green_ref, harmonic_measure_shotdown, harnack7_target, occupation_partition, riesz_exit_density,
    riesz_radial_cdf, riesz_total_mass,
)
from shotdown.rng import stream
from shotdown.sim import simulate_batch


def agree(a, b, k=4.0):
    return abs(a.value - b.value) <= k * math.hypot(a.stderr, b.stderr)


def test_bridge_free_weight_is_the_stable_density(ann):
    law = StableLaw(2, 1.5)
    x, y = np.array([1.5, 0.0]), np.array([0.0, 1.5])
    r = bridge_kernels(law, ann, 0.3, x, y, 10, stream(1), 100_000)
    exact = float(law.pdf(0.3, y - x))
    assert abs(r.free.value - exact) < 4 * r.free.stderr


def test_boost_keeps_the_free_weight_unbiased(ann, cauchy2):
    x, y = np.array([1.5, 0.0]), np.array([-1.5, 0.0])
    r = bridge_kernels(cauchy2, ann, 0.05, x, y, 20, stream(2), 100_000, boost="auto")
    exact = float(cauchy2.pdf(0.05, y - x))
    assert abs(r.free.value - exact) < 4 * r.free.stderr
    assert 1 / BOOST_MIX[0] == 2


def test_kernel_ordering(ann, cauchy2):
    x, y = np.array([1.5, 0.0]), np.array([0.2, 1.4])
    r = bridge_kernels(cauchy2, ann, 0.3, x, y, 20, stream(3), 50_000)
    # pathwise sigma <= tau: every p_hat weight is also a p_D weight
    assert r.p_hat.value <= r.p_killed.value <= r.free.value
    assert 0 < r.ratio.value <= 1


def test_symmetry_small_budget(ann, cauchy2):
    x, y = np.array([1.4, 0.3]), np.array([-0.2, -1.6])
    a = bridge_kernels(cauchy2, ann, 0.5, x, y, 20, stream(4), 200_000, boost="auto").p_hat
    b = bridge_kernels(cauchy2, ann, 0.5, y, x, 20, stream(5), 200_000, boost="auto").p_hat
    assert agree(a, b)


def test_convex_ratio_is_exactly_one(cauchy2):
    D = ball((0.0, 0.0), 2.0)
    r = bridge_kernels(cauchy2, D, 0.05, np.array([1.5, 0.0]), np.array([-1.5, 0.0]), 20, stream(6), 20_000,
                       boost="auto")
    assert r.ratio.value == 1.0


def test_chapman_kolmogorov(ann, cauchy2):
    x, y = np.array([1.5, 0.0]), np.array([0.0, 1.5])
    direct = bridge_kernels(cauchy2, ann, 0.4, x, y, 20, stream(7), 200_000, boost="auto")
    hat, kill = chapman_kolmogorov(cauchy2, ann, 0.4, 0.2, x, y, 20, stream(8), 400_000)
    assert agree(direct.p_hat, hat)
    assert agree(direct.p_killed, kill)
    with pytest.raises(KernelError):
        chapman_kolmogorov(cauchy2, ann, 0.4, 0.13, x, y, 20, stream(8), 10)


def test_auto_boost_scales(cauchy2):
    assert auto_boost(cauchy2, (0.0, 0.0), (2.0, 0.0)) == pytest.approx(math.sqrt(0.5))


def test_bridge_errors(ann, cauchy2):
    with pytest.raises(KernelError):
        bridge_kernels(cauchy2, ann, 0.1, np.array([1.5, 0.0]), np.array([1.5, 0.0]), 5, stream(0), 10)
    with pytest.raises(KernelError):
        bridge_kernels(cauchy2, ann, 0.1, np.array([1.5, 0.0]), np.array([0.0, 1.5]), 0, stream(0), 10)


def test_green_bridge_matches_occupation(ann, cauchy2):
    x, y = np.array([1.5, 0.0]), np.array([1.5, 0.4])
    gb, _ = green_bridge(cauchy2, ann, x, y, 1e-2, (2e-4, 4.0), stream(9), 20_000)
    occ = green(cauchy2, ann, x, y, 0.05, SimScheme("grid", 1e-2, 0.1, 4.0), stream(10), 20_000).g_hat
    # the occupation estimate smooths over B(y, 0.05); allow 10% for that on top of the noise
    assert abs(gb.value - occ.value) <= 4 * math.hypot(gb.stderr, occ.stderr) + 0.1 * occ.value


def test_green_ref_formula(ann):
    ref = green_ref(ann, 1.0, (1.5, 0.0), (1.5, 0.4))
    assert ref.dx == pytest.approx(0.5)
    r = max(ref.dx, 0.4, ref.dy)
    assert ref.value == pytest.approx((ref.dx * ref.dy) ** 0.5 / r / 0.4)


def test_occupation_partition_identity(ann, cauchy2):
    cells = CellGrid(tuple(np.linspace(-2, 2, 17) for _ in range(2)))
    sch = SimScheme("grid", 1e-2, 0.1, 2.0)
    counts, outside, total, steps, h = occupation_partition(cauchy2, ann, (1.5, 0.0), sch, stream(11), 2000, cells)
    assert counts.sum() + outside == total == steps
    with pytest.raises(KernelError):
        occupation_partition(cauchy2, ann, (1.5, 0.0), SimScheme(), stream(11), 10, cells)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_riesz_mass_and_cdf(alpha):
    mass, _ = riesz_total_mass(alpha, 1.0, (0.3, -0.2))
    assert mass == pytest.approx(1.0, abs=1e-8)
    q = riesz_radial_cdf(alpha, 1.0, np.array([1.0, 2.0, 10.0, 1e6]))
    assert q[0] == pytest.approx(0.0) and np.all(np.diff(q) > 0) and q[-1] == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(KernelError):
        riesz_exit_density(alpha, 1.0, np.zeros(2), np.array([0.5, 0.0]))


def test_riesz_exit_from_simulation(disc):
    law = StableLaw(2, 1.0)
    b = simulate_batch(law, disc, (0.0, 0.0), SimScheme("jump-adapted", 1e-3, 0.05, 20.0), stream(12), 20_000)
    rad = np.linalg.norm(b.tau_land[np.isfinite(b.tau)], axis=1)
    for q in (1.2, 2.0, 5.0):
        p = float(riesz_radial_cdf(1.0, 1.0, q))
        assert abs(np.mean(rad <= q) - p) < 4 * math.sqrt(p * (1 - p) / len(rad))


def test_harmonic_estimators_agree():
    law = StableLaw(2, 0.5)
    D, B = harnack7(), ball((0.0, 0.0), 1.0)
    sch = SimScheme("jump-adapted", 1e-2, 0.1, 50.0)
    # a wide target so that the direct estimator sees enough hits
    target = BoxTarget((-1.8, -0.5), (-1.3, 0.5))
    a = harmonic_measure_shotdown(law, B, D, (0.0, 0.0), target, sch, stream(13), 5000)
    b = harmonic_measure_shotdown(law, B, D, (0.0, 0.0), target, sch, stream(14), 40_000, method="direct")
    assert b.value > 0 and agree(a, b)
    assert harnack7_target(0.2).volume == pytest.approx(0.04)
