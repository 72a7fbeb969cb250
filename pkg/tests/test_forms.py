import numpy as np
import pytest

from shotdown import StableLaw, annulus
from shotdown.forms import (
    FormError, QuadSpec, TestFunction, bump, evaluate_forms, hardy_check, suite, whole_space_energy_fourier,
)
from shotdown.geometry import ball


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_whole_space_energy_matches_fourier(alpha):
    law = StableLaw(2, alpha)
    f = bump(ball((0.0, 0.0), 3.0), (0.0, 0.0), 1.0)
    rep = evaluate_forms(law, f, QuadSpec(target_rel_error=1e-6, max_level=5))
    assert rep.whole_space == pytest.approx(whole_space_energy_fourier(law, f), rel=1e-5)


def test_convex_domain_has_no_cross_term():
    D, funcs = suite("ball")
    law = StableLaw(2, 1.0)
    rep = evaluate_forms(law, funcs[2])
    assert rep.cross == 0.0
    assert rep.shotdown.total == pytest.approx(rep.killed.total, rel=1e-9)


def test_identity_on_two_lobed_annulus_function():
    law = StableLaw(2, 1.0)
    D, funcs = suite("annulus")
    rep = evaluate_forms(law, funcs[2])
    assert rep.residual < 1e-6
    assert rep.cross > 0
    assert rep.shotdown.total > rep.killed.total


def test_hardy_margin_positive():
    law = StableLaw(2, 1.5)
    D, funcs = suite("annulus")
    lhs, rhs = hardy_check(law, D, funcs[1])
    assert lhs > rhs > 0


def test_quadratic_scaling():
    law = StableLaw(2, 1.0)
    D, funcs = suite("ball")
    a = evaluate_forms(law, funcs[1])
    b = evaluate_forms(law, funcs[1].scaled(2.0))
    assert b.killed.total == pytest.approx(4 * a.killed.total, rel=1e-9)


def test_test_function_validation():
    D = annulus()
    with pytest.raises(FormError):
        bump(D, (1.5, 0.0), 0.6)
    with pytest.raises(FormError):
        TestFunction(D, (((1.5, 0.0), 0.3, 1.0), ((1.5, 0.4), 0.3, 1.0)))
    with pytest.raises(FormError):
        suite("square")
    f = bump(D, (1.5, 0.0), 0.4)
    assert f(np.array([1.5, 0.0])) == 1.0
    assert f(np.array([0.0, 0.0])) == 0.0
