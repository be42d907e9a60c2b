import math

import numpy as np
import pytest
from scipy import special

from cosmon.specfun import (
    BesselDomainError, GammaPoleError, bessel_i, bessel_i_derivative, bessel_j,
    bessel_j_derivative, leading_coefficients, rgamma, scaled_bessel_j,
)

# 30-digit reference values (mpmath), frozen
J_TABLE = [
    (0, 0.5, 0.93846980724081290423),
    (1, 1, 0.44005058574493351596),
    (0.5, 3.7, -0.21977625985052783486),
    (-0.5, 0.2, 1.7485604169618762244),
    (-0.75, 1.9, -0.42118910236010169339),
    (2.3, 0.01, 1.9007992607003654779e-6),
    (2.3, 17.0, 0.19109750053334674103),
    (4.6, 30.5, -0.096867905326000241635),
    (9.2, 88.0, -0.047043207845310671267),
    (-0.3, 60.0, -0.10300360538806237672),
    (7.5, 2.0, 0.000063298186302374784444),
    (0.1, 99.0, -0.063006789041571383821),
    (3, 25.0, 0.10834308106150889528),
    (5.5, 45.0, -0.025987210133162003272),
]
I_TABLE = [
    (0, 0.5, 1.0634833707413235193),
    (0.5, 1, 0.93767488824548764672),
    (-0.5, 0.7, 1.1969975127650321197),
    (2.5, 3.0, 1.5153394466819651377),
    (1.2, 8.0, 388.29589249622083558),
    (7, 12.0, 2396.0356923993661015),
]
SCALED_TABLE = [
    (-0.5, 0.0, 0.79788456080286535588),
    (-0.5, 0.3, 0.76224823504493551666),
    (1.5, 0.001, 0.26596149367147070839),
    (-0.9, 0.05, 0.19492351742539694168),
    (3.2, 4.0, 0.0048413029486524151949),
]


@pytest.mark.parametrize("nu,x,ref", J_TABLE)
def test_bessel_j_reference(nu, x, ref):
    assert float(bessel_j(nu, x)) == pytest.approx(ref, rel=5e-14)


@pytest.mark.parametrize("nu,x,ref", I_TABLE)
def test_bessel_i_reference(nu, x, ref):
    assert float(bessel_i(nu, x)) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("nu,x,ref", SCALED_TABLE)
def test_scaled_reference(nu, x, ref):
    assert float(scaled_bessel_j(nu, x)) == pytest.approx(ref, rel=1e-14)


def test_documented_values():
    assert bessel_j(0, 0) == 1.0
    assert float(bessel_j(0.5, math.pi / 2)) == pytest.approx(2 / math.pi, rel=1e-15)
    assert float(bessel_j(1, 1)) == pytest.approx(0.4400505857449335, rel=1e-15)
    assert float(scaled_bessel_j(-0.5, 0.0)) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-15)
    assert bessel_i(0, 0) == 1.0
    assert float(bessel_i(0.5, 1.0)) == pytest.approx(math.sqrt(2 / math.pi) * math.sinh(1.0), rel=1e-15)


def test_against_scipy_grid():
    nu, x = np.meshgrid(np.linspace(-0.95, 9.9, 37), np.linspace(0.05, 100, 211))
    ours = bessel_j(nu, x)
    ref = special.jv(nu, x)
    env = np.maximum(np.abs(ref), np.sqrt(2 / (np.pi * x)) * 1e-3)
    assert np.max(np.abs(ours - ref) / env) < 1e-10


def test_negative_integer_reflection():
    assert float(bessel_j(-1, 2.5)) == pytest.approx(-float(bessel_j(1, 2.5)), rel=1e-15)
    assert float(bessel_i(-1, 2.5)) == pytest.approx(float(bessel_i(1, 2.5)), rel=1e-15)


def test_derivatives():
    x = np.linspace(0.5, 40, 50)
    h = 1e-5
    for nu in (0.0, 0.7, 3.3):
        fd = (bessel_j(nu, x + h) - bessel_j(nu, x - h)) / (2 * h)
        assert np.allclose(bessel_j_derivative(nu, x), fd, atol=1e-8)
        fd = (bessel_i(nu, x[:10] + h) - bessel_i(nu, x[:10] - h)) / (2 * h)
        assert np.allclose(bessel_i_derivative(nu, x[:10]), fd, rtol=1e-8)


def test_domain_errors():
    with pytest.raises(BesselDomainError):
        bessel_j(0.5, -1.0)
    with pytest.raises(BesselDomainError):
        bessel_j(-0.5, 0.0)
    with pytest.raises(GammaPoleError):
        scaled_bessel_j(-1.0, 0.5)
    with pytest.raises(GammaPoleError):
        leading_coefficients(-2.0, 1.0)


def test_rgamma_poles_and_values():
    assert rgamma(0.0) == 0.0
    assert rgamma(-3.0) == 0.0
    assert rgamma(0.5) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert rgamma(5.0) == pytest.approx(1 / 24, rel=1e-15)


def test_leading_coefficients_match_series():
    nu, kappa = 0.4, 1.7
    f0, f1 = leading_coefficients(nu, kappa)
    r = 1e-5
    assert float(bessel_j(nu, kappa * r)) / r**nu == pytest.approx(f0, rel=1e-9)
    assert f1 == pytest.approx(nu * f0)
