import math

import numpy as np
import pytest
from scipy import integrate

from conftest import make_system
from localfractal.conditions import SpaceParams, classical_preset
from localfractal.errors import ConfigurationError
from localfractal.functions import SampledFunction, polynomial
from localfractal.geometry import Box
from localfractal.rb import fixed_point
from localfractal.seminorms import (
    HGrid,
    besov_seminorm_estimate,
    binomial_weights,
    difference_field,
    forward_difference,
    full_norm,
    lp_norm_grid,
    make_hgrid,
    piece_split_estimate,
    triebel_seminorm_estimate,
)

INF = math.inf
UNIT = Box.unit(1)


def sample(g, level=12, box=UNIT):
    return SampledFunction.from_callable(g, box, level)


def hat(x):
    return np.minimum(x, 1 - x)


def test_binomial_weights():
    assert binomial_weights(2).tolist() == [1.0, -2.0, 1.0]
    assert binomial_weights(3).sum() == 0


def test_forward_difference_examples():
    f = sample(lambda x: x, 8)
    assert forward_difference(f, 0.25, 0.125, 1) == pytest.approx(0.125)
    g = sample(lambda x: x**2, 8)
    assert forward_difference(g, 0.25, 0.125, 2) == pytest.approx(2 * 0.125**2)
    assert forward_difference(g, 0.9, 0.1, 2, Box.unit(1)) == 0.0


def test_difference_field_matches_pointwise():
    rng = np.random.default_rng(3)
    f = SampledFunction(UNIT, 6, rng.normal(size=65))
    h = 5 / 64
    field_ = difference_field(f, h, 3)
    x = f.points()[:, 0]
    direct = [forward_difference(f, xi, h, 3) for xi in x]
    assert np.allclose(field_, direct, atol=1e-12)
    # off-grid h goes through interpolation and must agree with the pointwise rule too
    h = 0.0371
    assert np.allclose(difference_field(f, h, 2), [forward_difference(f, xi, h, 2) for xi in x], atol=1e-12)


def test_lp_norm_examples():
    assert lp_norm_grid(sample(lambda x: np.ones_like(x)), 2) == pytest.approx(1.0)
    assert abs(lp_norm_grid(sample(lambda x: x), 2) - 1 / math.sqrt(3)) < 1e-6
    assert lp_norm_grid(sample(lambda x: x), INF) == 1.0


def test_besov_linear_matches_quadrature():
    # |Delta_h x|_{L^2} = h sqrt(1-h); integrate over both signs of h
    f = sample(lambda x: x)
    sp = SpaceParams(1, 2, 2, 0.4, 1)
    hg = make_hgrid(f)
    est = besov_seminorm_estimate(f, sp, hg)
    integrand = lambda h: (h**-0.4 * h * math.sqrt(1 - h)) ** 2 / h
    exact = math.sqrt(2 * integrate.quad(integrand, hg.h_min, hg.h_max)[0])
    assert est.value == pytest.approx(exact, rel=1e-2)
    assert not est.divergence_flag


@pytest.mark.parametrize("M,deg", [(1, 0), (2, 1), (3, 2), (4, 3)])
def test_polynomial_annihilation(M, deg):
    coeffs = [0.5, -1.0, 0.25, 0.125][: deg + 1]
    f = sample(lambda x: np.polynomial.polynomial.polyval(x, coeffs))
    s = M - 0.5
    assert besov_seminorm_estimate(f, SpaceParams(1, 2, 2, s, M)).value <= 1e-10
    assert triebel_seminorm_estimate(f, SpaceParams(1, 2, 2, s, M)).value <= 1e-10


def test_polynomial_annihilation_2d():
    box = Box.unit(2)
    f = SampledFunction.from_callable(lambda p: 1 + 2 * p[:, 0] - p[:, 1], box, 6)
    hg = make_hgrid(f, directions=16, count=8)
    assert besov_seminorm_estimate(f, SpaceParams(2, 2, 2, 1.5, 2), hg).value <= 1e-10


def test_hat_hoelder_one():
    f = sample(hat)
    est = besov_seminorm_estimate(f, SpaceParams(1, INF, INF, 1.0, 2))
    assert est.value == pytest.approx(2.0, abs=1e-3)
    assert not est.divergence_flag


def test_hat_divergence_flag():
    f = sample(hat)
    est = besov_seminorm_estimate(f, SpaceParams(1, INF, INF, 1.3, 2))
    assert est.divergence_flag
    assert est.value > est.coarse_value


def test_hat_triebel_stable():
    f = sample(hat)
    sp = SpaceParams(1, 2, INF, 1.0, 2)
    sp_ = f.spacing[0]
    a = triebel_seminorm_estimate(f, sp, make_hgrid(f, 8 * sp_)).value
    b = triebel_seminorm_estimate(f, sp, make_hgrid(f, 4 * sp_)).value
    assert math.isfinite(a) and abs(a - b) <= 0.05 * b


def test_zero_function():
    f = SampledFunction.zeros(UNIT, 8)
    assert triebel_seminorm_estimate(f, SpaceParams(1, 2, 2, 0.5, 1)).value == 0.0
    assert full_norm(f, SpaceParams(1, 2, 2, 0.5, 1)).value == 0.0


def test_full_norm_constant():
    f = sample(lambda x: np.ones_like(x))
    nb = full_norm(f, SpaceParams(1, INF, INF, 0.5, 1), family="B")
    assert nb.lp_part == 1.0 and nb.seminorm_part == 0.0


def test_full_norm_hat_hoelder_near_one():
    pre = classical_preset("hoelder", 0.999)
    f = sample(hat)
    nb = full_norm(f, pre.params, family="B")
    assert nb.lp_part == 0.5
    # first differences of the hat are at most |h| and only reach it for |h| <= 1/2
    assert nb.seminorm_part == pytest.approx(0.5**0.001, rel=1e-3)


def test_besov_equals_triebel_at_p_eq_q(affine_system):
    f, _ = fixed_point(affine_system, level=10)
    sp = SpaceParams(1, 2, 2, 0.4, 1)
    b = besov_seminorm_estimate(f, sp).value
    t = triebel_seminorm_estimate(f, sp).value
    assert b == pytest.approx(t, rel=1e-10)


def test_h_min_below_spacing_rejected():
    f = sample(hat, 6)
    with pytest.raises(ConfigurationError, match="minimum admissible value is 0.015625"):
        besov_seminorm_estimate(f, SpaceParams(1, 2, 2, 0.5, 1), make_hgrid(f, 0.001))


def test_threads_do_not_change_result():
    f = sample(hat, 10)
    sp = SpaceParams(1, 2, 2, 0.5, 1)
    assert besov_seminorm_estimate(f, sp, workers=4).value == besov_seminorm_estimate(f, sp).value


def test_hgrid_weights_cover_log_range():
    hg = HGrid(1, 0.01, 1.0)
    assert hg.radius_weights.sum() == pytest.approx(math.log(100))
    assert np.all(np.diff(hg.radii) > 0)


def test_piece_split_zero_scaling():
    # S = 0: the fixed point is 2x on [0,1/2) and 2 - 2x on [1/2,1)
    sys0 = make_system((polynomial([0.0, 1.0]), polynomial([1.0, -1.0])), (0.0, 0.0))
    f, _ = fixed_point(sys0, level=10)
    cells = [Box((0.0,), (0.5,)), Box((0.5,), (1.0,))]
    split = piece_split_estimate(f, SpaceParams(1, INF, INF, 1.0, 2), cells)
    assert split.interior.value <= 1e-10
    assert split.boundary.value == pytest.approx(4.0, rel=1e-3)
    assert split.total.value == pytest.approx(split.boundary.value)
