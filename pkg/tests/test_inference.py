import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btlab.analytic import (
    ModelParams,
    density_surface_tensor_X,
    grain_analytics,
    surface_tensor_density_Z,
    volume_fraction,
)
from btlab.geom2d import ConvexPolygon, Ellipse, PolygonGrain, Rectangle, discretize
from btlab.inference import (
    AlphaDivergenceError,
    IsotropicGrainError,
    bootstrap,
    bootstrap_many,
    estimate_alpha,
    estimate_gamma,
    estimator_study,
    fourier_coefficients,
    reconstruct_radius,
    x_tensors_from_z,
)
from btlab.tensor import SymTensor2

RECT = Rectangle.from_semi_axes(0.01, 0.0025)
ELLIPSE = Ellipse(1.0, 0.25)


# ---------------------------------------------------------------- point estimators


def test_estimate_gamma_values():
    assert estimate_gamma(1 / 15, 1.0) == pytest.approx(math.log(15 / 14))
    assert estimate_gamma(1 / 15, 1.0) == pytest.approx(0.06899287, rel=1e-7)
    assert estimate_gamma(0.0, 2.0) == 0.0
    assert estimate_gamma(1 - math.exp(-2), 0.5) == pytest.approx(4.0)


@pytest.mark.parametrize("phi", [1.0, 1.5, -0.1])
def test_estimate_gamma_rejects(phi):
    with pytest.raises(ValueError):
        estimate_gamma(phi, 1.0)


def test_estimate_gamma_rejects_bad_area():
    with pytest.raises(ValueError):
        estimate_gamma(0.1, 0.0)


def _exact_input(gamma, alpha, grain):
    prm = ModelParams(gamma, alpha, grain)
    return surface_tensor_density_Z(prm, 2), volume_fraction(prm)


@settings(max_examples=40)
@given(alpha=st.floats(0.0, 50.0), phi=st.floats(0.02, 0.9))
def test_alpha_round_trip(alpha, phi):
    ga = grain_analytics(RECT)
    gamma = -math.log1p(-phi) / ga.area
    T, ph = _exact_input(gamma, alpha, RECT)
    assert estimate_alpha(T, ph, ga) == pytest.approx(alpha, abs=1e-8 * (1 + alpha) ** 2)
    assert estimate_alpha(T, ph, ga, symmetrized=True) == pytest.approx(alpha, abs=1e-8 * (1 + alpha) ** 2)


def test_alpha_round_trip_polygon_grain():
    P = PolygonGrain(discretize(Ellipse(0.01, 0.0025)))
    ga = grain_analytics(P)
    T, ph = _exact_input(80.0, 3.0, P)
    assert estimate_alpha(T, ph, ga) == pytest.approx(3.0, rel=1e-10)


def test_isotropic_grain_rejected():
    sq = Rectangle(1.0, 1.0)
    T, ph = _exact_input(0.3, 2.0, sq)
    with pytest.raises(IsotropicGrainError):
        estimate_alpha(T, ph, grain_analytics(sq))


def test_aligned_grains_diverge():
    T, ph = _exact_input(0.3, math.inf, ELLIPSE)
    with pytest.raises(AlphaDivergenceError):
        estimate_alpha(T, ph, grain_analytics(ELLIPSE))


def test_estimate_alpha_needs_rank_two():
    with pytest.raises(ValueError):
        estimate_alpha(SymTensor2.zeros(4), 0.1, grain_analytics(ELLIPSE))


# ---------------------------------------------------------------- bootstrap


def test_bootstrap_constant_has_zero_error():
    mean, se = bootstrap([2.5] * 30, n_boot=500, rng=np.random.default_rng(0))
    assert mean == 2.5 and se == 0.0


def test_bootstrap_binary_standard_error():
    x = np.array([0.0] * 50 + [1.0] * 50)
    mean, se = bootstrap(x, n_boot=20000, rng=np.random.default_rng(1))
    assert mean == pytest.approx(0.5, abs=0.01)
    assert se == pytest.approx(math.sqrt(0.25 / 100), rel=0.05)


def test_bootstrap_tensors_componentwise():
    rng = np.random.default_rng(2)
    comps = rng.normal(size=(40, 3))
    tens = [SymTensor2(c) for c in comps]
    m, se = bootstrap(tens, n_boot=800, rng=np.random.default_rng(3))
    m2, se2 = bootstrap_many({"x": comps}, n_boot=800, rng=np.random.default_rng(3))["x"]
    assert np.allclose(m.comps, m2) and np.allclose(se.comps, se2)
    for k in range(3):
        mk, sk = bootstrap(comps[:, k], n_boot=800, rng=np.random.default_rng(3))
        assert mk == pytest.approx(m2[k]) and sk == pytest.approx(se2[k])


def test_bootstrap_shares_indices():
    x = np.arange(25.0)
    res = bootstrap_many({"a": x, "b": 2 * x}, n_boot=300, rng=np.random.default_rng(4))
    assert res["b"][0] == pytest.approx(2 * res["a"][0])
    assert res["b"][1] == pytest.approx(2 * res["a"][1])


def test_bootstrap_input_checks():
    with pytest.raises(ValueError):
        bootstrap([], n_boot=200)
    with pytest.raises(ValueError):
        bootstrap_many({"a": [1.0, 2.0], "b": [1.0]}, n_boot=200)
    with pytest.raises(ValueError):
        bootstrap([1.0, 2.0], n_boot=10)


def test_estimator_study_drops_divergent_replicates():
    ga = grain_analytics(ELLIPSE)
    good_T, good_phi = _exact_input(0.3, 2.0, ELLIPSE)
    bad_T, bad_phi = _exact_input(0.3, math.inf, ELLIPSE)
    phis = [good_phi, bad_phi, good_phi]
    rep = estimator_study(phis, [good_T, bad_T, good_T], ga, 0.3, 2.0, "e", n_boot=200,
                          rng=np.random.default_rng(0))
    assert rep.n_divergent == 1 and list(rep.kept) == [0, 2]
    assert rep.alpha_mean == pytest.approx(2.0) and rep.gamma_mean == pytest.approx(0.3)
    assert rep.sigmas("alpha") == 0.0 or rep.alpha_se > 0
    counts, _ = rep.histogram("alpha", bins=5)
    assert counts.sum() == 2


def test_estimator_study_all_divergent():
    ga = grain_analytics(ELLIPSE)
    T, phi = _exact_input(0.3, math.inf, ELLIPSE)
    rep = estimator_study([phi], [T], ga, 0.3, math.inf, n_boot=200)
    assert rep.n_divergent == 1 and math.isnan(rep.alpha_mean)


# ---------------------------------------------------------------- Fourier reconstruction


def _x_tensors(prm, N):
    ga = grain_analytics(prm.grain, N)
    return {s: density_surface_tensor_X(prm, s, ga) for s in range(N + 1)}


def test_x_from_z_inverts_boost():
    prm = ModelParams(0.7, 3.0, ELLIPSE)
    phi = volume_fraction(prm)
    zt = {2: surface_tensor_density_Z(prm, 2)}
    assert x_tensors_from_z(zt, phi)[2].allclose(density_surface_tensor_X(prm, 2), rtol=1e-12, atol=0)
    with pytest.raises(ValueError):
        x_tensors_from_z(zt, 1.0)


def test_disk_coefficients():
    R, gamma = 0.5, 2.0
    c = fourier_coefficients(_x_tensors(ModelParams(gamma, 0.0, Ellipse(R, R)), 6), 6)
    assert c[0] == pytest.approx(gamma * R)
    for s in range(1, 7):
        assert abs(c[s]) < 1e-12 and abs(c[-s]) < 1e-12


def test_zero_order_is_mean_perimeter_over_pi():
    prm = ModelParams(1.3, 2.0, RECT)
    c = fourier_coefficients(_x_tensors(prm, 2), 2)
    assert c[0].real == pytest.approx(prm.gamma * grain_analytics(RECT).v1 / math.pi)


def test_symmetric_grain_odd_orders_vanish_and_conjugates():
    c = fourier_coefficients(_x_tensors(ModelParams(1.0, 3.0, RECT), 8), 8)
    for s in range(-8, 9):
        assert c[s] == pytest.approx(np.conj(c[-s]), abs=1e-12)
        if s % 2:
            assert abs(c[s]) < 1e-12


def test_isotropic_model_gives_constant_function():
    c = fourier_coefficients(_x_tensors(ModelParams(1.0, 0.0, ELLIPSE), 8), 8)
    r = reconstruct_radius(c)
    assert np.ptp(r.values) < 1e-10 and r.imag_residual < 1e-12


def test_aligned_ellipse_reconstruction():
    N, gamma, E = 24, 1.5, Ellipse(1.0, 0.5)
    ga = grain_analytics(E, N)
    c = fourier_coefficients(_x_tensors(ModelParams(gamma, math.inf, E), N), N)
    r = reconstruct_radius(c)
    truth = gamma * ga.radius(r.grid)
    assert np.max(np.abs(r.values - truth) / truth) < 0.01
    assert r.imag_residual < 1e-10


def test_odd_grain_coefficients_are_complex_but_function_real():
    P = PolygonGrain(ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [0.2, 0.7]])))
    c = fourier_coefficients(_x_tensors(ModelParams(1.0, math.inf, P), 5), 5)
    assert abs(c[3]) > 1e-6
    assert reconstruct_radius(c).imag_residual < 1e-12


def test_fourier_error_propagation():
    tens = _x_tensors(ModelParams(1.0, 3.0, ELLIPSE), 2)
    se = {s: SymTensor2(np.full(s + 1, 0.01)) for s in range(3)}
    c = fourier_coefficients(tens, 2, se)
    assert c.se.shape == (5, 2) and np.all(c.se[2] >= 0) and c.se[2, 0] > 0
    assert np.array_equal(c.se[4], c.se[0])


def test_fourier_input_checks():
    with pytest.raises(KeyError):
        fourier_coefficients({0: SymTensor2.zeros(0)}, 1)
    with pytest.raises(ValueError):
        fourier_coefficients({0: SymTensor2.zeros(2)}, 0)
    c = fourier_coefficients({0: SymTensor2([1.0])}, 0)
    with pytest.raises(KeyError):
        c[1]
