import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from hlab import calculus, norms
from hlab.errors import NormError
from hlab.norms import GridFunction


def gaussian(x):
    return np.exp(-np.asarray(x) ** 2)


def smooth_bump(x):
    x = np.asarray(x, dtype=float)
    return np.where((x >= 0) & (x <= 1), np.sin(np.pi * x) ** 8, 0.0)


def test_eta_support_and_peak():
    x = np.linspace(-1.0, 2.0, 3001)
    values = norms.eta(x)
    assert np.all(values[(x <= 0.25) | (x >= 1.0)] == 0)
    assert values.max() == pytest.approx(norms.ETA_PEAK, rel=1e-6)
    assert norms.eta(0.625) == pytest.approx(norms.ETA_PEAK)


def test_phi_is_a_dyadic_partition_of_unity():
    assert norms.partition_residual(norms.phi) <= 1e-10
    assert norms.partition_residual(norms.eta) > 0.1
    assert norms.bump_phi() is norms.phi


@seed(13)
@settings(max_examples=50, deadline=None)
@given(x=st.floats(min_value=1e-6, max_value=1e6))
def test_phi_pieces_sum_to_one_pointwise(x):
    total = sum(float(norms.phi(x * 2.0 ** (-ell))) for ell in range(-25, 25))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_sobolev_norm_of_gaussian():
    # ||(1 - d^2/dx^2) e^(-x^2)||_2^2 = 3 sqrt(2 pi)
    F = GridFunction.from_callable(gaussian, (-10.0, 10.0), 4096)
    assert norms.sobolev_norm(F, 2.0, 2.0) == pytest.approx(np.sqrt(3.0 * np.sqrt(2.0 * np.pi)), rel=1e-8)
    assert norms.sobolev_norm(F, 0.0, 2.0) == pytest.approx((np.pi / 2.0) ** 0.25, rel=1e-8)


def test_sobolev_norm_grows_with_order():
    F, _ = norms.bump_eta(2048)
    values = [norms.sobolev_norm(F, s, 2.0) for s in (0.0, 0.5, 1.0, 2.0)]
    assert values == sorted(values)


def test_sobolev_norm_rejects_negative_order():
    F, _ = norms.bump_eta(512)
    with pytest.raises(NormError):
        norms.sobolev_norm(F, -1.0, 2.0)


def test_grid_function_must_vanish_at_the_edges():
    with pytest.raises(NormError):
        GridFunction((0.0, 1.0), np.ones(16))
    with pytest.raises(NormError):
        GridFunction((1.0, 0.0), np.zeros(16))
    with pytest.raises(NormError):
        GridFunction.from_callable(gaussian, (-10.0, 10.0), 10**7)


def test_grid_function_json():
    F, _ = norms.bump_eta(256)
    payload = F.to_json()
    assert payload["spacing"] == pytest.approx(2.0 / 256)
    back = GridFunction.from_json(payload)
    np.testing.assert_array_equal(back.samples, F.samples)
    assert back.window == F.window


def test_hormander_norm_of_constant_is_eta_norm():
    one = calculus.constant_multiplier(1.0)
    for s, q in [(1.0, 2.0), (1.5, np.inf)]:
        value = norms.hormander_norm(one, s, q, t_grid=[0.5, 1.0, 4.0], n_points=2048)
        assert value == pytest.approx(norms.eta_norm(s, q, 2048), rel=1e-12)


def test_refined_stops_once_successive_values_agree():
    value, n = norms.refined(lambda n: 1.0 + 1.0 / n, 64)
    assert n == 1024
    assert value == pytest.approx(1.0 + 1.0 / 1024)


def test_refined_warns_at_the_grid_cap(capsys):
    cap = norms.SETTINGS.max_grid
    value, n = norms.refined(float, cap // 4)
    assert n == cap and value == cap
    assert "⚠ Warning" in capsys.readouterr().out
    with pytest.raises(NormError):
        norms.refined(float, 2 * cap)


def test_refined_hormander_norm_matches_a_fine_grid():
    F = calculus.heat_multiplier(1.0)
    t_grid = [0.5, 1.0, 2.0]
    coarse = norms.hormander_norm(F, 1.5, 2.0, t_grid=t_grid, n_points=512, refine=True)
    fine = norms.hormander_norm(F, 1.5, 2.0, t_grid=t_grid, n_points=8192)
    assert coarse == pytest.approx(fine, rel=2e-3)


def test_hormander_profile_is_dilation_covariant():
    F = calculus.riesz_mean(1.0)
    t_grid, profile = norms.hormander_profile(F, 1.0, 2.0, t_grid=[0.5, 1.0, 2.0], n_points=2048)
    assert list(t_grid) == [0.5, 1.0, 2.0]
    dilated = calculus.dilate(F, 2.0)
    _, shifted = norms.hormander_profile(dilated, 1.0, 2.0, t_grid=[0.25, 0.5, 1.0], n_points=2048)
    np.testing.assert_allclose(profile, shifted, rtol=1e-12)


def test_dyadic_t_grid_covers_the_spectrum():
    grid = norms.dyadic_t_grid([0.0, 0.1, 3.9])
    assert grid.min() <= 0.05 and grid.max() >= 7.8
    ratios = grid[1:] / grid[:-1]
    np.testing.assert_allclose(ratios, 2.0**0.25)
    assert list(norms.dyadic_t_grid([0.0])) == [1.0]


@pytest.mark.parametrize("N", [1, 3, 8])
def test_nq_norm_of_an_indicator(N):
    step = lambda x: ((np.asarray(x) >= 0) & (np.asarray(x) < 1)).astype(float)  # noqa: E731
    assert norms.nq_norm(step, N, 2.0) == pytest.approx(np.sqrt(1.0 / 3.0))
    assert norms.nq_norm(step, N, 1.0) == pytest.approx(1.0 / 3.0)
    assert norms.nq_norm(step, N, np.inf) == 1.0


@seed(17)
@settings(max_examples=30, deadline=None)
@given(N=st.integers(min_value=1, max_value=32), q=st.floats(min_value=1.0, max_value=20.0))
def test_nq_norm_is_below_the_sup(N, q):
    F, _ = norms.bump_eta(4096)
    value = norms.nq_norm(F, N, q)
    assert 0 < value <= norms.nq_norm(F, N, np.inf) * (1 + 1e-12)


def test_nq_norm_rejects_outside_support():
    F = GridFunction.from_callable(gaussian, (-10.0, 10.0), 1024)
    with pytest.raises(NormError):
        norms.nq_norm(F, 2, 2.0)
    with pytest.raises(NormError):
        norms.nq_norm(norms.eta, 0, 2.0)


@pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 3.5])
def test_mollifier_moments(s):
    _, xi = norms.mollifier_xi(s)
    assert xi.order == int(np.floor(s)) + 2
    assert xi.moment(0) == pytest.approx(1.0, abs=1e-9)
    for k in range(1, xi.order + 1):
        assert abs(xi.moment(k)) <= 1e-9


def test_discrete_mollifier_weights_are_moment_exact():
    _, xi = norms.mollifier_xi(2.0)
    h, N = 1.0 / 2048, 64
    weights = xi.discrete_weights(h, N)
    half = (weights.size - 1) // 2
    t = np.arange(-half, half + 1) * h * N
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    for k in range(1, xi.order + 1):
        assert abs(np.sum(weights * t**k)) <= 1e-10


def test_mollify_extends_the_window():
    _, xi = norms.mollifier_xi(1.0)
    G = GridFunction.from_callable(smooth_bump, (-0.5, 1.5), 2048, (0.0, 1.0))
    smooth = norms.mollify(G, xi, 16)
    assert smooth.spacing == pytest.approx(G.spacing)
    assert smooth.window[0] < G.window[0] and smooth.window[1] > G.window[1]


def test_mollify_needs_a_fine_grid():
    _, xi = norms.mollifier_xi(1.0)
    G = GridFunction.from_callable(smooth_bump, (-0.5, 1.5), 256, (0.0, 1.0))
    with pytest.raises(NormError):
        norms.mollify(G, xi, 64)
    with pytest.raises(NormError):
        norms.mollify(GridFunction.from_callable(gaussian, (-10.0, 10.0), 4096), xi, 4)


@pytest.mark.slow
@pytest.mark.parametrize("s", [1.0, 2.0])
@pytest.mark.parametrize("q", [2.0, np.inf])
def test_mollification_rate(s, q):
    _, xi = norms.mollifier_xi(s)
    G = GridFunction.from_callable(smooth_bump, (-0.5, 1.5), 4096, (0.0, 1.0))
    N_set = [8, 16, 32, 64, 128, 256]
    errors = norms.mollification_errors(G, xi, N_set, q)
    assert errors[-1] < errors[0]
    assert norms.mollification_rate(G, xi, N_set, q) <= -s + 0.3
