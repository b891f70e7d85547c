import json

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from hlab import calculus, norms
from hlab.calculus import MultiplierFunction, SelfAdjointOperator
from hlab.errors import OperatorError
from hlab.space import MetricMeasureSpace, build_masked_grid, build_torus


def closed_form_heat(N: int, t: float) -> np.ndarray:
    k = np.arange(N)
    lam = 2.0 - 2.0 * np.cos(2.0 * np.pi * k / N)
    shift = np.subtract.outer(np.arange(N), np.arange(N))
    phases = np.cos(2.0 * np.pi * np.multiply.outer(shift, k) / N)
    return phases @ np.exp(-t * lam) / N


def test_cycle_spectrum(dec32):
    expected = np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(32) / 32))
    np.testing.assert_allclose(dec32.eigenvalues, expected, atol=1e-12)
    assert dec32.eigenvalues[0] == 0.0
    assert dec32.orthonormality_error() <= 1e-10


def test_two_point_laplacian():
    space = MetricMeasureSpace(dist=[[0.0, 1.0], [1.0, 0.0]], mu=[1.0, 1.0])
    dec = calculus.decompose(calculus.build_laplacian(space))
    np.testing.assert_allclose(dec.eigenvalues, [0.0, 2.0], atol=1e-14)


def test_weighted_measure_keeps_self_adjointness():
    space = MetricMeasureSpace(dist=[[0.0, 1.0], [1.0, 0.0]], mu=[1.0, 3.0])
    op = calculus.build_laplacian(space)
    dec = calculus.decompose(op)
    # (1/mu) [[1, -1], [-1, 1]] has eigenvalues 0 and 1 + 1/3
    np.testing.assert_allclose(dec.eigenvalues, [0.0, 4.0 / 3.0], atol=1e-12)
    np.testing.assert_allclose(dec.reconstruct(), op.action, atol=1e-12)
    assert dec.orthonormality_error() <= 1e-12


def test_identity_multiplier(dec32):
    applied = calculus.apply_multiplier(dec32, calculus.constant_multiplier(1.0))
    np.testing.assert_allclose(applied.matrix, np.eye(32), atol=1e-12)
    np.testing.assert_allclose(applied.kernel, np.eye(32) / dec32.mu[:, None], atol=1e-12)


def test_calculus_is_multiplicative(dec32):
    F, G = calculus.riesz_mean(1.0), calculus.imaginary_power(0.7)
    product = calculus.apply_multiplier(dec32, F.times(G)).matrix
    composed = calculus.apply_multiplier(dec32, F).matrix @ calculus.apply_multiplier(dec32, G).matrix
    np.testing.assert_allclose(product, composed, atol=1e-9)


def test_conjugate_multiplier_is_the_mu_adjoint(torus32, rng):
    space = MetricMeasureSpace(dist=torus32.dist, mu=rng.uniform(0.5, 2.0, 32))
    dec = calculus.decompose(calculus.build_laplacian(space))
    F = calculus.imaginary_power(1.3)
    A = calculus.apply_multiplier(dec, F).matrix
    A_bar = calculus.apply_multiplier(dec, F.conjugate()).matrix
    f = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    g = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    lhs = np.sum((A @ f) * np.conj(g) * space.mu)
    rhs = np.sum(f * np.conj(A_bar @ g) * space.mu)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_regularized_multiplier_matches_the_smoothing_family(dec32):
    F = calculus.riesz_mean(1.0)
    r, M = 0.7, 2
    G = calculus.regularize_multiplier(F, r, M, 2.0)
    lhs = calculus.apply_multiplier(dec32, G, root=True).matrix
    residual = np.eye(32) - calculus.smoothing_family(dec32, r, M)
    rhs = calculus.apply_multiplier(dec32, F, root=True).matrix @ residual
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_heat_semigroup(dec32, torus32):
    for t, s in [(0.5, 1.0), (2.0, 3.0)]:
        composed = calculus.compose_kernels(
            calculus.heat_kernel(dec32, t), calculus.heat_kernel(dec32, s), torus32.mu
        )
        np.testing.assert_allclose(composed, calculus.heat_kernel(dec32, t + s), atol=1e-9)


@pytest.mark.parametrize("t", [0.25, 1.0, 8.0])
def test_heat_kernel_closed_form(dec64, t):
    np.testing.assert_allclose(calculus.heat_kernel(dec64, t), closed_form_heat(64, t), atol=1e-12)


def test_heat_kernel_needs_positive_time(dec32):
    with pytest.raises(OperatorError):
        calculus.heat_kernel(dec32, 0.0)


def test_dirichlet_single_cell():
    space = build_masked_grid(1, 1)
    dec = calculus.decompose(calculus.build_dirichlet_laplacian(space))
    for t in (0.1, 1.0, 3.0):
        assert calculus.heat_kernel(dec, t)[0, 0] == pytest.approx(np.exp(-4.0 * t), rel=1e-12)


def test_dirichlet_needs_open_grid(torus32):
    with pytest.raises(OperatorError):
        calculus.build_dirichlet_laplacian(torus32)


def test_constant_potential_scales_the_heat_kernel(torus32, dec32):
    dec_v = calculus.decompose(calculus.build_schrodinger(torus32, np.full(32, 0.7)))
    for t in (0.5, 2.0):
        np.testing.assert_allclose(
            calculus.heat_kernel(dec_v, t), np.exp(-0.7 * t) * calculus.heat_kernel(dec32, t), atol=1e-12
        )


def test_negative_potential_rejected(torus32):
    with pytest.raises(OperatorError):
        calculus.build_schrodinger(torus32, -np.ones(32))


def test_operator_must_be_self_adjoint(torus32):
    action = np.triu(np.ones((32, 32)))
    with pytest.raises(OperatorError):
        SelfAdjointOperator(action, torus32)


def test_negative_operator_rejected(torus32):
    op = calculus.build_laplacian(torus32)
    with pytest.raises(OperatorError):
        calculus.decompose(SelfAdjointOperator(-op.action, torus32))


def test_unbounded_multiplier_rejected(dec32):
    with pytest.raises(OperatorError):
        calculus.apply_multiplier(dec32, lambda lam: np.where(lam > 0, 1.0, np.inf))


def test_operator_json(tmp_path, torus32):
    op = calculus.build_laplacian(torus32)
    path = str(tmp_path / "op.json")
    op.save(path)
    with open(path, encoding="utf-8") as fh:
        loaded = SelfAdjointOperator.from_json(json.load(fh), torus32)
    np.testing.assert_array_equal(loaded.action, op.action)
    assert loaded.order_m == 2.0


def test_presets():
    lam = np.array([0.0, 0.25, 0.5, 1.0, 2.0])
    np.testing.assert_allclose(calculus.parse_multiplier("riesz_mean:1")(lam), [1.0, 0.75, 0.5, 0.0, 0.0])
    np.testing.assert_allclose(calculus.parse_multiplier("heat:2")(lam), np.exp(-2.0 * lam))
    np.testing.assert_allclose(calculus.parse_multiplier("indicator:0.25,1")(lam), [0, 1, 1, 1, 0])
    power = calculus.parse_multiplier("imaginary_power:1.5")(lam)
    assert power[0] == 0
    np.testing.assert_allclose(np.abs(power[1:]), 1.0)
    assert calculus.parse_multiplier("imaginary_power:0")(lam)[0] == 1.0
    bump = calculus.parse_multiplier("bump_dilate:2")(lam)
    assert bump[2] == pytest.approx(norms.eta(1.0)) and bump[1] == pytest.approx(norms.eta(0.5))


@pytest.mark.parametrize("text", ["nope", "heat:a", "riesz_mean:-1", "bump_dilate:0", "indicator:2,1"])
def test_bad_presets(text):
    with pytest.raises(OperatorError):
        calculus.parse_multiplier(text)


def test_tabulated_multiplier():
    F = MultiplierFunction.from_samples([0.0, 1.0, 2.0], [1.0, 3.0, 1.0])
    np.testing.assert_allclose(F(np.array([0.5, 1.5, 2.5])), [2.0, 2.0, 0.0])
    assert F.support == (0.0, 2.0)
    with pytest.raises(OperatorError):
        MultiplierFunction.from_samples([0.0, 0.0], [1.0, 1.0])


def test_products_and_conjugates():
    F = calculus.imaginary_power(1.0)
    G = F.times(F.conjugate())
    lam = np.geomspace(0.01, 4.0, 17)
    np.testing.assert_allclose(G(lam), 1.0)
    assert G.value_at_zero == 0


def test_dilate():
    F = calculus.dilate(calculus.riesz_mean(1.0), 2.0)
    assert F(np.array([0.25]))[0] == pytest.approx(0.5)
    assert F.support == (0.0, 0.5)


@seed(11)
@settings(max_examples=20, deadline=None)
@given(r=st.floats(min_value=0.05, max_value=4.0), M=st.integers(min_value=1, max_value=4))
def test_regularized_multiplier(r, M):
    F = calculus.heat_multiplier(1.0)
    G = calculus.regularize_multiplier(F, r, M, 2.0)
    lam = np.linspace(0.0, 4.0, 33)
    np.testing.assert_allclose(G(lam), F(lam) * (1.0 - np.exp(-((r * lam) ** 2))) ** M, atol=1e-14)
    assert G(np.array([0.0]))[0] == 0.0


@pytest.mark.parametrize("r, M", [(0.5, 1), (1.0, 2), (2.0, 3)])
def test_smoothing_family_binomial_matches_power(dec32, r, M):
    np.testing.assert_allclose(
        calculus.smoothing_family(dec32, r, M),
        calculus.smoothing_family(dec32, r, M, direct=True),
        atol=1e-10,
    )


def test_dyadic_pieces_sum_back(dec32):
    F = calculus.heat_multiplier(0.5)
    lam = dec32.eigenvalues[dec32.eigenvalues > 0]
    pieces = calculus.dyadic_pieces(F, (lam.min(), lam.max()))
    total = sum(piece(lam) for piece in pieces.values())
    np.testing.assert_allclose(total, F(lam), atol=1e-10)
    for ell, piece in pieces.items():
        assert piece.support == (0.25 * 2.0**ell, 2.0**ell)


def test_dyadic_pieces_reject_a_non_partition():
    with pytest.raises(OperatorError):
        calculus.dyadic_pieces(calculus.heat_multiplier(1.0), (0.5, 2.0), phi=norms.eta)


def test_chebyshev_is_exact_on_linear_functions(torus32, rng):
    op = calculus.build_laplacian(torus32)
    f = rng.standard_normal(32)
    out = calculus.chebyshev_apply(op, lambda lam: 3.0 * lam - 1.0, 1, (0.0, 4.0), f)
    np.testing.assert_allclose(out, 3.0 * op.action @ f - f, atol=1e-10)


def test_chebyshev_degree_zero_is_a_constant(torus32, rng):
    op = calculus.build_laplacian(torus32)
    f = rng.standard_normal(32)
    out = calculus.chebyshev_apply(op, lambda lam: np.full(np.shape(lam), 2.5), 0, (0.0, 4.0), f)
    np.testing.assert_allclose(out, 2.5 * f, atol=1e-12)


def test_chebyshev_heat_filter_matches_exact_path(rng):
    space = build_torus(256, 1)
    op = calculus.build_laplacian(space)
    dec = calculus.decompose(op)
    F = calculus.heat_multiplier(1.0)
    f = rng.standard_normal(256)
    approx = calculus.chebyshev_apply(op, F, 32, (0.0, 4.0), f)
    exact = calculus.apply_multiplier(dec, F).matrix @ f
    assert np.abs(approx - exact).max() <= 1e-6
    error = np.sqrt(np.sum((approx - exact) ** 2))
    assert error <= (calculus.chebyshev_tail(F, 32, (0.0, 4.0)) + 1e-12) * np.sqrt(np.sum(f**2))


def test_chebyshev_interval_must_cover_spectrum(torus32):
    op = calculus.build_laplacian(torus32)
    with pytest.raises(OperatorError):
        calculus.chebyshev_apply(op, calculus.heat_multiplier(1.0), 8, (0.0, 2.0), np.ones(32))


def test_root_vs_plain_constant():
    out = calculus.root_vs_plain_constant(
        calculus.riesz_mean(2.0), s=1.0, q=2.0, m=2.0, t_grid=[0.5, 1.0, 2.0], n_points=1024
    )
    assert out["root"] > 0 and out["plain"] > 0
    assert out["ratio"] == pytest.approx(out["plain"] / out["root"])
