import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hlab.errors import WeightError
from hlab.space import build_segment, build_torus
from hlab.weights import (
    Weight,
    ainf_profile,
    ap_constant,
    ap_power_range,
    ap_rh_duality_check,
    conjugate,
    dual_weight,
    maximal,
    power_class_check,
    power_weight,
    power_weight_admissible,
    rh_constant,
    unit_weight,
)

SPACE = build_torus(16, 1)

positive_weights = arrays(
    np.float64, (SPACE.n_pts,), elements=st.floats(min_value=0.05, max_value=20.0)
)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 7.0])
def test_unit_weight_is_in_every_class_with_constant_one(p):
    assert abs(ap_constant(SPACE, unit_weight(SPACE), p) - 1.0) <= 1e-12
    assert abs(rh_constant(SPACE, unit_weight(SPACE), p + 1.0) - 1.0) <= 1e-12


@seed(5)
@settings(max_examples=30, deadline=None)
@given(values=positive_weights)
def test_ap_constants_decrease_in_p(values):
    w = Weight(values)
    constants = [ap_constant(SPACE, w, p) for p in (1.0, 1.5, 2.0, 4.0)]
    assert constants[0] >= 1.0 - 1e-12
    for a, b in zip(constants, constants[1:]):
        assert b <= a * (1.0 + 1e-9)


@seed(6)
@settings(max_examples=30, deadline=None)
@given(values=positive_weights)
def test_dual_weight_has_the_same_constant(values):
    # [w^(1-p')]_{A_p'} = [w]_{A_p}^(p'-1)
    w = Weight(values)
    for p in (1.5, 3.0):
        lhs = ap_constant(SPACE, dual_weight(w, p), conjugate(p))
        rhs = ap_constant(SPACE, w, p) ** (conjugate(p) - 1.0)
        assert lhs == pytest.approx(rhs, rel=1e-9)


@seed(7)
@settings(max_examples=25, deadline=None)
@given(values=positive_weights)
def test_maximal_function_dominates_and_is_attained(values):
    Mf = maximal(SPACE, values)
    assert np.all(Mf >= values * (1 - 1e-12))
    assert Mf.max() == pytest.approx(values.max())


def test_maximal_brute_force_on_segment():
    space = build_segment(3)
    f = np.array([0.0, 4.0, 0.0, 1.0, 0.0, 0.0, 9.0])
    expected = np.zeros(space.n_pts)
    for center in range(space.n_pts):
        for r in space.radii:
            members = np.flatnonzero(space.dist[center] < r)
            avg = f[members].mean()
            expected[members] = np.maximum(expected[members], avg)
    np.testing.assert_allclose(maximal(space, f), expected, rtol=1e-12)


def test_rh_conventions():
    w = power_weight(SPACE, 1.0)
    assert rh_constant(SPACE, w, 1.0) == 1.0
    assert rh_constant(SPACE, w, np.inf) >= rh_constant(SPACE, w, 4.0) >= 1.0


def test_power_weight_is_flattened_near_origin():
    w = power_weight(SPACE, -2.0)
    assert w.values[0] == pytest.approx(4.0)
    assert w.values[1] == pytest.approx(1.0)
    assert w.values[8] == pytest.approx(8.0**-2)


def test_power_ranges():
    assert ap_power_range(1, 3.0) == (-1, 2.0)
    assert power_weight_admissible(1, 2.0, 1.0) == (-1, 1.0)
    assert power_weight_admissible(2, 3.0, 2.0) == (-2, 4.0)
    with pytest.raises(WeightError):
        power_weight_admissible(2, 3.0, 1.0)


def test_power_weight_outside_range_has_growing_constant():
    constants = [ap_constant(build_torus(N, 1), power_weight(build_torus(N, 1), 4.5), 4.0) for N in (32, 64, 128)]
    assert constants[2] / constants[1] >= 1.5
    inside = [ap_constant(build_torus(N, 1), power_weight(build_torus(N, 1), 0.5), 4.0) for N in (32, 64, 128)]
    assert inside[2] / inside[1] <= 1.25


def test_ap_rh_duality_agrees_on_power_weights():
    for beta in (-0.5, 0.3, 0.8):
        check = ap_rh_duality_check(SPACE, power_weight(SPACE, beta), p=1.5, r=1.5)
        assert check.consistent
        assert check.rh_exponent > 1.0


@pytest.mark.parametrize(
    "p, r, rh_exponent, dual_exponent",
    [(1.5, 1.5, 2.0, 2.0), (2.0, 1.25, 5.0 / 3.0, 1.6), (1.25, 2.0, 8.0 / 3.0, 2.5)],
)
def test_ap_rh_duality_exponents(p, r, rh_exponent, dual_exponent):
    # w in A_p and RH_((r'/p)') against w^(1-p') in A_(p'/r)
    w = power_weight(SPACE, 0.3)
    check = ap_rh_duality_check(SPACE, w, p=p, r=r)
    assert check.rh_exponent == pytest.approx(rh_exponent)
    assert check.dual_exponent == pytest.approx(dual_exponent)
    assert check.dual_ap == pytest.approx(ap_constant(SPACE, dual_weight(w, p), dual_exponent))
    assert check.consistent


def test_ap_rh_duality_rejects_bad_exponents():
    with pytest.raises(WeightError):
        ap_rh_duality_check(SPACE, unit_weight(SPACE), p=4.0, r=2.0)


def test_power_class_check_on_unit_weight():
    left, right, constants = power_class_check(SPACE, unit_weight(SPACE), q=2.0, s=2.0)
    assert left and right
    assert constants["powered_ap"] == pytest.approx(1.0)


@seed(8)
@settings(max_examples=25, deadline=None)
@given(f=positive_weights, g=positive_weights, c=st.floats(min_value=-5.0, max_value=5.0))
def test_maximal_function_is_sublinear_and_homogeneous(f, g, c):
    Mf, Mg = maximal(SPACE, f), maximal(SPACE, g)
    assert np.all(maximal(SPACE, f + g) <= (Mf + Mg) * (1 + 1e-12))
    np.testing.assert_allclose(maximal(SPACE, c * f), abs(c) * Mf, rtol=1e-12, atol=1e-300)


@seed(9)
@settings(max_examples=25, deadline=None)
@given(values=positive_weights, p=st.sampled_from([1.25, 1.5, 2.0, 3.0, 6.0]))
def test_dual_weight_is_an_involution(values, p):
    w = Weight(values)
    back = dual_weight(dual_weight(w, p), conjugate(p))
    np.testing.assert_allclose(back.values, w.values, rtol=1e-10)


@seed(10)
@settings(max_examples=25, deadline=None)
@given(values=positive_weights)
def test_rh_constants_increase_in_q(values):
    w = Weight(values)
    constants = [rh_constant(SPACE, w, q) for q in (1.5, 2.0, 4.0, 8.0, np.inf)]
    assert constants[0] >= 1.0 - 1e-12
    for a, b in zip(constants, constants[1:]):
        assert b >= a * (1.0 - 1e-9)


@seed(11)
@settings(max_examples=25, deadline=None)
@given(values=positive_weights, exponents=st.sampled_from([(2.0, 2.0), (3.0, 1.5), (1.5, 4.0)]))
def test_powered_constant_is_pinned_between_the_ap_and_rh_constants(values, exponents):
    # max([w]_Aq, [w]_RHs)^s <= [w^s]_A(s(q-1)+1) <= ([w]_Aq [w]_RHs)^s
    q, s = exponents
    _, _, constants = power_class_check(SPACE, Weight(values), q=q, s=s)
    ap, rh, powered = constants["ap"], constants["rh"], constants["powered_ap"]
    assert max(ap, rh) ** s <= powered * (1 + 1e-9)
    assert powered <= (ap * rh) ** s * (1 + 1e-9)


def test_power_class_check_judges_both_sides_alike_on_tame_weights():
    for beta in (-0.3, 0.2, 0.6):
        left, right, _ = power_class_check(SPACE, power_weight(SPACE, beta), q=2.0, s=2.0)
        assert left and right


def test_ainf_profile_records_each_p():
    profile = ainf_profile(SPACE, power_weight(SPACE, 0.5), [1.5, 2.0, 3.0])
    assert list(profile) == [1.5, 2.0, 3.0]
    assert profile[1.5] >= profile[3.0]


@pytest.mark.parametrize("values", [[1.0, 0.0], [1.0, -2.0], [np.inf, 1.0], []])
def test_invalid_weights(values):
    with pytest.raises(WeightError):
        Weight(np.asarray(values, dtype=float))


def test_weight_misaligned_with_space():
    with pytest.raises(WeightError):
        ap_constant(SPACE, Weight(np.ones(3)), 2.0)
    with pytest.raises(WeightError):
        ap_constant(SPACE, unit_weight(SPACE), 0.5)


def test_weight_json(tmp_path):
    path = tmp_path / "w.json"
    path.write_text("[1.0, 2.5, 3.0]", encoding="utf-8")
    assert Weight.load(str(path)).values.tolist() == [1.0, 2.5, 3.0]
