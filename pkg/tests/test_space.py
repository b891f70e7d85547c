import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from hlab.errors import SpaceError
from hlab.space import (
    MetricMeasureSpace,
    annulus,
    ball,
    build_masked_grid,
    build_segment,
    build_torus,
    fit_doubling,
    parse_mask,
    volume,
    volumes,
)

TORUS = build_torus(12, 1)


def test_torus_geometry():
    space = build_torus(8, 1)
    assert space.n_pts == 8
    assert space.diameter == 4.0
    assert space.origin == 0
    assert space.label == "Z_8^1"
    assert space.total_measure == 8.0
    assert space.lattice_dim == 1
    assert space.dist[0, 7] == 1.0


def test_torus_2d_uses_taxicab_wraparound():
    space = build_torus(4, 2)
    assert space.n_pts == 16
    assert space.diameter == 4.0
    # (0, 0) to (3, 3) wraps to distance 1 + 1
    assert space.dist[0, 15] == 2.0


def test_ball_is_strict():
    assert list(ball(TORUS, 0, 1.0)) == [0]
    assert sorted(ball(TORUS, 0, 1.5)) == [0, 1, 11]
    assert ball(TORUS, 0, 0.0).size == 0


def test_volume_counts_on_cycle():
    for r in (0.5, 1.0, 1.5, 2.0, 3.7):
        expected = min(2 * int(np.ceil(r)) - 1, 12)
        assert volume(TORUS, 5, r) == expected
    assert volume(TORUS, 3, 100.0) == TORUS.total_measure


@seed(3)
@settings(max_examples=40, deadline=None)
@given(radii=st.lists(st.floats(min_value=0.0, max_value=8.0), min_size=1, max_size=5))
def test_volumes_table_matches_single_volume(radii):
    table = volumes(TORUS, radii)
    assert table.shape == (TORUS.n_pts, len(radii))
    for x in (0, 4, 11):
        for k, r in enumerate(radii):
            assert table[x, k] == volume(TORUS, x, r)


def test_annuli_partition_the_dilated_ball():
    space = build_torus(32, 1)
    inner = ball(space, 3, 2.0)
    assert np.array_equal(annulus(space, 3, 2.0, 0), inner)
    for j in range(1, 4):
        ring = annulus(space, 3, 2.0, j)
        outer = ball(space, 3, 2.0 * 2**j)
        assert np.intersect1d(ring, ball(space, 3, 2.0 * 2 ** (j - 1))).size == 0
        assert np.array_equal(np.union1d(ring, ball(space, 3, 2.0 * 2 ** (j - 1))), outer)


@pytest.mark.parametrize("N, d", [(64, 1), (16, 2)])
def test_doubling_fit_recovers_dimension(N, d):
    fit = fit_doubling(build_torus(N, d))
    assert abs(fit.exponent_n - d) <= 0.2
    assert fit.exponent_D <= 0.2
    assert fit.constant_Cn >= 1.0
    assert fit.worst_triple is not None


def test_single_point_space_fit():
    space = MetricMeasureSpace(dist=[[0.0]], mu=[2.0])
    fit = fit_doubling(space)
    assert fit.exponent_n == 0.0 and fit.constant_Cn == 1.0


def test_segment_origin_is_center():
    space = build_segment(5)
    assert space.n_pts == 11
    assert space.origin == 5
    assert space.dist[space.origin].max() == 5.0
    assert not space.periodic


def test_masked_grid_keeps_ambient_metric():
    space = build_masked_grid(3, 2, "#.#\n###")
    assert space.n_pts == 5
    # (0, 0) and (0, 2) are 2 apart even though (0, 1) is masked out
    assert space.dist[0, 1] == 2.0
    assert space.lattice_shape == (2, 3)


def test_parse_mask_rejects_ragged_rows():
    with pytest.raises(SpaceError):
        parse_mask("##\n#")
    with pytest.raises(SpaceError):
        parse_mask("#x")


@pytest.mark.parametrize(
    "dist, mu",
    [
        ([[0.0, 1.0], [2.0, 0.0]], [1.0, 1.0]),
        ([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0]),
        ([[1.0, 1.0], [1.0, 0.0]], [1.0, 1.0]),
        ([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]], [1.0, 1.0, 1.0]),
    ],
)
def test_invalid_spaces_are_rejected(dist, mu):
    with pytest.raises(SpaceError):
        MetricMeasureSpace(dist=dist, mu=mu)


def test_point_cap():
    with pytest.raises(SpaceError):
        build_torus(100, 2, max_points=4096)
    with pytest.raises(SpaceError):
        build_torus(1, 1)


def test_invalid_point_and_radius():
    with pytest.raises(SpaceError):
        ball(TORUS, 12, 1.0)
    with pytest.raises(SpaceError):
        ball(TORUS, 0, -1.0)
    with pytest.raises(SpaceError):
        annulus(TORUS, 0, 1.0, -1)


def test_json_round_trip(tmp_path):
    path = str(tmp_path / "space.json")
    build_torus(6, 2).save(path)
    loaded = MetricMeasureSpace.load(path)
    assert loaded.n_pts == 36
    assert loaded.lattice_shape == (6, 6)
    assert loaded.periodic
    assert np.array_equal(loaded.dist, build_torus(6, 2).dist)
