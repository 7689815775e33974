import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nashbandit.geometry import project_set
from nashbandit.sets import ActionSet, check_safety_ball, project_simplex

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def _simplex_projection_bisection(z, mass):
    # independent oracle: the projection is max(z - tau, 0) with tau solving sum = mass
    lo, hi = z.min() - mass, z.max()
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        if np.maximum(z - tau, 0).sum() > mass:
            lo = tau
        else:
            hi = tau
    return np.maximum(z - 0.5 * (lo + hi), 0)


ALL_SETS = [
    ActionSet.box([0.0, -1.0], [1.0, 2.0]),
    ActionSet.simplex(3, mass=2.0),
    ActionSet.ball([0.5, 0.5, 0.0], 0.7),
    ActionSet.budget(3, 1.5),
    ActionSet.box(0.0, 2.0),
]


def test_box_projection_clips():
    box = ActionSet.box([0, 0], [1, 1])
    assert np.array_equal(project_set(box, [-1, 2]), [0, 1])


def test_simplex_projection_example():
    assert np.allclose(project_set(ActionSet.simplex(2), [0.8, 0.8]), [0.5, 0.5], atol=1e-15)


def test_ball_projection_example():
    assert np.allclose(project_set(ActionSet.ball([0, 0], 1.0), [3, 4]), [0.6, 0.8], atol=1e-15)


def test_points_inside_are_fixed():
    rng = np.random.default_rng(0)
    for s in ALL_SETS:
        x = s.sample(rng, 100)
        assert np.allclose(s.project(x), x, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(arrays(float, 5, elements=finite), st.floats(0.1, 5))
def test_simplex_projection_matches_bisection(z, mass):
    assert np.allclose(project_simplex(z, mass), _simplex_projection_bisection(z, mass), atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 3, elements=finite), st.integers(0, 2**32 - 1))
def test_projection_is_nearest_point(z, seed):
    rng = np.random.default_rng(seed)
    for s in ALL_SETS:
        if s.dim != 3:
            continue
        xhat = s.project(z)
        assert s.contains(xhat)
        others = s.sample(rng, 200)
        assert np.all(np.linalg.norm(z - xhat) <= np.linalg.norm(z - others, axis=-1) + 1e-12)


def test_batched_projection_matches_rowwise():
    rng = np.random.default_rng(1)
    for s in ALL_SETS:
        z = 3 * rng.standard_normal((50, s.dim))
        rows = np.stack([s.project(r) for r in z])
        assert np.array_equal(s.project(z), rows)


@pytest.mark.parametrize("s", ALL_SETS, ids=lambda s: s.kind)
def test_safety_ball_inside(s):
    assert check_safety_ball(s, np.random.default_rng(2), samples=2000)


def test_safety_radius_is_tight_for_box():
    box = ActionSet.box([0, 0], [1, 3])
    assert box.safety_radius == 0.5
    assert np.array_equal(box.base_point, [0.5, 1.5])


def test_distance_and_contains():
    box = ActionSet.box([0, 0], [1, 1])
    assert box.distance(np.array([2.0, 0.5])) == pytest.approx(1.0)
    assert box.contains(np.array([1 + 1e-11, 0.5]))
    assert not box.contains(np.array([1 + 1e-9, 0.5]))


def test_effective_dimension():
    assert ActionSet.simplex(4).effective_dim == 3
    assert ActionSet.box([0, 0], [1, 1]).effective_dim == 2


@pytest.mark.parametrize("bad", [
    lambda: ActionSet.box([1.0], [0.0]),
    lambda: ActionSet.simplex(1),
    lambda: ActionSet("cube", 2, safety_radius=1.0),
    lambda: ActionSet.box([0.0], [1.0], safety_radius=0.0),
])
def test_invalid_sets(bad):
    with pytest.raises(ValueError):
        bad()


def test_directions_are_unit_tangent():
    rng = np.random.default_rng(3)
    for s in ALL_SETS:
        z = s.sample_direction(rng, 1000)
        assert np.allclose(np.linalg.norm(z, axis=-1), 1, atol=1e-12)
        if s.kind == "simplex":
            assert np.allclose(z.sum(axis=-1), 0, atol=1e-12)


def test_one_dimensional_direction_is_fair_coin():
    z = ActionSet.box(0.0, 1.0).sample_direction(np.random.default_rng(4), 10_000)
    assert set(np.unique(z)) == {-1.0, 1.0}
    assert abs(np.mean(z == 1.0) - 0.5) <= 0.01
