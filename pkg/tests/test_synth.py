import numpy as np
import pytest

from snapmatch.errors import InvalidParameterError
from snapmatch.osa import SolverOptions, solve
from snapmatch.strain import strain_intensity
from snapmatch.synth import SyntheticSpec, deform, generate, sample_shape


@pytest.mark.parametrize("shape", ["sphere", "ellipsoid", "open-sheet"])
def test_shapes_are_triangulated(shape, rng):
    g = sample_shape(shape, 40, rng)
    assert len(g) == 40 and g.has_mesh
    assert np.bincount(g.triangles.ravel(), minlength=40).min() >= 1


def test_sphere_points_on_unit_sphere(rng):
    g = sample_shape("sphere", 60, rng)
    np.testing.assert_allclose(np.linalg.norm(g.points, axis=1), 1.0, atol=1e-12)


def test_same_seed_bit_identical():
    spec = SyntheticSpec("open-sheet", 30, 25, 2, "smooth-bump", 0.2, noise=0.01, seed=9)
    (p1, t1), (p2, t2) = generate(spec), generate(spec)
    assert np.array_equal(p1.initial.points, p2.initial.points)
    assert all(np.array_equal(a.points, b.points) for a, b in zip(p1.targets, p2.targets))
    assert np.array_equal(t1.states, t2.states)
    assert p1.lam == p2.lam and p1.rho == p2.rho


def test_zero_translation_keeps_snapshots():
    p, truth = generate(SyntheticSpec("sphere", 20, 20, 3, "translation", 0.0))
    for t in p.targets:
        np.testing.assert_array_equal(t.points, p.initial.points)
    assert np.all(truth.states == p.initial.points)


@pytest.mark.parametrize("deformation", ["translation", "uniform-scale", "smooth-bump"])
def test_ground_truth_reproduces_targets(deformation):
    p, truth = generate(SyntheticSpec("ellipsoid", 24, 24, 3, deformation, 0.8, seed=2))
    for k, t in enumerate(p.targets):
        np.testing.assert_array_equal(truth.states[k + 1], t.points)
    np.testing.assert_array_equal(truth.states[0], p.initial.points)


def test_translation_magnitude():
    spec = SyntheticSpec("sphere", 20, 20, 1, "translation", 0.3)
    p, truth = generate(spec)
    shift = truth.final - truth.states[0]
    np.testing.assert_allclose(np.linalg.norm(shift, axis=1), 0.3)


def test_scale_deform_fraction():
    spec = SyntheticSpec(deformation="uniform-scale", magnitude=1.2)
    pts = np.eye(3)
    centroid = np.zeros(3)
    np.testing.assert_allclose(deform(spec, pts, 0.5, (centroid, None)), 1.1 * pts)


def test_independent_target_sample():
    p, _ = generate(SyntheticSpec("sphere", 30, 22, 1, "smooth-bump", 0.2))
    assert len(p.targets[0]) == 22


@pytest.mark.parametrize("kwargs", [
    dict(base_shape="torus"), dict(deformation="twist"), dict(n_points=3),
    dict(noise=-1.0), dict(magnitude=np.nan), dict(deformation="uniform-scale", magnitude=0.0),
    dict(n_snapshots=0),
])
def test_spec_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        SyntheticSpec(**kwargs)


@pytest.mark.parametrize("c", [1.05, 1.1])
def test_recovered_scaling_strain(c):
    p, _ = generate(SyntheticSpec("sphere", 60, 60, 1, "uniform-scale", c, seed=5))
    rep = solve(p, SolverOptions(max_iterations=60, stop_factor=0))
    median = np.median(strain_intensity(p.initial, rep.trajectory.final).values)
    assert abs(median - (c - 1)) <= 0.2 * (c - 1)
