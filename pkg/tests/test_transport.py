import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blobflow.errors import SizeLimitError
from blobflow.particles import ParticleEnsemble
from blobflow.transport import m1, m2, w1_1d, w2_1d, w2_1d_refined, w2_assignment

finite = st.floats(-50, 50, allow_nan=False)


def brute_force(a, b, p=2):
    best = np.inf
    for perm in itertools.permutations(range(b.shape[0])):
        cost = np.mean(np.sum(np.abs(a - b[list(perm)]) ** p, axis=1))
        best = min(best, cost)
    return best ** (1.0 / p)


def test_single_atoms():
    assert w2_1d(np.array([1.5]), np.array([-2.0])).value == 3.5
    assert w1_1d(np.array([1.5]), np.array([-2.0])).value == 3.5


def test_identical_and_shuffled():
    a = np.array([0.0, 1.0])
    assert w2_1d(a, a).value == 0.0
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(12, 2))
    assert w2_assignment(pts, rng.permutation(pts)).value == 0.0


def test_brute_force_agreement_1d():
    rng = np.random.default_rng(42)
    for _ in range(30):
        n = int(rng.integers(1, 7))
        a, b = rng.normal(size=(n, 1)), rng.normal(size=(n, 1))
        assert abs(w2_1d(a, b).value - brute_force(a, b)) <= 1e-12
        assert abs(w1_1d(a, b).value - brute_force(a, b, p=1)) <= 1e-12
        assert abs(w2_assignment(a, b).value - w2_1d(a, b).value) <= 1e-12


def test_rotated_triangle_assignment():
    # equilateral triangle rotated by 2pi/3 about its centroid maps onto
    # itself, so the optimal matching cost is zero
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    centroid = tri.mean(axis=0)
    th = 2 * np.pi / 3
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    rotated = (tri - centroid) @ rot.T + centroid
    assert w2_assignment(tri, rotated).value <= 1e-12
    # a smaller rotation gives the pure displacement of the matched vertices
    th = 0.3
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    rotated = (tri - centroid) @ rot.T + centroid
    expect = brute_force(tri, rotated)
    assert abs(w2_assignment(tri, rotated).value - expect) <= 1e-12


@given(arrays(float, (6, 1), elements=finite), arrays(float, (6, 1), elements=finite))
def test_w1_below_w2(a, b):
    assert w1_1d(a, b).value <= w2_1d(a, b).value + 1e-12


@given(
    arrays(float, (8, 1), elements=finite),
    arrays(float, (8, 1), elements=finite),
    arrays(float, (8, 1), elements=finite),
)
def test_metric_axioms(a, b, c):
    dab = w2_1d(a, b).value
    assert dab == w2_1d(b, a).value
    assert dab <= w2_1d(a, c).value + w2_1d(c, b).value + 1e-10
    assert w2_1d(a, a).value == 0.0


@given(arrays(float, (5, 1), elements=finite), arrays(float, (5, 1), elements=finite), st.floats(-10, 10))
def test_translation_exact(a, b, shift):
    assert w2_1d(a + shift, b + shift).value == pytest.approx(w2_1d(a, b).value, abs=1e-12)


@given(arrays(float, (5, 1), elements=finite), arrays(float, (5, 1), elements=finite), st.floats(0.01, 10))
def test_scaling_exact(a, b, lam):
    assert w2_1d(lam * a, lam * b).value == pytest.approx(lam * w2_1d(a, b).value, rel=1e-12, abs=1e-12)


def test_mismatch_errors():
    with pytest.raises(ValueError):
        w2_1d(np.zeros((3, 1)), np.zeros((4, 1)))
    with pytest.raises(ValueError):
        w2_1d(np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        w2_assignment(np.zeros((2, 1)), np.zeros((2, 2)))
    with pytest.raises(SizeLimitError):
        w2_assignment(np.zeros((513, 1)), np.zeros((513, 1)))


def test_moments():
    assert m2(np.array([[3.0]])) == 9.0
    assert m1(np.array([[3.0], [-1.0]])) == 2.0
    ens = ParticleEnsemble(np.array([[1.0, 2.0], [0.0, 0.0]]))
    assert m2(ens) == pytest.approx(2.5)


def test_moment_transport_inequality():
    rng = np.random.default_rng(7)
    for _ in range(40):
        n = int(rng.integers(1, 30))
        a = rng.normal(size=(n, 1))
        b = 2 * rng.normal(size=(n, 1)) + 1
        assert m2(b) <= 2 * m2(a) + 2 * w2_1d(a, b).value ** 2 + 1e-12


def test_quantile_gaussian_m2():
    from scipy.special import erfinv

    q = (np.arange(10_000) + 0.5) / 10_000
    x = np.sqrt(2) * erfinv(2 * q - 1)
    assert abs(m2(x[:, None]) - 1.0) <= 0.01


def test_refined_distance_consistency():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(6, 1))
    b = rng.normal(size=(6, 1))
    assert w2_1d_refined(a, b).value == pytest.approx(w2_1d(a, b).value, abs=1e-14)
    # repeating atoms leaves the measure unchanged
    a3 = np.repeat(a, 3, axis=0)
    assert w2_1d_refined(a3, b).value == pytest.approx(w2_1d(a, b).value, abs=1e-12)
