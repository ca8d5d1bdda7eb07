import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpcopt.errors import InvalidInputError
from dpcopt.problem import (
    BallDomain,
    BallIntersectionDomain,
    BoxDomain,
    Dataset,
    HingeLoss,
    QuadraticDistanceLoss,
    QuadraticOffset,
    hinge_loss_subgrad,
    hinge_loss_value,
    regularize,
)
from dpcopt.sampling import RandomStream


# ---------------------------------------------------------------------------
# hinge loss
# ---------------------------------------------------------------------------

def test_hinge_active_branch_forced():
    w = np.zeros(2)
    g = hinge_loss_subgrad(w, np.array([1.0, 1.0]), 1.0)
    assert np.array_equal(g, np.array([-1.0, -1.0]))
    assert hinge_loss_value(w, np.array([1.0, 1.0]), 1.0) == 1.0


def test_hinge_inactive_branch():
    w = np.array([2.0, 0.0])  # margin y<w,x> = 2 >= 1
    g = hinge_loss_subgrad(w, np.array([1.0, 0.0]), 1.0)
    assert np.array_equal(g, np.zeros(2))
    assert hinge_loss_value(w, np.array([1.0, 0.0]), 1.0) == 0.0


def test_hinge_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        hinge_loss_subgrad(np.zeros(3), np.zeros(2), 1.0)


def test_hinge_subgrad_norm_bounded_by_feature_norm():
    gen = RandomStream(1).gen
    for _ in range(1000):
        w = gen.normal(size=4)
        x = gen.normal(size=4)
        x /= np.linalg.norm(x)
        y = 1.0 if gen.random() < 0.5 else -1.0
        assert np.linalg.norm(hinge_loss_subgrad(w, x, y)) <= 1.0 + 1e-12


def test_hinge_vectorized_paths_match_scalar():
    fam = HingeLoss(1.0)
    gen = RandomStream(2).gen
    W = gen.normal(size=(6, 3))
    X = gen.normal(size=(5, 3))
    y = np.where(gen.random(5) < 0.5, 1.0, -1.0)
    V = fam.value_many(W, X, y)
    for i, w in enumerate(W):
        for j in range(5):
            assert V[i, j] == pytest.approx(fam.value(w, X[j], y[j]))
    m = fam.subgrad_mean(W[0], X, y)
    ref = np.mean([fam.subgrad(W[0], X[j], y[j]) for j in range(5)], axis=0)
    assert np.allclose(m, ref)
    E = fam.subgrad_each(W[:5], X, y)
    for j in range(5):
        assert np.allclose(E[j], fam.subgrad(W[j], X[j], y[j]))


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def test_ball_projection_boundary_scaling():
    dom = BallDomain(np.zeros(2), 1.0)
    assert np.allclose(dom.project(np.array([3.0, 4.0])), [0.6, 0.8])


def test_projection_identity_inside():
    dom = BallDomain(np.zeros(3), 2.0)
    p = np.array([0.3, -0.4, 0.5])
    assert np.array_equal(dom.project(p), p)


def test_box_projection_clamps():
    dom = BoxDomain(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    assert np.allclose(dom.project(np.array([2.0, -0.5])), [1.0, -0.5])


def test_projection_rejects_nonfinite():
    dom = BallDomain(np.zeros(2), 1.0)
    with pytest.raises(InvalidInputError):
        dom.project(np.array([np.nan, 0.0]))


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_projection_optimality_ball(seed):
    # ||project(p) - p|| <= ||q - p|| for feasible q
    gen = np.random.default_rng(seed)
    dom = BallDomain(gen.normal(size=3), 0.5 + gen.random())
    p = 3.0 * gen.normal(size=3)
    proj = dom.project(p)
    for _ in range(100):
        q = dom.random_point(gen)
        assert np.linalg.norm(proj - p) <= np.linalg.norm(q - p) + 1e-9


@given(st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_projection_idempotent(seed):
    gen = np.random.default_rng(seed)
    dom = BoxDomain(-np.abs(gen.normal(size=4)) - 0.1, np.abs(gen.normal(size=4)) + 0.1)
    p = 2.0 * gen.normal(size=4)
    once = dom.project(p)
    assert np.array_equal(dom.project(once), once)


def test_intersection_projection_against_sampling_oracle():
    # Dykstra projection beats every sampled feasible point in distance
    gen = RandomStream(8).gen
    base = BallDomain(np.zeros(3), 1.0)
    inter = BallIntersectionDomain(base, np.array([0.8, 0.0, 0.0]), 0.5)
    for _ in range(20):
        p = 2.0 * gen.normal(size=3)
        proj = inter.project(p)
        assert inter.contains(proj, tol=1e-7)
        for _ in range(200):
            q = inter.random_point(gen)
            assert np.linalg.norm(proj - p) <= np.linalg.norm(q - p) + 1e-6


def test_intersection_diameter_and_trivial_case():
    base = BallDomain(np.zeros(2), 1.0)
    inter = BallIntersectionDomain(base, np.zeros(2), 10.0)
    p = np.array([5.0, 0.0])
    assert np.allclose(inter.project(p), base.project(p))
    assert inter.diameter_D == base.diameter_D


# ---------------------------------------------------------------------------
# first-order convexity of the shipped families
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("family", [HingeLoss(1.0), QuadraticDistanceLoss(2.0, 1.0)])
def test_first_order_convexity_random_pairs(family):
    gen = RandomStream(3).gen
    for _ in range(300):
        u = gen.normal(size=3)
        v = gen.normal(size=3)
        x = gen.normal(size=3)
        x /= np.linalg.norm(x)
        y = 1.0 if gen.random() < 0.5 else -1.0
        lhs = family.value(v, x, y)
        rhs = (family.value(u, x, y)
               + family.subgrad(u, x, y) @ (v - u)
               + 0.5 * family.strong_mu * np.linalg.norm(v - u) ** 2)
        assert lhs >= rhs - 1e-10


def test_subgrad_norm_bound_over_expanded_set():
    fam = HingeLoss(1.0)
    dom = BallDomain(np.zeros(4), 1.0, expansion_r=0.5)
    gen = RandomStream(4).gen
    for _ in range(10_000):
        w = dom.random_point(gen) + 0.5 * (gen.random() * 2 - 1) * gen.normal(size=4) / 10
        x = gen.normal(size=4)
        x /= np.linalg.norm(x)
        y = 1.0 if gen.random() < 0.5 else -1.0
        assert np.linalg.norm(fam.subgrad(w, x, y)) <= fam.lipschitz_G + 1e-12


# ---------------------------------------------------------------------------
# quadratic offsets and regularization
# ---------------------------------------------------------------------------

def test_regularize_identity_when_zero():
    fam = HingeLoss(1.0)
    dom = BallDomain(np.zeros(2), 1.0)
    assert regularize(fam, QuadraticOffset.zero(2), dom) is fam


def test_regularizer_weight_formula():
    # u = G sqrt(d log(1/delta)) / (D eps N) for the general-convex reduction
    from dpcopt.accountant import ApproxDpBudget
    from dpcopt.private_erm import general_regularizer_weight
    u = general_regularizer_weight(1.0, 1.0, 1000, 4, ApproxDpBudget(0.5, 0.01))
    assert u == pytest.approx(math.sqrt(4 * math.log(100)) / (0.5 * 1000), abs=1e-7)
    assert u == pytest.approx(0.0085839, abs=1e-6)


def test_regularized_family_adds_value_and_grad():
    fam = HingeLoss(1.0)
    dom = BallDomain(np.zeros(2), 1.0)
    off = QuadraticOffset(0.5, np.zeros(2))
    reg = regularize(fam, off, dom)
    w = np.array([1.0, 0.0])
    x = np.array([0.0, 1.0])
    assert reg.value(w, x, 1.0) == pytest.approx(fam.value(w, x, 1.0) + 0.5)
    assert np.allclose(reg.subgrad(w, x, 1.0) - fam.subgrad(w, x, 1.0), [1.0, 0.0])
    assert reg.strong_mu == pytest.approx(fam.strong_mu + 1.0)
    # Lipschitz bump: 2 lam * worst-case distance from the center over K_r
    assert reg.lipschitz_G == pytest.approx(1.0 + 2 * 0.5 * 1.0)


def test_regularize_adds_zero_at_center():
    fam = HingeLoss(1.0)
    dom = BallDomain(np.zeros(3), 1.0)
    center = np.array([0.1, -0.2, 0.3])
    reg = regularize(fam, QuadraticOffset(0.7, center), dom)
    x = np.array([1.0, 0.0, 0.0])
    assert reg.value(center, x, 1.0) == pytest.approx(fam.value(center, x, 1.0))


def test_regularized_vectorized_paths_match_scalar():
    fam = HingeLoss(1.0)
    dom = BallDomain(np.zeros(3), 1.0)
    reg = regularize(fam, QuadraticOffset(0.3, np.array([0.1, 0.0, -0.1])), dom)
    gen = RandomStream(6).gen
    W = gen.normal(size=(4, 3))
    X = gen.normal(size=(4, 3))
    y = np.where(gen.random(4) < 0.5, 1.0, -1.0)
    V = reg.value_many(W, X, y)
    for i in range(4):
        for j in range(4):
            assert V[i, j] == pytest.approx(reg.value(W[i], X[j], y[j]))
    E = reg.subgrad_each(W, X, y)
    for j in range(4):
        assert np.allclose(E[j], reg.subgrad(W[j], X[j], y[j]))


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

def test_dataset_validation():
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(InvalidInputError):
        Dataset(np.zeros((3, 2)), np.zeros(4))


def test_dataset_csv_roundtrip(tmp_path):
    gen = RandomStream(10).gen
    data = Dataset(gen.normal(size=(7, 3)), np.where(gen.random(7) < 0.5, 1.0, -1.0))
    path = tmp_path / "data.csv"
    data.to_csv(path)
    back = Dataset.from_csv(path)
    assert np.array_equal(back.X, data.X)
    assert np.array_equal(back.y, data.y)
