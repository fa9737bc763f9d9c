import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcompress.classifiers import (
    KernelModel,
    LinearModel,
    accuracy,
    agreement,
    decision_value,
    dumps_model,
    kkt_violations,
    linear_objective,
    loads_model,
    predict,
    prediction_ops,
    rbf_kernel,
    solve_rbf_dual,
    train_linear_svm,
    train_rbf_svm,
)
from semcompress.errors import (
    DimensionMismatch,
    EmptyReference,
    InvalidParameter,
    ModelFormatError,
    SingleClassData,
)
from semcompress.worldgen import Dataset

import oracles


def _clusters(rng, n=40, gap=1.0, d=2):
    a = rng.normal(0.0, 0.15, size=(n // 2, d))
    b = rng.normal(gap, 0.15, size=(n - n // 2, d))
    labels = np.r_[np.zeros(n // 2), np.ones(n - n // 2)].astype(np.int8)
    return Dataset(np.vstack([a, b]), labels)


# -- decision values ---------------------------------------------------------

def test_linear_boundary_tie_is_positive():
    m = LinearModel(np.array([1.0, 0.0]), 0.0)
    assert decision_value(m, [0.0, 5.0]) == 0.0
    assert predict(m, [0.0, 5.0]) == 1


def test_kernel_at_support_point():
    s = np.array([[0.3, 0.7]])
    m = KernelModel(s, np.array([1.0]), 0.0, 5.0)
    assert decision_value(m, s[0]) == 1.0


def test_decision_matches_naive_evaluator(rng):
    for _ in range(25):
        d = int(rng.integers(1, 5))
        n_sv = int(rng.integers(1, 12))
        km = KernelModel(rng.random((n_sv, d)), rng.normal(size=n_sv), float(rng.normal()),
                         float(rng.uniform(0.5, 40)))
        lm = LinearModel(rng.normal(size=d), float(rng.normal()), float(rng.normal()))
        xs = rng.random((10, d))
        got_k = decision_value(km, xs)
        got_l = decision_value(lm, xs)
        for i, x in enumerate(xs):
            ref_k = oracles.naive_kernel_decision(km.support_points, km.dual_coefs, km.bias,
                                                  km.rbf_gamma, x)
            ref_l = oracles.naive_linear_decision(lm.weights, lm.bias, lm.threshold, x)
            assert abs(got_k[i] - ref_k) <= 1e-12
            assert abs(got_l[i] - ref_l) <= 1e-12


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        decision_value(LinearModel(np.ones(2), 0.0), [1.0, 2.0, 3.0])


def test_rbf_kernel_matches_gram(rng):
    pts = rng.random((7, 3))
    np.testing.assert_allclose(rbf_kernel(pts, pts, 2.5), oracles.gram_rbf(pts, 2.5), atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1))
def test_predict_flips_only_at_zero(w, b, x):
    m = LinearModel(np.array([w]), b)
    assert predict(m, [x]) == int(decision_value(m, [x]) >= 0)


# -- cost model --------------------------------------------------------------

def test_prediction_ops_formulas():
    assert prediction_ops(LinearModel(np.zeros(2), 0.0)) == 6
    km = KernelModel(np.zeros((10, 2)), np.ones(10), 0.0, 1.0)
    assert prediction_ops(km) == 101


def test_kernel_ops_exceed_linear_ops(global_f):
    for d in range(1, 17):
        lin = prediction_ops(LinearModel(np.zeros(d), 0.0))
        for n_sv in (2, 3, 10, 200):
            assert prediction_ops(KernelModel(np.zeros((n_sv, d)), np.ones(n_sv), 0.0, 1.0)) > lin
    assert prediction_ops(global_f) > prediction_ops(LinearModel(np.zeros(2), 0.0))


def test_ops_monotone_in_support_count():
    ops = [prediction_ops(KernelModel(np.zeros((n, 3)), np.ones(n), 0.0, 1.0)) for n in range(1, 30)]
    assert all(b > a for a, b in zip(ops, ops[1:]))


# -- accuracy ----------------------------------------------------------------

def test_self_agreement(global_f, small_data):
    pred = predict(global_f, small_data.points)
    assert accuracy(global_f, small_data.points, pred).accuracy == 1.0


def test_constant_positive_on_balanced_set():
    data = Dataset(np.zeros((10, 2)), np.array([0, 1] * 5, dtype=np.int8))
    rep = accuracy(LinearModel.constant(2, True), data)
    assert rep.accuracy == 0.5 and rep.false_negatives == 0 and rep.false_positives == 5


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_accuracy_identity(pairs):
    pred = np.array([p for p, _ in pairs])
    ref = np.array([r for _, r in pairs])
    rep = agreement(pred, ref)
    assert rep.accuracy == 1 - (rep.false_positives + rep.false_negatives) / rep.n


def test_empty_reference():
    with pytest.raises(EmptyReference):
        agreement(np.array([]), np.array([]))


# -- kernel SVM --------------------------------------------------------------

def test_xor_separated_and_matches_dual_grid():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    labels = np.array([1, 1, 0, 0], dtype=np.int8)
    fit = solve_rbf_dual(pts, labels, C=10.0, gamma=1.0, tol=1e-8)
    assert accuracy(fit.model, pts, labels).accuracy == 1.0
    K = oracles.gram_rbf(pts, 1.0)
    y = np.where(labels > 0, 1.0, -1.0)
    grid_val, _ = oracles.grid_search_dual_4pt(K, labels, 10.0, steps=201)
    ours = oracles.dual_objective(K, y, fit.alpha)
    # the solver must be at least as good as the grid, and not much better
    assert ours <= grid_val + 1e-9
    assert grid_val - ours < 0.05


def test_separable_clusters_satisfy_kkt(rng):
    data = _clusters(rng)
    fit = solve_rbf_dual(data.points, data.labels, C=10.0, gamma=2.0, tol=1e-3)
    K = oracles.gram_rbf(data.points, 2.0)
    res = oracles.kkt_residuals(K, data.labels, fit.alpha, fit.model.bias, 10.0)
    assert res.max() <= 1e-3
    assert np.all(fit.alpha >= 0) and np.all(fit.alpha <= 10.0)
    np.testing.assert_allclose(
        kkt_violations(K, data.labels, fit.alpha, fit.model.bias, 10.0), res, atol=1e-12)


def test_duplication_keeps_decision_function(rng):
    data = _clusters(rng, n=30, gap=1.2)
    a = solve_rbf_dual(data.points, data.labels, 10.0, 3.0, tol=1e-9).model
    dup = Dataset(np.vstack([data.points, data.points]), np.r_[data.labels, data.labels])
    b = solve_rbf_dual(dup.points, dup.labels, 10.0, 3.0, tol=1e-9).model
    g = np.stack(np.meshgrid(np.linspace(-0.5, 1.7, 25), np.linspace(-0.5, 1.7, 25)), -1).reshape(-1, 2)
    np.testing.assert_allclose(decision_value(a, g), decision_value(b, g), atol=1e-6)


def test_dual_box_and_support(global_f):
    assert global_f.n_support >= 1
    assert np.all(np.abs(global_f.dual_coefs) <= 10.0 + 1e-12)


def test_global_f_accuracy(global_f, small_data):
    held = small_data.subset(slice(1500, None))
    assert accuracy(global_f, held).accuracy >= 0.95


def test_single_class_rejected():
    data = Dataset(np.random.default_rng(0).random((5, 2)), np.ones(5, dtype=np.int8))
    with pytest.raises(SingleClassData):
        train_rbf_svm(data)
    with pytest.raises(SingleClassData):
        train_linear_svm(data)


def test_invalid_hyperparameters(rng):
    data = _clusters(rng)
    with pytest.raises(InvalidParameter):
        train_rbf_svm(data, C=0.0)
    with pytest.raises(InvalidParameter):
        train_linear_svm(data, class_weights=(1.0, 0.0))


# -- linear SVM --------------------------------------------------------------

def test_linear_separable_training_accuracy(rng):
    data = _clusters(rng, n=80, gap=1.5)
    m = train_linear_svm(data)
    assert accuracy(m, data).accuracy == 1.0


def _tiny_1d_problem(seed):
    r = np.random.default_rng(seed)
    x = r.normal(0.0, 1.0, size=6)
    labels = (x + r.normal(0.0, 0.8, size=6) > 0).astype(np.int8)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    return x, labels


@pytest.mark.parametrize("seed", range(5))
def test_linear_objective_matches_primal_grid(seed):
    x, labels = _tiny_1d_problem(seed)
    # points embedded along a line in 2-D
    pts = np.c_[x, 2.0 * x + 0.3]
    data = Dataset(pts, labels)
    C, cw = 1.0, (1.0, 2.0)
    model = train_linear_svm(data, C=C, class_weights=cw, tol=1e-7)
    ours = linear_objective(model, data, C, cw)
    z = oracles.normalize(pts) @ np.array([1.0, 2.0]) / np.sqrt(5.0)
    costs = np.where(labels > 0, C * cw[1], C * cw[0])
    ref, _, _ = oracles.primal_grid_1d(z, labels, costs)
    assert abs(ours - ref) <= 1e-3


def test_positive_weight_never_adds_false_negatives():
    for seed in range(20):
        r = np.random.default_rng(seed)
        pts = r.random((80, 2))
        labels = ((pts[:, 0] + 0.4 * r.normal(size=80)) > 0.5).astype(np.int8)
        data = Dataset(pts, labels)
        base = accuracy(train_linear_svm(data, C=1.0, tol=1e-6), data)
        heavy = accuracy(train_linear_svm(data, C=1.0, class_weights=(1.0, 10.0), tol=1e-6), data)
        assert heavy.false_negatives <= base.false_negatives


# -- persistence -------------------------------------------------------------

def test_model_round_trip(global_f):
    back = loads_model(dumps_model(global_f))
    assert np.array_equal(back.support_points, global_f.support_points)
    assert np.array_equal(back.dual_coefs, global_f.dual_coefs)
    assert back.bias == global_f.bias and back.rbf_gamma == global_f.rbf_gamma
    lin = LinearModel(np.array([0.1, -1 / 3]), 1e-17, 0.25)
    back = loads_model(dumps_model(lin))
    assert np.array_equal(back.weights, lin.weights) and back.threshold == 0.25


@pytest.mark.parametrize("text", ["", "version = 2\nkind = linear\ndimension = 1\n",
                                  "version = 1\nkind = rbf\ndimension = 2\nrbf_gamma = 1\n"
                                  "bias = 0\nn_support = 2\n1 0 0\n"])
def test_bad_model_text(text):
    with pytest.raises(ModelFormatError):
        loads_model(text)
