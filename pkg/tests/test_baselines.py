import numpy as np
import pytest

from gbnc.baselines import (
    BaselineModel,
    baseline_distributions,
    candidate_orders,
    fit_br,
    fit_cc,
    fit_cp,
    predict_baseline,
    predict_baseline_bundle,
)
from gbnc.dataset import Instance, make_bundle
from gbnc.evaluation import generate_synthetic, random_synthetic_spec
from gbnc.inference import predict_bundle
from gbnc.local_learners import LearnerConfig, categorical_model, fit_arrays, local_cll_arrays, predict_proba
from gbnc.model import fit_gbnc

LR = LearnerConfig("lr")


def _bundle(seed=0, n=200, k=2, cards=None):
    rng = np.random.default_rng(seed)
    cards = cards or [2] * k
    X = rng.normal(size=(n, 3))
    y = np.stack([np.digitize(X[:, j % 3] + rng.normal(scale=0.5, size=n), np.linspace(-1, 1, c - 1)) for j, c in enumerate(cards)], axis=1)
    return make_bundle(X, None, y, classes=[(f"Y{i + 1}", c) for i, c in enumerate(cards)])


def test_br_one_model_per_class():
    b = _bundle(k=3)
    m = fit_br(b, LR)
    assert m.kind == "br" and len(m.models) == 3


def test_br_k1_is_single_classifier():
    b = _bundle(k=1)
    m = fit_br(b, LR)
    direct = fit_arrays(b.x_c, b.y[:, 0], 2, LR, target="Y1")
    assert m.models[0] == direct


def test_br_same_vector_for_both_losses():
    b = _bundle(k=3)
    out = predict_baseline_bundle(fit_br(b, LR), b, "both")
    np.testing.assert_array_equal(out["hamming"], out["subset"])
    inst = b.row(0)
    assert predict_baseline(fit_br(b, LR), Instance(inst.x_c, inst.x_d), "hamming").y_hat == tuple(out["hamming"][0])


def test_cp_observed_combinations_only():
    X = np.random.default_rng(1).normal(size=(40, 2))
    y = np.repeat([[0, 0], [1, 1]], 20, axis=0)
    b = make_bundle(X, None, y, classes=[("Y1", 2), ("Y2", 2)])
    m = fit_cp(b, LR)
    assert len(m.combos) == 2
    out = predict_baseline_bundle(m, b, "both")
    for row in out["subset"]:
        assert tuple(row) in {(0, 0), (1, 1)}
    joint = baseline_distributions(m, b)["joint"]
    np.testing.assert_allclose(joint.sum(axis=1), 1.0, atol=1e-12)


def test_cp_k1_matches_single_classifier():
    b = _bundle(k=1, cards=[3])
    m = fit_cp(b, LR)
    direct = fit_arrays(b.x_c, b.y[:, 0], 3, LR, target="powerset")
    np.testing.assert_allclose(predict_proba(m.models[0], b.x_c), predict_proba(direct, b.x_c))


def _cp_with_joint(combos, probs):
    b = make_bundle(np.zeros((1, 0)), None, np.zeros((1, 2), dtype=int), classes=[("Y1", 2), ("Y2", 2)])
    model = BaselineModel("cp", b.schema, (categorical_model("powerset", probs),), combos=np.array(combos))
    return model, Instance(np.zeros(0), np.zeros(0, dtype=int))


def test_cp_decision_rules_agree():
    model, inst = _cp_with_joint([[0, 0], [1, 1]], [0.6, 0.4])
    assert predict_baseline(model, inst, "subset").y_hat == (0, 0)
    h = predict_baseline(model, inst, "hamming")
    assert h.y_hat == (0, 0)
    np.testing.assert_allclose(h.marginals[0], [0.6, 0.4])


def test_cp_decision_rules_diverge():
    model, inst = _cp_with_joint([[0, 1], [1, 0], [1, 1]], [0.4, 0.35, 0.25])
    s = predict_baseline(model, inst, "subset")
    h = predict_baseline(model, inst, "hamming")
    assert s.y_hat == (0, 1) and s.joint_prob == pytest.approx(0.4)
    assert h.y_hat == (1, 1)
    np.testing.assert_allclose(h.marginals[0], [0.4, 0.6])
    np.testing.assert_allclose(h.marginals[1], [0.35, 0.65])


def test_single_observed_combination():
    X = np.random.default_rng(2).normal(size=(10, 2))
    b = make_bundle(X, None, np.zeros((10, 2), dtype=int), classes=[("Y1", 2), ("Y2", 2)])
    out = predict_baseline_bundle(fit_cp(b, LR), b, "both")
    assert not out["subset"].any() and not out["hamming"].any()


def test_cc_orders_dedup_k2():
    orders = candidate_orders(2, 11, np.random.default_rng(0))
    assert orders == [(0, 1), (1, 0)]
    b = _bundle(k=2)
    m = fit_cc(b, LR, seed=0)
    assert len(m.meta["validation_loss"]) == 2


def test_cc_k1_is_br():
    b = _bundle(k=1)
    cc, br = fit_cc(b, LR), fit_br(b, LR)
    assert cc.order == (0,)
    assert cc.models[0] == br.models[0]


def test_cc_order_is_permutation_and_deterministic():
    b = _bundle(k=4, n=150)
    a = fit_cc(b, LR, seed=5)
    again = fit_cc(b, LR, seed=5)
    assert sorted(a.order) == [0, 1, 2, 3]
    assert a.order == again.order
    assert a.meta["orders"][0] == [0, 1, 2, 3]


def test_cc_rejects_single_order():
    with pytest.raises(ValueError):
        fit_cc(_bundle(), LR, orders=1)


def test_cc_first_link_is_br_model():
    """The first link sees only the one-hot features, exactly like BR's model."""
    b = _bundle(k=3)
    cc, br = fit_cc(b, LR, seed=1), fit_br(b, LR)
    first = cc.order[0]
    X = b.x_c
    assert local_cll_arrays(cc.models[0], X, b.y[:, first]).value == pytest.approx(
        local_cll_arrays(br.models[first], X, b.y[:, first]).value, abs=1e-6
    )


def test_independent_classes_br_matches_gbnc():
    # continuous features only: a discrete parent would shift class means per
    # configuration, an interaction a linear model on one-hot inputs cannot express
    spec = random_synthetic_spec([2, 2, 2], [], 0, 3, 5000, seed=11, separation=1.5)
    train, _ = generate_synthetic(spec)
    test, _ = generate_synthetic(spec.with_rows(2000, 12))
    br = predict_baseline_bundle(fit_br(train, LR), test.without_classes(), "hamming")["hamming"]
    bnc = predict_bundle(fit_gbnc(train, LR), test.without_classes(), "hamming").hamming
    agree = np.mean(np.all(br == bnc, axis=1))
    assert agree >= 0.95


def test_br_marginals_track_generator():
    spec = random_synthetic_spec([2, 3], [], 0, 2, 5000, seed=13)
    b, truth = generate_synthetic(spec)
    margs = predict_baseline_bundle(fit_br(b, LR), b, "hamming")["marginals"]
    true = truth.posterior_marginals(b)
    for a, t in zip(margs, true):
        assert np.mean(np.abs(a - t)) < 0.03
