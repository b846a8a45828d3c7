import numpy as np
import pytest

from noisylab import losses
from noisylab.cli import central_difference_grad, relative_grad_error
from noisylab.errors import UnsupportedLossError
from noisylab.losses import (
    LossSpec,
    bootstrap_target,
    ce_loss,
    composite_loss,
    evaluate_batch,
    forward_loss,
    gce_loss,
    mae_loss,
    one_hot,
    rce_loss,
    sl_loss,
    smoothed_target,
    values_from_probs,
)
from noisylab.noise import symmetric_matrix
from noisylab.numerics import softmax


def logits_for(probs):
    """Logits whose softmax is the given distribution (up to rounding)."""
    return np.log(np.asarray(probs, dtype=np.float64))


def onehot(y, k):
    return one_hot(y, k)


# ---------------------------------------------------------------------------
# cross entropy
# ---------------------------------------------------------------------------

def test_ce_uniform_prediction_gives_log_k():
    res = ce_loss(np.zeros(10), onehot(3, 10))
    assert res.value == pytest.approx(np.log(10.0), abs=1e-12)


def test_ce_confident_correct_is_zero():
    res = ce_loss([60.0, 0.0, 0.0], onehot(0, 3))
    assert abs(res.value) < 1e-12


def test_ce_frozen_example_with_fd_oracle():
    # direct evaluation: value = ln(e^2 + 2) - 2, grad_0 = p_0 - 1
    z = np.array([2.0, 0.0, 0.0])
    res = ce_loss(z, onehot(0, 3))
    assert res.value == pytest.approx(np.log(np.exp(2.0) + 2.0) - 2.0, abs=1e-12)
    assert res.value == pytest.approx(0.2395447662, abs=1e-9)
    assert res.grad_logits[0] == pytest.approx(-2.0 / (np.exp(2.0) + 2.0), abs=1e-12)
    assert res.grad_logits[0] == pytest.approx(-0.2130139578, abs=1e-9)
    fd = central_difference_grad(lambda x: ce_loss(x, onehot(0, 3)).value, z)
    assert relative_grad_error(res.grad_logits, fd) < 1e-6


def test_ce_gradient_is_p_minus_q():
    gen = np.random.default_rng(0)
    z = gen.normal(0, 2, size=5)
    q = gen.dirichlet(np.ones(5))
    res = ce_loss(z, q)
    assert np.allclose(res.grad_logits, softmax(z) - q, atol=1e-14)


def test_ce_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        ce_loss([0.0, 0.0], onehot(0, 3))


def test_ce_kl_identity():
    # ce(q, p) = KL(q||p) + H(q) for strictly positive q
    gen = np.random.default_rng(1)
    for _ in range(50):
        k = int(gen.integers(2, 8))
        z = gen.normal(0, 3, size=k)
        q = gen.dirichlet(np.ones(k)) * 0.98 + 0.02 / k
        q = q / q.sum()
        p = softmax(z)
        kl = float(np.sum(q * np.log(q / p)))
        entropy = float(-np.sum(q * np.log(q)))
        assert ce_loss(z, q).value == pytest.approx(kl + entropy, abs=1e-10)


# ---------------------------------------------------------------------------
# reverse cross entropy
# ---------------------------------------------------------------------------

def test_rce_confident_correct_is_zero():
    res = rce_loss([60.0, 0.0, 0.0], onehot(0, 3), -4.0)
    assert abs(res.value) < 1e-12


def test_rce_full_sum_matches_closed_form():
    # -sum_k p_k clog(q_k) vs -A (1 - p_y) for a one-hot target
    z = logits_for([0.25, 0.45, 0.30])
    res = rce_loss(z, onehot(0, 3), -4.0)
    p_y = softmax(z)[0]
    assert res.value == pytest.approx(4.0 * (1.0 - p_y), abs=1e-12)
    assert res.value == pytest.approx(3.0, abs=1e-12)


def test_rce_at_minus_two_equals_mae():
    z = logits_for([0.25, 0.45, 0.30])
    assert rce_loss(z, onehot(0, 3), -2.0).value == pytest.approx(1.5, abs=1e-12)
    assert rce_loss(z, onehot(0, 3), -2.0).value == pytest.approx(
        mae_loss(z, onehot(0, 3)).value, abs=1e-12
    )


def test_rce_mae_identity_random():
    gen = np.random.default_rng(2)
    for _ in range(300):
        k = int(gen.integers(2, 12))
        z = gen.normal(0, 3, size=k)
        q = onehot(int(gen.integers(0, k)), k)
        assert abs(rce_loss(z, q, -2.0).value - mae_loss(z, q).value) < 1e-12


def test_rce_constant_sum_over_labels():
    # sum_y rce(z, onehot(y)) = -(K-1) A for any prediction
    gen = np.random.default_rng(3)
    for k in range(2, 11):
        for a in (-6.0, -5.0, -4.0, -3.0, -2.0, -1.0):
            z = gen.normal(0, 3, size=k)
            total = sum(rce_loss(z, onehot(y, k), a).value for y in range(k))
            assert total == pytest.approx(-(k - 1) * a, abs=1e-10)


def test_rce_onehot_gradient_closed_forms():
    # labeled class: A p_j - A p_j^2; other classes: -A p_j p_y
    gen = np.random.default_rng(4)
    for _ in range(200):
        k = int(gen.integers(2, 11))
        z = gen.normal(0, 2, size=k)
        y = int(gen.integers(0, k))
        a = float(gen.uniform(-8, -0.5))
        p = softmax(z)
        grad = rce_loss(z, onehot(y, k), a).grad_logits
        expect = -a * p * p[y]
        expect[y] = a * p[y] - a * p[y] ** 2
        assert np.max(np.abs(grad - expect)) < 1e-12


def test_rce_rejects_nonnegative_clamp():
    with pytest.raises(ValueError):
        rce_loss([0.0, 0.0], onehot(0, 2), 0.0)
    with pytest.raises(ValueError):
        LossSpec(kind="rce", clamp=1.0)


# ---------------------------------------------------------------------------
# symmetric combination
# ---------------------------------------------------------------------------

def test_sl_confident_correct_is_zero():
    for alpha, beta, a in ((1.0, 1.0, -4.0), (0.1, 1.0, -6.0), (5.0, 0.0, -2.0)):
        res = sl_loss([60.0, 0.0], onehot(0, 2), alpha, beta, a)
        assert abs(res.value) < 1e-12


def test_sl_uniform_ten_class_value():
    res = sl_loss(np.zeros(10), onehot(0, 10), 1.0, 1.0, -4.0)
    assert res.value == pytest.approx(np.log(10.0) + 3.6, abs=1e-12)


def test_sl_two_class_gradient_example():
    res = sl_loss([0.0, 0.0], onehot(0, 2), 1.0, 1.0, -6.0)
    assert res.grad_logits[0] == pytest.approx(-2.0, abs=1e-12)


def test_sl_is_weighted_sum_of_parts():
    gen = np.random.default_rng(5)
    for _ in range(100):
        k = int(gen.integers(2, 9))
        z = gen.normal(0, 2, size=k)
        q = onehot(int(gen.integers(0, k)), k)
        ce = ce_loss(z, q)
        rce = rce_loss(z, q, -4.0)
        sl = sl_loss(z, q, 1.0, 1.0, -4.0)
        assert abs(sl.value - (ce.value + rce.value)) < 1e-12
        assert np.max(np.abs(sl.grad_logits - (ce.grad_logits + rce.grad_logits))) < 1e-12


def test_sl_with_zero_beta_is_ce_bitwise():
    gen = np.random.default_rng(6)
    z = gen.normal(0, 2, size=7)
    q = onehot(2, 7)
    ce = ce_loss(z, q)
    sl = sl_loss(z, q, 1.0, 0.0, -4.0)
    assert sl.value == ce.value
    assert np.array_equal(sl.grad_logits, ce.grad_logits)


# ---------------------------------------------------------------------------
# mae / gce
# ---------------------------------------------------------------------------

def test_mae_examples():
    assert abs(mae_loss([60.0, 0.0], onehot(0, 2)).value) < 1e-12
    z = logits_for([0.25, 0.45, 0.30])
    assert mae_loss(z, onehot(0, 3)).value == pytest.approx(1.5, abs=1e-12)
    assert mae_loss(np.zeros(10), onehot(0, 10)).value == pytest.approx(1.8, abs=1e-12)


def test_gce_examples():
    assert abs(gce_loss([60.0, 0.0], 0, 0.7).value) < 1e-12
    z = logits_for([0.3, 0.3, 0.4])
    res = gce_loss(z, 0, 1.0)
    assert res.value == pytest.approx(0.7, abs=1e-12)
    assert res.value == pytest.approx(mae_loss(z, onehot(0, 3)).value / 2, abs=1e-12)


def test_gce_small_exponent_approaches_ce():
    z = logits_for([0.5, 0.5])
    assert gce_loss(z, 0, 1e-6).value == pytest.approx(np.log(2.0), abs=1e-5)


def test_gce_exponent_range_enforced():
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            gce_loss([0.0, 0.0], 0, bad)


# ---------------------------------------------------------------------------
# target transforms
# ---------------------------------------------------------------------------

def test_smoothed_target_limits():
    assert np.array_equal(smoothed_target(2, 0.0, 4), onehot(2, 4))
    assert np.allclose(smoothed_target(2, 1.0, 4), np.full(4, 0.25), atol=1e-15)
    t = smoothed_target(3, 0.1, 10)
    assert t[3] == pytest.approx(0.91, abs=1e-15)
    assert np.allclose(np.delete(t, 3), 0.01, atol=1e-15)


def test_smoothed_target_label_range():
    with pytest.raises(ValueError):
        smoothed_target(10, 0.1, 10)


def test_bootstrap_target_modes():
    assert np.array_equal(bootstrap_target(0, [0.6, 0.4], 1.0, "soft"), [1.0, 0.0])
    assert np.allclose(bootstrap_target(0, [0.6, 0.4], 0.0, "soft"), [0.6, 0.4])
    assert np.allclose(bootstrap_target(0, [0.6, 0.4], 0.8, "soft"), [0.92, 0.08], atol=1e-15)
    # hard mode snaps to the argmax, ties to the smallest index
    assert np.array_equal(bootstrap_target(1, [0.5, 0.5], 0.5, "hard"), [0.5, 0.5])
    assert np.array_equal(bootstrap_target(0, [0.2, 0.8], 0.5, "hard"), [0.5, 0.5])


# ---------------------------------------------------------------------------
# forward correction
# ---------------------------------------------------------------------------

def test_forward_identity_matrix_equals_ce():
    gen = np.random.default_rng(7)
    for _ in range(50):
        z = gen.normal(0, 2, size=4)
        y = int(gen.integers(0, 4))
        fwd = forward_loss(z, y, np.eye(4))
        ce = ce_loss(z, onehot(y, 4))
        assert abs(fwd.value - ce.value) < 1e-12
        assert np.max(np.abs(fwd.grad_logits - ce.grad_logits)) < 1e-12


def test_forward_two_class_example():
    t = np.array([[0.6, 0.4], [0.4, 0.6]])
    res = forward_loss(logits_for([0.75, 0.25]), 0, t)
    assert res.value == pytest.approx(-np.log(0.55), abs=1e-12)
    assert res.value == pytest.approx(0.5978370007556204, abs=1e-12)


def test_forward_point_mass_reads_matrix_entry():
    t = np.array([[0.7, 0.3], [0.2, 0.8]])
    res = forward_loss([40.0, 0.0], 1, t)
    assert res.value == pytest.approx(-np.log(0.3), abs=1e-9)


def test_forward_rejects_non_stochastic_matrix():
    with pytest.raises(ValueError):
        forward_loss([0.0, 0.0], 0, np.array([[0.9, 0.3], [0.4, 0.6]]))


def test_forward_fd_gradient():
    t = symmetric_matrix(3, 0.3).transition
    gen = np.random.default_rng(8)
    for _ in range(20):
        z = gen.normal(0, 2, size=3)
        res = forward_loss(z, 1, t)
        fd = central_difference_grad(lambda x: forward_loss(x, 1, t).value, z)
        assert relative_grad_error(res.grad_logits, fd) < 1e-6


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------

def test_composite_zero_weight_matches_single_loss():
    spec_a = LossSpec("rce", clamp=-4.0)
    spec_b = LossSpec("mae")
    gen = np.random.default_rng(9)
    z = gen.normal(0, 2, size=5)
    combo = composite_loss(spec_a, 1.0, spec_b, 0.0, z, 2)
    alone = rce_loss(z, onehot(2, 5), -4.0)
    assert combo.value == alone.value
    assert np.array_equal(combo.grad_logits, alone.grad_logits)


def test_composite_forward_identity_plus_rce_equals_sl():
    spec_a = LossSpec("forward")
    spec_b = LossSpec("rce", clamp=-4.0)
    transitions = {"noise": np.eye(6)}
    gen = np.random.default_rng(10)
    for _ in range(100):
        z = gen.normal(0, 2, size=6)
        y = int(gen.integers(0, 6))
        combo = composite_loss(spec_a, 1.0, spec_b, 1.0, z, y, transitions)
        sl = sl_loss(z, onehot(y, 6), 1.0, 1.0, -4.0)
        assert abs(combo.value - sl.value) < 1e-12


def test_upscaled_ce_via_sl_alpha():
    z = np.array([1.0, -0.5, 0.2])
    q = onehot(0, 3)
    five_ce = sl_loss(z, q, 5.0, 0.0, -4.0)
    ce = ce_loss(z, q)
    assert five_ce.value == pytest.approx(5.0 * ce.value, rel=1e-15)
    assert np.allclose(five_ce.grad_logits, 5.0 * ce.grad_logits, atol=1e-15)


def test_forward_transition_ref_resolution():
    t_a = symmetric_matrix(3, 0.2).transition
    t_b = symmetric_matrix(3, 0.4).transition
    named = LossSpec("forward", transition_ref="estimated")
    z = np.array([[1.0, 0.0, -1.0]])
    y = np.array([0])
    values, _ = evaluate_batch(named, z, y, {"noise": t_a, "estimated": t_b})
    expect, _ = evaluate_batch(LossSpec("forward"), z, y, {"noise": t_b})
    assert values[0] == expect[0]
    with pytest.raises(ValueError):
        evaluate_batch(named, z, y, {"noise": t_a})  # ref name missing


def test_composite_spec_validation():
    with pytest.raises(ValueError):
        LossSpec(kind="composite")
    with pytest.raises(ValueError):
        LossSpec(kind="composite", composite=((LossSpec("ce"), 1.0),))
    with pytest.raises(ValueError):
        LossSpec(kind="ce", composite=((LossSpec("ce"), 1.0), (LossSpec("mae"), 1.0)))
    with pytest.raises(ValueError):
        LossSpec(kind="composite", composite=((LossSpec("ce"), -1.0), (LossSpec("mae"), 1.0)))


def test_spec_ranges_checked_even_when_unused():
    with pytest.raises(ValueError):
        LossSpec(kind="ce", gce_exponent=2.0)
    with pytest.raises(ValueError):
        LossSpec(kind="mae", smoothing_eps=-0.1)
    with pytest.raises(ValueError):
        LossSpec(kind="unknown-loss")


# ---------------------------------------------------------------------------
# batched evaluation and general properties
# ---------------------------------------------------------------------------

def test_evaluate_batch_matches_per_sample():
    gen = np.random.default_rng(11)
    z = gen.normal(0, 2, size=(40, 6))
    y = gen.integers(0, 6, size=40)
    spec = LossSpec("sl", alpha=0.1, beta=1.0, clamp=-6.0)
    values, grads = evaluate_batch(spec, z, y)
    for i in range(40):
        single = sl_loss(z[i], onehot(int(y[i]), 6), 0.1, 1.0, -6.0)
        assert values[i] == pytest.approx(single.value, abs=1e-14)
        assert np.allclose(grads[i], single.grad_logits, atol=1e-14)


def test_all_losses_nonnegative_on_random_inputs():
    gen = np.random.default_rng(12)
    specs = [
        LossSpec("ce"),
        LossSpec("ce", smoothing_eps=0.2),
        LossSpec("rce", clamp=-4.0),
        LossSpec("sl", alpha=0.3, beta=1.0, clamp=-2.0),
        LossSpec("mae"),
        LossSpec("gce", gce_exponent=0.5),
        LossSpec("forward"),
    ]
    for _ in range(30):
        k = int(gen.integers(2, 8))
        z = gen.normal(0, 4, size=(10, k))
        y = gen.integers(0, k, size=10)
        transitions = {"noise": symmetric_matrix(k, 0.2).transition}
        for spec in specs:
            values, _ = evaluate_batch(spec, z, y, transitions)
            assert np.all(values >= -1e-15), spec.kind


def test_values_from_probs_consistent_with_logit_path():
    gen = np.random.default_rng(13)
    for spec in (
        LossSpec("ce"),
        LossSpec("rce", clamp=-4.0),
        LossSpec("sl", alpha=0.5, beta=2.0, clamp=-3.0),
        LossSpec("mae"),
        LossSpec("gce", gce_exponent=0.7),
    ):
        z = gen.normal(0, 2, size=(25, 5))
        y = gen.integers(0, 5, size=25)
        from noisylab.numerics import softmax_rows

        via_probs = values_from_probs(spec, softmax_rows(z), y)
        via_logits = evaluate_batch(spec, z, y)[0]
        assert np.allclose(via_probs, via_logits, atol=1e-10)


def test_values_from_probs_handles_hard_zeros():
    probs = np.array([[1.0, 0.0], [0.0, 1.0]])
    labels = np.array([0, 0])
    assert values_from_probs(LossSpec("ce"), probs, labels)[1] == np.inf
    rce = values_from_probs(LossSpec("rce", clamp=-4.0), probs, labels)
    assert rce[0] == 0.0 and rce[1] == pytest.approx(4.0, abs=1e-15)


def test_values_from_probs_rejects_forward():
    with pytest.raises(UnsupportedLossError):
        values_from_probs(LossSpec("forward"), np.eye(2), [0, 1])
    with pytest.raises(UnsupportedLossError):
        values_from_probs(
            LossSpec(
                kind="composite",
                composite=((LossSpec("forward"), 1.0), (LossSpec("ce"), 1.0)),
            ),
            np.eye(2),
            [0, 1],
        )


def test_target_validation():
    with pytest.raises(ValueError):
        ce_loss([0.0, 0.0], [0.5, 0.4])  # does not sum to 1
    with pytest.raises(ValueError):
        ce_loss([0.0, 0.0], [1.5, -0.5])  # outside [0, 1]


def test_saturated_logits_stay_finite():
    # one class driven to logit +30: softmax saturates, the log-zero clamp
    # engages on the rce side, values and fd errors stay finite
    z = np.zeros(10)
    z[3] = 30.0
    for label in (3, 5):
        q = onehot(label, 10)
        for res, fn in (
            (ce_loss(z, q), lambda x: ce_loss(x, q).value),
            (rce_loss(z, q, -4.0), lambda x: rce_loss(x, q, -4.0).value),
            (sl_loss(z, q, 1.0, 1.0, -4.0), lambda x: sl_loss(x, q, 1.0, 1.0, -4.0).value),
        ):
            assert np.isfinite(res.value)
            assert np.all(np.isfinite(res.grad_logits))
            err = relative_grad_error(res.grad_logits, central_difference_grad(fn, z))
            assert np.isfinite(err)
