import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from dictcsc.objectives import (
    DegenerateInputError,
    LossWeights,
    MetricScores,
    combined_loss,
    cosine_contrastive_loss,
    csc_loss,
    csc_loss_grad,
    dot_contrastive_loss,
    info_nce,
    info_nce_grad,
    log_metric_dot,
    mean_pool,
    metric_cosine_span,
    metric_dot,
)

from oracles import central_difference, naive_info_nce, naive_info_nce_from_logs, relative_error


def test_uniform_scores_give_log_n_plus_one():
    for n in (1, 4, 8, 31):
        assert info_nce(MetricScores.from_scores(2.5, [2.5] * n)) == pytest.approx(math.log(n + 1), abs=1e-12)


def test_matches_naive_formula():
    scores = MetricScores.from_scores(3.0, [1.0, 0.5, 2.0])
    assert info_nce(scores) == pytest.approx(naive_info_nce(3.0, [1.0, 0.5, 2.0]), rel=1e-12)


def test_huge_scores_stay_finite():
    scores = MetricScores(1000.0, (999.0, 1001.0))
    loss = info_nce(scores)
    assert math.isfinite(loss)
    assert loss == pytest.approx(naive_info_nce_from_logs(1000.0, [999.0, 1001.0]), rel=1e-12)


@pytest.mark.parametrize("pos,negs", [(0.0, [1.0]), (-1.0, [1.0]), (1.0, [0.0]), (1.0, [])])
def test_invalid_scores(pos, negs):
    with pytest.raises(ValueError):
        MetricScores.from_scores(pos, negs)


@given(
    st.floats(-30, 30),
    st.lists(st.floats(-30, 30), min_size=1, max_size=12),
)
def test_info_nce_properties(log_pos, log_negs):
    scores = MetricScores(log_pos, tuple(log_negs))
    loss, gpos, gnegs = info_nce_grad(scores)
    assert loss >= 0
    assert loss == pytest.approx(naive_info_nce_from_logs(log_pos, log_negs), rel=1e-9, abs=1e-12)
    # gradient of a log-softmax: components sum to zero
    assert gpos + sum(gnegs) == pytest.approx(0.0, abs=1e-9)
    assert gpos <= 0 and all(g >= 0 for g in gnegs)


@given(st.floats(-5, 5), st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.floats(0.1, 3))
def test_raising_positive_lowers_loss(log_pos, log_negs, bump):
    a = info_nce(MetricScores(log_pos, tuple(log_negs)))
    b = info_nce(MetricScores(log_pos + bump, tuple(log_negs)))
    assert b <= a + 1e-12


def test_metric_dot_is_exp_of_dot():
    o = np.array([[0.0, 0.0], [1.0, 2.0]])
    k = np.array([[5.0, 5.0], [0.5, -1.0]])
    assert log_metric_dot(o, k, 1) == pytest.approx(-1.5)
    assert metric_dot(o, k, 1) == pytest.approx(math.exp(-1.5))
    with pytest.raises(IndexError):
        metric_dot(o, k, 2)


def test_mean_pool_and_cosine():
    o = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    np.testing.assert_allclose(mean_pool(o, 0, 1), [0.5, 0.5])
    d = np.array([[2.0, 2.0]])
    assert metric_cosine_span(o, d, 0, 1) == pytest.approx(1.0)
    assert metric_cosine_span(o, np.array([[1.0, -1.0]]), 0, 1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DegenerateInputError):
        metric_cosine_span(o, np.zeros((2, 2)), 0, 0)


def test_cosine_clamp_mode():
    rng = np.random.default_rng(0)
    o = rng.normal(size=(4, 3))
    pos = rng.normal(size=(2, 3))
    negs = [rng.normal(size=(3, 3)) for _ in range(3)]
    loss, _ = cosine_contrastive_loss(o, pos, negs, 1, 1, mode="clamp")
    c = [max(metric_cosine_span(o, r, 1, 1), 1e-6) for r in [pos, *negs]]
    assert loss == pytest.approx(naive_info_nce(c[0], c[1:]), rel=1e-9)


def _check_grad(f, x, g, rng, coords=12):
    for _ in range(coords):
        idx = tuple(rng.integers(s) for s in x.shape)
        num = central_difference(f, x, idx)
        assert abs(g[idx] - num) <= 1e-3 * max(abs(num), 1e-4) + 1e-9, (idx, g[idx], num)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 16), st.integers(2, 8), st.integers(1, 8))
def test_dot_loss_gradient(seed, h, T, n):
    rng = np.random.default_rng(seed)
    o = rng.normal(size=(T, h)) * 0.5
    pos = rng.normal(size=(T, h)) * 0.5
    negs = [rng.normal(size=(T, h)) * 0.5 for _ in range(n)]
    s = int(rng.integers(T))
    loss, g = dot_contrastive_loss(o, pos, negs, s)
    assert loss == pytest.approx(
        naive_info_nce_from_logs(float(o[s] @ pos[s]), [float(o[s] @ k[s]) for k in negs])
    )
    assert not np.any(np.delete(g, s, axis=0))
    _check_grad(lambda: dot_contrastive_loss(o, pos, negs, s)[0], o, g, rng)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 16), st.integers(2, 8), st.integers(1, 8), st.sampled_from([1.0, 0.5, 0.1]))
def test_cosine_loss_gradient(seed, h, T, n, tau):
    rng = np.random.default_rng(seed)
    o = rng.normal(size=(T, h))
    s = int(rng.integers(T))
    w = int(rng.integers(T - s))
    pos = rng.normal(size=(int(rng.integers(1, 6)), h))
    negs = [rng.normal(size=(int(rng.integers(1, 6)), h)) for _ in range(n)]
    assume(np.linalg.norm(mean_pool(o, s, w)) > 1e-2)
    loss, g = cosine_contrastive_loss(o, pos, negs, s, w, temperature=tau)
    cos = [metric_cosine_span(o, r, s, w) / tau for r in [pos, *negs]]
    assert loss == pytest.approx(naive_info_nce_from_logs(cos[0], cos[1:]), rel=1e-9)
    _check_grad(lambda: cosine_contrastive_loss(o, pos, negs, s, w, temperature=tau)[0], o, g, rng)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 8), st.integers(2, 12))
def test_csc_loss_gradient(seed, B, T, V):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(B, T, V))
    targets = rng.integers(V, size=(B, T))
    mask = rng.random((B, T)) < 0.7
    assume(mask.any())
    loss, g = csc_loss_grad(logits, targets, mask)
    # direct definition: mean negative log-softmax over masked positions
    lp = logits - np.log(np.exp(logits).sum(-1, keepdims=True))
    picked = np.take_along_axis(lp, targets[..., None], -1)[..., 0]
    assert loss == pytest.approx(-picked[mask].mean())
    _check_grad(lambda: csc_loss(logits, targets, mask), logits, g, rng)


def test_csc_empty_mask():
    loss, g = csc_loss_grad(np.ones((1, 2, 3)), np.zeros((1, 2), dtype=int), np.zeros((1, 2), bool))
    assert loss == 0.0 and not g.any()


def test_csc_perfect_prediction_near_zero():
    logits = np.full((1, 2, 3), -50.0)
    logits[0, 0, 1] = logits[0, 1, 2] = 50.0
    assert csc_loss(logits, np.array([[1, 2]])) < 1e-30


def test_combined_loss():
    w = LossWeights(1.0, 0.5, 0.0, 2.0)
    assert combined_loss(1.0, 2.0, 100.0, 0.25, w) == pytest.approx(1.0 + 1.0 + 0.5)
    assert combined_loss(1.0, 2.0, 3.0, 4.0, LossWeights(0, 0, 0, 0)) == 0.0
    with pytest.raises(ValueError):
        LossWeights(-1.0)
