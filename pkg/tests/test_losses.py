import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.diffcore.tensor import DiffArray
from src.exceptions import ShapeError
from src.models.losses import (l2_errors, nll_laplace, select_best,
                               soft_target_ce)


def constant_modes(offsets, steps=30):
    """[1, T, 2, K] modes shifted along y by each offset."""
    modes = np.zeros((1, steps, 2, len(offsets)))
    for k, off in enumerate(offsets):
        modes[0, :, 1, k] = off
    return modes


def test_select_best_exact_match_and_ordering():
    gt = np.zeros((1, 30, 2))
    index, best, errors = select_best(constant_modes([1.0, 0.0, 2.0]), gt)
    assert index[0] == 1
    np.testing.assert_allclose(best, gt)
    np.testing.assert_allclose(errors, [[1.0, 0.0, 2.0]])
    index, _, _ = select_best(constant_modes([2.0, 1.0]), gt)
    assert index[0] == 1


def test_select_best_ties_go_to_lowest_index():
    index, _, _ = select_best(constant_modes([1.0, -1.0, 1.0]),
                              np.zeros((1, 30, 2)))
    assert index[0] == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31 - 1))
def test_select_best_matches_loop_and_permutes(k, seed):
    rng = np.random.default_rng(seed)
    preds = rng.standard_normal((3, 30, 2, k))
    gt = rng.standard_normal((3, 30, 2))
    index, _, _ = select_best(preds, gt)
    for n in range(3):
        errs = [np.mean(np.linalg.norm(preds[n, :, :, j] - gt[n], axis=1))
                for j in range(k)]
        assert index[n] == int(np.argmin(errs))
    perm = rng.permutation(k)
    permuted, _, _ = select_best(preds[..., perm], gt)
    np.testing.assert_array_equal(perm[permuted], index)


def test_select_best_needs_ground_truth():
    with pytest.raises(ValueError, match='ground truth'):
        select_best(np.zeros((1, 30, 2, 2)), None)
    with pytest.raises(ShapeError):
        l2_errors(np.zeros((1, 30, 2, 2)), np.zeros((1, 29, 2)))


def test_nll_laplace_values():
    gt = np.zeros((2, 30, 2))
    assert nll_laplace(gt, gt, np.full(gt.shape, 0.5)).item() == \
        pytest.approx(0.0)
    assert nll_laplace(gt, gt + 1.0, np.ones(gt.shape)).item() == \
        pytest.approx(1.0 + np.log(2.0))
    with pytest.raises(ValueError, match='positive'):
        nll_laplace(gt, gt, np.zeros(gt.shape))


def test_nll_laplace_is_stationary_in_b_at_unit_residual():
    gt = np.zeros((1, 30, 2))
    b = DiffArray(np.ones(gt.shape), requires_grad=True)
    nll_laplace(gt, gt + 1.0, b).backward()
    np.testing.assert_allclose(b.grad, 0.0, atol=1e-12)
    eps = 1e-6
    up = nll_laplace(gt, gt + 1.0, np.full(gt.shape, 1 + eps)).item()
    down = nll_laplace(gt, gt + 1.0, np.full(gt.shape, 1 - eps)).item()
    assert (up - down) / (2 * eps) == pytest.approx(0.0, abs=1e-6)


def test_nll_laplace_matches_loop():
    rng = np.random.default_rng(0)
    gt, best = rng.standard_normal((2, 3, 30, 2))
    b = rng.uniform(0.2, 2.0, gt.shape)
    total = 0.0
    for idx in np.ndindex(gt.shape):
        total += abs(gt[idx] - best[idx]) / b[idx] + np.log(2 * b[idx])
    assert nll_laplace(gt, best, b).item() == \
        pytest.approx(total / gt.size, abs=1e-8)


def test_soft_target_ce_uniform_case():
    loss = soft_target_ce(np.ones((4, 6)), np.zeros((4, 6)))
    assert loss.item() == pytest.approx(np.log(6))


def test_soft_target_ce_vanishes_for_confident_match():
    errors = np.array([[0.0, 50.0, 50.0]])
    assert soft_target_ce(errors, np.array([[40.0, 0.0, 0.0]])).item() < \
        1e-12


def test_soft_target_ce_matches_loop():
    rng = np.random.default_rng(1)
    errors = rng.uniform(0, 5, (5, 4))
    logits = rng.standard_normal((5, 4))
    total = 0.0
    for n in range(5):
        st_ = np.exp(-errors[n]) / np.exp(-errors[n]).sum()
        logp = logits[n] - np.log(np.exp(logits[n]).sum())
        for k in range(4):
            total -= st_[k] * logp[k]
    assert soft_target_ce(errors, logits).item() == \
        pytest.approx(total / 5, abs=1e-8)


def test_soft_target_ce_gradient_flows_to_logits():
    logits = DiffArray(np.zeros((2, 3)), requires_grad=True)
    soft_target_ce(np.array([[0.0, 1.0, 2.0], [2.0, 1.0, 0.0]]),
                   logits).backward()
    assert logits.grad[0, 0] < 0 < logits.grad[0, 2]
