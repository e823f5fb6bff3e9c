# -*- coding: utf-8 -*-
"""Winner-take-all selection, Laplace NLL and soft-target cross-entropy."""
import numpy as np

from src.diffcore import tensor as T
from src.exceptions import ShapeError


def l2_errors(predictions, ground_truth):
    """[N, K] mean point-wise Euclidean distance of each mode to the truth.

    :predictions: [N, T_f, 2, K], numpy or DiffArray
    :ground_truth: [N, T_f, 2]
    """
    pred = predictions.values if isinstance(predictions, T.DiffArray) \
        else np.asarray(predictions)
    gt = np.asarray(ground_truth)
    if pred.ndim != 4 or pred.shape[:3] != gt.shape:
        raise ShapeError(f'predictions {pred.shape} do not match ground '
                         f'truth {gt.shape}')
    return np.linalg.norm(pred - gt[..., None], axis=2).mean(axis=1)


def select_best(predictions, ground_truth):
    """Pick, per agent, the mode closest to the ground truth.

    Ties resolve to the lowest mode index.

    :returns: (indices [N], best [N, T_f, 2], errors [N, K])
    """
    if ground_truth is None:
        raise ValueError('select_best needs ground truth')
    errors = l2_errors(predictions, ground_truth)
    index = np.argmin(errors, axis=1)
    rows = np.arange(len(index))
    if isinstance(predictions, T.DiffArray):
        best = T.getitem(predictions, (rows, slice(None), slice(None), index))
    else:
        best = np.asarray(predictions)[rows, :, :, index]
    return index, best, errors


def nll_laplace(ground_truth, best, scale):
    """mean(|y - y_hat| / b + log(2 b)) over agents, steps and axes."""
    b = scale if isinstance(scale, T.DiffArray) else T.DiffArray(scale)
    if np.any(b.values <= 0):
        raise ValueError('Laplace scale must be positive')
    best = T.as_array(best)
    b = T.as_array(b, like=best)
    residual = T.abs_(best - T.as_array(ground_truth, like=best))
    return T.mean(residual / b + T.log(b * 2.0))


def soft_targets(errors, temperature=1.0):
    """softmax(-errors / temperature) along the mode axis."""
    z = -np.asarray(errors) / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def soft_target_ce(errors, logits, temperature=1.0):
    """Cross-entropy of the logits against soft targets, mean over agents."""
    logits = T.as_array(logits)
    targets = soft_targets(errors, temperature)
    if targets.shape != logits.shape:
        raise ShapeError(f'soft targets {targets.shape} vs logits '
                         f'{logits.shape}')
    log_p = T.log_softmax(logits, axis=-1)
    return -T.sum_(T.as_array(targets, like=logits) * log_p) \
        * (1.0 / logits.shape[0])
