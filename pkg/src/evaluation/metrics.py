# -*- coding: utf-8 -*-
"""minADE, minFDE, miss rate and brier-minFDE over K predicted modes.

Every agent with a ground-truth future is scored (or only focal agents);
minADE takes its own arg-min over modes, while minFDE, the miss flag and
brier-minFDE share the arg-min of the final displacement. Ties go to the
lowest mode index.
"""
import logging
import os
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pandas as pd

from src.exceptions import ShapeError

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ['min_ade', 'min_fde', 'miss_rate', 'brier_min_fde',
                  'n_scenarios', 'n_agents']


@dataclass
class MetricReport:
    min_ade: float
    min_fde: float
    miss_rate: float
    brier_min_fde: float
    n_scenarios: int
    n_agents: int
    sigma: Optional[float] = None

    def to_dict(self):
        row = asdict(self)
        if self.sigma is None:
            row.pop('sigma')
        return row


def agent_metrics(trajectories, probabilities, ground_truth,
                  miss_threshold=2.0):
    """Per-agent values, each of shape [M].

    :trajectories: [M, T_f, 2, K]
    :probabilities: [M, K]
    :ground_truth: [M, T_f, 2]
    :returns: dict of min_ade, min_fde, miss, brier_min_fde
    """
    pred = np.asarray(trajectories, dtype=np.float64)
    gt = np.asarray(ground_truth, dtype=np.float64)
    if pred.ndim != 4 or pred.shape[:3] != gt.shape:
        raise ShapeError(f'predictions {pred.shape} do not match ground '
                         f'truth {gt.shape}')
    dist = np.linalg.norm(pred - gt[..., None], axis=2)
    ade = dist.mean(axis=1)
    fde = dist[:, -1, :]
    rows = np.arange(len(fde))
    best = np.argmin(fde, axis=1)
    min_fde = fde[rows, best]
    p_best = np.asarray(probabilities, dtype=np.float64)[rows, best]
    return {'min_ade': ade.min(axis=1),
            'min_fde': min_fde,
            'miss': (min_fde > miss_threshold).astype(np.float64),
            'brier_min_fde': min_fde + (1.0 - p_best) ** 2}


def compute_metrics(predictions, scenarios, miss_threshold=2.0,
                    focal_only=False, sigma=None) -> MetricReport:
    """Average the four metrics over every scored agent.

    :predictions: PredictionSet or list of them
    :scenarios: Scenario or list of them holding the ground truth
    """
    if not isinstance(predictions, (list, tuple)):
        predictions = [predictions]
    if not isinstance(scenarios, (list, tuple)):
        scenarios = [scenarios]
    by_id = {s.scenario_id: s for s in scenarios}
    preds, probs, truths, scored = [], [], [], set()
    for pred in predictions:
        scenario = by_id.get(pred.scenario_id)
        if scenario is None:
            logger.warning(f'no ground truth for scenario '
                           f'{pred.scenario_id!r}; skipped')
            continue
        for agent in scenario.agents:
            if not agent.has_future or (focal_only and not agent.focal):
                continue
            if agent.id not in pred.agent_ids:
                raise ShapeError(f'scenario {pred.scenario_id!r}: no '
                                 f'prediction for agent {agent.id!r}')
            i = pred.agent_index(agent.id)
            if pred.trajectories.shape[1] != len(agent.future):
                raise ShapeError(
                    f'scenario {pred.scenario_id!r} agent {agent.id!r}: '
                    f'{pred.trajectories.shape[1]} predicted steps, '
                    f'{len(agent.future)} in ground truth')
            preds.append(pred.trajectories[i])
            probs.append(pred.probabilities[i])
            truths.append(agent.future)
            scored.add(pred.scenario_id)
    if not preds:
        raise ValueError('no agents with ground truth to evaluate')
    values = agent_metrics(np.stack(preds), np.stack(probs),
                           np.stack(truths), miss_threshold)
    return MetricReport(
        min_ade=float(values['min_ade'].mean()),
        min_fde=float(values['min_fde'].mean()),
        miss_rate=float(values['miss'].mean()),
        brier_min_fde=float(values['brier_min_fde'].mean()),
        n_scenarios=len(scored),
        n_agents=len(preds),
        sigma=sigma)


def write_report(rows, path, key_columns=(), logger=logger):
    """CSV with ``key_columns`` first, then the metric columns."""
    df = pd.DataFrame([r.to_dict() if isinstance(r, MetricReport) else r
                       for r in rows]) \
        if not isinstance(rows, pd.DataFrame) else rows
    columns = list(key_columns) + METRIC_COLUMNS + [
        c for c in df.columns
        if c not in METRIC_COLUMNS and c not in key_columns]
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df.reindex(columns=columns).to_csv(path, index=False)
    logger.info(f'report with {len(df)} rows written to {path}')
    return df.reindex(columns=columns)


def read_report(path):
    return pd.read_csv(path)
