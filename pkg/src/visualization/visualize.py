# -*- coding: utf-8 -*-
"""SVG plots: metric-vs-sigma curves, loss curves and scenario views."""
import logging
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams['svg.hashsalt'] = 'adm'

METRIC_LABELS = {'min_ade': 'minADE (m)', 'min_fde': 'minFDE (m)',
                 'miss_rate': 'MR', 'brier_min_fde': 'brier-minFDE (m)'}


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format='svg', metadata={'Date': None})
    plt.close(fig)
    logger.info(f'plot written to {path}')


def plot_metric_vs_sigma(report, path, metrics=('min_ade', 'min_fde')):
    """Line plot of each metric against the observation noise sigma.

    :report: DataFrame with a ``sigma`` column and the metric columns
    """
    df = report.sort_values('sigma')
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric in metrics:
        ax.plot(df['sigma'], df[metric], marker='o',
                label=METRIC_LABELS.get(metric, metric))
    ax.set_xlabel('observation noise sigma (m)')
    ax.set_ylabel('error')
    ax.grid(alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_loss_history(history, path):
    """Training loss (and validation curves when present) per epoch."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for column in ('loss', 'eps_mse', 'nll', 'ce', 'val_eps_mse',
                   'val_min_ade'):
        if column in history and history[column].notna().any():
            ax.plot(history['epoch'], history[column], label=column)
    ax.set_xlabel('epoch')
    ax.set_yscale('symlog', linthresh=1e-3)
    ax.grid(alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_scenario_predictions(scenario, prediction, path, agent_ids=None):
    """Map polylines, observed history, ground truth and the K modes.

    Mode line width follows the predicted probability.
    """
    agent_ids = agent_ids or prediction.agent_ids
    fig, ax = plt.subplots(figsize=(7, 7))
    for polyline in scenario.map:
        ax.plot(polyline.points[:, 0], polyline.points[:, 1], color='0.8',
                lw=1, zorder=1)
    for agent_id in agent_ids:
        agent = scenario.agent(agent_id)
        i = prediction.agent_index(agent_id)
        ax.plot(agent.observed[:, 0], agent.observed[:, 1], color='k',
                lw=1.5, zorder=3)
        if agent.has_future:
            ax.plot(agent.future[:, 0], agent.future[:, 1], color='tab:green',
                    lw=1.5, ls='--', zorder=3)
        for k in range(prediction.modes):
            traj = prediction.trajectories[i, :, :, k]
            p = float(prediction.probabilities[i, k])
            ax.plot(traj[:, 0], traj[:, 1], color='tab:blue',
                    lw=0.5 + 3.0 * p, alpha=0.7, zorder=2)
    ax.set_aspect('equal')
    ax.set_title(scenario.scenario_id)
    _save(fig, path)
