# -*- coding: utf-8 -*-
"""Accuracy under Gaussian noise on the observed histories."""
import logging

import numpy as np
import pandas as pd

from src.data.add_observation_noise import inject_noise_all
from src.evaluation.metrics import METRIC_COLUMNS, compute_metrics
from src.exceptions import ScenarioError
from src.models.forecaster import Forecaster
from src.models.predict_model import predict_all
from src.visualization.visualize import plot_metric_vs_sigma

logger = logging.getLogger(__name__)


def parse_sigmas(values):
    """Expand 'start:stop:step' ranges (inclusive) and plain numbers."""
    sigmas = []
    for value in values:
        text = str(value)
        if ':' not in text:
            sigmas.append(float(text))
            continue
        parts = text.split(':')
        if len(parts) != 3:
            raise ValueError(f'expected START:STOP:STEP, got {text!r}')
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError(f'step must be positive in {text!r}')
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        sigmas.extend(round(start + i * step, 10) for i in range(count))
    return sigmas


def robustness_sweep(scenarios, checkpoint, sigmas, seed=0, gamma=None,
                     miss_threshold=2.0, plot_path=None, logger=logger):
    """Noise, predict and score the scenarios once per sigma.

    :returns: DataFrame with a ``sigma`` column plus the metric columns
    """
    bad = [s for s in sigmas if s < 0]
    if bad:
        raise ValueError(f'sigma must be >= 0, got {bad}')
    scenarios = list(scenarios)
    if not scenarios:
        raise ScenarioError('no scenarios to perturb')
    model = checkpoint if isinstance(checkpoint, Forecaster) \
        else Forecaster.load(checkpoint)
    rows = []
    for sigma in sigmas:
        noisy = inject_noise_all(scenarios, sigma, seed)
        predictions = predict_all(noisy, model, seed=seed, steps=gamma)
        report = compute_metrics(predictions, noisy, miss_threshold,
                                 sigma=float(sigma))
        logger.info(f'sigma {sigma}: minADE {report.min_ade:.3f} '
                    f'minFDE {report.min_fde:.3f}')
        rows.append(report.to_dict())
    df = pd.DataFrame(rows, columns=['sigma'] + METRIC_COLUMNS)
    if plot_path:
        plot_metric_vs_sigma(df, plot_path)
    return df
