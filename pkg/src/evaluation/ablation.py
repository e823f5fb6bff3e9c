# -*- coding: utf-8 -*-
"""Prior ablation on a fraction of the training set.

Variants: ``none`` (DDIM from pure noise with gamma steps, one row per
K), ``mlp`` (MLP decoder prior) and ``estimator``; the learned priors are
trained in stage 2 on top of the same frozen stage-1 model.
"""
import dataclasses
import logging
import math

import numpy as np
import pandas as pd

from src.evaluation.metrics import METRIC_COLUMNS, compute_metrics
from src.models.forecaster import Forecaster
from src.models.predict_model import predict_all
from src.models.train_model import train_stage2
from src.settings import settings_from_dict

logger = logging.getLogger(__name__)

VARIANTS = ('none', 'mlp', 'estimator')
ABLATION_COLUMNS = ['variant', 'modes', 'prior_params', 'total_params'] \
    + METRIC_COLUMNS


def training_subset(scenarios, fraction, seed):
    """First ceil(fraction * n) scenarios of a seeded permutation."""
    if not 0 < fraction <= 1:
        raise ValueError(f'fraction must lie in (0, 1], got {fraction}')
    count = max(1, math.ceil(fraction * len(scenarios)))
    order = np.random.default_rng([seed, 7]).permutation(len(scenarios))
    return [scenarios[i] for i in sorted(order[:count])]


def ablation(train_scenarios, val_scenarios, checkpoint, settings,
             variants=VARIANTS, fraction=None, modes=None, seed=0,
             logger=logger, progress=None):
    """:checkpoint: stage-1 (or later) Forecaster or checkpoint path"""
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ValueError(f'unknown ablation variant(s): {unknown}')
    fraction = settings.eval.ablation_fraction if fraction is None \
        else fraction
    modes = modes or settings.eval.ablation_modes
    base = checkpoint if isinstance(checkpoint, Forecaster) \
        else Forecaster.load(checkpoint, dtype=settings.train.dtype)
    subset = training_subset(train_scenarios, fraction, seed)
    gamma = settings.inference.gamma
    logger.info(f'ablation on {len(subset)} of {len(train_scenarios)} '
                f'training scenarios, variants {list(variants)}')
    rows = []
    for variant in variants:
        if variant == 'none':
            for k in modes:
                predictions = predict_all(val_scenarios, base, seed, 'ddim',
                                          gamma, modes=k)
                report = compute_metrics(predictions, val_scenarios,
                                         settings.eval.miss_threshold)
                rows.append({'variant': variant, 'modes': k,
                             'prior_params': 0,
                             'total_params': base.store.num_parameters(
                                 'encoder.') + base.store.num_parameters(
                                 'denoiser.'),
                             **report.to_dict()})
            continue
        variant_settings = settings_from_dict(settings.to_dict())
        variant_settings.model = dataclasses.replace(base.settings.model,
                                                     prior=variant)
        model = base.with_prior(variant, seed=seed)
        model, _ = train_stage2(subset, variant_settings, model,
                                logger=logger, progress=progress)
        predictions = predict_all(val_scenarios, model, seed, 'estimator',
                                  gamma)
        report = compute_metrics(predictions, val_scenarios,
                                 settings.eval.miss_threshold)
        rows.append({'variant': variant,
                     'modes': model.settings.model.modes,
                     'prior_params': model.store.num_parameters(
                         model.prior_prefix),
                     'total_params': model.store.num_parameters(),
                     **report.to_dict()})
        logger.info(f'{variant}: prior {rows[-1]["prior_params"]} values, '
                    f'minADE {report.min_ade:.3f}')
    return pd.DataFrame(rows, columns=ABLATION_COLUMNS)
