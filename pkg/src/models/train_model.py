# -*- coding: utf-8 -*-
"""Two-stage training.

Stage 1 fits the encoder and the conditional denoiser on noise
prediction (plus a small Laplace NLL on the one-step clean estimate).
Stage 2 freezes both and fits the motion pattern estimator (or the MLP
prior) and the mode heads through gamma refinement steps of the frozen
denoiser.
"""
import logging
import math
import os
import sys
import time
from pathlib import Path, PurePath

import click
import numpy as np
import pandas as pd
from dotenv import find_dotenv, load_dotenv
from tqdm import tqdm

from src.data.scenario import load_scenarios
from src.diffcore import tensor as T
from src.diffcore.optim import AdamW, clip_grad_norm
from src.evaluation.metrics import compute_metrics
from src.exceptions import AdmError, CheckpointError, ScenarioError
from src.features.build_features import build_feature_set
from src.models.diffusion import forward_sample, predict_a0
from src.models.forecaster import BACKBONE_PREFIXES, Forecaster
from src.models.losses import (nll_laplace, select_best, soft_target_ce)
from src.models.predict_model import predict_all, refine_prior
from src.settings import load_settings

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ['epoch', 'stage', 'loss', 'eps_mse', 'nll', 'ce',
                   'grad_norm', 'lr', 'val_eps_mse', 'val_min_ade',
                   'elapsed_s']


def save_history(history, path, logger=logger):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    df = pd.DataFrame(history).reindex(columns=HISTORY_COLUMNS)
    df.to_csv(path, index=False)
    logger.info(f'training history ({len(df)} epochs) written to {path}')


def load_history(path):
    return pd.read_csv(path)[HISTORY_COLUMNS]


def _targets(features, scale):
    sel = np.flatnonzero(features.has_future)
    return sel, features.future_local[sel] / scale


def stage1_loss(model, features, rng, config):
    """Noise-prediction MSE + weighted NLL for one scenario.

    :returns: (loss, terms) or None when no agent has a future
    """
    sel, a0 = _targets(features, model.traj_scale)
    if not len(sel):
        return None
    schedule = model.schedule
    _, cond = model.embed(features)
    a0 = np.repeat(a0[..., None], config.stage1_modes, axis=-1)
    tau = rng.integers(1, schedule.T + 1, size=len(sel))
    noise = rng.standard_normal(a0.shape)
    a_tau = forward_sample(a0, tau, noise, schedule).values
    eps_hat = model.denoiser(a_tau, tau, T.getitem(cond, sel))
    diff = eps_hat - T.as_array(noise, like=eps_hat)
    eps_mse = T.mean(diff * diff)
    loss, nll = eps_mse, 0.0
    near = np.flatnonzero(tau <= config.stage1_nll_max_tau)
    if len(near) and config.stage1_nll_weight:
        a0_hat = predict_a0(a_tau[near], tau[near],
                            T.getitem(eps_hat, near), schedule)
        _, best, _ = select_best(a0_hat, a0[near, ..., 0])
        scale = np.full(best.shape, config.stage1_laplace_b)
        nll_term = nll_laplace(a0[near, ..., 0], best, scale)
        loss = loss + nll_term * config.stage1_nll_weight
        nll = nll_term.item()
    return loss, {'eps_mse': eps_mse.item(), 'nll': nll, 'ce': 0.0}


def stage2_loss(model, features, rng, config, inference_config):
    """Laplace NLL on the best refined mode + weighted soft-target CE."""
    sel, gt = _targets(features, model.traj_scale)
    if not len(sel):
        return None
    emb, cond = model.embed(features)
    d_local = T.getitem(emb.d_local, sel)
    d_global = T.getitem(emb.d_global, sel)
    prior = model.prior.prior(d_local, d_global)
    refined, _ = refine_prior(model, prior, T.getitem(cond, sel),
                              config.gamma, rng, inference_config)
    heads = model.heads(d_local, d_global)
    _, best, errors = select_best(refined, gt)
    nll = nll_laplace(gt, best, heads.laplace_scale)
    ce = soft_target_ce(errors * model.traj_scale, heads.logits,
                        config.soft_target_temperature)
    loss = nll + ce * config.ce_weight
    return loss, {'eps_mse': float('nan'), 'nll': nll.item(),
                  'ce': ce.item()}


def validation_eps_mse(model, features, config):
    """Stage-1 noise MSE on held-out scenarios with fixed draws."""
    rng = np.random.default_rng([config.seed, 99])
    values = []
    with T.no_grad():
        for feats in features:
            out = stage1_loss(model, feats, rng, config)
            if out is not None:
                values.append(out[1]['eps_mse'])
    return float(np.mean(values)) if values else float('nan')


def validation_min_ade(model, scenarios, config):
    scenarios = [s for s in scenarios if s.has_future().any()]
    if not scenarios:
        return float('nan')
    predictions = predict_all(scenarios, model, seed=config.seed,
                              steps=config.gamma, workers=1)
    return compute_metrics(predictions, scenarios).min_ade


def _train(model, features, loss_fn, config, stage, validate, out_dir,
           logger, progress):
    features = [f for f in features if f.has_future.any()]
    if not features:
        raise ScenarioError(
            'no scenarios with ground-truth futures to train on')
    rng = np.random.default_rng([config.seed, stage])
    batches = math.ceil(len(features) / config.batch_size)
    optimizer = AdamW(model.store, config.lr, config.weight_decay,
                      schedule=config.lr_schedule,
                      total_steps=config.epochs * batches)
    history = []
    start = time.perf_counter()
    trainable = sum(p.size for _, p in model.store.items() if p.requires_grad)
    logger.info(f'stage {stage}: {len(features)} scenarios, {batches} '
                f'batches per epoch, {config.epochs} epochs, '
                f'{trainable} trainable values')
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(features))
        sums = {'loss': 0.0, 'eps_mse': 0.0, 'nll': 0.0, 'ce': 0.0}
        seen, grad_norm = 0, 0.0
        bar = tqdm(range(batches), desc=f'stage {stage} epoch {epoch}',
                   disable=not progress, leave=False)
        for b in bar:
            batch = order[b * config.batch_size:(b + 1) * config.batch_size]
            model.store.zero_grad()
            for index in batch:
                out = loss_fn(features[index], rng)
                if out is None:
                    continue
                loss, terms = out
                (loss * (1.0 / len(batch))).backward()
                sums['loss'] += loss.item()
                for key, value in terms.items():
                    sums[key] += value
                seen += 1
            grad_norm = clip_grad_norm(model.store, config.grad_clip)
            optimizer.step()
            step = (epoch - 1) * batches + b + 1
            if config.log_every and step % config.log_every == 0:
                logger.info(f'stage {stage} step {step}: '
                            f'grad norm {grad_norm:.4f}, '
                            f'lr {optimizer.lr:.3g}')
        row = {'epoch': epoch, 'stage': stage, 'grad_norm': grad_norm,
               'lr': optimizer.lr,
               'elapsed_s': time.perf_counter() - start,
               'val_eps_mse': float('nan'), 'val_min_ade': float('nan')}
        row.update({k: v / max(seen, 1) for k, v in sums.items()})
        if validate is not None and config.validate_every \
                and epoch % config.validate_every == 0:
            row.update(validate())
        history.append(row)
        logger.info(f'stage {stage} epoch {epoch}: loss {row["loss"]:.5f} '
                    f'eps_mse {row["eps_mse"]:.5f} nll {row["nll"]:.5f} '
                    f'ce {row["ce"]:.5f} val_eps_mse {row["val_eps_mse"]:.5f}'
                    f' val_min_ade {row["val_min_ade"]:.4f}')
        if out_dir and config.checkpoint_every \
                and epoch % config.checkpoint_every == 0:
            model.save(PurePath(out_dir).joinpath(
                'checkpoints', f'stage{stage}_epoch{epoch:03d}.ckpt'),
                stage=stage - 1)
    model.stage = stage
    if out_dir:
        model.save(PurePath(out_dir).joinpath(f'stage{stage}.ckpt'))
        save_history(history, PurePath(out_dir).joinpath(
            f'history_stage{stage}.csv'), logger)
    return history


def train_stage1(scenarios, settings, val_scenarios=None, model=None,
                 out_dir=None, logger=logger, progress=None):
    """Fit the encoder and denoiser.

    :returns: (model, history DataFrame)
    """
    config = settings.train
    model = model or Forecaster(settings, seed=config.seed,
                                dtype=config.dtype)
    model.train_only(*BACKBONE_PREFIXES)
    features = build_feature_set(scenarios, settings.scene,
                                 model.traj_scale, logger=logger)
    validate = None
    if val_scenarios:
        val_features = build_feature_set(
            val_scenarios[:config.val_limit], settings.scene,
            model.traj_scale, logger=logger)
        validate = lambda: {  # noqa: E731
            'val_eps_mse': validation_eps_mse(model, val_features, config)}
    history = _train(model, features,
                     lambda f, rng: stage1_loss(model, f, rng, config),
                     config, 1, validate, out_dir, logger,
                     _progress(progress))
    return model, pd.DataFrame(history).reindex(columns=HISTORY_COLUMNS)


def train_stage2(scenarios, settings, model, val_scenarios=None,
                 out_dir=None, logger=logger, progress=None):
    """Fit the prior and mode heads on top of a frozen stage-1 model.

    :model: Forecaster or checkpoint path from stage 1
    """
    if model is None:
        raise CheckpointError('stage-2 training needs a stage-1 checkpoint')
    if not isinstance(model, Forecaster):
        model = Forecaster.load(model, dtype=settings.train.dtype)
    if model.stage < 1:
        raise CheckpointError('stage-2 training needs a stage-1 checkpoint '
                              f'(got a stage-{model.stage} model)')
    if model.settings.model.prior != settings.model.prior:
        model = model.with_prior(settings.model.prior)
    config = settings.train
    inference_config = model.settings.inference
    model.train_only(model.prior_prefix, 'heads.')
    frozen = model.store.checksum(BACKBONE_PREFIXES[0]) + \
        model.store.checksum(BACKBONE_PREFIXES[1])
    features = build_feature_set(scenarios, settings.scene,
                                 model.traj_scale, logger=logger)
    validate = None
    if val_scenarios:
        subset = val_scenarios[:config.val_limit]
        validate = lambda: {  # noqa: E731
            'val_min_ade': validation_min_ade(model, subset, config)}
    history = _train(
        model, features,
        lambda f, rng: stage2_loss(model, f, rng, config, inference_config),
        config, 2, validate, out_dir, logger, _progress(progress))
    after = model.store.checksum(BACKBONE_PREFIXES[0]) + \
        model.store.checksum(BACKBONE_PREFIXES[1])
    if after != frozen:
        raise AdmError('frozen encoder/denoiser parameters changed in '
                       'stage 2')
    return model, pd.DataFrame(history).reindex(columns=HISTORY_COLUMNS)


def _progress(progress):
    return sys.stderr.isatty() if progress is None else progress


@click.command()
@click.argument('data_dir', type=click.Path(exists=True, file_okay=False))
@click.argument('out_dir', type=click.Path(file_okay=False))
@click.option('--stage', type=click.Choice(['1', '2', 'both']),
              default='both', show_default=True)
@click.option('--config', 'config_path', default=None)
def main(data_dir, out_dir, stage, config_path):
    """ Trains on DATA_DIR/train.jsonl (validating on val.jsonl) and
        writes checkpoints and CSV histories to OUT_DIR.
    """
    logger = logging.getLogger(__name__)
    settings = load_settings(config_path)
    train = load_scenarios(PurePath(data_dir).joinpath('train.jsonl'), logger)
    val = load_scenarios(PurePath(data_dir).joinpath('val.jsonl'), logger)
    model = None
    if stage in ('1', 'both'):
        model, _ = train_stage1(train, settings, val, out_dir=out_dir,
                                logger=logger)
    if stage in ('2', 'both'):
        model = model or PurePath(out_dir).joinpath('stage1.ckpt')
        train_stage2(train, settings, model, val, out_dir=out_dir,
                     logger=logger)


if __name__ == '__main__':
    project_dir = Path(__file__).resolve().parents[2]

    os.makedirs(PurePath(project_dir).joinpath('logs'), exist_ok=True)
    log_path = PurePath(project_dir).joinpath('logs/train_model.log')
    log_fmt = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(filename=log_path, level=logging.INFO, format=log_fmt)

    load_dotenv(find_dotenv())

    main()
