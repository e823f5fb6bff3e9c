# -*- coding: utf-8 -*-
"""Accelerated inference and the pure-noise sampling baselines.

``infer`` encodes a scenario, draws the K-mode prior at step gamma from
the estimator and refines it with exactly gamma denoiser calls.
``infer_baseline`` starts from N(0, I) at step T instead.
"""
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePath

import click
import numpy as np
from dotenv import find_dotenv, load_dotenv

from src.data.scenario import load_scenarios
from src.diffcore.tensor import DiffArray, no_grad
from src.exceptions import InferenceError, ScenarioError
from src.models.diffusion import SAMPLERS, ddim_timesteps, run_reverse
from src.models.forecaster import Forecaster

logger = logging.getLogger(__name__)


@dataclass
class PredictionSet:
    """K global-frame trajectories per agent with mode probabilities.

    :trajectories: [N, T_f, 2, K]
    :probabilities: [N, K], rows sum to one
    """
    scenario_id: str
    agent_ids: tuple
    trajectories: np.ndarray
    probabilities: np.ndarray
    gamma: int
    sampler: str
    seed: int
    elapsed_ms: float = 0.0
    denoiser_calls: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def modes(self):
        return self.trajectories.shape[-1]

    def agent_index(self, agent_id):
        return self.agent_ids.index(agent_id)


def _values(x):
    return x.values if isinstance(x, DiffArray) else np.asarray(x)


def refinement_labels(gamma, inference_config):
    """Step labels and sampler for the gamma refinement steps."""
    if inference_config.label_mode == 'tail':
        span = max(inference_config.tail_span, gamma)
        return ddim_timesteps(span, gamma), 'ddim'
    return np.arange(gamma, 0, -1), inference_config.sampler


class CountingDenoiser:
    """Binds the conditioning tokens and counts calls for one request."""

    def __init__(self, denoiser, cond):
        self.denoiser = denoiser
        self.cond = cond
        self.calls = 0

    def __call__(self, a, tau):
        self.calls += 1
        return self.denoiser(a, tau, self.cond)


def refine_prior(forecaster, prior, cond, gamma, rng, inference_config):
    """Run gamma reverse steps on the prior; gradients flow if enabled.

    :returns: (refined trajectories, denoiser calls made)
    """
    labels, method = refinement_labels(gamma, inference_config)
    eps_fn = CountingDenoiser(forecaster.denoiser, cond)
    refined = run_reverse(eps_fn, prior, labels, forecaster.schedule, method,
                          rng)
    return refined, eps_fn.calls


def _to_global(features, local, scale):
    """[N, T_f, 2, K] scaled local trajectories -> global meters."""
    out = np.empty_like(local)
    for i, frame in enumerate(features.frames):
        modes = np.moveaxis(local[i], -1, 0) * scale
        out[i] = np.moveaxis(frame.to_global(modes), 0, -1)
    return out


def _resolve(checkpoint):
    if isinstance(checkpoint, Forecaster):
        return checkpoint
    return Forecaster.load(checkpoint)


def infer(scenario, checkpoint, gamma=None, seed=0, inference_config=None):
    """Accelerated prediction for every agent of one scenario.

    :checkpoint: a Forecaster or a checkpoint path
    """
    model = _resolve(checkpoint)
    config = inference_config or model.settings.inference
    gamma = config.gamma if gamma is None else int(gamma)
    if gamma < 1 or gamma > model.schedule.T:
        raise InferenceError(
            f'gamma must lie in [1, {model.schedule.T}], got {gamma}')
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    with no_grad():
        features = model.featurize(scenario)
        emb, cond = model.embed(features)
        prior = model.prior.prior(emb.d_local, emb.d_global)
        heads = model.heads(emb.d_local, emb.d_global)
        refined, calls = refine_prior(model, prior, cond, gamma, rng,
                                      config)
    trajectories = _to_global(features, _values(refined).astype(np.float64),
                              model.traj_scale)
    _, method = refinement_labels(gamma, config)
    return PredictionSet(
        scenario_id=scenario.scenario_id,
        agent_ids=tuple(features.agent_ids),
        trajectories=trajectories,
        probabilities=_values(heads.probabilities).astype(np.float64),
        gamma=gamma, sampler=f'estimator+{method}', seed=int(seed),
        elapsed_ms=(time.perf_counter() - start) * 1000.0,
        denoiser_calls=calls)


def infer_baseline(scenario, checkpoint, method='ddim', steps=50, seed=0,
                   modes=None):
    """Reverse diffusion from pure noise with uniform mode probabilities."""
    model = _resolve(checkpoint)
    if method not in SAMPLERS:
        raise InferenceError(f'unknown sampler {method!r}')
    T = model.schedule.T
    if method == 'ddpm':
        if steps != T:
            raise InferenceError(
                f'ddpm runs every step; steps must equal T={T}, got {steps}')
        labels = np.arange(T, 0, -1)
    else:
        labels = ddim_timesteps(T, steps)
    k = modes or model.settings.model.modes
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    with no_grad():
        features = model.featurize(scenario)
        _, cond = model.embed(features)
        n = features.num_agents
        a_T = rng.standard_normal((n, features.future_local.shape[1], 2, k))
        eps_fn = CountingDenoiser(model.denoiser, cond)
        final = run_reverse(
            eps_fn,
            DiffArray(a_T, dtype=model.store.dtype), labels, model.schedule,
            method, rng)
    trajectories = _to_global(features, _values(final).astype(np.float64),
                              model.traj_scale)
    return PredictionSet(
        scenario_id=scenario.scenario_id,
        agent_ids=tuple(features.agent_ids),
        trajectories=trajectories,
        probabilities=np.full((n, k), 1.0 / k),
        gamma=int(steps), sampler=method, seed=int(seed),
        elapsed_ms=(time.perf_counter() - start) * 1000.0,
        denoiser_calls=eps_fn.calls)


def scenario_seed(seed, index):
    """Per-scenario seed, independent of grouping and worker count."""
    return int(np.random.default_rng([seed, index]).integers(2 ** 31))


def predict_all(scenarios, checkpoint, seed=0, method='estimator',
                steps=None, inference_config=None, workers=None,
                modes=None):
    """Predict many scenarios, preserving order.

    :method: 'estimator' for accelerated inference, else a baseline sampler
    """
    model = _resolve(checkpoint)
    config = inference_config or model.settings.inference
    workers = config.workers if workers is None else workers

    def run(item):
        index, scenario = item
        s = scenario_seed(seed, index)
        if method == 'estimator':
            return infer(scenario, model, steps, s, config)
        return infer_baseline(scenario, model, method, steps, s, modes)

    items = list(enumerate(scenarios))
    logger.info(f'predicting {len(items)} scenarios ({method}, '
                f'steps={steps}) with {workers} worker(s)')
    if workers <= 1:
        return [run(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, items))


def write_predictions(predictions, path, logger=logger):
    """JSONL, one line per (scenario, agent)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    lines = 0
    with open(path, 'w') as f:
        for pred in predictions:
            meta = {'gamma': pred.gamma, 'sampler': pred.sampler,
                    'seed': pred.seed, 'elapsed_ms': pred.elapsed_ms}
            for i, agent_id in enumerate(pred.agent_ids):
                modes = [{'prob': float(pred.probabilities[i, k]),
                          'trajectory': pred.trajectories[i, :, :, k].tolist()}
                         for k in range(pred.modes)]
                f.write(json.dumps({'scenario_id': pred.scenario_id,
                                    'agent_id': agent_id,
                                    'modes': modes,
                                    'meta': meta}) + '\n')
                lines += 1
    logger.info(f'wrote {lines} agent predictions to {path}')


def read_predictions(path):
    """Inverse of ``write_predictions``; consecutive lines of a scenario
    are regrouped into one PredictionSet."""
    if not os.path.exists(path):
        raise ScenarioError(f'predictions file not found: {path}')
    groups = []
    with open(path) as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                sid, agent_id = record['scenario_id'], record['agent_id']
                modes = record['modes']
                traj = np.array([m['trajectory'] for m in modes], dtype=float)
                probs = np.array([m['prob'] for m in modes], dtype=float)
                meta = record.get('meta', {})
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ScenarioError(f'malformed prediction ({e})',
                                    line=number) from None
            if traj.ndim != 3 or traj.shape[-1] != 2:
                raise ScenarioError(
                    f'trajectory shape {traj.shape[1:]} is not [T, 2]',
                    line=number, agent_id=agent_id)
            if not groups or groups[-1][0] != sid:
                groups.append((sid, meta, [], [], []))
            groups[-1][2].append(agent_id)
            groups[-1][3].append(np.moveaxis(traj, 0, -1))
            groups[-1][4].append(probs)
    out = []
    for sid, meta, agent_ids, trajs, probs in groups:
        try:
            trajectories = np.stack(trajs)
            probabilities = np.stack(probs)
        except ValueError:
            raise ScenarioError(
                f'scenario {sid!r}: agents disagree on modes or horizon'
            ) from None
        out.append(PredictionSet(
            scenario_id=sid, agent_ids=tuple(agent_ids),
            trajectories=trajectories, probabilities=probabilities,
            gamma=int(meta.get('gamma', 0)),
            sampler=str(meta.get('sampler', '')),
            seed=int(meta.get('seed', 0)),
            elapsed_ms=float(meta.get('elapsed_ms', 0.0))))
    return out


@click.command()
@click.argument('checkpoint', type=click.Path(exists=True, dir_okay=False))
@click.argument('data_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('output_path', type=click.Path(dir_okay=False))
@click.option('--gamma', default=5, show_default=True)
@click.option('--seed', default=0, show_default=True)
def main(checkpoint, data_path, output_path, gamma, seed):
    """ Predicts every scenario in DATA_PATH with CHECKPOINT and writes
        JSONL predictions to OUTPUT_PATH.
    """
    logger = logging.getLogger(__name__)
    scenarios = load_scenarios(data_path, logger)
    predictions = predict_all(scenarios, checkpoint, seed=seed, steps=gamma)
    write_predictions(predictions, output_path, logger)


if __name__ == '__main__':
    project_dir = Path(__file__).resolve().parents[2]

    os.makedirs(PurePath(project_dir).joinpath('logs'), exist_ok=True)
    log_path = PurePath(project_dir).joinpath('logs/predict_model.log')
    log_fmt = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(filename=log_path, level=logging.INFO, format=log_fmt)

    load_dotenv(find_dotenv())

    main()
