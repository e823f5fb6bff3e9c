# -*- coding: utf-8 -*-
"""The full forecasting model: encoder, denoiser, prior and mode heads.

Parameters live in one ParamStore under the prefixes ``encoder.``,
``denoiser.``, ``estimator.`` (or ``mlp_prior.``) and ``heads.``;
checkpoints carry the settings needed to rebuild the same architecture.
"""
import logging

import numpy as np

from src.data.scenario import FUTURE_STEPS
from src.diffcore.checkpoint import (load_checkpoint, read_checkpoint,
                                     save_checkpoint)
from src.diffcore.store import ParamStore
from src.exceptions import CheckpointError, ConfigError
from src.features.build_features import build_features
from src.models.diffusion import Denoiser, make_schedule
from src.models.encoder import ScenarioEncoder
from src.models.estimator import (MLPPrior, ModeHeadPredictor,
                                  MotionPatternEstimator)
from src.settings import settings_from_dict

logger = logging.getLogger(__name__)

PRIOR_PREFIXES = {'estimator': 'estimator', 'mlp': 'mlp_prior'}
BACKBONE_PREFIXES = ('encoder.', 'denoiser.')


class Forecaster:
    def __init__(self, settings, seed=0, dtype='float64'):
        cfg = settings.model
        if cfg.prior not in PRIOR_PREFIXES:
            raise ConfigError(f'unknown prior {cfg.prior!r}')
        self.settings = settings
        self.seed = seed
        self.stage = 0
        self.store = ParamStore(dtype)
        rng = np.random.default_rng(seed)
        self.encoder = ScenarioEncoder(self.store, 'encoder', cfg, rng)
        self.denoiser = Denoiser(self.store, 'denoiser', cfg, FUTURE_STEPS,
                                 rng)
        prior_cls = MotionPatternEstimator if cfg.prior == 'estimator' \
            else MLPPrior
        self.prior = prior_cls(self.store, PRIOR_PREFIXES[cfg.prior], cfg,
                               FUTURE_STEPS, rng)
        self.heads = ModeHeadPredictor(self.store, 'heads', cfg,
                                       FUTURE_STEPS, rng)
        self.schedule = make_schedule(cfg.diffusion_steps, cfg.beta_start,
                                      cfg.beta_end)

    @property
    def prior_prefix(self):
        return PRIOR_PREFIXES[self.settings.model.prior] + '.'

    @property
    def traj_scale(self):
        return self.settings.model.traj_scale

    def featurize(self, scenario):
        return build_features(scenario, self.settings.scene, self.traj_scale)

    def embed(self, features):
        """:returns: (Embeddings, conditioning tokens [N, D])"""
        emb = self.encoder(features)
        return emb, self.encoder.aggregate_embedding(emb.d_local,
                                                     emb.d_global)

    def train_only(self, *prefixes):
        """Make exactly the parameters under ``prefixes`` trainable."""
        self.store.freeze(None)
        for prefix in prefixes:
            self.store.unfreeze(prefix)

    def save(self, path, stage=None):
        if stage is not None:
            self.stage = stage
        save_checkpoint(self.store, path, meta={
            'settings': self.settings.to_dict(),
            'stage': self.stage,
            'seed': self.seed})

    @classmethod
    def load(cls, path, dtype='float64'):
        """Rebuild a model from the settings stored in a checkpoint."""
        _, manifest = read_checkpoint(path)
        meta = manifest.get('meta', {})
        if 'settings' not in meta:
            raise CheckpointError(f'{path}: no model settings in checkpoint')
        model = cls(settings_from_dict(meta['settings']),
                    seed=meta.get('seed', 0), dtype=dtype)
        load_checkpoint(model.store, path)
        model.stage = int(meta.get('stage', 0))
        logger.info(f'loaded stage-{model.stage} model from {path}')
        return model

    def with_prior(self, prior, seed=None):
        """A new model sharing this one's encoder and denoiser weights.

        The prior and the mode heads start from a fresh initialization.
        """
        settings = settings_from_dict(self.settings.to_dict())
        settings.model.prior = prior
        settings.validate()
        model = Forecaster(settings, self.seed if seed is None else seed,
                           self.store.dtype)
        for name, param in self.store.items():
            if name.startswith(BACKBONE_PREFIXES):
                model.store.assign(name, param.values)
        model.stage = min(self.stage, 1)
        return model

    @classmethod
    def from_stage1(cls, path, prior, dtype='float64'):
        """Load only the encoder and denoiser of a checkpoint."""
        _, manifest = read_checkpoint(path)
        meta = manifest.get('meta', {})
        if 'settings' not in meta:
            raise CheckpointError(f'{path}: no model settings in checkpoint')
        settings = settings_from_dict(meta['settings'])
        settings.model.prior = prior
        model = cls(settings.validate(), seed=meta.get('seed', 0),
                    dtype=dtype)
        load_checkpoint(model.store, path, prefixes=BACKBONE_PREFIXES)
        model.stage = 1
        return model
