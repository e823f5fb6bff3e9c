# -*- coding: utf-8 -*-
"""Perturb observed histories with Gaussian noise for robustness runs."""
import logging
import os
from pathlib import Path, PurePath

import click
import numpy as np
from dotenv import find_dotenv, load_dotenv

from src.data.scenario import AgentTrack, load_scenarios, save_scenarios

logger = logging.getLogger(__name__)


def inject_noise(scenario, sigma, seed):
    """Add i.i.d. N(0, sigma^2) to every observed coordinate.

    Futures and the map are left untouched; ``sigma == 0`` returns the
    scenario unchanged.
    """
    if sigma < 0:
        raise ValueError(f'sigma must be >= 0, got {sigma}')
    if sigma == 0:
        return scenario
    rng = np.random.default_rng(seed)
    agents = [AgentTrack(id=a.id,
                         observed=a.observed + rng.normal(
                             0.0, sigma, size=a.observed.shape),
                         future=a.future,
                         focal=a.focal)
              for a in scenario.agents]
    return scenario.with_agents(agents)


def inject_noise_all(scenarios, sigma, seed):
    """Noise every scenario with its own stream derived from ``seed``."""
    return [inject_noise(s, sigma, [seed, i]) for i, s in
            enumerate(scenarios)]


@click.command()
@click.argument('input_path', type=click.Path(exists=True, dir_okay=False))
@click.argument('output_path', type=click.Path(dir_okay=False))
@click.option('--sigma', type=float, required=True)
@click.option('--seed', default=0, show_default=True)
def main(input_path, output_path, sigma, seed):
    """ Writes a noisy copy of a scenario JSONL file.
    """
    logger = logging.getLogger(__name__)
    logger.info(f'adding sigma={sigma} observation noise to {input_path}')
    scenarios = load_scenarios(input_path, logger)
    save_scenarios(inject_noise_all(scenarios, sigma, seed), output_path,
                   logger)


if __name__ == '__main__':
    project_dir = Path(__file__).resolve().parents[2]

    os.makedirs(PurePath(project_dir).joinpath('logs'), exist_ok=True)
    log_path = PurePath(project_dir).joinpath('logs/add_observation_noise.log')
    log_fmt = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(filename=log_path, level=logging.INFO, format=log_fmt)

    load_dotenv(find_dotenv())

    main()
