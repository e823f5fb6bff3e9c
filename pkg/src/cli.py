# -*- coding: utf-8 -*-
"""``adm`` command line: data generation, training, prediction and the
evaluation harnesses.

Exit codes: 0 ok, 1 other failure, 2 bad arguments or config, 3 data
error, 4 checkpoint error.
"""
import logging
import os
import sys
from pathlib import PurePath

import click

from src.data.make_synthetic_dataset import generate_synthetic
from src.data.scenario import load_scenarios, save_scenarios
from src.evaluation.ablation import VARIANTS, ablation
from src.evaluation.bench_sampling import (bench_sampling, format_table,
                                           parse_bench_row)
from src.evaluation.metrics import compute_metrics, write_report
from src.evaluation.robustness import parse_sigmas, robustness_sweep
from src.exceptions import (AdmError, CheckpointError, ConfigError,
                            ScenarioError)
from src.models.forecaster import Forecaster
from src.models.predict_model import (predict_all, read_predictions,
                                      write_predictions)
from src.models.train_model import train_stage1, train_stage2
from src.settings import load_settings, setup_logging
from src.visualization.visualize import plot_loss_history

logger = logging.getLogger(__name__)

EXIT_CODES = ((ConfigError, 2), (ScenarioError, 3), (CheckpointError, 4),
              (AdmError, 1))


class RunContext:
    def __init__(self, settings, seed, out_dir, quiet):
        self.settings = settings
        self.seed = seed
        self.out_dir = out_dir
        self.quiet = quiet

    def path(self, *parts):
        return str(PurePath(self.out_dir).joinpath(*parts))

    def start(self, name):
        log_path = setup_logging(self.out_dir, name)
        logger.info(f'adm {name}: seed {self.seed}, out dir {self.out_dir}')
        return log_path

    @property
    def progress(self):
        return False if self.quiet else None


def _data_files(data):
    """A directory with train.jsonl / val.jsonl, or a single file."""
    if os.path.isdir(data):
        return (os.path.join(data, 'train.jsonl'),
                os.path.join(data, 'val.jsonl'))
    return data, None


@click.group()
@click.option('--seed', type=int, default=None,
              help='Root seed (defaults to [train] seed).')
@click.option('--config', 'config_path', default=None,
              help='TOML config file.')
@click.option('--out-dir', default='out', show_default=True)
@click.option('--quiet', is_flag=True, help='Hide progress bars.')
@click.pass_context
def cli(ctx, seed, config_path, out_dir, quiet):
    """Accelerated diffusion trajectory prediction."""
    settings = load_settings(config_path)
    if seed is not None:
        settings.train.seed = seed
    ctx.obj = RunContext(settings, settings.train.seed, out_dir, quiet)


@cli.command('gen-data')
@click.option('--train', 'train_count', type=int, default=None)
@click.option('--val', 'val_count', type=int, default=None)
@click.pass_obj
def gen_data(run, train_count, val_count):
    """Write synthetic train/val scenarios to OUT_DIR/data."""
    run.start('gen-data')
    config = run.settings.synthetic
    train = generate_synthetic(train_count or config.train_count, run.seed,
                               config)
    val = generate_synthetic(val_count or config.val_count, run.seed + 1,
                             config)
    save_scenarios(train, run.path('data', 'train.jsonl'))
    save_scenarios(val, run.path('data', 'val.jsonl'))
    click.echo(f'{len(train)} train / {len(val)} val scenarios in '
               f'{run.path("data")}')


@cli.command()
@click.option('--data', required=True,
              help='Directory with train.jsonl and val.jsonl, or one file.')
@click.option('--stage', type=click.Choice(['1', '2', 'both']),
              default='both', show_default=True)
@click.option('--checkpoint', default=None,
              help='Stage-1 checkpoint when running stage 2 alone.')
@click.pass_obj
def train(run, data, stage, checkpoint):
    """Two-stage training; checkpoints and histories go to OUT_DIR."""
    run.start('train')
    train_path, val_path = _data_files(data)
    scenarios = load_scenarios(train_path)
    val = load_scenarios(val_path) if val_path and os.path.exists(val_path) \
        else None
    model = None
    if stage in ('1', 'both'):
        model, history = train_stage1(scenarios, run.settings, val,
                                      out_dir=run.out_dir,
                                      progress=run.progress)
        plot_loss_history(history, run.path('history_stage1.svg'))
    if stage in ('2', 'both'):
        model = model or checkpoint or run.path('stage1.ckpt')
        model, history = train_stage2(scenarios, run.settings, model, val,
                                      out_dir=run.out_dir,
                                      progress=run.progress)
        plot_loss_history(history, run.path('history_stage2.svg'))
    click.echo(f'stage-{model.stage} checkpoint written to '
               f'{run.path(f"stage{model.stage}.ckpt")}')


@cli.command()
@click.option('--checkpoint', required=True)
@click.option('--data', required=True)
@click.option('--method', type=click.Choice(['estimator', 'ddpm', 'ddim']),
              default='estimator', show_default=True)
@click.option('--steps', type=int, default=None,
              help='gamma for the estimator, else sampler steps.')
@click.option('--workers', type=int, default=None)
@click.option('--output', default=None)
@click.pass_obj
def predict(run, checkpoint, data, method, steps, workers, output):
    """Predict every scenario in DATA and write JSONL predictions."""
    run.start('predict')
    model = Forecaster.load(checkpoint)
    scenarios = load_scenarios(data)
    if steps is None:
        steps = run.settings.inference.gamma if method == 'estimator' \
            else model.schedule.T
    predictions = predict_all(scenarios, model, run.seed, method, steps,
                              run.settings.inference, workers)
    output = output or run.path('predictions.jsonl')
    write_predictions(predictions, output)
    click.echo(f'{len(predictions)} scenarios predicted to {output}')


@cli.command('eval')
@click.option('--pred', 'pred_path', required=True)
@click.option('--data', required=True)
@click.option('--focal-only', is_flag=True, default=False)
@click.pass_obj
def evaluate(run, pred_path, data, focal_only):
    """Print the four metrics and write OUT_DIR/report.csv."""
    run.start('eval')
    focal_only = focal_only or run.settings.eval.focal_only
    report = compute_metrics(read_predictions(pred_path),
                             load_scenarios(data),
                             run.settings.eval.miss_threshold, focal_only)
    write_report([report], run.path('report.csv'))
    for name in ('min_ade', 'min_fde', 'miss_rate', 'brier_min_fde'):
        click.echo(f'{name:>14}: {getattr(report, name):.4f}')


@cli.command('bench-sampling')
@click.option('--checkpoint', required=True)
@click.option('--data', required=True)
@click.option('--steps', 'rows', multiple=True,
              help='METHOD:STEPS, repeatable (ddpm, ddim, estimator).')
@click.option('--repeats', type=int, default=None)
@click.option('--limit', type=int, default=None,
              help='Use only the first N scenarios.')
@click.pass_obj
def bench(run, checkpoint, data, rows, repeats, limit):
    """Accuracy and time per scenario for each sampling procedure."""
    run.start('bench-sampling')
    try:
        rows = [parse_bench_row(r)
                for r in (rows or run.settings.eval.bench_rows)]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='--steps')
    scenarios = load_scenarios(data)[:limit]
    df = bench_sampling(scenarios, checkpoint, rows, run.seed,
                        repeats or run.settings.eval.repeats,
                        run.settings.eval.miss_threshold)
    write_report(df, run.path('bench_sampling.csv'),
                 key_columns=('method', 'steps', 'denoiser_calls',
                              'elapsed_ms'))
    click.echo(format_table(df))


@cli.command()
@click.option('--checkpoint', required=True)
@click.option('--data', required=True)
@click.option('--sigma', 'sigmas', multiple=True,
              help='Sigma value or START:STOP:STEP range, repeatable.')
@click.option('--gamma', type=int, default=None)
@click.option('--limit', type=int, default=None)
@click.pass_obj
def robustness(run, checkpoint, data, sigmas, gamma, limit):
    """Metrics under increasing observation noise; CSV and SVG."""
    run.start('robustness')
    try:
        sigmas = parse_sigmas(sigmas) if sigmas \
            else list(run.settings.eval.sigmas)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='--sigma')
    if any(s < 0 for s in sigmas):
        raise click.BadParameter('sigma must be >= 0', param_hint='--sigma')
    df = robustness_sweep(load_scenarios(data)[:limit], checkpoint, sigmas,
                          run.seed, gamma, run.settings.eval.miss_threshold,
                          plot_path=run.path('robustness.svg'))
    write_report(df, run.path('robustness.csv'), key_columns=('sigma',))
    click.echo(format_table(df))


@cli.command('ablation')
@click.option('--checkpoint', required=True, help='Stage-1 checkpoint.')
@click.option('--data', required=True,
              help='Directory with train.jsonl and val.jsonl.')
@click.option('--variant', 'variants', multiple=True,
              type=click.Choice(VARIANTS))
@click.option('--fraction', type=float, default=None)
@click.option('--limit', type=int, default=None,
              help='Evaluate on the first N validation scenarios.')
@click.pass_obj
def run_ablation(run, checkpoint, data, variants, fraction, limit):
    """Compare no prior, an MLP prior and the estimator."""
    run.start('ablation')
    train_path, val_path = _data_files(data)
    if val_path is None:
        raise click.BadParameter('expected a directory with train.jsonl '
                                 'and val.jsonl', param_hint='--data')
    df = ablation(load_scenarios(train_path),
                  load_scenarios(val_path)[:limit], checkpoint, run.settings,
                  variants or VARIANTS, fraction, seed=run.seed,
                  progress=run.progress)
    write_report(df, run.path('ablation.csv'),
                 key_columns=('variant', 'modes', 'prior_params',
                              'total_params'))
    click.echo(format_table(df))


def main(argv=None):
    """Run the CLI and return its exit code."""
    try:
        result = cli.main(args=argv, prog_name='adm', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo('aborted', err=True)
        return 1
    except AdmError as e:
        logger.error(str(e))
        click.echo(f'error: {e}', err=True)
        for cls, code in EXIT_CODES:
            if isinstance(e, cls):
                return code
    except ValueError as e:
        logger.error(str(e))
        click.echo(f'error: {e}', err=True)
        return 2
    return result if isinstance(result, int) else 0


if __name__ == '__main__':
    sys.exit(main())
