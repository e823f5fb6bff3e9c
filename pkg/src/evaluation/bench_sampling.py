# -*- coding: utf-8 -*-
"""Accuracy and wall-clock comparison of sampling procedures.

Each row is ``method:steps`` with method one of ddpm, ddim (both from
pure noise) or estimator (accelerated, steps = gamma). Timings exclude a
warm-up prediction and report the median over repeats of the mean
milliseconds per scenario, on a single worker.
"""
import logging
import statistics
import time

import pandas as pd

from src.evaluation.metrics import METRIC_COLUMNS, compute_metrics
from src.exceptions import ScenarioError
from src.models.forecaster import Forecaster
from src.models.predict_model import predict_all

logger = logging.getLogger(__name__)

BENCH_METHODS = ('ddpm', 'ddim', 'estimator')
BENCH_COLUMNS = ['method', 'steps', 'denoiser_calls', 'elapsed_ms'] \
    + METRIC_COLUMNS


def parse_bench_row(text):
    """'ddim:5' -> ('ddim', 5)"""
    method, sep, steps = str(text).partition(':')
    method = method.strip().lower()
    if not sep or method not in BENCH_METHODS:
        raise ValueError(f'expected METHOD:STEPS with METHOD in '
                         f'{"/".join(BENCH_METHODS)}, got {text!r}')
    try:
        steps = int(steps)
    except ValueError:
        raise ValueError(f'steps must be an integer in {text!r}') from None
    if steps < 1:
        raise ValueError(f'steps must be >= 1 in {text!r}')
    return method, steps


def bench_sampling(scenarios, checkpoint, rows, seed=0, repeats=5,
                   miss_threshold=2.0, logger=logger):
    """:returns: DataFrame with one row per ``method:steps`` entry"""
    scenarios = list(scenarios)
    if not scenarios:
        raise ScenarioError('no scenarios to benchmark')
    model = checkpoint if isinstance(checkpoint, Forecaster) \
        else Forecaster.load(checkpoint)
    out = []
    for row in rows:
        method, steps = parse_bench_row(row) if isinstance(row, str) else row
        predict_all(scenarios[:1], model, seed, method, steps, workers=1)
        timings, predictions = [], None
        for _ in range(max(repeats, 1)):
            start = time.perf_counter()
            predictions = predict_all(scenarios, model, seed, method, steps,
                                      workers=1)
            timings.append((time.perf_counter() - start) * 1000.0
                           / len(scenarios))
        report = compute_metrics(predictions, scenarios, miss_threshold)
        calls = predictions[0].denoiser_calls
        elapsed = statistics.median(timings)
        logger.info(f'{method}:{steps}: {calls} denoiser calls, '
                    f'{elapsed:.1f} ms/scenario, minADE {report.min_ade:.3f}')
        out.append({'method': method, 'steps': steps,
                    'denoiser_calls': calls, 'elapsed_ms': elapsed,
                    **report.to_dict()})
    return pd.DataFrame(out, columns=BENCH_COLUMNS)


def format_table(df):
    """Aligned plain-text rendering of a report table."""
    return df.to_string(index=False, float_format=lambda v: f'{v:.3f}')
