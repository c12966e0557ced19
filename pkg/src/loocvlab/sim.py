"""Monte Carlo experiment harness for the calibration study.

Simulates many regression datasets per (n, effect) grid cell, computes the
cross-validation comparison estimate, its naive standard error, the
test-set target value, the estimation error, and PIT values under both the
normal and the Bayesian bootstrap uncertainty approximations, then reduces
the trial records to per-cell calibration summaries.

Every trial draws from its own counter-based substream keyed by
(seed, n, effect, outlier, trial id), so any subset of cells or trials
reproduces the full run bit for bit, regardless of worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Iterator, Literal

import numpy as np
from scipy.stats import binom, skew as sample_skew

from . import estimators
from .linreg import (
    ComparisonSpec,
    RankDeficiencyError,
    assign_folds,
    elpd_test_estimate_datasets,
    pointwise_kfold_assigned,
    pointwise_loo,
)

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "CellSummary",
    "generate_dataset",
    "run_trial",
    "run_experiment",
    "summarize",
    "calibration_bands",
    "write_trials_csv",
    "read_trials_csv",
    "write_summary_csv",
    "write_summary_json",
]

MODEL_A_COLS = (0, 1)
MODEL_B_COLS = (0, 1, 2)
TRUE_EFFECTS = (0.0, 1.0)  # beta for intercept and the shared covariate

DEFAULT_PIT_BINS = 20
DEFAULT_BAND_LEVEL = 0.99

_TEST_CHUNK_ELEMENTS = 4_194_304


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and protocol settings for one experiment run."""

    n_list: tuple[int, ...]
    beta_delta_list: tuple[float, ...]
    mu_out: float = 0.0
    n_trials: int = 2000
    n_test_sets: int = 4000
    tau2: float | None = None  # None: model variance treated as unknown
    cv_mode: Literal["loo", "kfold"] = "loo"
    kfold_k: int | None = None
    covariate_mode: Literal["stochastic", "fixed_grid"] = "stochastic"
    seed: int = 0
    bb_draws: int = estimators.DEFAULT_BB_DRAWS

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "beta_delta_list", tuple(float(b) for b in self.beta_delta_list))
        if not self.n_list or any(n < 4 for n in self.n_list):
            raise ValueError("all dataset sizes must be >= 4")
        if self.n_trials < 2:
            raise ValueError("need at least two trials per cell")
        if self.n_test_sets < 1:
            raise ValueError("need at least one test set")
        if self.tau2 is not None and not self.tau2 > 0.0:
            raise ValueError("fixed tau2 must be positive")
        if self.cv_mode == "kfold":
            if self.kfold_k is None or not 2 <= self.kfold_k <= min(self.n_list):
                raise ValueError("kfold mode needs 2 <= K <= min(n_list)")
        elif self.kfold_k is not None:
            raise ValueError("kfold_k is only meaningful in kfold mode")

    @property
    def cells(self) -> list[tuple[int, float]]:
        return [(n, b) for n in self.n_list for b in self.beta_delta_list]


@dataclass(frozen=True)
class TrialRecord:
    """Results of one simulated dataset (NaN metrics when skipped)."""

    n: int
    beta_delta: float
    mu_out: float
    trial_id: int
    elpdhat: float
    se_hat: float
    elpd_target: float
    error: float
    pit_normal: float
    pit_bb: float
    bb_mean: float
    bb_sd: float
    skipped: bool = False


def _float_key(x: float) -> int:
    return int(np.float64(x).view(np.uint64))


def trial_rng(seed: int, n: int, beta_delta: float, mu_out: float, trial_id: int) -> np.random.Generator:
    """Counter-based substream for one trial; independent of cv mode and workers."""
    entropy = (seed & 0xFFFFFFFFFFFFFFFF, n, _float_key(beta_delta), _float_key(mu_out), trial_id)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def generate_dataset(
    n: int,
    beta_delta: float,
    mu_out: float,
    covariate_mode: Literal["stochastic", "fixed_grid"],
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """One dataset: intercept plus two covariates, beta = (0, 1, beta_delta).

    The residual mean of the first observation is shifted by ``mu_out``;
    in fixed-grid mode the shared covariate is the deterministic sequence
    -1 + 2k/n instead of a standard normal draw.
    """
    if n < 4:
        raise ValueError("need n >= 4")
    x = np.empty((n, 3))
    x[:, 0] = 1.0
    if covariate_mode == "fixed_grid":
        x[:, 1] = -1.0 + 2.0 * np.arange(1, n + 1) / n
    else:
        x[:, 1] = rng.standard_normal(n)
    x[:, 2] = rng.standard_normal(n)
    eps = rng.standard_normal(n)
    eps[0] += mu_out
    beta = np.array([TRUE_EFFECTS[0], TRUE_EFFECTS[1], beta_delta])
    return x, x @ beta + eps


def _skipped_record(n: int, beta_delta: float, mu_out: float, trial_id: int) -> TrialRecord:
    nan = float("nan")
    return TrialRecord(n, beta_delta, mu_out, trial_id, nan, nan, nan, nan, nan, nan, nan, nan, skipped=True)


def _draw_test_datasets(
    count: int,
    n: int,
    beta_delta: float,
    mu_out: float,
    covariate_mode: Literal["stochastic", "fixed_grid"],
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """``count`` fresh datasets from the same generating process, batched.

    Drawn in float32: the target averages millions of log densities, so the
    extra rounding is negligible next to its Monte Carlo error, and the
    hot path runs about twice as fast.
    """
    x = np.empty((count, n, 3), dtype=np.float32)
    x[:, :, 0] = 1.0
    if covariate_mode == "fixed_grid":
        x[:, :, 1] = -1.0 + 2.0 * np.arange(1, n + 1, dtype=np.float32) / np.float32(n)
    else:
        x[:, :, 1] = rng.standard_normal((count, n), dtype=np.float32)
    x[:, :, 2] = rng.standard_normal((count, n), dtype=np.float32)
    y = rng.standard_normal((count, n), dtype=np.float32)
    y[:, 0] += np.float32(mu_out)
    beta = np.array([TRUE_EFFECTS[0], TRUE_EFFECTS[1], beta_delta], dtype=np.float32)
    y += x @ beta
    return x, y


def run_trial(config: ExperimentConfig, n: int, beta_delta: float, trial_id: int) -> TrialRecord:
    """One full trial: fit, CV terms, uncertainty, test-set target, PIT values.

    The target is the average summed log predictive density over fresh test
    datasets (covariates included), matching the generating process of the
    training data.  Generator consumption order is fixed: dataset, fold
    assignment (only in K-fold mode with K < n), Bayesian bootstrap weights,
    test datasets.
    """
    rng = trial_rng(config.seed, n, beta_delta, config.mu_out, trial_id)
    x, y = generate_dataset(n, beta_delta, config.mu_out, config.covariate_mode, rng)
    xa = x[:, list(MODEL_A_COLS)]
    xb = x[:, list(MODEL_B_COLS)]
    try:
        if config.cv_mode == "kfold" and config.kfold_k is not None and config.kfold_k < n:
            folds = assign_folds(n, config.kfold_k, rng)
            terms_a = pointwise_kfold_assigned(y, xa, folds, config.tau2)
            terms_b = pointwise_kfold_assigned(y, xb, folds, config.tau2)
        else:
            terms_a = pointwise_loo(y, xa, config.tau2)
            terms_b = pointwise_loo(y, xb, config.tau2)
        spec = ComparisonSpec(x, MODEL_A_COLS, MODEL_B_COLS, config.tau2)
    except RankDeficiencyError:
        return _skipped_record(n, beta_delta, config.mu_out, trial_id)

    diffs = terms_a - terms_b
    elpdhat = estimators.elpd_hat_diff(diffs)
    se = estimators.se_hat(diffs)
    bb = estimators.bb_uncertainty(diffs, config.bb_draws, rng)

    chunk = max(1, _TEST_CHUNK_ELEMENTS // (4 * n))
    total = 0.0
    done = 0
    while done < config.n_test_sets:
        count = min(chunk, config.n_test_sets - done)
        test_x, test_y = _draw_test_datasets(
            count, n, beta_delta, config.mu_out, config.covariate_mode, rng
        )
        total += elpd_test_estimate_datasets(y, spec, test_x, test_y, "diff") * count
        done += count
    target = total / config.n_test_sets

    error = elpdhat - target
    pit_normal = estimators.pit(estimators.NormalApprox(elpdhat, se), target)
    pit_bb = estimators.pit(bb, target)
    return TrialRecord(
        n=n,
        beta_delta=beta_delta,
        mu_out=config.mu_out,
        trial_id=trial_id,
        elpdhat=elpdhat,
        se_hat=se,
        elpd_target=target,
        error=error,
        pit_normal=pit_normal,
        pit_bb=pit_bb,
        bb_mean=float(bb.draws.mean()),
        bb_sd=float(bb.draws.std(ddof=1)) if bb.n_draws > 1 else 0.0,
        skipped=False,
    )


def _run_batch(config: ExperimentConfig, n: int, beta_delta: float, trial_ids: list[int]) -> list[TrialRecord]:
    return [run_trial(config, n, beta_delta, t) for t in trial_ids]


def run_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    progress: Callable[[int, float, int], None] | None = None,
) -> Iterator[TrialRecord]:
    """Stream trial records over the grid, ordered by (n, beta_delta, trial_id).

    With workers > 1 the trials of each cell are evaluated on a process
    pool; records are emitted in the same deterministic order either way.
    """
    batch = 32
    for n, beta_delta in config.cells:
        ids = list(range(config.n_trials))
        if workers > 1:
            batches = [ids[i : i + batch] for i in range(0, len(ids), batch)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for records in pool.map(
                    _run_batch,
                    (config,) * len(batches),
                    (n,) * len(batches),
                    (beta_delta,) * len(batches),
                    batches,
                ):
                    yield from records
        else:
            for t in ids:
                yield run_trial(config, n, beta_delta, t)
        if progress is not None:
            progress(n, beta_delta, config.n_trials)


def calibration_bands(n_trials: int, n_bins: int, level: float) -> list[tuple[int, int]]:
    """Pointwise per-bin count envelope expected under uniform PIT values.

    Each bin count is Binomial(n_trials, 1/n_bins); the band holds the
    central ``level`` probability mass of that distribution, bin by bin
    (no simultaneity adjustment).
    """
    if n_bins < 2:
        raise ValueError("need at least two bins")
    if not 0.0 < level <= 1.0:
        raise ValueError("level must be in (0, 1]")
    alpha = 1.0 - level
    p = 1.0 / n_bins
    lo = int(max(0.0, binom.ppf(alpha / 2.0, n_trials, p)))
    hi = int(min(n_trials, binom.ppf(1.0 - alpha / 2.0, n_trials, p)))
    return [(lo, hi)] * n_bins


@dataclass(frozen=True)
class CellSummary:
    """Per-(n, beta_delta, mu_out) reduction of the trial records."""

    n: int
    beta_delta: float
    mu_out: float
    n_trials: int
    n_skipped: int
    elpdhat_mean: float
    elpdhat_sd: float
    elpdhat_skew: float
    elpd_mean: float
    elpd_sd: float
    elpd_skew: float
    error_mean: float
    error_sd: float
    error_skew: float
    corr_elpdhat_elpd: float
    se_ratio_median: float | None
    se_ratio_q1: float | None
    se_ratio_q3: float | None
    rel_err_mean: float | None
    rel_err_median: float | None
    ks_pit_normal: float
    ks_pit_bb: float
    pit_bins: int
    pit_band_level: float
    pit_band_lo: int
    pit_band_hi: int
    pit_normal_counts: tuple[int, ...]
    pit_bb_counts: tuple[int, ...]


def _sample_skew(values: np.ndarray) -> float:
    """Bias-corrected sample skewness; NaN for (near-)constant samples."""
    if values.std() == 0.0:
        return float("nan")
    return float(sample_skew(values, bias=False))


def _ks_uniform(values: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance of a sample from Uniform(0, 1)."""
    v = np.sort(values)
    k = v.shape[0]
    grid_hi = np.arange(1, k + 1) / k
    grid_lo = np.arange(0, k) / k
    return float(max(np.max(grid_hi - v), np.max(v - grid_lo)))


def _cell_summary(
    cell_records: list[TrialRecord],
    n_bins: int,
    level: float,
) -> CellSummary:
    valid = [r for r in cell_records if not r.skipped]
    n_skipped = len(cell_records) - len(valid)
    if len(valid) < 2:
        raise ValueError("need at least two valid records per cell")
    elpdhat = np.array([r.elpdhat for r in valid])
    target = np.array([r.elpd_target for r in valid])
    err = np.array([r.error for r in valid])
    se = np.array([r.se_hat for r in valid])
    pit_n = np.array([r.pit_normal for r in valid])
    pit_b = np.array([r.pit_bb for r in valid])

    sd_err = float(err.std(ddof=1))
    sd_target = float(target.std(ddof=1))
    if sd_err > 0.0:
        ratios = se / sd_err
        q1, med, q3 = (float(q) for q in np.percentile(ratios, [25.0, 50.0, 75.0]))
    else:
        q1 = med = q3 = None
    if sd_target > 0.0:
        rel = err / sd_target
        rel_mean, rel_median = float(rel.mean()), float(np.median(rel))
    else:
        rel_mean = rel_median = None

    counts_n, _ = np.histogram(pit_n, bins=n_bins, range=(0.0, 1.0))
    counts_b, _ = np.histogram(pit_b, bins=n_bins, range=(0.0, 1.0))
    band_lo, band_hi = calibration_bands(len(valid), n_bins, level)[0]

    first = cell_records[0]
    return CellSummary(
        n=first.n,
        beta_delta=first.beta_delta,
        mu_out=first.mu_out,
        n_trials=len(valid),
        n_skipped=n_skipped,
        elpdhat_mean=float(elpdhat.mean()),
        elpdhat_sd=float(elpdhat.std(ddof=1)),
        elpdhat_skew=_sample_skew(elpdhat),
        elpd_mean=float(target.mean()),
        elpd_sd=sd_target,
        elpd_skew=_sample_skew(target),
        error_mean=float(err.mean()),
        error_sd=sd_err,
        error_skew=_sample_skew(err),
        corr_elpdhat_elpd=(
            float(np.corrcoef(elpdhat, target)[0, 1])
            if elpdhat.std() > 0.0 and target.std() > 0.0
            else float("nan")
        ),
        se_ratio_median=med,
        se_ratio_q1=q1,
        se_ratio_q3=q3,
        rel_err_mean=rel_mean,
        rel_err_median=rel_median,
        ks_pit_normal=_ks_uniform(pit_n),
        ks_pit_bb=_ks_uniform(pit_b),
        pit_bins=n_bins,
        pit_band_level=level,
        pit_band_lo=band_lo,
        pit_band_hi=band_hi,
        pit_normal_counts=tuple(int(c) for c in counts_n),
        pit_bb_counts=tuple(int(c) for c in counts_b),
    )


def summarize(
    records: Iterable[TrialRecord],
    n_bins: int = DEFAULT_PIT_BINS,
    level: float = DEFAULT_BAND_LEVEL,
) -> list[CellSummary]:
    """Reduce trial records to per-cell summaries, ordered by cell key."""
    cells: dict[tuple[int, float, float], list[TrialRecord]] = {}
    for r in records:
        cells.setdefault((r.n, r.beta_delta, r.mu_out), []).append(r)
    if not cells:
        raise ValueError("no records to summarize")
    return [_cell_summary(cells[key], n_bins, level) for key in sorted(cells)]


def _fmt(value: object) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(float(value))  # builtin float: shortest round-trip repr
    return str(value)


_TRIAL_FIELDS = [f.name for f in fields(TrialRecord)]


def write_trials_csv(records: Iterable[TrialRecord], path: str) -> int:
    """Write trial records sorted by (n, beta_delta, trial_id); returns row count."""
    rows = sorted(records, key=lambda r: (r.n, r.beta_delta, r.trial_id))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRIAL_FIELDS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, name)) for name in _TRIAL_FIELDS])
    return len(rows)


def read_trials_csv(path: str) -> list[TrialRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                TrialRecord(
                    n=int(row["n"]),
                    beta_delta=float(row["beta_delta"]),
                    mu_out=float(row["mu_out"]),
                    trial_id=int(row["trial_id"]),
                    elpdhat=float(row["elpdhat"]),
                    se_hat=float(row["se_hat"]),
                    elpd_target=float(row["elpd_target"]),
                    error=float(row["error"]),
                    pit_normal=float(row["pit_normal"]),
                    pit_bb=float(row["pit_bb"]),
                    bb_mean=float(row["bb_mean"]),
                    bb_sd=float(row["bb_sd"]),
                    skipped=row["skipped"] == "1",
                )
            )
    return records


_SCALAR_SUMMARY_FIELDS = [
    f.name for f in fields(CellSummary) if f.name not in ("pit_normal_counts", "pit_bb_counts")
]


def write_summary_csv(cells: list[CellSummary], path: str) -> None:
    """Scalar per-cell statistics; histogram counts live in the JSON summary."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SCALAR_SUMMARY_FIELDS)
        for cell in cells:
            writer.writerow(
                ["" if (v := getattr(cell, name)) is None else _fmt(v) for name in _SCALAR_SUMMARY_FIELDS]
            )


def write_summary_json(cells: list[CellSummary], path: str) -> None:
    def as_dict(cell: CellSummary) -> dict:
        out = {}
        for f in fields(CellSummary):
            value = getattr(cell, f.name)
            if isinstance(value, tuple):
                value = list(value)
            if isinstance(value, float) and math.isnan(value):
                value = None
            out[f.name] = value
        return out

    with open(path, "w") as fh:
        json.dump({"cells": [as_dict(c) for c in cells]}, fh, indent=1, sort_keys=True)
        fh.write("\n")
