"""Command-line interface.

Subcommands:

* ``moments``  - exact moments of the accuracy difference, its LOO-CV
  estimate, and the estimation error for a fixed-variance comparison.
* ``oracle``   - cross-check the closed-form one-covariate moments against
  the general matrix machinery; exits nonzero when they disagree.
* ``simulate`` - run the Monte Carlo experiment grid and write trials.csv
  plus summary.csv / summary.json.
* ``report``   - summarize an existing trials.csv.

All randomness flows from --seed (fallback: the LOOCVLAB_SEED environment
variable); equal flags produce byte-identical outputs.  stdout carries only
machine-readable JSON, progress and diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import linreg, onecov, quadform, sim
from .quadform import GaussianLaw, Moments

__all__ = ["main", "oracle_max_deviation", "balanced_design"]

EXIT_NUMERICAL = 3

ORACLE_TOLERANCE = 1e-8
ORACLE_N_DEFAULT = (4, 8, 16, 64)
ORACLE_BETA1 = (0.0, 0.5, -2.0)
ORACLE_M_STAR = (0.0, 1.0, 20.0)
ORACLE_S_STAR = (1.0, 3.0)


def balanced_design(n: int) -> np.ndarray:
    """Intercept plus an alternating +1/-1 covariate (outlier slot at row 0)."""
    if n < 4 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 4, got {n}")
    x = np.ones((n, 2))
    x[1::2, 1] = -1.0
    return x


def _onecov_problem(cfg: onecov.OneCovConfig) -> tuple[linreg.ComparisonSpec, linreg.DataGeneratingProcess]:
    x = balanced_design(cfg.n)
    mu = np.zeros(cfg.n)
    mu[0] = cfg.m_star
    law = GaussianLaw(mu=mu, sigma=cfg.s_star**2 * np.eye(cfg.n))
    spec = linreg.ComparisonSpec(x, cols_a=(0,), cols_b=(0, 1), tau2=cfg.tau**2)
    dgp = linreg.DataGeneratingProcess(x, beta=np.array([0.0, cfg.beta1]), law=law)
    return spec, dgp


def _moments_dict(m: Moments) -> dict:
    return {
        "mean": m.mean,
        "variance": m.variance,
        "third_central": m.third_central,
        "skewness": m.skewness,
    }


@dataclass(frozen=True)
class _Deviation:
    value: float
    where: str


def _rel_dev(exact: float | None, generic: float | None) -> float:
    if exact is None or generic is None:
        return 0.0
    return abs(exact - generic) / max(abs(exact), abs(generic), 1e-12)


def oracle_max_deviation(
    n_values: tuple[int, ...] = ORACLE_N_DEFAULT,
    beta1_values: tuple[float, ...] = ORACLE_BETA1,
    m_star_values: tuple[float, ...] = ORACLE_M_STAR,
    s_star_values: tuple[float, ...] = ORACLE_S_STAR,
    tau: float = 1.0,
) -> tuple[float, str]:
    """Largest relative deviation between the rational-function moments and
    the general machinery over the parameter grid, with its location."""
    worst = _Deviation(0.0, "")
    for n in n_values:
        for beta1 in beta1_values:
            for m_star in m_star_values:
                for s_star in s_star_values:
                    cfg = onecov.OneCovConfig(n=n, beta1=beta1, m_star=m_star, s_star=s_star, tau=tau)
                    spec, dgp = _onecov_problem(cfg)
                    pairs = {
                        "elpd": (onecov.elpd_moments(cfg), quadform.moments(linreg.elpd_diff_form(spec, dgp), dgp.law)),
                        "loocv": (onecov.loocv_moments(cfg), quadform.moments(linreg.loocv_diff_form(spec, dgp), dgp.law)),
                        "error": (onecov.error_moments(cfg), quadform.moments(linreg.error_form(spec, dgp), dgp.law)),
                    }
                    for name, (exact, generic) in pairs.items():
                        for attr in ("mean", "variance", "third_central", "skewness"):
                            dev = _rel_dev(getattr(exact, attr), getattr(generic, attr))
                            if dev > worst.value:
                                worst = _Deviation(dev, f"{name}.{attr} at n={n}, beta1={beta1}, m_star={m_star}, s_star={s_star}")
    return worst.value, worst.where


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("LOOCVLAB_SEED")
    return int(env) if env else 0


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _cmd_moments(args: argparse.Namespace) -> int:
    if args.x_file is not None:
        x = np.loadtxt(args.x_file, delimiter=",", ndmin=2)
        beta = np.array(_parse_floats(args.beta)) if args.beta else np.zeros(x.shape[1])
        cols_a = _parse_ints(args.cols_a)
        cols_b = _parse_ints(args.cols_b)
        mu = np.zeros(x.shape[0])
        mu[0] = args.mu_out
        law = GaussianLaw(mu=mu, sigma=args.s_star**2 * np.eye(x.shape[0]))
        spec = linreg.ComparisonSpec(x, cols_a, cols_b, tau2=args.tau**2)
        dgp = linreg.DataGeneratingProcess(x, beta=beta, law=law)
    else:
        cfg = onecov.OneCovConfig(
            n=args.n, beta1=args.beta_delta, m_star=args.mu_out, s_star=args.s_star, tau=args.tau
        )
        spec, dgp = _onecov_problem(cfg)
    out = {
        "elpd": _moments_dict(quadform.moments(linreg.elpd_diff_form(spec, dgp), dgp.law)),
        "loocv": _moments_dict(quadform.moments(linreg.loocv_diff_form(spec, dgp), dgp.law)),
        "error": _moments_dict(quadform.moments(linreg.error_form(spec, dgp), dgp.law)),
    }
    text = json.dumps(out, indent=1, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    n_values = _parse_ints(args.n) if args.n else ORACLE_N_DEFAULT
    for n in n_values:
        if n < 4 or n % 2 != 0:
            raise SystemExit(2)
    dev, where = oracle_max_deviation(n_values=n_values, tau=args.tau)
    print(json.dumps({"max_rel_dev": dev, "where": where, "tolerance": ORACLE_TOLERANCE}))
    return 0 if dev < ORACLE_TOLERANCE else 1


def _experiment_config(args: argparse.Namespace) -> sim.ExperimentConfig:
    tau2 = None
    if args.tau_mode == "fixed":
        tau2 = args.tau**2
    return sim.ExperimentConfig(
        n_list=_parse_ints(args.n),
        beta_delta_list=_parse_floats(args.beta_delta),
        mu_out=args.mu_out,
        n_trials=args.trials,
        n_test_sets=args.test_sets,
        tau2=tau2,
        cv_mode="kfold" if args.kfold else "loo",
        kfold_k=args.kfold,
        covariate_mode="fixed_grid" if args.covariates == "fixed" else "stochastic",
        seed=_resolve_seed(args.seed),
        bb_draws=args.bb_draws,
    )


def _write_summaries(records: list[sim.TrialRecord], out_dir: str, bins: int, level: float) -> dict:
    cells = sim.summarize(records, n_bins=bins, level=level)
    summary_csv = os.path.join(out_dir, "summary.csv")
    summary_json = os.path.join(out_dir, "summary.json")
    sim.write_summary_csv(cells, summary_csv)
    sim.write_summary_json(cells, summary_json)
    return {"summary_csv": summary_csv, "summary_json": summary_json, "cells": len(cells)}


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _experiment_config(args)
    os.makedirs(args.out, exist_ok=True)

    def progress(n: int, beta: float, trials: int) -> None:
        print(f"cell n={n} beta_delta={beta}: {trials} trials done", file=sys.stderr)

    records = list(sim.run_experiment(config, workers=args.workers, progress=progress))
    trials_csv = os.path.join(args.out, "trials.csv")
    rows = sim.write_trials_csv(records, trials_csv)
    manifest = {"trials_csv": trials_csv, "rows": rows, "seed": config.seed}
    manifest.update(_write_summaries(records, args.out, args.pit_bins, args.band_level))
    print(json.dumps(manifest, sort_keys=True))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    records = sim.read_trials_csv(args.trials)
    os.makedirs(args.out, exist_ok=True)
    manifest = _write_summaries(records, args.out, args.pit_bins, args.band_level)
    print(json.dumps(manifest, sort_keys=True))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loocvlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_mom = sub.add_parser("moments", help="exact moments for a fixed-variance comparison")
    p_mom.add_argument("--n", type=int, default=8, help="size of the balanced one-covariate design")
    p_mom.add_argument("--beta-delta", type=float, default=0.0, help="non-shared covariate effect")
    p_mom.add_argument("--mu-out", type=float, default=0.0, help="outlier mean shift (first observation)")
    p_mom.add_argument("--s-star", type=float, default=1.0, help="true residual standard deviation")
    p_mom.add_argument("--tau", type=float, default=1.0, help="fixed model standard deviation")
    p_mom.add_argument("--x-file", help="explicit design matrix CSV (n rows, d columns, no header)")
    p_mom.add_argument("--cols-a", default="0", help="model-a column indices, comma separated")
    p_mom.add_argument("--cols-b", default="0,1", help="model-b column indices, comma separated")
    p_mom.add_argument("--beta", default="", help="true coefficients for an explicit design")
    p_mom.add_argument("--output", help="write JSON here instead of stdout")
    p_mom.set_defaults(func=_cmd_moments)

    p_or = sub.add_parser("oracle", help="closed-form vs generic machinery cross-check")
    p_or.add_argument("--n", default="", help="even design sizes, comma separated")
    p_or.add_argument("--tau", type=float, default=1.0)
    p_or.set_defaults(func=_cmd_oracle)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo experiment grid")
    p_sim.add_argument("--n", required=True, help="dataset sizes, comma separated")
    p_sim.add_argument("--beta-delta", required=True, help="non-shared effects, comma separated")
    p_sim.add_argument("--mu-out", type=float, default=0.0)
    p_sim.add_argument("--trials", type=int, default=2000)
    p_sim.add_argument("--test-sets", type=int, default=4000)
    p_sim.add_argument("--tau-mode", choices=("fixed", "unknown"), default="unknown")
    p_sim.add_argument("--tau", type=float, default=1.0, help="model sd in fixed mode")
    p_sim.add_argument("--kfold", type=int, default=None, metavar="K", help="use K-fold CV instead of LOO")
    p_sim.add_argument("--covariates", choices=("stochastic", "fixed"), default="stochastic")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--bb-draws", type=int, default=2000)
    p_sim.add_argument("--pit-bins", type=int, default=sim.DEFAULT_PIT_BINS)
    p_sim.add_argument("--band-level", type=float, default=sim.DEFAULT_BAND_LEVEL)
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.set_defaults(func=_cmd_simulate)

    p_rep = sub.add_parser("report", help="summarize an existing trials.csv")
    p_rep.add_argument("--trials", required=True, help="path to trials.csv")
    p_rep.add_argument("--pit-bins", type=int, default=sim.DEFAULT_PIT_BINS)
    p_rep.add_argument("--band-level", type=float, default=sim.DEFAULT_BAND_LEVEL)
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
