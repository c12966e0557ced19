"""Exact moments and calibration experiments for Bayesian LOO-CV model comparison."""

from . import cli, estimators, linreg, onecov, quadform, sim

__all__ = ["cli", "estimators", "linreg", "onecov", "quadform", "sim"]
