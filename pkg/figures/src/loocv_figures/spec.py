"""Figure descriptions and input loading.

The renderer consumes only the simulator's file formats (trials.csv and
summary.json); every plotted number is read from those files, never
recomputed from raw data.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Literal

FigureKind = Literal["joint", "moments", "relative_error", "se_ratio", "pit"]

KINDS: tuple[str, ...] = ("joint", "moments", "relative_error", "se_ratio", "pit")

TRIAL_COLUMNS = {
    "joint": ("n", "beta_delta", "mu_out", "elpdhat", "elpd_target"),
    "relative_error": ("n", "beta_delta", "mu_out", "error"),
    "se_ratio": ("n", "beta_delta", "mu_out", "se_hat"),
}

SUMMARY_FIELDS = {
    "moments": (
        "n", "beta_delta", "mu_out",
        "elpdhat_mean", "elpdhat_sd", "elpdhat_skew",
        "elpd_mean", "elpd_sd", "elpd_skew",
        "error_mean", "error_sd", "error_skew",
    ),
    "relative_error": ("n", "beta_delta", "mu_out", "elpd_sd"),
    "se_ratio": ("n", "beta_delta", "mu_out", "error_sd"),
    "pit": (
        "n", "beta_delta", "mu_out",
        "pit_normal_counts", "pit_bb_counts", "pit_band_lo", "pit_band_hi",
    ),
}


class MissingColumnsError(ValueError):
    """An input file lacks columns the figure kind needs."""


@dataclass(frozen=True)
class FigureSpec:
    """What to draw, from which files, over which facets.

    ``n_values`` / ``beta_values`` restrict the panel grid; None keeps every
    value present in the data.  Facets named but absent from the data render
    as labelled empty panels.
    """

    kind: FigureKind
    output_path: str
    trials_csv: str | None = None
    summary_json: str | None = None
    n_values: tuple[int, ...] | None = None
    beta_values: tuple[float, ...] | None = None
    mu_out: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        needs_trials = self.kind in TRIAL_COLUMNS
        needs_summary = self.kind in SUMMARY_FIELDS
        if needs_trials and not self.trials_csv:
            raise ValueError(f"figure kind {self.kind!r} needs trials_csv")
        if needs_summary and not self.summary_json:
            raise ValueError(f"figure kind {self.kind!r} needs summary_json")


@dataclass
class TrialData:
    """Column store of trials.csv with float-typed cells."""

    columns: dict[str, list[float]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()), []))

    def select(self, n: int, beta: float, mu: float, column: str) -> list[float]:
        return [
            v
            for v, rn, rb, rm in zip(
                self.columns[column], self.columns["n"], self.columns["beta_delta"], self.columns["mu_out"]
            )
            if rn == n and rb == beta and rm == mu
        ]

    def facet_values(self, column: str) -> list[float]:
        return sorted(set(self.columns[column]))


def load_trials(path: str, required: tuple[str, ...]) -> TrialData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumnsError(f"{path} is missing columns: {', '.join(missing)}")
        data = TrialData({c: [] for c in header})
        for row in reader:
            if row.get("skipped") == "1":
                continue
            for c in header:
                try:
                    data.columns[c].append(float(row[c]))
                except ValueError:
                    data.columns[c].append(float("nan"))
    return data


def load_summary(path: str, required: tuple[str, ...]) -> list[dict]:
    with open(path) as fh:
        payload = json.load(fh)
    cells = payload.get("cells", [])
    if cells:
        missing = [c for c in required if c not in cells[0]]
        if missing:
            raise MissingColumnsError(f"{path} is missing fields: {', '.join(missing)}")
    return cells
