"""Result rows, deterministic CSV output, and the run manifest.

One long-format CSV covers every experiment. The column set is fixed and
the row order is a total sort over the key columns, so identical runs
produce identical bytes. Floats are written with repr, which
round-trips.

Metric vocabulary by experiment (phase in braces):

- RsoProbability: rso_probability {baseline}
- ParamEstimation: mu_error, sigma_error {before, after, baseline},
  selection_rate {baseline}
- Type1: type1_rate {before, after, baseline}, selection_rate {baseline}
- Type2: type2_rate {before, after, baseline}, selection_rate {baseline}
- EffectError: effect_error_pct {before, after, baseline},
  selection_rate {baseline}
- PHack: fp_any_rate {after} (method column is "any")
- ContamEstimation: mu_error, sigma_error {before, after}
- ContamType1: type1_rate {before, after}
- ContamType2: type2_rate {before, after}
- CalibrateSampling: type1_mean, type1_sd {baseline} (reps column holds
  the sampling count under calibration)
- VerifyPower (audit tool): power {baseline}
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

CSV_HEADER = (
    "experiment",
    "distribution",
    "method",
    "test",
    "n",
    "power_target",
    "injected_count",
    "phase",
    "metric",
    "value",
    "ci_lo",
    "ci_hi",
    "reps",
    "seed",
)

PHASES = ("before", "after", "baseline")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    distribution: str
    method: str
    test: str
    n: "int | None"
    power_target: "float | None"
    injected_count: "int | None"
    phase: str
    metric: str
    value: float
    ci_lo: float
    ci_hi: float
    reps: int
    seed: int

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}, got {self.phase!r}")
        if not self.ci_lo <= self.value <= self.ci_hi:
            raise ValueError(
                f"value {self.value} outside its interval [{self.ci_lo}, {self.ci_hi}]"
            )


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sort_key(row: ResultRow):
    return (
        row.experiment,
        row.distribution,
        row.method,
        row.test,
        row.n if row.n is not None else -1,
        _cell(row.power_target),
        row.injected_count if row.injected_count is not None else -1,
        row.phase,
        row.metric,
    )


def sorted_rows(rows) -> list:
    return sorted(rows, key=_sort_key)


def write_csv(rows, path) -> None:
    """Write rows (sorted) to path; byte-identical for identical rows."""
    ordered = sorted_rows(rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in ordered:
            writer.writerow(
                [
                    row.experiment,
                    row.distribution,
                    row.method,
                    row.test,
                    _cell(row.n),
                    _cell(row.power_target),
                    _cell(row.injected_count),
                    row.phase,
                    row.metric,
                    _cell(row.value),
                    _cell(row.ci_lo),
                    _cell(row.ci_hi),
                    _cell(row.reps),
                    _cell(row.seed),
                ]
            )


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
