"""Inspection plans: the static interval rule and threshold-driven scenarios."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from sewerdeg.degradation import DegradationCurve
from sewerdeg.errors import ValidationError

DEFAULT_THRESHOLDS = (0.3, 0.5, 0.7)
FIRST_GAP = 10
LATER_GAP = 15


def static_plan(install_year: int, horizon_year: int) -> list[int]:
    """Inspection years at installation, 10 years later, then every 15 years."""
    if horizon_year < install_year:
        raise ValidationError("horizon_year must be >= install_year")
    years = [install_year]
    nxt = install_year + FIRST_GAP
    while nxt <= horizon_year:
        years.append(nxt)
        nxt += LATER_GAP
    return years


def static_inspection_age(install_year: int, evaluation_year: int) -> int:
    """Age at the first static-plan inspection in or after ``evaluation_year``."""
    if evaluation_year <= install_year:
        return 0
    age = FIRST_GAP
    while install_year + age < evaluation_year:
        age += LATER_GAP
    return age


def predicted_failure_age(curve, threshold: float) -> int | None:
    """Smallest age with ``P(t) >= threshold``; None when never reached."""
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    p = curve.probability if isinstance(curve, DegradationCurve) else np.asarray(curve, dtype=np.float64)
    hit = np.nonzero(p >= threshold)[0]
    return int(hit[0]) if hit.size else None


@dataclass(frozen=True)
class ScenarioReport:
    threshold: float
    failure_age: Mapping[str, int | None]
    actual_age: Mapping[str, int]
    actual_source: str = "recorded"

    @property
    def lateness(self) -> dict[str, int]:
        """actual − predicted, only for pipes that reach the threshold."""
        return {k: self.actual_age[k] - f for k, f in self.failure_age.items() if f is not None}

    @property
    def n_pipes(self) -> int:
        return len(self.failure_age)

    @property
    def n_due(self) -> int:
        return sum(f is not None for f in self.failure_age.values())

    @property
    def n_never_due(self) -> int:
        return self.n_pipes - self.n_due

    @property
    def n_late(self) -> int:
        return sum(v > 0 for v in self.lateness.values())

    @property
    def late_fraction(self) -> float:
        # over all pipes: a never-due pipe cannot be late, so this is monotone in the threshold
        return self.n_late / self.n_pipes if self.n_pipes else 0.0

    @property
    def late_fraction_of_due(self) -> float | None:
        return self.n_late / self.n_due if self.n_due else None

    @property
    def never_due_fraction(self) -> float:
        return self.n_never_due / self.n_pipes if self.n_pipes else 0.0

    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.lateness.values()).items()))

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "actual_source": self.actual_source,
            "n_pipes": self.n_pipes,
            "n_due": self.n_due,
            "n_never_due": self.n_never_due,
            "n_late": self.n_late,
            "late_fraction": self.late_fraction,
            "late_fraction_of_due": self.late_fraction_of_due,
            "never_due_fraction": self.never_due_fraction,
            "lateness_histogram": {str(k): v for k, v in self.histogram().items()},
            "failure_age": dict(self.failure_age),
            "actual_age": dict(self.actual_age),
        }


def compare_scenarios(
    curves: Sequence[DegradationCurve],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    actual_ages: Mapping[str, int] | None = None,
    actual_source: str = "recorded",
) -> list[ScenarioReport]:
    """One report per threshold; curves and ``actual_ages`` must cover the same pipes."""
    if actual_ages is None:
        raise ValidationError("actual inspection ages are required")
    ids = [c.pipe_id for c in curves]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate pipe ids among curves")
    missing = sorted(set(ids) - set(actual_ages))
    extra = sorted(set(actual_ages) - set(ids))
    if missing or extra:
        raise ValidationError(f"unmatched pipe ids: no actual age for {missing}; no curve for {extra}")
    out = []
    for tau in sorted(thresholds):
        fa = {c.pipe_id: predicted_failure_age(c, tau) for c in curves}
        out.append(ScenarioReport(float(tau), fa, {k: int(actual_ages[k]) for k in ids}, actual_source))
    return out


def cumulative_inspections(ages: Mapping[str, int | None], horizon: int, lengths: Mapping[str, float] | None = None):
    """Fraction of pipes (and of network length) inspected by each age ``0..horizon``.

    Pipes with age None are never inspected and stay in the denominator.
    """
    ids = list(ages)
    if not ids:
        return np.zeros(horizon + 1), np.zeros(horizon + 1)
    a = np.array([horizon + 1 if ages[k] is None else ages[k] for k in ids])
    w = np.array([float(lengths[k]) if lengths and lengths.get(k) is not None else 0.0 for k in ids])
    t = np.arange(horizon + 1)
    done = a[None, :] <= t[:, None]
    by_count = done.mean(axis=1)
    by_length = (done * w).sum(axis=1) / w.sum() if w.sum() > 0 else np.full(horizon + 1, np.nan)
    return by_count, by_length


def write_cumulative_csv(path, reports: Sequence[ScenarioReport], horizon: int, lengths=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "age", "pipes_fraction", "length_fraction"))
        series = [(f"threshold={r.threshold:g}", r.failure_age) for r in reports]
        if reports:
            series.append((f"actual ({reports[0].actual_source})", reports[0].actual_age))
        for name, ages in series:
            cnt, ln = cumulative_inspections(ages, horizon, lengths)
            for t in range(horizon + 1):
                lv = "" if np.isnan(ln[t]) else f"{ln[t]:.6f}"
                w.writerow((name, t, f"{cnt[t]:.6f}", lv))


def write_histogram_csv(path, reports: Sequence[ScenarioReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("threshold", "lateness", "count"))
        for r in reports:
            for k, v in r.histogram().items():
                w.writerow((f"{r.threshold:g}", k, v))
