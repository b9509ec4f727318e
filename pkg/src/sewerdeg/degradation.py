"""Long-term degradation curves and their monotonicity audit."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from sewerdeg.data_model import LabeledSample, Preprocessor, latest_per_pipe
from sewerdeg.errors import ValidationError

_CHUNK = 20_000


@dataclass(frozen=True)
class DegradationCurve:
    pipe_id: str
    model: str
    probability: np.ndarray  # index t is the probability at age t

    def __post_init__(self):
        p = np.asarray(self.probability, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("curve must be a non-empty 1-D array")
        if np.any((p < 0) | (p > 1)):
            raise ValidationError("curve probabilities must lie in [0, 1]")
        object.__setattr__(self, "probability", p)

    @property
    def horizon(self) -> int:
        return len(self.probability) - 1

    @property
    def ages(self) -> np.ndarray:
        return np.arange(len(self.probability))


def _predict_chunked(model, X: np.ndarray) -> np.ndarray:
    return np.concatenate([model.predict_proba(X[i : i + _CHUNK]) for i in range(0, len(X), _CHUNK)])


def simulate_curves(
    model,
    samples: Sequence[LabeledSample],
    preprocessor: Preprocessor,
    horizon: int = 100,
    model_id: str | None = None,
) -> list[DegradationCurve]:
    """Sweep age over ``0..horizon`` with every other feature of each sample held fixed.

    Ages go through the training scaling, so ages past the training maximum
    map above 1.
    """
    if horizon < 0:
        raise ValidationError("horizon must be >= 0")
    if not samples:
        return []
    if tuple(model.columns) != tuple(preprocessor.columns):
        raise ValidationError("schema mismatch between model and preprocessor")
    base = preprocessor.transform(samples).X
    j = preprocessor.columns.index("age")
    a = preprocessor.scaling.columns.index("age")
    lo, hi = preprocessor.scaling.mins[a], preprocessor.scaling.maxs[a]
    ages = np.arange(horizon + 1, dtype=np.float64)
    scaled_age = (ages - lo) / (hi - lo) if hi > lo else np.zeros_like(ages)
    T = len(ages)
    X = np.repeat(base, T, axis=0)
    X[:, j] = np.tile(scaled_age, len(samples))
    P = _predict_chunked(model, X).reshape(len(samples), T)
    name = model_id or getattr(model, "name", "model")
    return [DegradationCurve(s.pipe_id, name, P[i]) for i, s in enumerate(samples)]


def simulate_curve(model, sample: LabeledSample, preprocessor: Preprocessor, horizon: int = 100, model_id=None):
    return simulate_curves(model, [sample], preprocessor, horizon, model_id)[0]


def count_violations(curve, epsilon: float = 0.0) -> int:
    """Number of ages ``t >= 1`` with ``P(t) < P(t-1) - epsilon``."""
    p = curve.probability if isinstance(curve, DegradationCurve) else np.asarray(curve, dtype=np.float64)
    if p.size == 0:
        raise ValidationError("empty curve")
    return int(np.sum(p[1:] < p[:-1] - epsilon))


@dataclass(frozen=True)
class MonotonicityReport:
    model: str
    per_pipe: Mapping[str, int]

    @property
    def total(self) -> int:
        return int(sum(self.per_pipe.values()))

    @property
    def mean(self) -> float:
        return self.total / len(self.per_pipe) if self.per_pipe else 0.0

    @property
    def max(self) -> int:
        return int(max(self.per_pipe.values(), default=0))

    def merge(self, other: "MonotonicityReport") -> "MonotonicityReport":
        overlap = set(self.per_pipe) & set(other.per_pipe)
        if overlap:
            raise ValidationError(f"reports share pipes: {sorted(overlap)[:5]}")
        return MonotonicityReport(self.model, {**self.per_pipe, **other.per_pipe})

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "population": "unique pipes",
            "n_pipes": len(self.per_pipe),
            "count": self.total,
            "mean": self.mean,
            "max": self.max,
            "per_pipe": dict(self.per_pipe),
        }


def audit_curves(curves: Iterable[DegradationCurve], epsilon: float = 0.0, model: str | None = None) -> MonotonicityReport:
    curves = list(curves)
    name = model or (curves[0].model if curves else "model")
    return MonotonicityReport(name, {c.pipe_id: count_violations(c, epsilon) for c in curves})


def audit_model(
    model,
    samples: Sequence[LabeledSample],
    preprocessor: Preprocessor,
    horizon: int = 100,
    epsilon: float = 0.0,
    model_id: str | None = None,
) -> MonotonicityReport:
    """Audit one curve per unique pipe (its most recent inspection)."""
    curves = simulate_curves(model, latest_per_pipe(samples), preprocessor, horizon, model_id)
    return audit_curves(curves, epsilon, model_id or getattr(model, "name", None))


# --------------------------------------------------------------------------- CSV


def write_curves_csv(path, curves: Sequence[DegradationCurve]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("pipe_id", "model", "age", "probability"))
        for c in curves:
            for t, p in enumerate(c.probability):
                w.writerow((c.pipe_id, c.model, t, repr(float(p))))


def read_curves_csv(path) -> list[DegradationCurve]:
    rows: dict[tuple[str, str], list[tuple[int, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault((r["pipe_id"], r["model"]), []).append((int(r["age"]), float(r["probability"])))
    out = []
    for (pid, model), pts in rows.items():
        pts.sort()
        if [t for t, _ in pts] != list(range(len(pts))):
            raise ValidationError(f"curve for {pid} does not cover ages 0..horizon")
        out.append(DegradationCurve(pid, model, np.array([p for _, p in pts])))
    return out


def write_monotonicity_csv(path, reports: Sequence[MonotonicityReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "count", "mean", "max"))
        for r in reports:
            w.writerow((r.model, r.total, f"{r.mean:.2f}", r.max))
