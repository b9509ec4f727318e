"""Raw pipe/inspection records, cleaning rules and the scaled design matrix."""

from __future__ import annotations

import csv
import enum
import logging
import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from sewerdeg.errors import ValidationError

log = logging.getLogger(__name__)

MATERIALS = (
    "Asbestos", "CI", "Clay", "Concrete", "GRP", "PE", "PP", "PRC", "PVC", "PVCU", "VC",
)
WASTE_TYPES = ("mixed", "stormwater", "wastewater")

# Canonical numeric order follows the documented input-variable list; dummies follow
# alphabetically after these.
NUMERIC_FEATURES = (
    "age",
    "length",
    "size",
    "depth",
    "slope",
    "connection_surface",
    "upstream_length",
    "upstream_count",
    "coord_x",
    "coord_y",
)
CATEGORICAL_FEATURES = ("material", "waste_type")

PIPE_COLUMNS = (
    "pipe_id", "install_year", "length_m", "size_mm", "depth_m", "slope_pct",
    "connection_surface_m2", "coord_x", "coord_y", "material", "waste_type",
    "is_house_connection", "from_node", "to_node",
)
INSPECTION_COLUMNS = ("pipe_id", "inspection_year", "condition_class", "complete")

# raw CSV column for each numeric pipe attribute
_PIPE_NUMERIC_CSV = {
    "length": "length_m",
    "size": "size_mm",
    "depth": "depth_m",
    "slope": "slope_pct",
    "connection_surface": "connection_surface_m2",
    "coord_x": "coord_x",
    "coord_y": "coord_y",
}
SAMPLE_COLUMNS = (
    "pipe_id", "inspection_year", "install_year", "age", "condition_class", "label",
    "length_m", "size_mm", "depth_m", "slope_pct", "connection_surface_m2",
    "coord_x", "coord_y", "material", "waste_type", "upstream_count", "upstream_length_m",
)


class Label(enum.IntEnum):
    NON_DEFECTIVE = 0
    DEFECTIVE = 1


@dataclass(frozen=True)
class PipeRecord:
    pipe_id: str
    install_year: int | None
    length: float | None
    size: float | None
    depth: float | None
    slope: float | None
    connection_surface: float | None
    coord_x: float | None
    coord_y: float | None
    material: str | None
    waste_type: str | None
    is_house_connection: bool = False
    from_node: str | None = None
    to_node: str | None = None

    def __post_init__(self):
        for name in ("length", "size", "depth"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"pipe {self.pipe_id}: {name} must be > 0, got {v}")
        for name in ("coord_x", "coord_y"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValidationError(f"pipe {self.pipe_id}: {name} must lie in [0, 1], got {v}")
        if self.material is not None and self.material not in MATERIALS:
            raise ValidationError(f"pipe {self.pipe_id}: unknown material {self.material!r}")
        if self.waste_type is not None and self.waste_type not in WASTE_TYPES:
            raise ValidationError(f"pipe {self.pipe_id}: unknown waste type {self.waste_type!r}")


@dataclass(frozen=True)
class InspectionRecord:
    pipe_id: str
    inspection_year: int | None
    condition_class: int | None
    complete: bool | None = True

    def __post_init__(self):
        if self.condition_class is not None:
            _check_class(self.condition_class)


@dataclass(frozen=True)
class LabeledSample:
    """One inspection joined with its pipe attributes.

    ``features`` maps every name in :data:`NUMERIC_FEATURES` and
    :data:`CATEGORICAL_FEATURES` to a value (``None`` when missing).
    """

    pipe_id: str
    inspection_year: int | None
    install_year: int | None
    condition_class: int | None
    label: int | None
    features: Mapping[str, object]
    complete: bool | None = True
    is_house_connection: bool = False

    @property
    def age(self):
        return self.features.get("age")

    def with_age(self, age) -> "LabeledSample":
        return replace(self, features={**self.features, "age": age})

    def is_missing_values(self) -> bool:
        if self.complete is not True or self.condition_class is None:
            return True
        return any(self.features.get(k) is None for k in NUMERIC_FEATURES + CATEGORICAL_FEATURES)


def _check_class(condition_class) -> None:
    if isinstance(condition_class, bool) or not isinstance(condition_class, (int, np.integer)):
        raise ValidationError(f"condition class must be an integer, got {condition_class!r}")
    if not 1 <= condition_class <= 6:
        raise ValidationError(f"condition class must be in 1..6, got {condition_class}")


def binarize_condition(condition_class: int, non_defective: Sequence[int] = (5, 6)) -> Label:
    """Map the 1..6 condition scale to defective (1-4) / non-defective (5, 6)."""
    _check_class(condition_class)
    return Label.NON_DEFECTIVE if condition_class in non_defective else Label.DEFECTIVE


# --------------------------------------------------------------------------- cleaning


@dataclass(frozen=True)
class CleaningConfig:
    min_material_count: int = 5
    old_age_cutoff: int = 80
    best_class: int = 6
    new_age_cutoff: int = 2
    low_class_cutoff: int = 2
    non_defective_classes: tuple[int, ...] = (5, 6)
    # house connections are excluded from upstream totals unless set
    house_connections_upstream: bool = False


CLEANING_RULES = (
    "incomplete",
    "house_connection",
    "contradictory_old",
    "contradictory_new",
    "rare_material",
)


@dataclass(frozen=True)
class CleaningLog:
    n_raw: int
    n_clean: int
    dropped: Mapping[str, int]

    def to_dict(self) -> dict:
        pct = {
            rule: (100.0 * n / self.n_raw if self.n_raw else 0.0) for rule, n in self.dropped.items()
        }
        return {
            "n_raw": self.n_raw,
            "n_clean": self.n_clean,
            "dropped": dict(self.dropped),
            "dropped_pct": pct,
            "rules": list(CLEANING_RULES),
        }


def _rule_for(sample: LabeledSample, config: CleaningConfig) -> str | None:
    if sample.is_missing_values():
        return "incomplete"
    if sample.is_house_connection:
        return "house_connection"
    age = sample.age
    if age >= config.old_age_cutoff and sample.condition_class == config.best_class:
        return "contradictory_old"
    if age <= config.new_age_cutoff and sample.condition_class <= config.low_class_cutoff:
        return "contradictory_new"
    return None


def clean_samples(
    samples: Sequence[LabeledSample], config: CleaningConfig = CleaningConfig()
) -> tuple[list[LabeledSample], CleaningLog]:
    """Apply the cleaning rules in order; each drop is attributed to the first rule hit.

    The rare-material rule runs last so that it counts the rows that survive
    every other rule, which keeps cleaning idempotent.
    """
    dropped = {rule: 0 for rule in CLEANING_RULES}
    kept = []
    for s in samples:
        rule = _rule_for(s, config)
        if rule is None:
            kept.append(s)
        else:
            dropped[rule] += 1
    counts = Counter(s.features["material"] for s in kept)
    rare = {m for m, c in counts.items() if c < config.min_material_count}
    if rare:
        log.info("dropping rare materials %s", sorted(rare))
    out = [s for s in kept if s.features["material"] not in rare]
    dropped["rare_material"] = len(kept) - len(out)
    if not out:
        raise ValidationError("no samples left after cleaning")
    return out, CleaningLog(n_raw=len(samples), n_clean=len(out), dropped=dropped)


def join_records(
    pipes: Sequence[PipeRecord],
    inspections: Sequence[InspectionRecord],
    upstream: Mapping[str, tuple[int, float]] | None = None,
    config: CleaningConfig = CleaningConfig(),
) -> list[LabeledSample]:
    """Join inspections to pipes and attach upstream statistics."""
    by_id = {}
    for p in pipes:
        if p.pipe_id in by_id:
            raise ValidationError(f"duplicate pipe_id {p.pipe_id!r}")
        by_id[p.pipe_id] = p
    unknown = sorted({i.pipe_id for i in inspections} - by_id.keys())
    if unknown:
        raise ValidationError(f"inspections reference unknown pipe ids: {unknown[:10]}")
    if upstream is None:
        from sewerdeg.network import upstream_for_pipes

        upstream = upstream_for_pipes(pipes, include_house_connections=config.house_connections_upstream)

    samples = []
    for ins in inspections:
        p = by_id[ins.pipe_id]
        age = None
        if ins.inspection_year is not None and p.install_year is not None:
            age = ins.inspection_year - p.install_year
            if age < 0:
                raise ValidationError(
                    f"pipe {p.pipe_id}: inspection year {ins.inspection_year} precedes "
                    f"install year {p.install_year}"
                )
        up = upstream.get(p.pipe_id)
        feats = {
            "age": age,
            "length": p.length,
            "size": p.size,
            "depth": p.depth,
            "slope": p.slope,
            "connection_surface": p.connection_surface,
            "upstream_length": None if up is None else float(up[1]),
            "upstream_count": None if up is None else int(up[0]),
            "coord_x": p.coord_x,
            "coord_y": p.coord_y,
            "material": p.material,
            "waste_type": p.waste_type,
        }
        label = None
        if ins.condition_class is not None:
            label = int(binarize_condition(ins.condition_class, config.non_defective_classes))
        samples.append(
            LabeledSample(
                pipe_id=p.pipe_id,
                inspection_year=ins.inspection_year,
                install_year=p.install_year,
                condition_class=ins.condition_class,
                label=label,
                features=feats,
                complete=ins.complete,
                is_house_connection=p.is_house_connection,
            )
        )
    return samples


def clean_dataset(
    pipes: Sequence[PipeRecord],
    inspections: Sequence[InspectionRecord],
    config: CleaningConfig = CleaningConfig(),
    upstream: Mapping[str, tuple[int, float]] | None = None,
) -> tuple[list[LabeledSample], CleaningLog]:
    if not inspections:
        raise ValidationError("empty inspection set")
    return clean_samples(join_records(pipes, inspections, upstream, config), config)


# --------------------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalingParams:
    columns: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]

    def __post_init__(self):
        if not len(self.columns) == len(self.mins) == len(self.maxs):
            raise ValidationError("scaling params: length mismatch")
        for c, lo, hi in zip(self.columns, self.mins, self.maxs):
            if hi < lo:
                raise ValidationError(f"scaling params for {c}: max < min")

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Scale a ``(n, len(columns))`` array; constant columns map to 0."""
        values = np.asarray(values, dtype=np.float64)
        lo = np.asarray(self.mins)
        span = np.asarray(self.maxs) - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (values - lo) / safe, 0.0)

    def to_dict(self) -> dict:
        # explicit lists: JSON writers sort mapping keys, which would lose column order
        return {"columns": list(self.columns), "min": list(self.mins), "max": list(self.maxs)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalingParams":
        return cls(tuple(d["columns"]), tuple(float(v) for v in d["min"]), tuple(float(v) for v in d["max"]))


def _numeric_block(samples: Sequence[LabeledSample], columns: Sequence[str]) -> np.ndarray:
    return np.array([[float(s.features[c]) for c in columns] for s in samples], dtype=np.float64).reshape(
        len(samples), len(columns)
    )


def fit_scaling(samples: Sequence[LabeledSample], columns: Sequence[str] = NUMERIC_FEATURES) -> ScalingParams:
    """Record per-column min/max of the training partition."""
    if not samples:
        raise ValidationError("cannot fit scaling on an empty sample set")
    block = _numeric_block(samples, columns)
    mins, maxs = block.min(axis=0), block.max(axis=0)
    for c, lo, hi in zip(columns, mins, maxs):
        if hi == lo:
            log.warning("column %s is constant (%g); it will scale to 0", c, lo)
    return ScalingParams(tuple(columns), tuple(map(float, mins)), tuple(map(float, maxs)))


def apply_scaling(params: ScalingParams, samples: Sequence[LabeledSample]) -> np.ndarray:
    return params.transform(_numeric_block(samples, params.columns))


# --------------------------------------------------------------------------- encoding


@dataclass(frozen=True)
class CategoricalEncoding:
    """Known levels and the reference (all-zero) level of each categorical."""

    levels: Mapping[str, tuple[str, ...]]
    reference: Mapping[str, str]

    def __post_init__(self):
        for var, ref in self.reference.items():
            if ref not in self.levels[var]:
                raise ValidationError(f"reference level {ref!r} not among levels of {var}")

    @property
    def columns(self) -> tuple[str, ...]:
        cols = [
            f"{var}_{lvl}"
            for var in self.levels
            for lvl in self.levels[var]
            if lvl != self.reference[var]
        ]
        return tuple(sorted(cols))

    def to_dict(self) -> dict:
        return {var: {"levels": list(self.levels[var]), "reference": self.reference[var]} for var in self.levels}

    @classmethod
    def from_dict(cls, d: Mapping) -> "CategoricalEncoding":
        return cls(
            levels={v: tuple(d[v]["levels"]) for v in d},
            reference={v: d[v]["reference"] for v in d},
        )


def fit_encoding(
    samples: Sequence[LabeledSample],
    variables: Sequence[str] = CATEGORICAL_FEATURES,
    reference_levels: Mapping[str, str] | None = None,
) -> CategoricalEncoding:
    """Collect levels; the reference defaults to the most frequent level (ties alphabetical)."""
    levels, reference = {}, {}
    for var in variables:
        counts = Counter(s.features[var] for s in samples)
        levels[var] = tuple(sorted(counts))
        if reference_levels and var in reference_levels:
            reference[var] = reference_levels[var]
        else:
            reference[var] = min(counts, key=lambda lvl: (-counts[lvl], lvl))
    return CategoricalEncoding(levels, reference)


def encode_categoricals(samples: Sequence[LabeledSample], encoding: CategoricalEncoding) -> np.ndarray:
    """k-1 dummy coding in :attr:`CategoricalEncoding.columns` order."""
    cols = encoding.columns
    index = {c: j for j, c in enumerate(cols)}
    out = np.zeros((len(samples), len(cols)), dtype=np.float64)
    for i, s in enumerate(samples):
        for var in encoding.levels:
            lvl = s.features[var]
            if lvl not in encoding.levels[var]:
                raise ValidationError(f"unseen level {lvl!r} for {var}")
            if lvl != encoding.reference[var]:
                out[i, index[f"{var}_{lvl}"]] = 1.0
    return out


# --------------------------------------------------------------------------- design matrix


@dataclass(frozen=True)
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    pipe_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != len(self.columns):
            raise ValidationError(f"matrix shape {self.X.shape} does not match {len(self.columns)} columns")
        if len(self.y) != self.X.shape[0]:
            raise ValidationError("label vector length mismatch")
        if not np.all(np.isfinite(self.X)):
            raise ValidationError("feature matrix contains missing or non-finite entries")

    def __len__(self):
        return self.X.shape[0]


@dataclass(frozen=True)
class Preprocessor:
    """Training-partition scaling plus categorical encoding."""

    scaling: ScalingParams
    encoding: CategoricalEncoding

    @classmethod
    def fit(cls, samples: Sequence[LabeledSample], encoding: CategoricalEncoding | None = None) -> "Preprocessor":
        return cls(fit_scaling(samples), encoding if encoding is not None else fit_encoding(samples))

    @property
    def columns(self) -> tuple[str, ...]:
        return self.scaling.columns + self.encoding.columns

    def transform(self, samples: Sequence[LabeledSample]) -> FeatureMatrix:
        X = np.hstack([apply_scaling(self.scaling, samples), encode_categoricals(samples, self.encoding)])
        y = np.array([-1 if s.label is None else s.label for s in samples], dtype=np.int64)
        return FeatureMatrix(X, y, self.columns, tuple(s.pipe_id for s in samples))

    def to_dict(self) -> dict:
        return {"scaling": self.scaling.to_dict(), "encoding": self.encoding.to_dict(), "columns": list(self.columns)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Preprocessor":
        return cls(ScalingParams.from_dict(d["scaling"]), CategoricalEncoding.from_dict(d["encoding"]))


# --------------------------------------------------------------------------- CSV I/O


def _parse(value: str, kind, column: str, row: int):
    value = value.strip()
    if value == "":
        return None
    try:
        if kind is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "y", "t"):
                return True
            if low in ("0", "false", "no", "n", "f"):
                return False
            raise ValueError(value)
        if kind is int:
            f = float(value)
            if not f.is_integer():
                raise ValueError(value)
            return int(f)
        if kind is float:
            f = float(value)
            if not math.isfinite(f):
                raise ValueError(value)
            return f
        return value
    except ValueError:
        raise ValidationError(f"row {row}: invalid value {value!r} in column {column}") from None


def _read_rows(path, required: Sequence[str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: missing header row")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise ValidationError(f"{path}: missing column(s) {', '.join(missing)}")
        # header is line 1
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def read_pipes_csv(path) -> list[PipeRecord]:
    out = []
    for row_no, row in _read_rows(path, PIPE_COLUMNS):
        try:
            nums = {
                attr: _parse(row[col], float, col, row_no) for attr, col in _PIPE_NUMERIC_CSV.items()
            }
            house = _parse(row["is_house_connection"], bool, "is_house_connection", row_no)
            out.append(
                PipeRecord(
                    pipe_id=_parse(row["pipe_id"], str, "pipe_id", row_no) or "",
                    install_year=_parse(row["install_year"], int, "install_year", row_no),
                    material=_parse(row["material"], str, "material", row_no),
                    waste_type=_parse(row["waste_type"], str, "waste_type", row_no),
                    is_house_connection=bool(house),
                    from_node=_parse(row["from_node"], str, "from_node", row_no),
                    to_node=_parse(row["to_node"], str, "to_node", row_no),
                    **nums,
                )
            )
        except ValidationError as exc:
            msg = str(exc)
            raise ValidationError(msg if msg.startswith("row ") else f"row {row_no}: {msg}") from None
        if not out[-1].pipe_id:
            raise ValidationError(f"row {row_no}: empty pipe_id")
    return out


def read_inspections_csv(path) -> list[InspectionRecord]:
    out = []
    for row_no, row in _read_rows(path, INSPECTION_COLUMNS):
        try:
            out.append(
                InspectionRecord(
                    pipe_id=_parse(row["pipe_id"], str, "pipe_id", row_no) or "",
                    inspection_year=_parse(row["inspection_year"], int, "inspection_year", row_no),
                    condition_class=_parse(row["condition_class"], int, "condition_class", row_no),
                    complete=_parse(row["complete"], bool, "complete", row_no),
                )
            )
        except ValidationError as exc:
            msg = str(exc)
            raise ValidationError(msg if msg.startswith("row ") else f"row {row_no}: {msg}") from None
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_pipes_csv(path, pipes: Sequence[PipeRecord]) -> None:
    rows = (
        (
            p.pipe_id, p.install_year, p.length, p.size, p.depth, p.slope, p.connection_surface,
            p.coord_x, p.coord_y, p.material, p.waste_type, p.is_house_connection, p.from_node, p.to_node,
        )
        for p in pipes
    )
    _write_csv(path, PIPE_COLUMNS, rows)


def write_inspections_csv(path, inspections: Sequence[InspectionRecord]) -> None:
    rows = ((i.pipe_id, i.inspection_year, i.condition_class, i.complete) for i in inspections)
    _write_csv(path, INSPECTION_COLUMNS, rows)


def write_samples_csv(path, samples: Sequence[LabeledSample]) -> None:
    """Cleaned, unscaled samples with the upstream statistics appended."""

    def row(s):
        f = s.features
        return (
            s.pipe_id, s.inspection_year, s.install_year, f["age"], s.condition_class, s.label,
            f["length"], f["size"], f["depth"], f["slope"], f["connection_surface"],
            f["coord_x"], f["coord_y"], f["material"], f["waste_type"],
            f["upstream_count"], f["upstream_length"],
        )

    _write_csv(path, SAMPLE_COLUMNS, (row(s) for s in samples))


def read_samples_csv(path) -> list[LabeledSample]:
    out = []
    for row_no, row in _read_rows(path, SAMPLE_COLUMNS):
        feats = {attr: _parse(row[col], float, col, row_no) for attr, col in _PIPE_NUMERIC_CSV.items()}
        feats["age"] = _parse(row["age"], int, "age", row_no)
        feats["upstream_count"] = _parse(row["upstream_count"], int, "upstream_count", row_no)
        feats["upstream_length"] = _parse(row["upstream_length_m"], float, "upstream_length_m", row_no)
        feats["material"] = _parse(row["material"], str, "material", row_no)
        feats["waste_type"] = _parse(row["waste_type"], str, "waste_type", row_no)
        out.append(
            LabeledSample(
                pipe_id=row["pipe_id"],
                inspection_year=_parse(row["inspection_year"], int, "inspection_year", row_no),
                install_year=_parse(row["install_year"], int, "install_year", row_no),
                condition_class=_parse(row["condition_class"], int, "condition_class", row_no),
                label=_parse(row["label"], int, "label", row_no),
                features=feats,
            )
        )
    return out


def write_features_csv(path, fm: FeatureMatrix, samples: Sequence[LabeledSample]) -> None:
    header = ("pipe_id", "inspection_year", "label") + fm.columns
    rows = (
        (s.pipe_id, s.inspection_year, int(fm.y[i])) + tuple(float(v) for v in fm.X[i])
        for i, s in enumerate(samples)
    )
    _write_csv(path, header, rows)


def latest_per_pipe(samples: Sequence[LabeledSample]) -> list[LabeledSample]:
    """The most recent inspection of every pipe, in first-appearance order."""
    best: dict[str, LabeledSample] = {}
    for s in samples:
        cur = best.get(s.pipe_id)
        if cur is None or (s.inspection_year or 0) >= (cur.inspection_year or 0):
            best[s.pipe_id] = s
    return list(best.values())
