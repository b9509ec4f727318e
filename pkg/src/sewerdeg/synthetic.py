"""Synthetic sewer networks and inspections with a known degradation law.

All draws are counter-addressed: the value of attribute ``a`` for pipe ``i``
is the ``i``-th output of ``Stream(seed, "network", a)`` (inspections use
``Stream(seed, "inspections", a)`` indexed by ``i * k + j`` for the ``j``-th of
``k`` inspections of pipe ``i``).  Any pipe's attributes can therefore be
regenerated without generating the others.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from sewerdeg.data_model import (
    NUMERIC_FEATURES,
    CategoricalEncoding,
    InspectionRecord,
    LabeledSample,
    PipeRecord,
    Preprocessor,
    ScalingParams,
    join_records,
)
from sewerdeg.errors import ValidationError
from sewerdeg.network import graph_from_pipes, upstream_for_pipes
from sewerdeg.rng import Stream

# (min, max, mean, sd) of the observed inventory
ATTRIBUTE_RANGES = {
    "age": (0.0, 74.0, 30.199, 16.705),
    "length": (1.43, 175.27, 34.082, 16.190),
    "size": (100.0, 2500.0, 399.905, 259.854),
    "depth": (0.394, 7.22, 2.316, 0.924),
    "slope": (-0.309, 67.333, 0.979, 2.177),
    "connection_surface": (0.568, 1263.832, 170.077, 113.118),
    "upstream_length": (1.876, 72009.122, 1812.761, 6205.549),
    "coord_x": (0.0, 1.0, 0.348, 0.1466),
    "coord_y": (0.0, 1.0, 0.547, 0.219),
}

MATERIAL_FREQUENCIES = {
    "Concrete": 0.6353,
    "Clay": 0.2520,
    "VC": 0.0300,
    "PP": 0.0200,
    "PVC": 0.0200,
    "CI": 0.0150,
    "PVCU": 0.0100,
    "Asbestos": 0.0080,
    "GRP": 0.0040,
    "PE": 0.0030,
    "PRC": 0.0027,
}
WASTE_FREQUENCIES = {"wastewater": 0.50, "stormwater": 0.35, "mixed": 0.15}

LAST_INSPECTION_YEAR = 2021
FIRST_INSPECTION_YEAR = 2000
# pipe age in the last inspection year; shifted above the inspection-age mean
INSTALL_AGE = (0.0, 74.0, 36.0, 17.0)


def beta_on_interval(lo: float, hi: float, mean: float, sd: float) -> tuple[float, float]:
    """Method-of-moments Beta shape parameters for a variable on ``[lo, hi]``."""
    m = (mean - lo) / (hi - lo)
    v = (sd / (hi - lo)) ** 2
    common = m * (1 - m) / v - 1
    if common <= 0:
        raise ValidationError("infeasible mean/sd for a Beta on the interval")
    return m * common, (1 - m) * common


def _draw(stream: Stream, spec, n: int) -> np.ndarray:
    lo, hi, mean, sd = spec
    a, b = beta_on_interval(lo, hi, mean, sd)
    return lo + (hi - lo) * stats.beta.ppf(stream.uniform(n), a, b)


@dataclass(frozen=True)
class NetworkConfig:
    outfall_probability: float = 0.02
    house_connection_fraction: float = 0.0
    material_frequencies: Mapping[str, float] = field(default_factory=lambda: dict(MATERIAL_FREQUENCIES))
    waste_frequencies: Mapping[str, float] = field(default_factory=lambda: dict(WASTE_FREQUENCIES))
    # levels with fewer pipes than this are folded into the most frequent level
    min_material_count: int = 5


def generate_network(n_pipes: int, seed: int, config: NetworkConfig = NetworkConfig()):
    """Random forest-of-trees pipe network with realistic attribute distributions.

    Pipe ``i`` starts at its own manhole ``N{i}`` and drains either into a new
    outfall or into the upstream manhole of a uniformly chosen earlier pipe.
    """
    if n_pipes < 1:
        raise ValidationError("n_pipes must be >= 1")
    n = n_pipes

    def s(name):
        return Stream(seed, "network", name)

    parent = np.floor(s("parent").uniform(n) * np.arange(n)).astype(np.int64)
    outfall = s("outfall").uniform(n) < config.outfall_probability
    outfall[0] = True

    attrs = {name: _draw(s(name), ATTRIBUTE_RANGES[name], n) for name in ("length", "size", "depth", "slope", "connection_surface", "coord_x", "coord_y")}
    install_age = np.rint(_draw(s("install_age"), INSTALL_AGE, n)).astype(np.int64)
    install_year = LAST_INSPECTION_YEAR - install_age

    mats = list(config.material_frequencies)
    material = np.array(mats, dtype=object)[s("material").choice([config.material_frequencies[m] for m in mats], n)]
    if config.min_material_count > 1:
        levels, counts = np.unique(material.astype(str), return_counts=True)
        top = max(mats, key=lambda m: config.material_frequencies[m])
        for lvl, c in zip(levels, counts):
            if c < config.min_material_count:
                material[material == lvl] = top
    wastes = list(config.waste_frequencies)
    waste = np.array(wastes, dtype=object)[s("waste").choice([config.waste_frequencies[w] for w in wastes], n)]
    house = s("house").uniform(n) < config.house_connection_fraction

    pipes = []
    for i in range(n):
        to_node = f"O{i}" if outfall[i] else f"N{parent[i]}"
        pipes.append(
            PipeRecord(
                pipe_id=f"P{i}",
                install_year=int(install_year[i]),
                length=float(attrs["length"][i]),
                size=float(attrs["size"][i]),
                depth=float(attrs["depth"][i]),
                slope=float(attrs["slope"][i]),
                connection_surface=float(attrs["connection_surface"][i]),
                coord_x=float(attrs["coord_x"][i]),
                coord_y=float(attrs["coord_y"][i]),
                material=str(material[i]),
                waste_type=str(waste[i]),
                is_house_connection=bool(house[i]),
                from_node=f"N{i}",
                to_node=to_node,
            )
        )
    return pipes, graph_from_pipes(pipes, include_house_connections=True)


# --------------------------------------------------------------------------- ground truth


def reference_scaling() -> ScalingParams:
    """Fixed scaling the ground-truth law is expressed in (the attribute range bounds)."""
    bounds = dict(ATTRIBUTE_RANGES)
    bounds["upstream_length"] = (0.0, 72009.122, 0, 0)
    bounds["upstream_count"] = (0.0, 2000.0, 0, 0)
    return ScalingParams(
        NUMERIC_FEATURES,
        tuple(float(bounds[c][0]) for c in NUMERIC_FEATURES),
        tuple(float(bounds[c][1]) for c in NUMERIC_FEATURES),
    )


def reference_encoding(materials: Sequence[str] | None = None) -> CategoricalEncoding:
    mats = tuple(sorted(materials if materials is not None else MATERIAL_FREQUENCIES))
    return CategoricalEncoding(
        levels={"material": mats, "waste_type": tuple(sorted(WASTE_FREQUENCIES))},
        reference={"material": "Concrete", "waste_type": "wastewater"},
    )


DEFAULT_COEFFICIENTS = {
    "age": 4.0,
    "length": 0.5,
    "size": -1.5,
    "depth": 0.2,
    "slope": 0.1,
    "connection_surface": 0.3,
    "upstream_length": 2.0,
    "upstream_count": 0.5,
    "coord_x": -1.0,
    "coord_y": 1.0,
    "material_Asbestos": 0.5,
    "material_CI": -1.5,
    "material_Clay": -0.2,
    "material_GRP": -0.3,
    "material_PE": -0.8,
    "material_PP": -1.0,
    "material_PRC": -0.8,
    "material_PVC": -0.5,
    "material_PVCU": -0.5,
    "material_VC": -0.1,
    "waste_type_mixed": 0.1,
    "waste_type_stormwater": -0.35,
}

# age lower bound -> P(defective); used by the step-function law
DEFAULT_AGE_STEPS = ((0.0, 0.10), (15.0, 0.35), (30.0, 0.60), (45.0, 0.85))


@dataclass(frozen=True)
class GroundTruth:
    """Known label law over the canonical schema.

    ``kind="logistic"``: P(defective) = sigmoid(intercept + coefficients . x)
    with x scaled by :func:`reference_scaling`.  ``kind="step"``: P depends on
    age through ``age_steps`` and is lowered by ``coord_shift`` for pipes with
    ``coord_x > 0.5``.
    """

    seed: int
    intercept: float = -1.2
    coefficients: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    kind: str = "logistic"
    age_steps: tuple[tuple[float, float], ...] = DEFAULT_AGE_STEPS
    coord_shift: float = 0.1

    def __post_init__(self):
        if self.kind not in ("logistic", "step"):
            raise ValidationError(f"unknown ground-truth kind {self.kind!r}")
        if self.coefficients.get("age", 0.0) < 0:
            raise ValidationError("ground-truth age coefficient must be >= 0")

    def preprocessor(self, materials: Sequence[str] | None = None) -> Preprocessor:
        return Preprocessor(reference_scaling(), reference_encoding(materials))

    def probability(self, samples: Sequence[LabeledSample]) -> np.ndarray:
        if self.kind == "step":
            age = np.array([float(s.features["age"]) for s in samples])
            p = np.zeros(len(samples))
            for lo, prob in self.age_steps:
                p = np.where(age >= lo, prob, p)
            cx = np.array([float(s.features["coord_x"]) for s in samples])
            return np.clip(p - self.coord_shift * (cx > 0.5), 0.0, 1.0)
        fm = self.preprocessor().transform(samples)
        beta = np.array([self.coefficients.get(c, 0.0) for c in fm.columns])
        eta = self.intercept + fm.X @ beta
        return 1.0 / (1.0 + np.exp(-eta))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "kind": self.kind,
            "intercept": self.intercept,
            "coefficients": dict(self.coefficients),
            "age_steps": [list(s) for s in self.age_steps],
            "coord_shift": self.coord_shift,
            "scaling": reference_scaling().to_dict(),
            "encoding": reference_encoding().to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        return cls(
            seed=int(d["seed"]),
            intercept=float(d["intercept"]),
            coefficients={k: float(v) for k, v in d["coefficients"].items()},
            kind=d.get("kind", "logistic"),
            age_steps=tuple(tuple(s) for s in d.get("age_steps", DEFAULT_AGE_STEPS)),
            coord_shift=float(d.get("coord_shift", 0.1)),
        )


def generate_inspections(
    pipes: Sequence[PipeRecord],
    ground_truth: GroundTruth,
    inspections_per_pipe: int = 1,
    seed: int = 0,
    incomplete_fraction: float = 0.0,
    new_age_cutoff: int = 2,
    low_class_cutoff: int = 2,
) -> list[InspectionRecord]:
    """Draw inspection years and labels from the ground-truth law.

    Defective draws get a class uniform on 1-4 and non-defective draws a class
    uniform on 5-6.  Defective draws on pipes aged ``<= new_age_cutoff`` avoid
    classes ``<= low_class_cutoff`` so that clean output trips no cleaning rule.
    """
    k = int(inspections_per_pipe)
    if k < 1:
        raise ValidationError("inspections_per_pipe must be >= 1")
    n = len(pipes)

    def s(name):
        return Stream(seed, "inspections", name)

    first = np.array([max(FIRST_INSPECTION_YEAR, p.install_year) for p in pipes], dtype=np.int64)
    first = np.repeat(first, k)
    span = LAST_INSPECTION_YEAR - first + 1
    years = first + np.minimum(np.floor(s("year").uniform(n * k) * span).astype(np.int64), span - 1)

    stub = [
        InspectionRecord(pipes[i // k].pipe_id, int(years[i]), 6, True) for i in range(n * k)
    ]
    upstream = upstream_for_pipes(pipes)
    samples = join_records(pipes, stub, upstream)
    p = ground_truth.probability(samples)
    defective = s("label").uniform(n * k) < p
    u_class = s("class").uniform(n * k)
    ages = np.array([smp.age for smp in samples])
    young = ages <= new_age_cutoff
    low_start = np.where(young, low_class_cutoff + 1, 1)
    n_bad = 5 - low_start  # classes low_start..4
    bad_class = low_start + np.minimum(np.floor(u_class * n_bad).astype(np.int64), n_bad - 1)
    good_class = 5 + (u_class >= 0.5).astype(np.int64)
    cls = np.where(defective, bad_class, good_class)
    complete = s("complete").uniform(n * k) >= incomplete_fraction

    return [
        InspectionRecord(stub[i].pipe_id, stub[i].inspection_year, int(cls[i]), bool(complete[i]))
        for i in range(n * k)
    ]


def generate_dataset(
    n_pipes: int,
    seed: int,
    inspections_per_pipe: int = 1,
    ground_truth: GroundTruth | None = None,
    network: NetworkConfig = NetworkConfig(),
    incomplete_fraction: float = 0.0,
):
    """Convenience wrapper returning ``(pipes, inspections, graph, ground_truth)``."""
    gt = ground_truth if ground_truth is not None else GroundTruth(seed=seed)
    pipes, graph = generate_network(n_pipes, seed, network)
    inspections = generate_inspections(pipes, gt, inspections_per_pipe, seed, incomplete_fraction)
    return pipes, inspections, graph, gt
