"""Reusable synthetic studies: Wald coverage and the step-law model comparison."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from sewerdeg._parallel import pmap
from sewerdeg.data_model import Preprocessor, clean_dataset, latest_per_pipe
from sewerdeg.degradation import audit_curves, simulate_curves
from sewerdeg.models import fit_model, lr_fit
from sewerdeg.models.logistic import wald_inference
from sewerdeg.planning import compare_scenarios
from sewerdeg.synthetic import MATERIAL_FREQUENCIES, GroundTruth, NetworkConfig, generate_dataset

# materials frequent enough that every dummy is populated at n = 5,000
COMMON_MATERIALS = ("CI", "Clay", "Concrete", "PP", "PVC", "VC")


def common_network() -> NetworkConfig:
    freq = {m: MATERIAL_FREQUENCIES[m] for m in COMMON_MATERIALS}
    total = sum(freq.values())
    return NetworkConfig(material_frequencies={m: f / total for m, f in freq.items()})


@dataclass(frozen=True)
class CoverageResult:
    columns: tuple[str, ...]
    truth: np.ndarray
    covered: np.ndarray  # (n_datasets, n_coef) booleans

    @property
    def coverage(self) -> dict[str, float]:
        return dict(zip(self.columns, self.covered.mean(axis=0).tolist()))


def coverage_experiment(n_datasets: int = 200, n_pipes: int = 5000, seed: int = 0, alpha: float = 0.05) -> CoverageResult:
    """Refit LR on fresh datasets from one known law; record CI coverage per coefficient.

    The design is built in the ground truth's own reference scaling so the
    fitted coefficients estimate the true ones directly.
    """
    gt = GroundTruth(seed=seed)
    pre = gt.preprocessor(COMMON_MATERIALS)
    truth = np.array([gt.intercept] + [gt.coefficients.get(c, 0.0) for c in pre.columns])
    net = common_network()

    def one(r):
        pipes, insp, _, _ = generate_dataset(n_pipes, seed * 100_003 + r, 1, gt, net)
        samples, _ = clean_dataset(pipes, insp)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = lr_fit(pre.transform(samples), seed=r)
        inf = wald_inference(m.coef, m.se, alpha)
        return (inf["ci_low"] <= truth) & (truth <= inf["ci_high"])

    covered = np.array(pmap(one, range(n_datasets)))
    return CoverageResult(("intercept",) + pre.columns, truth, covered)


@dataclass
class StepStudy:
    audits: dict
    scenarios: list


def step_study(
    n_pipes: int = 1000,
    seed: int = 0,
    models=("lr", "rf", "xgb"),
    horizon: int = 100,
    thresholds=(0.3, 0.5, 0.7),
    configs=None,
) -> StepStudy:
    """Fit models on step-law data, audit their curves, and plan with the LR curves."""
    gt = GroundTruth(seed=seed, kind="step")
    pipes, insp, _, _ = generate_dataset(n_pipes, seed, 1, gt)
    samples, _ = clean_dataset(pipes, insp)
    pre = Preprocessor.fit(samples)
    fm = pre.transform(samples)
    latest = latest_per_pipe(samples)
    audits, lr_curves = {}, None
    for name in models:
        cfg = (configs or {}).get(name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = fit_model(name, fm, None, cfg, seed=seed)
        curves = simulate_curves(model, latest, pre, horizon, name)
        audits[name] = audit_curves(curves, model=name)
        if name == "lr":
            lr_curves = curves
    scenarios = []
    if lr_curves is not None:
        actual = {s.pipe_id: int(s.age) for s in latest}
        scenarios = compare_scenarios(lr_curves, thresholds, actual)
    return StepStudy(audits, scenarios)
