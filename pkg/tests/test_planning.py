import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sewerdeg.degradation import DegradationCurve
from sewerdeg.errors import ValidationError
from sewerdeg.planning import (
    compare_scenarios,
    cumulative_inspections,
    predicted_failure_age,
    static_inspection_age,
    static_plan,
    write_cumulative_csv,
    write_histogram_csv,
)


def test_static_plan_examples():
    assert static_plan(2000, 2050) == [2000, 2010, 2025, 2040]
    assert static_plan(2000, 2000) == [2000]
    assert static_plan(2000, 2009) == [2000]
    with pytest.raises(ValidationError):
        static_plan(2000, 1999)


@given(st.integers(1900, 2100), st.integers(0, 200))
def test_static_plan_gaps(y, span):
    years = static_plan(y, y + span)
    gaps = np.diff(years)
    assert years[0] == y and years[-1] <= y + span
    if len(gaps):
        assert gaps[0] == 10 and np.all(gaps[1:] == 15)


def test_static_inspection_age():
    assert static_inspection_age(2000, 2000) == 0
    assert static_inspection_age(2000, 2010) == 10
    assert static_inspection_age(2000, 2011) == 25
    assert static_inspection_age(1990, 2021) == 40


def test_failure_age_examples():
    p = np.clip(np.linspace(0, 1, 101) + 0.235, 0, 1)  # crosses 0.5 between 26 and 27
    assert p[26] < 0.5 <= p[27]
    assert predicted_failure_age(p, 0.5) == 27
    assert predicted_failure_age(np.full(101, 0.2), 0.5) is None
    with pytest.raises(ValidationError):
        predicted_failure_age(p, 1.0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=80), st.floats(0.01, 0.99))
def test_failure_age_matches_scan(vals, tau):
    p = np.sort(vals)
    want = next((t for t, v in enumerate(p) if v >= tau), None)
    assert predicted_failure_age(p, tau) == want


def curve(pid, p):
    return DegradationCurve(pid, "lr", np.asarray(p, dtype=float))


def test_scenario_enumeration():
    ramp = np.linspace(0, 1, 11)  # P(t) = t/10
    curves = [curve("a", ramp), curve("b", ramp * 0.5), curve("c", np.full(11, 0.9))]
    actual = {"a": 4, "b": 8, "c": 0}
    r3, r5, r7 = compare_scenarios(curves, (0.7, 0.3, 0.5), actual)
    assert [r.threshold for r in (r3, r5, r7)] == [0.3, 0.5, 0.7]
    assert r3.failure_age == {"a": 3, "b": 6, "c": 0}
    assert r3.lateness == {"a": 1, "b": 2, "c": 0}
    assert r3.n_late == 2 and r3.late_fraction == pytest.approx(2 / 3)
    assert r5.failure_age == {"a": 5, "b": 10, "c": 0} and r5.n_late == 0
    assert r7.failure_age == {"a": 7, "b": None, "c": 0}
    assert r7.n_never_due == 1 and r7.never_due_fraction == pytest.approx(1 / 3)
    assert r7.late_fraction_of_due == 0.0


def test_on_time_means_not_late():
    ramp = np.linspace(0, 1, 11)
    r = compare_scenarios([curve("a", ramp)], (0.5,), {"a": 5})[0]
    assert r.late_fraction == 0.0


def test_unmatched_ids_listed():
    with pytest.raises(ValidationError, match="'b'") as err:
        compare_scenarios([curve("a", [0.1, 0.6])], (0.5,), {"b": 1})
    assert "'a'" in str(err.value)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_late_fraction_monotone_in_threshold(seed):
    rng = np.random.default_rng(seed)
    curves = [curve(f"p{i}", np.sort(rng.uniform(size=31))) for i in range(25)]
    actual = {c.pipe_id: int(rng.integers(0, 31)) for c in curves}
    reps = compare_scenarios(curves, (0.3, 0.5, 0.7), actual)
    fr = [r.late_fraction for r in reps]
    assert fr[0] >= fr[1] >= fr[2]
    for r in reps:
        for pid, fa in r.failure_age.items():
            lower = reps[0].failure_age[pid]
            assert fa is None or (lower is not None and lower <= fa)


def test_cumulative_and_csvs(tmp_path):
    ages = {"a": 0, "b": 2, "c": None}
    cnt, ln = cumulative_inspections(ages, 3, {"a": 1.0, "b": 3.0, "c": 6.0})
    assert cnt.tolist() == pytest.approx([1 / 3, 1 / 3, 2 / 3, 2 / 3])
    assert ln.tolist() == pytest.approx([0.1, 0.1, 0.4, 0.4])
    reps = compare_scenarios([curve("a", [0.1, 0.6, 0.9])], (0.5,), {"a": 2})
    write_cumulative_csv(tmp_path / "cum.csv", reps, 2, {"a": 5.0})
    write_histogram_csv(tmp_path / "hist.csv", reps)
    assert (tmp_path / "hist.csv").read_text().splitlines() == ["threshold,lateness,count", "0.5,1,1"]
    lines = (tmp_path / "cum.csv").read_text().splitlines()
    assert lines[0] == "scenario,age,pipes_fraction,length_fraction" and len(lines) == 1 + 2 * 3
