import pytest

from sewerdeg.data_model import Preprocessor, clean_dataset
from sewerdeg.synthetic import GroundTruth, generate_dataset

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"AC{k:02d} {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def small_dataset():
    """~600 cleaned samples from the logistic law."""
    pipes, insp, graph, gt = generate_dataset(600, 11)
    samples, log = clean_dataset(pipes, insp)
    return pipes, samples, graph, gt


@pytest.fixture(scope="session")
def small_matrix(small_dataset):
    _, samples, _, _ = small_dataset
    pre = Preprocessor.fit(samples)
    return pre, pre.transform(samples)


@pytest.fixture(scope="session")
def step_samples():
    pipes, insp, _, _ = generate_dataset(400, 5, 1, GroundTruth(seed=5, kind="step"))
    samples, _ = clean_dataset(pipes, insp)
    return samples
