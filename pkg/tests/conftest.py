import numpy as np
import pytest

from gamechain.model import DiffusionModel, InnovationLaw, constant_drift, constant_sigma


def const_model(s=1.0, b=0.0, L=None, x0=0.0, dim=1):
    sig = np.atleast_2d(np.asarray(s, dtype=float)) if dim > 1 else [[float(s)]]
    drift = np.atleast_1d(np.asarray(b, dtype=float)) if dim > 1 else [float(b)]
    if L is None:
        L = max(1.0, float(np.linalg.norm(sig)), float(np.linalg.norm(drift)))
    return DiffusionModel(dim, constant_sigma(sig), constant_drift(drift), L,
                          np.full(dim, x0) if np.ndim(x0) == 0 else x0)


def func_model(sig_fn, drift_fn=None, L=1.0, x0=0.0):
    """1-d model from scalar callables."""
    def sigma(x):
        return np.asarray(sig_fn(x[..., 0]), dtype=float)[..., None, None] * np.ones(x.shape[:-1] + (1, 1))

    def drift(x):
        if drift_fn is None:
            return np.zeros_like(x)
        return np.asarray(drift_fn(x[..., 0]), dtype=float)[..., None] * np.ones_like(x)

    return DiffusionModel(1, sigma, drift, L, [x0])


@pytest.fixture
def rademacher():
    return InnovationLaw.rademacher(1)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def record_acceptance(number: int, passed: bool, detail: str):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
