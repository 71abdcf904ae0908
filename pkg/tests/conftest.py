import numpy as np
import pytest

from stochtex import backend

_CRITERIA: dict[int, tuple[str, bool, str]] = {}

BACKENDS = ["python"] + (["cython"] if backend.compiled is not None else [])


@pytest.fixture(params=BACKENDS)
def impl(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def criterion():
    """Record an acceptance result; the terminal summary prints one line each."""

    def record(number: int, name: str, passed: bool, detail: str = "") -> None:
        _CRITERIA[number] = (name, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'} {name}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        name, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:2d}. {name}  ({detail})")


def latin_hypercube(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    """(k, n) uniforms, each row stratified into n cells and independently permuted.

    Unbiased like i.i.d. draws, with lower variance, so the i.i.d. standard
    error is a conservative bound for the mean.
    """
    out = np.empty((k, n))
    for i in range(k):
        out[i] = (rng.permutation(n) + rng.random(n)) / n
    return np.minimum(out, np.nextafter(1.0, 0.0))
