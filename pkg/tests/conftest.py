import numpy as np
import pytest

from irregular_har import autodiff as ad
from irregular_har.core import from_regular_grid


def numeric_grad(fn, arrays, step=1e-4):
    """Central differences of scalar ``fn()`` w.r.t. each array (modified in place)."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = arr[i]
            arr[i] = old + step
            up = fn()
            arr[i] = old - step
            down = fn()
            arr[i] = old
            g[i] = (up - down) / (2 * step)
        grads.append(g)
    return grads


def rel_error(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def check_gradients(build_loss, leaves, step=1e-4):
    """Compare tape gradients of ``build_loss(tensors)`` with central differences.

    ``leaves`` is a list of numpy arrays; returns the worst relative error.
    """
    tensors = [ad.Tensor(a, requires_grad=True) for a in leaves]
    loss = build_loss(tensors)
    ad.backward(loss)
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    def value():
        return float(build_loss([ad.Tensor(a) for a in leaves]).data)

    numeric = numeric_grad(value, leaves, step)
    return max(rel_error(a, n) for a, n in zip(analytic, numeric))


@pytest.fixture
def regular_series():
    rng = np.random.default_rng(3)
    n = 500
    values = rng.normal(size=(n, 2))
    labels = np.repeat(np.arange(5), n // 5)
    return from_regular_grid(0.0, 0.02, values, labels)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
