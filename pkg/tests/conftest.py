import warnings

import numpy as np
import pytest

from darksoliton.black import minimize_odd
from darksoliton.gray import continue_family
from darksoliton.kernels import KernelSpec, build_kernel, contact_kernel
from darksoliton.spectral import Grid

_CACHE = {}


@pytest.fixture(scope="session")
def grid():
    return Grid(40.0, 4096)


def gray_chain(family, c, lambdas, grid=None, **params):
    """Cached continuation results keyed by (family, c, lambdas, params, grid)."""
    grid = grid or Grid()
    key = ("gray", family, c, tuple(lambdas), tuple(sorted(params.items())), grid)
    if key not in _CACHE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _CACHE[key] = continue_family(KernelSpec(family, {"lambda": 1.0, **params}), c, lambdas, grid=grid)
    return _CACHE[key]


def black_solution(family, lam, grid=None, **params):
    grid = grid or Grid()
    key = ("black", family, lam, tuple(sorted(params.items())), grid)
    if key not in _CACHE:
        kernel = contact_kernel() if family == "contact" else build_kernel(KernelSpec(family, {"lambda": lam, **params}))
        _CACHE[key] = (kernel,) + minimize_odd(kernel, grid)
    return _CACHE[key]


def random_even(rng, grid, scale=1.0):
    """Smooth, decaying, even random field."""
    x = grid.x
    coeffs = rng.normal(size=4)
    widths = rng.uniform(0.5, 3.0, size=4)
    return scale * sum(a * np.exp(-(x / w) ** 2) for a, w in zip(coeffs, widths))


ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
