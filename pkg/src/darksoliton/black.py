"""Black solitons (c = 0) as odd energy minimizers.

A black soliton is real and odd with ``u(+-L) = +-1``.  On the periodic grid
such a field is antiperiodic, ``u(x + 2L) = -u(x)``, so derivatives use the
twisted FFT from :mod:`spectral` while ``eta = 1 - u^2`` stays periodic.

The free unknowns are the samples on ``0 < x < L``; the negative half is the
mirror image, ``u(0) = 0`` and the node at ``x = -L`` is clamped to -1.
Descent runs L-BFGS in variables smoothed by ``(1 - d^2/dx^2)^{-1/2}`` (a
diagonal scaling in the sine basis), then a Newton-GMRES polish if needed.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import dst
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, gmres

from . import spectral as sp
from .errors import HypothesisWarning, InvalidParameterError, NoConvergenceError, NonDescentError
from .gray import SolveReport, wave_derivative
from .kernels import Kernel, check_hypotheses
from .spectral import Field, Grid

log = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-6
ODD_TOL = 1e-10
# round-off allowance when checking that energies never increase
ENERGY_SLACK = 1e-12


@dataclass
class BlackOptions:
    tol: float = 1e-9
    max_iter: int = 4000
    polish_steps: int = 20

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise InvalidParameterError("tol must be positive and max_iter >= 1")


@dataclass
class BlackProfile:
    u: Field

    c = 0.0

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def x(self):
        return self.grid.x

    @property
    def eta(self) -> Field:
        return Field(self.grid, 1 - self.u.values**2)


def explicit_black_profile(grid: Grid) -> BlackProfile:
    return BlackProfile(grid.field(np.tanh(grid.x / math.sqrt(2))))


# -- functional -----------------------------------------------------------------

def _energy_array(kernel, u, grid):
    du = wave_derivative(u, grid)
    eta = 1 - u**2
    w_eta = sp.convolve_array(kernel, eta, grid, warn=False)
    return 0.5 * sp.integrate_array(du**2, grid) + 0.25 * sp.integrate_array(w_eta * eta, grid)


def _gradient_array(kernel, u, grid):
    d2 = sp.derivative_array(u, grid, 2, twist=sp.phase_twist(u, grid))
    w_eta = sp.convolve_array(kernel, 1 - u**2, grid, warn=False)
    g = -d2 - u * w_eta
    g[0] = 0.0
    return g


def energy(kernel: Kernel, u: Field) -> float:
    """``1/2 int u'^2 + 1/4 int (W * eta) eta`` for real u."""
    return _energy_array(kernel, u.values, u.grid)


def energy_gradient(kernel: Kernel, u: Field) -> Field:
    """``-u'' - u (W * (1 - u^2))`` with the clamped node at x = -L zeroed."""
    return Field(u.grid, _gradient_array(kernel, u.values, u.grid))


# -- odd parametrisation ----------------------------------------------------------

class _OddCoordinates:
    """Maps half-line coefficients p to odd perturbations vanishing at 0 and +-L."""

    def __init__(self, grid: Grid):
        self.grid = grid
        n = grid.n
        self.idx = np.arange(n // 2 + 1, n)
        self.mirror = n - self.idx
        k = np.pi * np.arange(1, n // 2) / grid.L
        self.scale = 1 / np.sqrt(1 + k**2)

    def smooth(self, q, power=1):
        return dst(self.scale**power * dst(q, type=1, norm="ortho"), type=1, norm="ortho")

    def expand(self, q):
        v = np.zeros(self.grid.n)
        v[self.idx] = q
        v[self.mirror] = -q
        return v

    def restrict(self, g):
        """Adjoint of ``expand`` for the h-weighted inner product."""
        return self.grid.h * (g[self.idx] - g[self.mirror])


def _validate_init(u: np.ndarray, grid: Grid) -> np.ndarray:
    if abs(u[0] + 1) > BOUNDARY_TOL:
        raise InvalidParameterError(f"init must satisfy u(-L) = -1, got {u[0]:.6g}")
    rest = u[1:]
    if np.max(np.abs(rest + rest[::-1])) > BOUNDARY_TOL:
        raise InvalidParameterError("init must be odd")
    if np.max(u[grid.n // 2 + 1:]) <= 0:
        raise InvalidParameterError("init must be positive on x > 0")
    u = u.copy()
    u[0] = -1.0
    u[1:] = 0.5 * (rest - rest[::-1])
    return u


def _hessian(kernel, u, grid):
    w_eta = sp.convolve_array(kernel, 1 - u**2, grid, warn=False)

    def apply(v):
        # perturbations vanish at +-L, so the plain periodic derivative applies
        return (-sp.derivative_array(v, grid, 2) - v * w_eta
                + 2 * u * sp.convolve_array(kernel, u * v, grid, warn=False))

    return apply


def _polish(kernel, u, grid, coords, opts, energies):
    g = _gradient_array(kernel, u, grid)
    res = float(np.max(np.abs(g)))
    steps = 0
    n_half = coords.idx.size
    while res >= opts.tol and steps < opts.polish_steps:
        steps += 1
        hess = _hessian(kernel, u, grid)

        def matvec(p):
            q = coords.smooth(p, 2)
            return coords.smooth(coords.restrict(hess(coords.expand(q))), 0) / grid.h / 2

        op = LinearOperator((n_half, n_half), matvec=matvec, dtype=float)
        rhs = -coords.restrict(g) / grid.h / 2
        p, _ = gmres(op, rhs, rtol=1e-10, atol=0.0, restart=120, maxiter=20)
        step = coords.expand(coords.smooth(p, 2))
        t = 1.0
        while True:
            trial = u + t * step
            e1 = _energy_array(kernel, trial, grid)
            g1 = _gradient_array(kernel, trial, grid)
            r1 = float(np.max(np.abs(g1)))
            if r1 < res or t < 1 / 64:
                break
            t /= 2
        if r1 >= res:
            break
        energies.append(e1)
        u, g, res = trial, g1, r1
    return u, res, steps


def minimize_odd(kernel: Kernel, grid: Grid, init: Field | None = None, opts: BlackOptions | None = None):
    """Minimize the energy over odd real profiles with ``u(+-L) = +-1``.

    Returns ``(BlackProfile, SolveReport)``; ``report.residual_sup`` is the
    sup norm of ``u'' + u (W * (1 - u^2))``.  Kernels failing (H5) get a
    ``HypothesisWarning``; the descent still runs and reports what it finds.
    """
    opts = opts or BlackOptions()
    if not check_hypotheses(kernel, 0.0).flags["H5"]:
        warnings.warn(f"{kernel!r} fails (H5); a minimizer may not exist", HypothesisWarning, stacklevel=2)
    if init is None:
        candidates = [_descend(kernel, grid, grid.field(np.tanh(grid.x)), opts)]
        if kernel.family == "vanderwaals" and kernel.spec.lam < 0:
            # attractive part: a second basin is worth a look
            bumped = np.tanh(grid.x) * (1 + 0.1 * np.exp(-grid.x**2 / 4))
            candidates.append(_descend(kernel, grid, grid.field(bumped), opts))
        return min(candidates, key=lambda pr: energy(kernel, pr[0].u))
    return _descend(kernel, grid, init, opts)


def _descend(kernel, grid, init, opts):
    if init.grid != grid:
        raise InvalidParameterError("init lives on a different grid")
    u_ref = _validate_init(init.values, grid)
    coords = _OddCoordinates(grid)
    energies = [_energy_array(kernel, u_ref, grid)]
    scale = 2 * grid.h

    def fun(p):
        u = u_ref + coords.expand(coords.smooth(p))
        e = _energy_array(kernel, u, grid)
        g = _gradient_array(kernel, u, grid)
        return e / scale, coords.smooth(coords.restrict(g)) / scale

    def track(p):
        energies.append(fun(p)[0] * scale)

    p0 = np.zeros(coords.idx.size)
    result = minimize(fun, p0, jac=True, method="L-BFGS-B", callback=track,
                      options={"maxiter": opts.max_iter, "maxcor": 30, "gtol": opts.tol * 1e-3,
                               "ftol": 1e-300, "maxls": 40})
    u = u_ref + coords.expand(coords.smooth(result.x))
    res = float(np.max(np.abs(_gradient_array(kernel, u, grid))))
    polish = 0
    if res >= opts.tol:
        log.info("L-BFGS stopped at residual %.3e (%s); polishing", res, result.message)
        u, res, polish = _polish(kernel, u, grid, coords, opts, energies)
    if any(b > a + ENERGY_SLACK * max(1.0, abs(a)) for a, b in zip(energies, energies[1:])):
        raise NonDescentError("energy increased along accepted iterates",
                              BlackProfile(grid.field(u)), None)
    profile = BlackProfile(grid.field(u))
    status = "converged" if res < opts.tol else "no-convergence"
    report = SolveReport(
        converged=status == "converged",
        iterations=int(result.nit) + polish,
        residual_sup=res,
        eta_max=float(np.max(1 - u**2)),
        method="lbfgs" + ("+newton" if polish else ""),
        status=status,
    )
    if status != "converged":
        raise NoConvergenceError(f"odd minimization: residual {res:.3e}", profile, report)
    return profile, report
