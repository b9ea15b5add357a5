"""Gray solitons, 0 < c < sqrt(2).

The unknown is the even profile ``eta = 1 - |u|^2``, a zero of

    G_c(eta) = eta'' - 2 W*eta + c^2 eta + F(eta),
    F(eta)   = c^2 eta^2 / (2(1-eta)) + eta'^2 / (2(1-eta)) + 2 eta (W*eta).

Equivalently ``eta = L_c * F(eta)``.  Two solvers are provided: a damped,
Petviashvili-stabilised fixed-point iteration on the convolution form and a
Newton method whose linear systems are solved by GMRES preconditioned with L_c.
The wave is rebuilt as ``u = sqrt(1-eta) e^{i theta}``,
``theta(x) = (c/2) int_0^x eta/(1-eta) - pi/2``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from . import spectral as sp
from .errors import (
    BoxTooSmallWarning,
    ChainBrokenError,
    CollapseToZeroError,
    EtaTouchesOneError,
    InvalidParameterError,
    LinearSolveStagnationError,
    NoConvergenceError,
    SolverError,
)
from .kernels import SONIC_SPEED, Kernel, KernelSpec, build_kernel, contact_kernel
from .spectral import Field, Grid

log = logging.getLogger(__name__)

ETA_CEILING = 1 - 1e-8
COLLAPSE_LEVEL = 1e-10
BOX_TAIL_LEVEL = 1e-8


@dataclass
class SolverOptions:
    method: str = "newton"
    damping: float = 0.5
    tol: float = 1e-9
    max_iter: Optional[int] = None
    fallback: bool = True

    def __post_init__(self):
        if self.method not in ("newton", "fixed_point"):
            raise InvalidParameterError(f"unknown method {self.method!r}")
        if not 0 < self.damping <= 1:
            raise InvalidParameterError("damping must lie in (0, 1]")
        if self.tol <= 0:
            raise InvalidParameterError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")

    def iterations_for(self, method: str) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return 60 if method == "newton" else 5000


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_sup: float
    eta_max: float
    first_integral_defect: float = float("nan")
    method: str = ""
    status: str = ""
    step_norm: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GrayProfile:
    c: float
    eta: Field
    theta: Field
    u_re: Field
    u_im: Field

    @property
    def grid(self) -> Grid:
        return self.eta.grid

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def u(self) -> np.ndarray:
        return self.u_re.values + 1j * self.u_im.values


# -- explicit local solitons ----------------------------------------------------

def local_eta(x, c: float):
    k = math.sqrt(max(2 - c**2, 0.0))
    return (1 - c**2 / 2) / np.cosh(k * np.asarray(x) / 2) ** 2


def local_theta(x, c: float):
    k = math.sqrt(max(2 - c**2, 0.0))
    return np.arctan(k / c * np.tanh(k * np.asarray(x) / 2)) - math.pi / 2


def local_u(x, c: float):
    k = math.sqrt(max(2 - c**2, 0.0))
    return k / math.sqrt(2) * np.tanh(k * np.asarray(x) / 2) - 1j * c / math.sqrt(2)


def explicit_local_profile(c: float, grid: Grid) -> GrayProfile:
    """Closed-form dark soliton of the contact (delta_0) equation."""
    if not 0 < c:
        raise InvalidParameterError("explicit gray profile needs c > 0")
    if c >= SONIC_SPEED:
        zero = grid.field(np.zeros(grid.n))
        return GrayProfile(c, zero, grid.field(np.full(grid.n, -math.pi / 2)), zero,
                           grid.field(-np.ones(grid.n)))
    x = grid.x
    u = local_u(x, c)
    return GrayProfile(c, grid.field(local_eta(x, c)), grid.field(local_theta(x, c)),
                       grid.field(u.real), grid.field(u.imag))


# -- the profile operator -------------------------------------------------------

def _check_eta(eta: np.ndarray):
    top = float(np.max(eta))
    if top >= ETA_CEILING:
        raise EtaTouchesOneError(f"max eta = {top:.12f} reaches 1")


def _f_array(kernel, c, eta, grid, d1=None, w_eta=None):
    _check_eta(eta)
    if d1 is None:
        d1 = sp.derivative_array(eta, grid, 1)
    if w_eta is None:
        w_eta = sp.convolve_array(kernel, eta, grid, warn=False)
    one_minus = 1 - eta
    return (c**2 * eta**2 + d1**2) / (2 * one_minus) + 2 * eta * w_eta


def _residual_array(kernel, c, eta, grid):
    _check_eta(eta)
    d1 = sp.derivative_array(eta, grid, 1)
    d2 = sp.derivative_array(eta, grid, 2)
    w_eta = sp.convolve_array(kernel, eta, grid, warn=False)
    return d2 - 2 * w_eta + c**2 * eta + _f_array(kernel, c, eta, grid, d1, w_eta)


def nonlinear_rhs(kernel: Kernel, c: float, eta: Field) -> Field:
    return Field(eta.grid, _f_array(kernel, c, eta.values, eta.grid))


def residual(kernel: Kernel, c: float, eta: Field) -> Field:
    """``G_c(eta)``; zero exactly at profiles of traveling waves."""
    return Field(eta.grid, _residual_array(kernel, c, eta.values, eta.grid))


def _atoms_only(kernel: Kernel) -> Kernel:
    return Kernel(kernel.spec, atoms=kernel.atoms)


def _jacobian(kernel, c, eta, grid):
    """Closure applying the Frechet derivative of G_c at eta."""
    _check_eta(eta)
    d1 = sp.derivative_array(eta, grid, 1)
    w_eta = sp.convolve_array(kernel, eta, grid, warn=False)
    one_minus = 1 - eta
    coef0 = c**2 + (c**2 * eta * (2 - eta) + d1**2) / (2 * one_minus**2) + 2 * w_eta
    coef1 = d1 / one_minus

    def apply(sigma):
        w_sig = sp.convolve_array(kernel, sigma, grid, warn=False)
        return (sp.derivative_array(sigma, grid, 2) - 2 * w_sig + coef0 * sigma
                + coef1 * sp.derivative_array(sigma, grid, 1) + 2 * eta * w_sig)

    return apply


def linearized_apply(kernel: Kernel, c: float, eta: Field, lam_atoms_only: bool, sigma: Field) -> Field:
    """Derivative of G_c at eta applied to sigma.

    With ``lam_atoms_only`` the density part of the kernel is dropped, which
    for the families here is the lambda -> 0 operator when the atoms do not
    depend on lambda.
    """
    k = _atoms_only(kernel) if lam_atoms_only else kernel
    return Field(eta.grid, _jacobian(k, c, eta.values, eta.grid)(sigma.values))


# -- phase reconstruction and first integral ------------------------------------

def _phase_arrays(eta, c, grid):
    if np.max(eta) >= 1:
        raise EtaTouchesOneError("cannot lift a profile with eta >= 1")
    theta = 0.5 * c * sp.antiderivative_array(eta / (1 - eta), grid) - math.pi / 2
    modulus = np.sqrt(1 - eta)
    return theta, modulus * np.cos(theta), modulus * np.sin(theta)


def reconstruct_phase(eta: Field, c: float):
    theta, ure, uim = _phase_arrays(eta.values, c, eta.grid)
    g = eta.grid
    return g.field(theta), g.field(ure), g.field(uim)


def make_gray_profile(eta: Field, c: float) -> GrayProfile:
    theta, ure, uim = reconstruct_phase(eta, c)
    return GrayProfile(c, eta, theta, ure, uim)


def wave_derivative(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral u' for a wave whose two ends differ by a constant phase."""
    return sp.derivative_array(u, grid, 1, twist=sp.phase_twist(u, grid))


def first_integral_defect(profile: GrayProfile) -> float:
    """``sup |c^2 eta^2 + eta'^2 - 4 |u'|^2 (1 - eta)|`` with u' taken from u itself."""
    grid = profile.grid
    eta = profile.eta.values
    d1 = sp.derivative_array(eta, grid, 1)
    du = wave_derivative(profile.u, grid)
    defect = profile.c**2 * eta**2 + d1**2 - 4 * np.abs(du) ** 2 * (1 - eta)
    return float(np.max(np.abs(defect)))


# -- solvers --------------------------------------------------------------------

def _prepare(kernel, c, init: Field):
    if not 0 < c < SONIC_SPEED:
        raise InvalidParameterError(f"speed {c} outside (0, sqrt 2)")
    grid = init.grid
    sp.check_lc_admissible(kernel, c, grid)
    eta = sp.symmetrize_even(init.values, grid)
    _check_eta(eta)
    return grid, eta


def _finish(kernel, c, eta, grid, iterations, method, status, step_norm=float("nan")):
    res = float(np.max(np.abs(_residual_array(kernel, c, eta, grid)))) if np.max(eta) < ETA_CEILING else float("inf")
    profile = make_gray_profile(grid.field(eta), c)
    report = SolveReport(
        converged=status == "converged",
        iterations=iterations,
        residual_sup=res,
        eta_max=float(np.max(eta)),
        first_integral_defect=first_integral_defect(profile),
        method=method,
        status=status,
        step_norm=step_norm,
    )
    if status == "converged" and max(abs(eta[0]), abs(eta[-1])) > BOX_TAIL_LEVEL:
        warnings.warn(f"eta(+-L) = {abs(eta[0]):.2e}: box too small for c = {c}", BoxTooSmallWarning,
                      stacklevel=3)
    return profile, report


def _inner(a, b, grid):
    return grid.h * float(np.dot(a, b))


def solve_fixed_point(kernel: Kernel, c: float, init: Field, opts: SolverOptions | None = None):
    """Damped iteration ``eta <- (1-d) eta + d S^2 L_c*F(eta)``.

    ``S = <eta, L_c^{-1} eta> / <eta, F(eta)>`` equals 1 at a solution; without
    it the iteration is unstable along the amplitude direction because F is
    quadratic.  The damping d is halved (at most 6 times) whenever a step
    would increase the residual.
    """
    opts = opts or SolverOptions(method="fixed_point")
    grid, eta = _prepare(kernel, c, init)
    max_iter = opts.iterations_for("fixed_point")
    res = float(np.max(np.abs(_residual_array(kernel, c, eta, grid))))
    it = 0
    while True:
        if np.max(np.abs(eta)) < COLLAPSE_LEVEL:
            profile, report = _finish(kernel, c, np.zeros(grid.n), grid, it, "fixed_point", "collapse-to-zero")
            raise CollapseToZeroError("iteration collapsed onto the trivial solution", profile, report)
        if res < opts.tol:
            return _finish(kernel, c, eta, grid, it, "fixed_point", "converged")
        if it >= max_iter:
            profile, report = _finish(kernel, c, eta, grid, it, "fixed_point", "no-convergence")
            raise NoConvergenceError(f"fixed point: residual {res:.3e} after {it} iterations", profile, report)
        it += 1
        f_eta = _f_array(kernel, c, eta, grid)
        target = sp.apply_lc_array(kernel, c, f_eta, grid)
        num = _inner(eta, sp.apply_lc_inverse_array(kernel, c, eta, grid), grid)
        den = _inner(eta, f_eta, grid)
        scale = (num / den) ** 2 if num > 0 and den > 0 else 1.0
        target = sp.symmetrize_even(scale * target, grid)
        d = opts.damping
        best = None
        for _ in range(7):
            cand = (1 - d) * eta + d * target
            try:
                r_c = float(np.max(np.abs(_residual_array(kernel, c, cand, grid))))
            except EtaTouchesOneError:
                r_c = float("inf")
            if best is None or r_c < best[1]:
                best = (cand, r_c)
            if r_c <= res:
                break
            d /= 2
        if not np.isfinite(best[1]):
            profile, report = _finish(kernel, c, eta, grid, it, "fixed_point", "eta-touches-one")
            raise EtaTouchesOneError("fixed-point iterate reaches eta = 1")
        eta, res = best


def _newton_direction(jac, kernel, c, g, grid, rtol):
    n = grid.n

    def precondition(y):
        return -sp.apply_lc_array(kernel, c, y, grid)

    def matvec(y):
        ye = sp.symmetrize_even(y, grid)
        out = sp.symmetrize_even(jac(precondition(ye)), grid)
        return out + (y - ye)

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    y, info = gmres(op, -g, rtol=rtol, atol=0.0, restart=120, maxiter=20)
    achieved = np.linalg.norm(matvec(y) + g) / max(np.linalg.norm(g), 1e-300)
    return sp.symmetrize_even(precondition(y), grid), info, achieved


def solve_newton(kernel: Kernel, c: float, init: Field, opts: SolverOptions | None = None):
    """Newton iteration on even profiles; each step solves ``DG_c(eta) sigma = -G_c(eta)``."""
    opts = opts or SolverOptions()
    grid, eta = _prepare(kernel, c, init)
    max_iter = opts.iterations_for("newton")
    g = _residual_array(kernel, c, eta, grid)
    res = float(np.max(np.abs(g)))
    step_norm = 0.0
    it = 0
    while res >= opts.tol:
        if it >= max_iter:
            profile, report = _finish(kernel, c, eta, grid, it, "newton", "no-convergence", step_norm)
            raise NoConvergenceError(f"newton: residual {res:.3e} after {it} steps", profile, report)
        if np.max(np.abs(eta)) < COLLAPSE_LEVEL:
            profile, report = _finish(kernel, c, eta, grid, it, "newton", "collapse-to-zero")
            raise CollapseToZeroError("newton iterate collapsed onto the trivial solution", profile, report)
        it += 1
        jac = _jacobian(kernel, c, eta, grid)
        sigma, info, achieved = _newton_direction(jac, kernel, c, g, grid, rtol=min(1e-4, max(res, 1e-13)))
        if achieved > 0.5:
            profile, report = _finish(kernel, c, eta, grid, it, "newton", "linear-solve-stagnation", step_norm)
            raise LinearSolveStagnationError(f"GMRES stalled at relative residual {achieved:.2e}", profile, report)
        t = 1.0
        while True:
            trial = eta + t * sigma
            try:
                g_trial = _residual_array(kernel, c, trial, grid)
                r_trial = float(np.max(np.abs(g_trial)))
            except EtaTouchesOneError:
                r_trial = float("inf")
            if r_trial < res or t < 1 / 64:
                break
            t /= 2
        if not np.isfinite(r_trial):
            profile, report = _finish(kernel, c, eta, grid, it, "newton", "eta-touches-one", step_norm)
            raise EtaTouchesOneError("newton step reaches eta = 1")
        step_norm = float(np.max(np.abs(t * sigma)))
        eta, g, res = sp.symmetrize_even(trial, grid), g_trial, r_trial
        log.debug("newton step %d: residual %.3e, step %.3e", it, res, step_norm)
    return _finish(kernel, c, eta, grid, it, "newton", "converged", step_norm)


def solve_gray(kernel: Kernel, c: float, init: Field, opts: SolverOptions | None = None):
    """Run the configured method, falling back to the other one on failure."""
    opts = opts or SolverOptions()
    first = solve_newton if opts.method == "newton" else solve_fixed_point
    second = solve_fixed_point if opts.method == "newton" else solve_newton
    try:
        return first(kernel, c, init, opts)
    except (SolverError, EtaTouchesOneError) as exc:
        if not opts.fallback:
            raise
        log.info("%s failed (%s); trying fallback", first.__name__, exc)
        return second(kernel, c, init, opts)


# -- continuation ---------------------------------------------------------------

def kernel_at(spec: KernelSpec, lam: float) -> Kernel:
    """Family member at nonlocality lam; lam = 0 is the contact kernel."""
    if lam == 0:
        return contact_kernel()
    return build_kernel(spec.with_lambda(lam))


@dataclass
class _Step:
    lam: float
    profile: GrayProfile
    report: SolveReport = field(default=None)


def _march(spec, c, start: _Step, lam_to, opts, depth, max_depth):
    kernel = kernel_at(spec, lam_to)
    try:
        profile, report = solve_gray(kernel, c, start.profile.eta, opts)
        return _Step(lam_to, profile, report)
    except (SolverError, EtaTouchesOneError, sp.MultiplierSingularError) as exc:
        if depth >= max_depth or isinstance(exc, sp.MultiplierSingularError):
            raise
        mid = 0.5 * (start.lam + lam_to)
        log.info("continuation: refining step %.6g -> %.6g at %.6g", start.lam, lam_to, mid)
        half = _march(spec, c, start, mid, opts, depth + 1, max_depth)
        return _march(spec, c, half, lam_to, opts, depth + 1, max_depth)


def continue_family(spec: KernelSpec, c: float, lambda_targets, opts: SolverOptions | None = None,
                    grid: Grid | None = None, max_refinements: int = 6):
    """Warm-started solve chain along lambda, starting from the explicit local soliton.

    Targets are visited by increasing |lambda|; failed steps are bisected up to
    ``max_refinements`` times before the chain is declared broken.
    """
    grid = grid or Grid()
    opts = opts or SolverOptions()
    targets = sorted(lambda_targets, key=abs)
    current = _Step(0.0, explicit_local_profile(c, grid))
    results = []
    for lam in targets:
        if lam == 0:
            prof = explicit_local_profile(c, grid)
            _, rep = _finish(contact_kernel(), c, prof.eta.values, grid, 0, "explicit", "converged")
            current = _Step(0.0, prof, rep)
        else:
            try:
                current = _march(spec, c, current, lam, opts, 0, max_refinements)
            except (SolverError, EtaTouchesOneError, sp.MultiplierSingularError) as exc:
                raise ChainBrokenError(f"continuation broke at lambda = {lam}: {exc}", results, lam, exc) from exc
        results.append((current.lam, current.profile, current.report))
    return results
