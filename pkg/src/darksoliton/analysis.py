"""Diagnostics for computed solitons and kernel-level threshold formulas."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize

from . import spectral as sp
from .black import BlackProfile
from .errors import (
    InvalidParameterError,
    MismatchedLengthsError,
    MomentumUndefinedError,
    TauTooLargeError,
    UnavailableTransformError,
)
from .gray import GrayProfile, first_integral_defect, local_eta, local_u, wave_derivative
from .kernels import (
    SONIC_SPEED,
    Kernel,
    KernelSpec,
    _closed_form_m,
    _mu_norms,
    _tau_sigma,
    build_kernel,
    laplace_transform,
)

__all__ = [
    "DiagnosticsReport",
    "OscillationReport",
    "ThresholdReport",
    "conserved_quantities",
    "momentum",
    "first_integral_defect",
    "apriori_bounds",
    "oscillation_scan",
    "oscillation_predicate",
    "boundary_root",
    "thresholds",
    "local_limit_sweep",
]

MODULUS_FLOOR = 1e-6
TRIVIAL_LEVEL = 1e-10
BOUND_SLACK = 1e-8
SIGN_NOISE = 1e-6
ROOT_TOL = 1e-9


# -- conserved quantities -------------------------------------------------------

@dataclass
class DiagnosticsReport:
    energy: float
    momentum: Optional[float]
    mass: float
    first_integral_defect: Optional[float]
    eta_integral_sign_ok: Optional[bool]
    apriori_bound_ok: Optional[bool]
    c: float = 0.0
    u_sup_sq: float = float("nan")
    apriori_bound: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _wave(profile):
    if isinstance(profile, BlackProfile):
        return profile.u.values.astype(complex)
    return profile.u


def momentum(profile) -> float:
    """Renormalised momentum ``int <i u', u> (1 - 1/|u|^2)``.

    Undefined for black profiles and whenever ``min |u| <= 1e-6``.
    """
    if isinstance(profile, BlackProfile):
        raise MomentumUndefinedError("momentum is undefined for a black soliton (u vanishes)")
    u = profile.u
    modulus = np.abs(u)
    if np.min(modulus) <= MODULUS_FLOOR:
        raise MomentumUndefinedError(f"min |u| = {np.min(modulus):.2e} is too small for the momentum")
    du = wave_derivative(u, profile.grid)
    # <i u', u> = Re(i u' conj(u))
    density = -np.imag(du * np.conj(u)) * (1 - 1 / modulus**2)
    return sp.integrate_array(density, profile.grid)


def _symbol_nonnegative(kernel, grid):
    return bool(np.min(sp.discrete_symbol(kernel, grid)) >= 0)


def conserved_quantities(profile, kernel: Kernel) -> DiagnosticsReport:
    grid = profile.grid
    u = _wave(profile)
    eta = profile.eta.values
    du = wave_derivative(u, grid)
    w_eta = sp.convolve_array(kernel, eta, grid, warn=False)
    e = 0.5 * sp.integrate_array(np.abs(du) ** 2, grid) + 0.25 * sp.integrate_array(w_eta * eta, grid)
    mass = sp.integrate_array(eta, grid)
    c = float(getattr(profile, "c", 0.0))

    try:
        p = momentum(profile)
    except MomentumUndefinedError:
        p = None

    sign_ok = None
    if _symbol_nonnegative(kernel, grid):
        trivial = np.max(np.abs(eta)) < TRIVIAL_LEVEL
        sign_ok = bool(trivial or (2 - c**2) * mass > 0)

    sup_sq = float(np.max(np.abs(u) ** 2))
    bound_ok, bound = None, None
    try:
        bounds = [b for b in apriori_bounds(kernel, c) if b is not None]
    except TauTooLargeError:
        bounds = [b for b in apriori_bounds(kernel, c, strict=False) if b is not None]
    if bounds:
        bound = min(bounds)
        bound_ok = sup_sq <= bound + BOUND_SLACK

    fid = first_integral_defect(profile) if isinstance(profile, GrayProfile) else None
    return DiagnosticsReport(e, p, mass, fid, sign_ok, bound_ok, c, sup_sq, bound)


# -- a-priori bounds ------------------------------------------------------------

def apriori_bounds(kernel: Kernel, c: float, strict: bool = True):
    """``(M(c, mu), M(c, tau, sigma))``; None where the kernel has no such decomposition.

    ``M(c, tau, sigma)`` needs ``tau < pi / sqrt(8 + 2c^2)``; with ``strict``
    a violation raises TauTooLargeError, otherwise that entry is None.
    """
    if not 0 <= c < SONIC_SPEED:
        raise InvalidParameterError("speed must satisfy 0 <= c < sqrt(2)")
    factor = 1 + c**2 / 4
    m_mu = None
    mu = _mu_norms(kernel)
    if mu is not None and mu[1] < 1:
        m_mu = (1 + mu[0] / (1 - mu[1])) * factor
    m_ts = None
    ts = _tau_sigma(kernel)
    if ts is not None:
        tau, sigma = ts
        arg = tau * math.sqrt(8 + 2 * c**2) / 2
        if arg >= math.pi / 2:
            if strict:
                raise TauTooLargeError(f"tau = {tau} is not below pi/sqrt(8 + 2c^2)")
        else:
            m_ts = factor / (tau * sigma * math.cos(arg))
    return m_mu, m_ts


# -- oscillations ---------------------------------------------------------------

@dataclass
class OscillationReport:
    sign_changes_of_eta_prime: int
    oscillation_triples: list
    predicted_oscillatory: Optional[bool] = None
    threshold_lambda_tilde: Optional[float] = None
    eta_min: float = float("nan")
    eta_min_location: float = float("nan")
    u_nondecreasing: Optional[bool] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["oscillation_triples"] = [list(t) for t in self.oscillation_triples]
        return out


def _sign_runs(d, x):
    """Runs of constant strict sign of d beyond the noise floor: (sign, x at max |d|)."""
    floor = SIGN_NOISE * float(np.max(np.abs(d))) if d.size else 0.0
    runs = []
    if floor == 0.0:
        return runs
    for i in np.flatnonzero(np.abs(d) > floor):
        s = 1 if d[i] > 0 else -1
        if runs and runs[-1][0] == s:
            if abs(d[i]) > runs[-1][2]:
                runs[-1] = (s, x[i], abs(d[i]))
        else:
            runs.append((s, x[i], abs(d[i])))
    return runs


def oscillation_scan(profile, kernel: Kernel | None = None) -> OscillationReport:
    """Sign pattern of eta'; a triple x1 < x2 < x3 has eta' of alternating strict signs."""
    grid = profile.grid
    eta = profile.eta.values
    d = sp.derivative_array(eta, grid, 1)
    runs = _sign_runs(d, grid.x)
    changes = max(len(runs) - 1, 0)
    triples = [(float(runs[k][1]), float(runs[k + 1][1]), float(runs[k + 2][1])) for k in range(len(runs) - 2)]
    k_min = int(np.argmin(eta))
    report = OscillationReport(changes, triples, eta_min=float(eta[k_min]), eta_min_location=float(grid.x[k_min]))
    if isinstance(profile, BlackProfile):
        u = profile.u.values
        report.u_nondecreasing = bool(np.all(np.diff(u) >= -1e-12))
    if kernel is not None:
        c = float(getattr(profile, "c", 0.0))
        try:
            report.predicted_oscillatory = oscillation_predicate(kernel, c)[1]
        except UnavailableTransformError:
            report.predicted_oscillatory = None
        if kernel.family in ("gaussian", "nematic"):
            report.threshold_lambda_tilde = _lambda_tilde(kernel.family, c)[0]
    return report


def _predicate_sup(kernel, shift):
    """``sup_{s>=0} (s + shift)^2 - 2 W_check(s)``, with W_check = inf counted as -inf."""
    s = np.concatenate(([0.0], np.geomspace(1e-6, 1e3, 6000)))
    with np.errstate(over="ignore", invalid="ignore"):
        vals = (s + shift) ** 2 - 2 * laplace_transform(kernel, s)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < s.size - 1 and np.isfinite(best):
        def neg(t):
            with np.errstate(over="ignore"):
                v = (t + shift) ** 2 - 2 * laplace_transform(kernel, t)
            return -v if np.isfinite(v) else np.inf
        res = optimize.minimize_scalar(neg, bounds=(s[k - 1], s[k + 1]), method="bounded",
                                       options={"xatol": 1e-13})
        best = max(best, -float(res.fun))
    return best


def oscillation_predicate(kernel: Kernel, c: float):
    """(strict, strong): ``s^2 - 2 W_check + c^2 < 0`` resp. ``< -2cs`` for every s >= 0."""
    strict = _predicate_sup_strict(kernel, c) < 0
    strong = _predicate_sup(kernel, c) < 0
    return bool(strict), bool(strong)


def _predicate_sup_strict(kernel, c):
    # s^2 + c^2 - 2 W_check(s) = (s + 0)^2 - 2 W_check(s) + c^2
    return _predicate_sup(kernel, 0.0) + c**2


# -- thresholds -----------------------------------------------------------------

@dataclass
class ThresholdReport:
    family: str
    c: float
    lambda_c: Optional[float] = None
    lambda_tilde_c: Optional[float] = None
    lambda_c_beta: Optional[float] = None
    discriminant_root: Optional[complex] = None
    discriminant_class: Optional[str] = None
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        root = self.discriminant_root
        out["discriminant_root"] = None if root is None else {"re": root.real, "im": root.imag}
        return out


def boundary_root(coefficient: float, frequency: float) -> float:
    """First positive root of ``coefficient * lam^2 * sec(frequency * lam) = 1``."""
    if coefficient <= 0 or frequency <= 0:
        raise InvalidParameterError("coefficient and frequency must be positive")

    def f(lam):
        return coefficient * lam**2 / math.cos(frequency * lam) - 1

    hi = (math.pi / 2) / frequency * (1 - 1e-12)
    return optimize.brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _existence_coefficient(family, c):
    # m(lam) * M(c, tau, sigma) = lam^2 * coef * sec(lam sqrt(8 + 2c^2) / 2)
    tau_sigma = {"gaussian": 1 / (2 * math.exp(0.25) * math.sqrt(math.pi)), "nematic": 1 / (2 * math.e)}[family]
    return 2 * (1 + c**2 / 4) / tau_sigma, math.sqrt(8 + 2 * c**2) / 2


def _lambda_c(family, c):
    coef, freq = _existence_coefficient(family, c)
    root = boundary_root(coef, freq)
    # independent re-evaluation through the kernel's own constants
    kernel = build_kernel(KernelSpec(family, {"lambda": root}))
    m = _closed_form_m(kernel)
    m_ts = apriori_bounds(kernel, c)[1]
    return root, abs(m * m_ts - 1)


def _lambda_tilde(family, c):
    if family == "nematic":
        lt = 1 / math.sqrt(4 - c**2 + math.sqrt(8 * (2 - c**2)))
        kernel = build_kernel(KernelSpec("nematic", {"lambda": lt}))
        # this closed form is where the c^2 (not the (s + c)^2) inequality turns marginal
        return lt, abs(_predicate_sup_strict(kernel, c))
    else:
        def g(s):
            v = math.log((s + c) ** 2 / 2)
            return math.sqrt(max(v, 0.0)) / s

        lo = math.sqrt(2) - c
        s = np.geomspace(lo * (1 + 1e-9), lo + 200, 20000)
        vals = np.array([g(t) for t in s])
        k = int(np.argmax(vals))
        res = optimize.minimize_scalar(lambda t: -g(t), bounds=(s[max(k - 1, 0)], s[min(k + 1, s.size - 1)]),
                                       method="bounded", options={"xatol": 1e-12})
        lt = max(float(vals[k]), -float(res.fun))
        kernel = build_kernel(KernelSpec("gaussian", {"lambda": lt}))
    # at the threshold the (s + c)^2 inequality is marginal: sup equals 0
    return lt, abs(_predicate_sup(kernel, c))


def _vanderwaals(spec, c):
    beta = spec.beta
    candidates = [beta**3 / (4 + c**2)]
    if beta**2 < 2:
        candidates.append(beta**3 / (2 * (2 - beta**2)))
    lam_cb = -min(candidates)
    # re-evaluate: at lam_cb either m * M(c, mu) = 1 or m = 1
    kernel = build_kernel(KernelSpec("vanderwaals", {"lambda": lam_cb, "beta": beta}))
    m = _closed_form_m(kernel)
    m_mu = apriori_bounds(kernel, c)[0]
    defect = min(abs(m * m_mu - 1), abs(m - 1))

    lam = spec.lam
    a = beta / (beta - 2 * lam)
    b = beta**2 + 2 * a - c**2
    disc = b**2 - 4 * beta**2 * (2 * a - c**2) - 16 * beta * a * lam
    root = complex(b - np.sqrt(complex(disc)))
    if disc < 0:
        cls = "complex"
    elif root.real < 0:
        cls = "negative"
    else:
        cls = "positive-real"
    return lam_cb, defect, root, cls


def thresholds(spec: KernelSpec, c: float) -> ThresholdReport:
    """Existence and oscillation thresholds in lambda for the kernel family of ``spec``."""
    if isinstance(spec, str):
        spec = KernelSpec(spec)
    if not 0 <= c < SONIC_SPEED:
        raise InvalidParameterError("speed must satisfy 0 <= c < sqrt(2)")
    report = ThresholdReport(spec.family, c)
    if spec.family in ("gaussian", "nematic"):
        report.lambda_c, report.checks["lambda_c"] = _lambda_c(spec.family, c)
        report.lambda_tilde_c, report.checks["lambda_tilde_c"] = _lambda_tilde(spec.family, c)
    elif spec.family == "vanderwaals":
        lam_cb, defect, root, cls = _vanderwaals(spec, c)
        report.lambda_c_beta, report.checks["lambda_c_beta"] = lam_cb, defect
        report.discriminant_root, report.discriminant_class = root, cls
    report.checks["all_verified"] = all(v < ROOT_TOL for k, v in report.checks.items() if k != "all_verified")
    return report


# -- nonlocal-to-local distances ------------------------------------------------

def local_limit_sweep(spec, c: float, lambdas, profiles):
    """Windowed distances ``sup_{|x|<=L/2}`` of each profile to the explicit local soliton."""
    lambdas = list(lambdas)
    profiles = list(profiles)
    if len(lambdas) != len(profiles):
        raise MismatchedLengthsError(f"{len(lambdas)} lambdas but {len(profiles)} profiles")
    out = []
    for lam, prof in zip(lambdas, profiles):
        x = prof.grid.x
        window = np.abs(x) <= prof.grid.L / 2
        if c == 0:
            u = prof.u.values
            ref = np.tanh(x / math.sqrt(2))
            d_eta = np.max(np.abs((1 - u**2) - (1 - ref**2))[window])
            d_u = np.max(np.abs(u - ref)[window])
        else:
            d_eta = np.max(np.abs(prof.eta.values - local_eta(x, c))[window])
            d_u = np.max(np.abs(prof.u - local_u(x, c))[window])
        out.append({"lambda": lam, "distance_eta": float(d_eta), "distance_u": float(d_u)})
    return out
