"""Interaction kernels: even finite measures split into atoms plus a density.

Each kernel carries closed-form Fourier transform ``W^(xi) = int e^{-ix xi} dW(x)``
and, where known, the two-sided Laplace transform ``W(s) = int e^{-sy} dW(y)``
(allowed to be infinite).  ``check_hypotheses`` certifies the structural
hypotheses (H0)-(H5) used by the existence and monotonicity results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import optimize

from .errors import InvalidParameterError, UnavailableTransformError

SONIC_SPEED = math.sqrt(2.0)

FAMILIES = ("contact", "gaussian", "nematic", "vanderwaals", "rectangular", "three_delta", "custom")

# log-spaced frequency grid used for global infima / suprema
XI_MIN, XI_MAX, XI_NODES = 1e-4, 1e3, 4096
FD_STEP = 1e-5


@dataclass(frozen=True)
class KernelSpec:
    """Family name plus named parameters (``lambda``, ``beta``)."""

    family: str
    params: Mapping[str, float] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping) -> "KernelSpec":
        data = dict(data)
        family = data.pop("family", None)
        if family is None:
            raise InvalidParameterError("kernel config needs a 'family' key")
        params = dict(data.pop("params", {}) or {})
        for key in ("lambda", "beta", "atoms"):
            if key in data and data[key] is not None:
                params[key] = data.pop(key)
        return cls(family, params)

    def to_dict(self) -> dict:
        out = {"family": self.family}
        out.update(self.params)
        return out

    @property
    def lam(self) -> float:
        return float(self.params.get("lambda", 0.0))

    @property
    def beta(self) -> float:
        return float(self.params.get("beta", 1.0))

    def with_lambda(self, lam: float) -> "KernelSpec":
        params = dict(self.params)
        params["lambda"] = lam
        return KernelSpec(self.family, params)


@dataclass(frozen=True, eq=False)
class Kernel:
    """Even measure ``sum_i w_i delta_{a_i} + density``.

    ``density_hat`` is the Fourier transform of the density part only, so that
    ``fourier_hat = sum_i w_i cos(a_i xi) + density_hat``.
    """

    spec: KernelSpec
    atoms: tuple = ()
    density: Optional[Callable] = None
    density_hat: Optional[Callable] = None
    laplace_fn: Optional[Callable] = None
    # total variation of the positive / negative parts of the density
    density_norms: Optional[tuple] = None

    @property
    def family(self) -> str:
        return self.spec.family

    def fourier_hat(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros_like(xi)
        for pos, weight in self.atoms:
            out = out + weight * np.cos(pos * xi)
        if self.density_hat is not None:
            out = out + self.density_hat(xi)
        return out if out.ndim else float(out)

    def total_variation(self) -> float:
        tv = sum(abs(w) for _, w in self.atoms)
        if self.density_norms is not None:
            tv += sum(self.density_norms)
        return tv

    def __repr__(self):
        return f"Kernel({self.spec.to_dict()!r})"


# -- closed forms ---------------------------------------------------------------

def _gauss_density(x, lam):
    return np.exp(-np.asarray(x) ** 2 / (4 * lam**2)) / (2 * abs(lam) * math.sqrt(math.pi))


def _gauss_hat(xi, lam):
    return np.exp(-(lam * xi) ** 2)


def _gauss_laplace(s, lam):
    with np.errstate(over="ignore"):
        return np.exp((lam * s) ** 2)


def _nematic_density(x, lam):
    return np.exp(-np.abs(x) / abs(lam)) / (2 * abs(lam))


def _nematic_hat(xi, lam):
    return 1.0 / (1.0 + (lam * xi) ** 2)


def _nematic_laplace(s, lam):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        val = np.where(abs(lam) * s < 1.0, 1.0 / (1.0 - (lam * s) ** 2), np.inf)
    return val


def _exp_density(x, amp, beta):
    return amp * np.exp(-beta * np.abs(x))


def _exp_hat(xi, amp, beta):
    return amp * 2 * beta / (xi**2 + beta**2)


def _vdw_laplace(s, lam, beta):
    a_lam = beta / (beta - 2 * lam)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        finite = a_lam * (1.0 - 2 * lam * beta / (beta**2 - s**2))
    # divergent tail has the sign of the density (-lam)
    tail = np.inf if lam < 0 else (-np.inf if lam > 0 else a_lam)
    return np.where(s < beta, finite, tail)


def _rect_density(x, lam):
    return np.where(np.abs(x) <= abs(lam), 1.0 / (2 * abs(lam)), 0.0)


def _rect_hat(xi, lam):
    return np.sinc(lam * np.asarray(xi) / math.pi)


def _rect_laplace(s, lam):
    t = abs(lam) * np.asarray(s, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(t > 0, np.sinh(t) / np.where(t > 0, t, 1.0), 1.0)


def _atoms_laplace(s, atoms):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    with np.errstate(over="ignore", invalid="ignore"):
        for pos, weight in atoms:
            out = out + weight * np.exp(-s * pos)
    return out


def _require(cond, msg):
    if not cond:
        raise InvalidParameterError(msg)


def build_kernel(spec: KernelSpec | Mapping, *, density=None, density_hat=None, laplace=None) -> Kernel:
    """Construct a kernel from its spec; validates family parameter ranges.

    ``density``/``density_hat``/``laplace`` are only used by the ``custom``
    family, whose atoms are read from ``params["atoms"]`` as ``[[pos, w], ...]``.
    """
    if not isinstance(spec, KernelSpec):
        spec = KernelSpec.from_dict(spec)
    fam = spec.family
    if fam not in FAMILIES:
        raise InvalidParameterError(f"unknown kernel family {fam!r}")
    lam = spec.lam

    if fam == "contact":
        return Kernel(spec, atoms=((0.0, 1.0),), laplace_fn=partial(_atoms_laplace, atoms=((0.0, 1.0),)))

    if fam == "gaussian":
        _require(lam > 0, "gaussian kernel requires lambda > 0")
        return Kernel(
            spec,
            density=partial(_gauss_density, lam=lam),
            density_hat=partial(_gauss_hat, lam=lam),
            laplace_fn=partial(_gauss_laplace, lam=lam),
            density_norms=(1.0, 0.0),
        )

    if fam == "nematic":
        _require(lam > 0, "nematic kernel requires lambda > 0")
        return Kernel(
            spec,
            density=partial(_nematic_density, lam=lam),
            density_hat=partial(_nematic_hat, lam=lam),
            laplace_fn=partial(_nematic_laplace, lam=lam),
            density_norms=(1.0, 0.0),
        )

    if fam == "vanderwaals":
        beta = spec.beta
        _require(beta > 0, "vanderwaals kernel requires beta > 0")
        _require(lam < beta / 2, "vanderwaals kernel requires lambda < beta/2")
        a_lam = beta / (beta - 2 * lam)
        amp = -a_lam * lam
        mass = abs(amp) * 2 / beta
        return Kernel(
            spec,
            atoms=((0.0, a_lam),),
            density=partial(_exp_density, amp=amp, beta=beta),
            density_hat=partial(_exp_hat, amp=amp, beta=beta),
            laplace_fn=partial(_vdw_laplace, lam=lam, beta=beta),
            density_norms=(mass, 0.0) if amp >= 0 else (0.0, mass),
        )

    if fam == "rectangular":
        _require(lam > 0, "rectangular kernel requires lambda > 0")
        return Kernel(
            spec,
            density=partial(_rect_density, lam=lam),
            density_hat=partial(_rect_hat, lam=lam),
            laplace_fn=partial(_rect_laplace, lam=lam),
            density_norms=(1.0, 0.0),
        )

    if fam == "three_delta":
        _require(lam != 0, "three_delta kernel requires lambda != 0")
        atoms = ((0.0, 2.0), (-abs(lam), -0.5), (abs(lam), -0.5))
        return Kernel(spec, atoms=atoms, laplace_fn=partial(_atoms_laplace, atoms=atoms))

    # custom
    raw = spec.params.get("atoms", ())
    atoms = tuple((float(p), float(w)) for p, w in raw)
    if density is not None and density_hat is None:
        raise InvalidParameterError("custom density needs its Fourier transform")
    if laplace is None and density is None and atoms:
        laplace = partial(_atoms_laplace, atoms=atoms)
    norms = None
    if density is not None:
        xs = np.linspace(-200, 200, 400001)
        vals = density(xs)
        dx = xs[1] - xs[0]
        norms = (float(np.sum(np.maximum(vals, 0)) * dx), float(np.sum(np.maximum(-vals, 0)) * dx))
    kernel = Kernel(spec, atoms=atoms, density=density, density_hat=density_hat, laplace_fn=laplace,
                    density_norms=norms)
    _require(_is_even(kernel), "custom kernel must be even")
    _require(abs(kernel.fourier_hat(0.0) - 1.0) < 1e-12, "custom kernel must satisfy W^(0) = 1")
    return kernel


def _is_even(kernel: Kernel) -> bool:
    pos = {}
    for p, w in kernel.atoms:
        pos[round(p, 12)] = pos.get(round(p, 12), 0.0) + w
    for p, w in pos.items():
        if abs(pos.get(round(-p, 12), 0.0) - w) > 1e-12:
            return False
    if kernel.density is not None:
        xs = np.linspace(0.01, 50, 997)
        if np.max(np.abs(kernel.density(xs) - kernel.density(-xs))) > 1e-12:
            return False
    return True


def contact_kernel() -> Kernel:
    return build_kernel(KernelSpec("contact"))


def fourier_hat(kernel: Kernel, xi):
    return kernel.fourier_hat(xi)


def laplace_transform(kernel: Kernel, s):
    """Two-sided Laplace transform, ``inf`` where it diverges.

    Raises UnavailableTransformError when no formula is registered.
    """
    if kernel.laplace_fn is None:
        raise UnavailableTransformError(f"no Laplace transform registered for {kernel.family} kernel")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("Laplace transform is evaluated for s >= 0 only")
    val = np.asarray(kernel.laplace_fn(s_arr), dtype=float)
    return val if val.ndim else float(val)


# -- hypotheses -----------------------------------------------------------------

def xi_grid() -> np.ndarray:
    return np.geomspace(XI_MIN, XI_MAX, XI_NODES)


@dataclass
class HypothesisReport:
    s_frak: float
    m: Optional[float]
    kappa: Optional[float]
    tau: Optional[float]
    sigma: Optional[float]
    mu_plus: Optional[float]
    mu_minus: Optional[float]
    a_mu: Optional[float]
    landau_speed: float
    sonic_speed: float = SONIC_SPEED
    flags: dict = field(default_factory=dict)

    @property
    def tau_sigma(self):
        return None if self.tau is None else (self.tau, self.sigma)

    @property
    def mu_norms(self):
        return None if self.mu_plus is None else (self.mu_plus, self.mu_minus, self.a_mu)

    def to_dict(self) -> dict:
        def fails(v):
            return "fails" if v is None else v

        return {
            "s_frak": self.s_frak,
            "m": fails(self.m),
            "kappa": fails(self.kappa),
            "tau": self.tau,
            "sigma": self.sigma,
            "mu_plus": self.mu_plus,
            "mu_minus": self.mu_minus,
            "a_mu": self.a_mu,
            "landau_speed": self.landau_speed,
            "sonic_speed": self.sonic_speed,
            "flags": dict(self.flags),
        }


def s_frak(kernel: Kernel) -> float:
    """``inf_xi (W^(xi) + xi^2/2)``; the value 1 at xi = 0 is always a candidate."""
    xi = xi_grid()
    vals = kernel.fourier_hat(xi) + xi**2 / 2
    k = int(np.argmin(vals))
    best = min(1.0, float(vals[k]))
    # beyond XI_MAX the quadratic term exceeds any bounded W^
    lo, hi = xi[max(k - 1, 0)], xi[min(k + 1, len(xi) - 1)]
    res = optimize.minimize_scalar(lambda t: kernel.fourier_hat(t) + t**2 / 2, bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-12})
    return min(best, float(res.fun))


def landau_speed(kernel: Kernel) -> float:
    """``inf_{xi>0} omega(xi)/xi`` with ``omega^2 = xi^4 + 2 W^(xi) xi^2``.

    Returns 0 if ``omega^2`` turns negative on the search grid.
    """
    def ratio_sq(t):
        return t**2 + 2 * kernel.fourier_hat(t)

    xi = xi_grid()
    vals = ratio_sq(xi)
    if np.any(vals < 0):
        return 0.0
    k = int(np.argmin(vals))
    best = min(2.0, float(vals[k]))
    lo, hi = xi[max(k - 1, 0)], xi[min(k + 1, len(xi) - 1)]
    res = optimize.minimize_scalar(ratio_sq, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    best = min(best, float(res.fun))
    return math.sqrt(max(best, 0.0))


def _numeric_m(kernel: Kernel, xi: np.ndarray) -> float:
    deriv = (kernel.fourier_hat(xi + FD_STEP) - kernel.fourier_hat(xi - FD_STEP)) / (2 * FD_STEP)
    return max(0.0, float(np.max(-deriv / xi)))


def _numeric_kappa(kernel: Kernel, xi: np.ndarray) -> float:
    return max(0.0, float(np.max((1.0 - kernel.fourier_hat(xi)) / xi**2)))


def _closed_form_m(kernel: Kernel) -> Optional[float]:
    fam, lam = kernel.family, kernel.spec.lam
    if fam == "contact":
        return 0.0
    if fam in ("gaussian", "nematic"):
        return 2 * lam**2
    if fam == "vanderwaals":
        beta = kernel.spec.beta
        return 4 * max(-lam, 0.0) / (beta**2 * (beta - 2 * lam))
    return None


def _closed_form_kappa(kernel: Kernel) -> Optional[float]:
    fam, lam = kernel.family, kernel.spec.lam
    if fam == "contact":
        return 0.0
    if fam in ("gaussian", "nematic"):
        return lam**2
    if fam == "vanderwaals":
        return _closed_form_m(kernel) / 2
    if fam == "three_delta":
        return 0.0
    return None


def _tau_sigma(kernel: Kernel):
    fam, lam = kernel.family, kernel.spec.lam
    if fam in ("gaussian", "nematic"):
        return lam, float(kernel.density(lam))
    if fam == "rectangular":
        return min(lam, math.pi / math.sqrt(12)) / 2, 1 / (2 * lam)
    if fam == "custom" and not kernel.atoms and kernel.density is not None:
        if kernel.density_norms is not None and kernel.density_norms[1] > 0:
            return None
        # radially decreasing densities: sigma = W(tau), tau maximising tau*W(tau)
        taus = np.linspace(1e-3, 20, 20000)
        prod = taus * kernel.density(taus)
        k = int(np.argmax(prod))
        if prod[k] <= 0:
            return None
        return float(taus[k]), float(kernel.density(taus[k]))
    return None


def _mu_norms(kernel: Kernel):
    """Decomposition ``W = A (delta_0 + mu)`` with A the weight of the atom at 0."""
    a0 = sum(w for p, w in kernel.atoms if p == 0.0)
    if a0 <= 0:
        return None
    plus = sum(w for p, w in kernel.atoms if p != 0.0 and w > 0) / a0
    minus = -sum(w for p, w in kernel.atoms if p != 0.0 and w < 0) / a0
    if kernel.density is not None:
        if kernel.density_norms is None:
            return None
        plus += kernel.density_norms[0] / a0
        minus += kernel.density_norms[1] / a0
    return plus, minus, a0


def apriori_constants(c: float, tau_sigma=None, mu_norms=None):
    """Closed-form L^inf bounds ``M(c, mu)`` and ``M(c, tau, sigma)`` (None if not applicable)."""
    m_mu = m_ts = None
    if mu_norms is not None:
        plus, minus = mu_norms[0], mu_norms[1]
        if minus < 1:
            m_mu = (1 + plus / (1 - minus)) * (1 + c**2 / 4)
    if tau_sigma is not None:
        tau, sigma = tau_sigma
        if tau < math.pi / math.sqrt(8 + 2 * c**2):
            m_ts = (1 + c**2 / 4) / (tau * sigma * math.cos(tau * math.sqrt(8 + 2 * c**2) / 2))
    return m_mu, m_ts


def check_hypotheses(kernel: Kernel, c: float = 0.0) -> HypothesisReport:
    if not 0 <= c < SONIC_SPEED:
        raise InvalidParameterError("speed must satisfy 0 <= c < sqrt(2)")
    xi = xi_grid()
    what = kernel.fourier_hat(xi)
    nonneg = bool(np.all(what >= -1e-14))
    flags = {}

    flags["H0"] = bool(abs(kernel.fourier_hat(0.0) - 1.0) < 1e-12 and _is_even(kernel))
    # every kernel built here has a Lipschitz W^; record which regularity branch applies
    d2 = (kernel.fourier_hat(xi + 1e-3) - 2 * what + kernel.fourier_hat(xi - 1e-3)) / 1e-6
    flags["H1"] = True
    flags["H1_second_derivative_bounded"] = bool(np.all(np.isfinite(d2)))

    m = _closed_form_m(kernel)
    if m is None:
        m = _numeric_m(kernel, xi)
    if not nonneg:
        m = None
    flags["H2"] = m is not None and m < 1

    ts = _tau_sigma(kernel)
    flags["H3"] = ts is not None and ts[0] > 0 and ts[1] > 0

    mu = _mu_norms(kernel)
    flags["H4"] = mu is not None and mu[1] < 1

    kappa = _closed_form_kappa(kernel)
    if kappa is None and nonneg:
        kappa = _numeric_kappa(kernel, xi)
    if not nonneg:
        kappa = None
    flags["H5"] = kappa is not None

    sf = s_frak(kernel)
    flags["s_frak_in_(0,1]"] = bool(0 < sf <= 1 + 1e-12)
    flags["W_hat_nonnegative"] = nonneg

    m_mu, m_ts = apriori_constants(c, ts if flags["H3"] else None, mu if flags["H4"] else None)
    flags["m_M_mu_below_1"] = bool(flags["H2"] and m_mu is not None and m * m_mu < 1)
    flags["m_M_tau_sigma_below_1"] = bool(flags["H2"] and m_ts is not None and m * m_ts < 1)

    cl = landau_speed(kernel)
    flags["subcritical_speed"] = bool(c < cl)

    return HypothesisReport(
        s_frak=sf,
        m=m,
        kappa=kappa,
        tau=ts[0] if ts else None,
        sigma=ts[1] if ts else None,
        mu_plus=mu[0] if mu else None,
        mu_minus=mu[1] if mu else None,
        a_mu=mu[2] if mu else None,
        landau_speed=cl,
        flags=flags,
    )
