"""Periodic grid on [-L, L), FFT differentiation, kernel convolution and the
multiplier ``L_c(xi) = 1 / (xi^2 + 2 W^(xi) - c^2)``.

Black solitons are not periodic: they satisfy ``u(x + 2L) = -u(x)``.  Such
fields are handled by the ``twist`` argument, which differentiates
``u e^{-i a x}`` with ``a = twist`` and undoes the modulation; ``twist =
pi/(2L)`` is the antiperiodic case.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MismatchedLengthsError, MultiplierSingularError, OffGridAtomWarning
from .kernels import Kernel

OFFGRID_TOL = 1e-9
SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    half_length: float = 40.0
    n: int = 4096

    def __post_init__(self):
        if self.half_length <= 0:
            raise ValueError("half_length must be positive")
        if self.n < 64 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two >= 64")

    @property
    def L(self) -> float:
        return self.half_length

    @property
    def h(self) -> float:
        return 2 * self.half_length / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.h * np.arange(self.n)

    @property
    def xi(self) -> np.ndarray:
        """Angular frequencies in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    @property
    def center(self) -> int:
        return self.n // 2

    @property
    def antiperiodic_twist(self) -> float:
        return math.pi / (2 * self.half_length)

    def mirror_index(self) -> np.ndarray:
        """Index of -x_j (mod 2L) for each node j."""
        return (-np.arange(self.n)) % self.n

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise MismatchedLengthsError(f"field has {vals.shape} samples, grid has {self.grid.n}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return self.grid.n


def symmetrize_even(values: np.ndarray, grid: Grid) -> np.ndarray:
    return 0.5 * (values + values[grid.mirror_index()])


def symmetrize_odd(values: np.ndarray, grid: Grid) -> np.ndarray:
    return 0.5 * (values - values[grid.mirror_index()])


# -- derivatives ----------------------------------------------------------------

def derivative_array(values: np.ndarray, grid: Grid, order: int = 1, twist: float = 0.0) -> np.ndarray:
    """Spectral derivative of samples.  Complex input gives complex output."""
    if order < 1:
        raise ValueError("order must be >= 1")
    values = np.asarray(values)
    is_real = not np.iscomplexobj(values)
    xi = grid.xi
    if twist:
        x = grid.x
        w = values * np.exp(-1j * twist * x)
        mult = (1j * (xi + twist)) ** order
        out = np.fft.ifft(mult * np.fft.fft(w)) * np.exp(1j * twist * x)
        return out.real if is_real else out
    mult = (1j * xi) ** order
    if order % 2:
        mult[grid.n // 2] = 0.0  # Nyquist mode has no real odd derivative
    if is_real:
        return np.fft.irfft(mult[: grid.n // 2 + 1] * np.fft.rfft(values), n=grid.n)
    return np.fft.ifft(mult * np.fft.fft(values))


def spectral_derivative(f: Field, order: int = 1, twist: float = 0.0) -> Field:
    return Field(f.grid, derivative_array(f.values, f.grid, order, twist))


def phase_twist(u: np.ndarray, grid: Grid) -> float:
    """Modulation rate making ``u e^{-i a x}`` 2L-periodic, estimated from the end samples."""
    ratio = u[-1] / u[0] if u[0] != 0 else 1.0
    # u(L) is the unstored periodic image of u(-L); u(L - h) stands in for it
    return float(np.angle(ratio)) / (2 * grid.half_length)


def antiderivative_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral antiderivative vanishing at x = 0.

    The mean is integrated as a linear ramp, the zero-mean part through the
    Fourier multiplier 1/(i xi); exact for band-limited periodic integrands.
    """
    n = grid.n
    spec = np.fft.rfft(values)
    mean = spec[0].real / n
    xi = grid.xi[: n // 2 + 1].copy()
    xi[0] = 1.0
    mult = 1.0 / (1j * xi)
    mult[0] = 0.0
    mult[-1] = 0.0
    periodic = np.fft.irfft(spec * mult, n=n)
    out = periodic + mean * grid.x
    return out - out[grid.center]


# -- convolution ----------------------------------------------------------------

def _shift_plan(kernel: Kernel, grid: Grid):
    """Atom shifts as (weight, integer offset, fractional part)."""
    plan = []
    off = False
    for pos, weight in kernel.atoms:
        p = pos / grid.h
        m = math.floor(p)
        frac = p - m
        if abs(p - round(p)) <= OFFGRID_TOL:
            m, frac = int(round(p)), 0.0
        else:
            off = True
        plan.append((weight, int(m), frac))
    return plan, off


@lru_cache(maxsize=64)
def discrete_symbol(kernel: Kernel, grid: Grid) -> np.ndarray:
    """Exact Fourier multiplier of ``convolve`` on this grid (full FFT order).

    Equals W^(xi_k) when every atom sits on a node; off-grid atoms contribute
    the symbol of their linearly interpolated shift.
    """
    xi = grid.xi
    sym = np.zeros(grid.n)
    plan, _ = _shift_plan(kernel, grid)
    for weight, m, frac in plan:
        s = (1 - frac) * np.exp(-1j * xi * m * grid.h) + frac * np.exp(-1j * xi * (m + 1) * grid.h)
        sym = sym + weight * s.real  # imaginary parts cancel across the even pair
    if kernel.density_hat is not None:
        sym = sym + kernel.density_hat(np.abs(xi))
    sym.setflags(write=False)
    return sym


def convolve_array(kernel: Kernel, values: np.ndarray, grid: Grid, *, warn: bool = True) -> np.ndarray:
    plan, off = _shift_plan(kernel, grid)
    if off and warn:
        warnings.warn(f"{kernel!r}: atom off the grid, using linear interpolation", OffGridAtomWarning,
                      stacklevel=3)
    out = np.zeros(grid.n)
    for weight, m, frac in plan:
        # (W * f)(x_j) picks up f(x_j - a) = f_{j - p}
        shifted = np.roll(values, m)
        if frac:
            shifted = (1 - frac) * shifted + frac * np.roll(values, m + 1)
        out += weight * shifted
    if kernel.density_hat is not None:
        mult = kernel.density_hat(np.abs(grid.xi[: grid.n // 2 + 1]))
        out += np.fft.irfft(mult * np.fft.rfft(values), n=grid.n)
    return out


def convolve(kernel: Kernel, f: Field) -> Field:
    return Field(f.grid, convolve_array(kernel, f.values, f.grid))


# -- L_c ------------------------------------------------------------------------

def lc_denominator(kernel: Kernel, c: float, grid: Grid) -> np.ndarray:
    return grid.xi**2 + 2 * discrete_symbol(kernel, grid) - c**2


def check_lc_admissible(kernel: Kernel, c: float, grid: Grid) -> np.ndarray:
    den = lc_denominator(kernel, c, grid)
    if np.min(den) <= SINGULAR_TOL:
        k = int(np.argmin(den))
        raise MultiplierSingularError(
            f"L_c denominator {den[k]:.3e} at xi={grid.xi[k]:.4f}: speed {c} not admissible for {kernel!r}")
    return den


def apply_lc_array(kernel: Kernel, c: float, values: np.ndarray, grid: Grid) -> np.ndarray:
    den = check_lc_admissible(kernel, c, grid)
    half = den[: grid.n // 2 + 1]
    return np.fft.irfft(np.fft.rfft(values) / half, n=grid.n)


def apply_lc(kernel: Kernel, c: float, g: Field) -> Field:
    return Field(g.grid, apply_lc_array(kernel, c, g.values, g.grid))


def apply_lc_inverse_array(kernel: Kernel, c: float, values: np.ndarray, grid: Grid) -> np.ndarray:
    """``-v'' + 2 W*v - c^2 v``, the operator that L_c inverts."""
    return -derivative_array(values, grid, 2) + 2 * convolve_array(kernel, values, grid, warn=False) - c**2 * values


# -- quadrature -----------------------------------------------------------------

def integrate_array(values: np.ndarray, grid: Grid) -> float:
    return float(grid.h * np.sum(values))


def integrate(f: Field) -> float:
    return integrate_array(f.values, f.grid)
