"""Periodic Fourier grid and Fourier-multiplier operators.

Transform convention: forward uses e^{-ikx} (numpy ``fft``), inverse uses
e^{+ikx} with the 1/M normalization (numpy ``ifft``).  Fields are plain numpy
arrays sampled on a :class:`SpectralGrid`; every operator takes the grid
explicitly.  Real input gives real output for the multipliers that preserve
realness; complex input always gives complex output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import AliasingError, ParameterDomainError
from .model_core import ModelParams, spectral_gap


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid of ``points`` nodes on a domain of size ``length``.

    Nodes sit at ``origin + j*dx``; ``origin`` defaults to ``-length/2``.
    """

    length: float
    points: int
    origin: float | None = None

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ParameterDomainError(f"grid length must be > 0 (got {self.length!r})")
        if int(self.points) != self.points or self.points < 8 or self.points % 2:
            raise ParameterDomainError(f"grid points must be an even integer >= 8 (got {self.points!r})")

    @property
    def dx(self) -> float:
        return self.length / self.points

    @property
    def x0(self) -> float:
        return -self.length / 2 if self.origin is None else float(self.origin)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x0 + self.dx * np.arange(self.points)
        x.setflags(write=False)
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """k_j = 2 pi j / L in FFT storage order; j = -M/2 (Nyquist) appears once."""
        k = 2 * np.pi * np.fft.fftfreq(self.points, d=self.dx)
        k.setflags(write=False)
        return k

    @property
    def nyquist_index(self) -> int:
        return self.points // 2

    @property
    def k_max(self) -> float:
        return math.pi / self.dx


def forward_transform(f: np.ndarray) -> np.ndarray:
    return np.fft.fft(f)


def inverse_transform(spectrum: np.ndarray) -> np.ndarray:
    return np.fft.ifft(spectrum)


def apply_multiplier(f: np.ndarray, symbol: np.ndarray, keep_real: bool = True) -> np.ndarray:
    """Return ifft(symbol * fft(f)); real input yields the real part when ``keep_real``."""
    out = np.fft.ifft(symbol * np.fft.fft(f))
    if keep_real and np.isrealobj(f):
        return out.real
    return out


# -- symbols -------------------------------------------------------------------


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=128)
def riesz_symbol(grid: SpectralGrid, alpha: float) -> np.ndarray:
    """Symbol -|k|^alpha of the Riesz derivative of order alpha (0 at k = 0)."""
    if not 0 < alpha <= 2:
        raise ParameterDomainError(f"Riesz order must lie in (0, 2] (got {alpha!r})")
    return _frozen(-np.abs(grid.wavenumbers) ** alpha)


@lru_cache(maxsize=128)
def hilbert_symbol(grid: SpectralGrid, normalized: bool = True) -> np.ndarray:
    """i*sgn(k) (normalized) or i*pi*sgn(k) (principal value 1/(y-x) as printed).

    The k = 0 and Nyquist bins are zero.
    """
    sym = 1j * np.sign(grid.wavenumbers)
    sym[grid.nyquist_index] = 0.0
    if not normalized:
        sym = np.pi * sym
    return _frozen(sym)


@lru_cache(maxsize=128)
def first_derivative_symbol(grid: SpectralGrid) -> np.ndarray:
    sym = 1j * grid.wavenumbers
    sym[grid.nyquist_index] = 0.0
    return _frozen(sym)


@lru_cache(maxsize=128)
def second_derivative_symbol(grid: SpectralGrid) -> np.ndarray:
    return _frozen(-grid.wavenumbers**2)


def check_brillouin_zone(grid: SpectralGrid) -> None:
    """Lattice constant a = 1: every grid wavenumber must satisfy |k| <= pi."""
    kmax = float(np.max(np.abs(grid.wavenumbers)))
    if kmax > math.pi * (1 + 1e-12):
        raise AliasingError(
            f"grid resolves |k| up to {kmax:.6g} > pi; the exact lattice gap needs dx >= 1 "
            f"(got dx={grid.dx:.6g})"
        )


@lru_cache(maxsize=64)
def gap_symbol(grid: SpectralGrid, params: ModelParams) -> np.ndarray:
    """+G(k_j) from the lattice sum, for the exact nonlocal operator."""
    check_brillouin_zone(grid)
    return _frozen(np.asarray(spectral_gap(grid.wavenumbers, params), dtype=float))


# -- operators -----------------------------------------------------------------


def riesz_derivative(f: np.ndarray, grid: SpectralGrid, alpha: float) -> np.ndarray:
    return apply_multiplier(f, riesz_symbol(grid, float(alpha)))


def hilbert_transform(f: np.ndarray, grid: SpectralGrid, normalized: bool = True) -> np.ndarray:
    return apply_multiplier(f, hilbert_symbol(grid, normalized))


def first_derivative(f: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    return apply_multiplier(f, first_derivative_symbol(grid))


def second_derivative(f: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    return apply_multiplier(f, second_derivative_symbol(grid))


def exact_gap_operator(f: np.ndarray, grid: SpectralGrid, params: ModelParams) -> np.ndarray:
    """Apply G(k) exactly; the Fourier action behind -D_s d^{s-1} without the small-k cut."""
    return apply_multiplier(f, gap_symbol(grid, params))


def multiplier_table(grid: SpectralGrid, params: ModelParams | None = None) -> dict[str, np.ndarray]:
    """Real-valued view of every symbol on the grid, in ascending k order (for CSV dumps)."""
    order = np.argsort(grid.wavenumbers, kind="stable")
    table = {
        "k": grid.wavenumbers[order],
        "first_derivative_imag": first_derivative_symbol(grid).imag[order],
        "second_derivative": second_derivative_symbol(grid)[order],
        "hilbert_imag": hilbert_symbol(grid).imag[order],
    }
    if params is not None:
        s = params.exponent_s
        if 0 < s - 1 <= 2:
            table["riesz"] = riesz_symbol(grid, s - 1)[order]
        try:
            table["gap"] = gap_symbol(grid, params)[order]
        except AliasingError:
            pass
    return table
