"""Split-step Fourier integration of the continuum exciton-phonon models.

Exciton equation (all scenarios)::

    i hbar psi_t = (lambda + Omega(-i d/dx)) psi + V(x, t) psi

where Omega(k) is the dispersion symbol (D_s|k|^(s-1), pi J|k|, A k^2 or the
exact lattice gap G(k)) and the potential V is chi*sigma for the
Zakharov-type systems or -g|psi|^2 for the Schroedinger-type equations.
A single Fourier mode exp(i(kx - wt)) therefore rotates with
hbar*w = lambda + Omega(k); the linear propagator is exp(-i(lambda + Omega) dt / hbar).

The strain sigma = d xi/dx of the Zakharov-type systems obeys::

    sigma_tt - v^2 sigma_xx = (c chi / m) (|psi|^2)_xx,   v = sqrt(w/m)

with source prefactor c (2 in the continuum equations, 1 for the continuum
limit of the lattice force).  Each Fourier mode is a driven oscillator that
is advanced by velocity Verlet with the density frozen over the step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, ParameterDomainError, SimulationDivergence
from .model_core import (
    ModelParams,
    asymptotic_gap,
    fractional_coefficient,
    quadratic_coefficient,
)
from .spectral_ops import SpectralGrid, first_derivative_symbol, gap_symbol, hilbert_symbol, riesz_symbol


class ScenarioKind(str, enum.Enum):
    GENERAL_NONLOCAL = "GeneralNonlocal"
    FRACTIONAL_ZAKHAROV = "FractionalZakharov"
    HILBERT_ZAKHAROV = "HilbertZakharov"
    NLFSE = "NLFSE"
    HILBERT_NLS = "HilbertNLS"
    CLASSICAL_NLS = "ClassicalNLS"

    @property
    def is_zakharov(self) -> bool:
        return self in (ScenarioKind.GENERAL_NONLOCAL, ScenarioKind.FRACTIONAL_ZAKHAROV,
                        ScenarioKind.HILBERT_ZAKHAROV)


ZAKHAROV_KINDS = tuple(k for k in ScenarioKind if k.is_zakharov)
SCHRODINGER_KINDS = tuple(k for k in ScenarioKind if not k.is_zakharov)


@dataclass(frozen=True)
class ScenarioSpec:
    """Which continuum model to step and how.

    ``nonlinearity_g=None`` resolves to :func:`effective_nonlinearity`.
    ``hilbert_normalized=False`` uses the i*pi*sgn(k) Hilbert symbol.
    ``potential`` selects the strain entering the exciton phase over a
    Zakharov step: ``"average"`` of the strain before and after the phonon
    update, or ``"start"`` (strain at the start of the step).
    """

    kind: ScenarioKind
    dispersion_mode: str = "asymptotic"
    nonlinearity_g: float | None = None
    lambda_shift: float = 0.0
    source_prefactor: float = 2.0
    hilbert_normalized: bool = True
    literal_nonlinearity: bool = False
    potential: str = "average"

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.dispersion_mode not in ("asymptotic", "exact_gap"):
            raise ParameterDomainError("dispersion_mode must be 'asymptotic' or 'exact_gap'")
        if self.potential not in ("average", "start"):
            raise ParameterDomainError("potential must be 'average' or 'start'")

    def violations(self, params: ModelParams) -> list[str]:
        """Every kind/exponent incompatibility, as readable messages."""
        s = params.exponent_s
        kind = self.kind
        out = []
        if kind in (ScenarioKind.NLFSE, ScenarioKind.FRACTIONAL_ZAKHAROV) and not 2 < s < 3:
            if s == 3:
                out.append(f"{kind.value} requires 2 < s < 3: D_s is singular at s=3 "
                           "(sin(pi(s-1)/2) = 0, logarithmic regime)")
            else:
                out.append(f"{kind.value} requires 2 < s < 3 (got s={s})")
        if kind in (ScenarioKind.HILBERT_ZAKHAROV, ScenarioKind.HILBERT_NLS) and s != 2:
            out.append(f"{kind.value} requires s = 2 (got s={s})")
        if kind is ScenarioKind.CLASSICAL_NLS and not s > 3:
            out.append(f"ClassicalNLS requires s > 3 (got s={s})")
        if kind is ScenarioKind.GENERAL_NONLOCAL and not s > 1:
            out.append(f"GeneralNonlocal requires s > 1 (got s={s})")
        if kind is ScenarioKind.GENERAL_NONLOCAL and self.dispersion_mode == "asymptotic" and s < 2:
            out.append(f"asymptotic dispersion requires s >= 2 (got s={s})")
        return out

    def check(self, params: ModelParams) -> None:
        bad = self.violations(params)
        if bad:
            raise ConfigurationError("; ".join(bad))


@dataclass
class ContinuumState:
    grid: SpectralGrid
    psi: np.ndarray
    sigma: np.ndarray
    sigma_rate: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        M = self.grid.points
        self.psi = np.asarray(self.psi, dtype=complex)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.sigma_rate = np.asarray(self.sigma_rate, dtype=float)
        for name in ("psi", "sigma", "sigma_rate"):
            if getattr(self, name).shape != (M,):
                raise ParameterDomainError(f"{name} must have shape ({M},)")

    @classmethod
    def from_psi(cls, grid: SpectralGrid, psi, sigma=None, sigma_rate=None, time: float = 0.0):
        zeros = np.zeros(grid.points)
        return cls(grid, psi, zeros if sigma is None else sigma,
                   zeros if sigma_rate is None else sigma_rate, time)

    def copy(self) -> "ContinuumState":
        return ContinuumState(self.grid, self.psi.copy(), self.sigma.copy(), self.sigma_rate.copy(), self.time)


# -- coefficients ------------------------------------------------------------


def effective_nonlinearity(params: ModelParams, literal: bool = False) -> float:
    """Cubic coefficient g of the stationary-strain Schroedinger equations.

    Substituting sigma = -(2 chi/w)|psi|^2 into chi*sigma*psi gives g = 2 chi^2 / w.
    ``literal=True`` returns the printed 2 chi / w.
    """
    if not params.elasticity > 0:
        raise ParameterDomainError("elasticity must be > 0")
    chi, w = params.coupling_chi, params.elasticity
    return 2 * chi / w if literal else 2 * chi**2 / w


def stationary_sigma(psi: np.ndarray, params: ModelParams) -> np.ndarray:
    """Strain slaved to the density when d xi/dt = 0: sigma = -(2 chi/w)(|psi|^2 - mean)."""
    rho = np.abs(psi) ** 2
    return -(2 * params.coupling_chi / params.elasticity) * (rho - rho.mean())


def resolved_nonlinearity(params: ModelParams, spec: ScenarioSpec) -> float:
    if spec.nonlinearity_g is not None:
        return float(spec.nonlinearity_g)
    return effective_nonlinearity(params, literal=spec.literal_nonlinearity)


@lru_cache(maxsize=64)
def dispersion_symbol(grid: SpectralGrid, params: ModelParams, spec: ScenarioSpec) -> np.ndarray:
    """Omega(k_j): energy of a plane wave, excluding lambda."""
    kind = spec.kind
    k = grid.wavenumbers
    if spec.dispersion_mode == "exact_gap":
        out = np.array(gap_symbol(grid, params))
    elif kind in (ScenarioKind.FRACTIONAL_ZAKHAROV, ScenarioKind.NLFSE):
        # -D_s * Riesz(s-1) -> +D_s |k|^(s-1)
        out = -fractional_coefficient(params) * riesz_symbol(grid, params.exponent_s - 1)
    elif kind in (ScenarioKind.HILBERT_ZAKHAROV, ScenarioKind.HILBERT_NLS):
        # -pi J H{d/dx} -> -pi J (i sgn k)(i k) = pi J |k|
        out = (-math.pi * params.interaction_J
               * hilbert_symbol(grid, spec.hilbert_normalized) * first_derivative_symbol(grid)).real
    elif kind is ScenarioKind.CLASSICAL_NLS:
        out = quadratic_coefficient(params) * k**2
    else:
        out = np.asarray(asymptotic_gap(k, params), dtype=float)
    out = np.ascontiguousarray(out, dtype=float)
    out.setflags(write=False)
    return out


# -- stepping ----------------------------------------------------------------


class ContinuumSolver:
    """Precomputed propagators for one (grid, params, scenario, dt)."""

    def __init__(self, grid: SpectralGrid, params: ModelParams, spec: ScenarioSpec, dt: float,
                 extended_precision: bool = True):
        if not dt > 0:
            raise ConfigurationError("dt must be > 0")
        spec.check(params)
        self.grid, self.params, self.spec, self.dt = grid, params, spec, float(dt)
        self.omega = dispersion_symbol(grid, params, spec)
        # Round-off in repeated double-precision FFT round trips biases the norm
        # (~1e-12 per 1e4 steps); the exciton linear substep runs in long double.
        self._ctype = np.clongdouble if extended_precision else np.complex128
        rtype = np.longdouble if extended_precision else np.float64
        phase = (rtype(spec.lambda_shift) + self.omega.astype(rtype)) * rtype(dt) / rtype(params.hbar)
        self.half_linear = np.exp(-0.5j * phase)
        self.full_linear = np.exp(-1j * phase)
        self.k2 = grid.wavenumbers**2
        if spec.kind.is_zakharov:
            v = params.sound_speed
            limit = 0.5 / (v * grid.k_max)
            if dt > limit * (1 + 1e-12):
                raise ConfigurationError(
                    f"dt={dt:.6g} violates the phonon guard dt <= 0.5/(v k_max) = {limit:.6g}")
            self.g = None
        else:
            self.g = resolved_nonlinearity(params, spec)

    def _check(self, state: ContinuumState, step_index: int):
        for name in ("psi", "sigma", "sigma_rate"):
            if not np.all(np.isfinite(getattr(state, name))):
                raise SimulationDivergence(name, step_index, state.time)

    def _linear(self, psi: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return sfft.ifft(symbol * sfft.fft(psi.astype(self._ctype))).astype(np.complex128)

    def _half(self, psi: np.ndarray) -> np.ndarray:
        return self._linear(psi, self.half_linear)

    def _middle(self, psi, sigma, rate):
        """Potential/nonlinear phase and phonon update between the linear half steps."""
        p, dt = self.params, self.dt
        if not self.spec.kind.is_zakharov:
            psi = psi * np.exp(1j * self.g * np.abs(psi) ** 2 * dt / p.hbar)
            return psi, sigma, rate
        rho_hat = np.fft.fft(np.abs(psi) ** 2)
        s_hat = np.fft.fft(sigma)
        r_hat = np.fft.fft(rate)
        drive = -(self.spec.source_prefactor * p.coupling_chi / p.mass) * self.k2 * rho_hat
        w2 = p.sound_speed**2 * self.k2
        r_half = r_hat + 0.5 * dt * (-w2 * s_hat + drive)
        s_new_hat = s_hat + dt * r_half
        r_new_hat = r_half + 0.5 * dt * (-w2 * s_new_hat + drive)
        sigma_c = np.fft.ifft(s_new_hat)
        rate_c = np.fft.ifft(r_new_hat)
        self.last_imag_residue = max(float(np.max(np.abs(sigma_c.imag))),
                                     float(np.max(np.abs(rate_c.imag))))
        sigma_new, rate_new = sigma_c.real, rate_c.real
        pot = 0.5 * (sigma + sigma_new) if self.spec.potential == "average" else sigma
        psi = psi * np.exp(-1j * p.coupling_chi * pot * dt / p.hbar)
        return psi, sigma_new, rate_new

    def _finish(self, psi, sigma, rate, t) -> ContinuumState:
        if not self.spec.kind.is_zakharov:
            sigma = stationary_sigma(psi, self.params)
            rate = np.zeros_like(sigma)
        return ContinuumState(self.grid, psi, sigma, rate, t)

    def step(self, state: ContinuumState, step_index: int = 0) -> ContinuumState:
        """One Strang step: half linear, middle, half linear."""
        psi, sigma, rate = self._middle(self._half(state.psi), state.sigma, state.sigma_rate)
        out = self._finish(self._half(psi), sigma, rate, state.time + self.dt)
        self._check(out, step_index)
        return out

    def run(self, state: ContinuumState, n_steps: int, every: int = 0, callback=None,
            start_step: int = 0) -> ContinuumState:
        """Advance ``n_steps`` steps; ``callback(step, state)`` runs every ``every`` steps.

        Adjacent linear half steps are fused into one full step, so the
        trajectory costs one FFT pair per step for the exciton field; states
        handed to the callback are completed copies and do not feed back.
        """
        if n_steps <= 0:
            return state
        psi = self._half(state.psi)
        sigma, rate = state.sigma, state.sigma_rate
        t0 = state.time
        for i in range(1, n_steps + 1):
            step_index = start_step + i
            psi, sigma, rate = self._middle(psi, sigma, rate)
            psi_hat = sfft.fft(psi.astype(self._ctype))
            emit = i == n_steps or (callback is not None and every and step_index % every == 0)
            if emit:
                current = self._finish(sfft.ifft(self.half_linear * psi_hat).astype(np.complex128),
                                       sigma, rate, t0 + i * self.dt)
                self._check(current, step_index)
                if callback is not None and every and step_index % every == 0:
                    callback(step_index, current)
                if i == n_steps:
                    return current
            psi = sfft.ifft(self.full_linear * psi_hat).astype(np.complex128)
            if not np.all(np.isfinite(psi)):
                raise SimulationDivergence("psi", step_index, t0 + i * self.dt)
        raise AssertionError("unreachable")


@lru_cache(maxsize=32)
def get_solver(grid: SpectralGrid, params: ModelParams, spec: ScenarioSpec, dt: float,
               extended_precision: bool = True) -> ContinuumSolver:
    return ContinuumSolver(grid, params, spec, dt, extended_precision)


def step_zakharov(state: ContinuumState, params: ModelParams, spec: ScenarioSpec, dt: float) -> ContinuumState:
    """One Strang step of a Zakharov-type system (half linear, potential + phonons, half linear)."""
    if not spec.kind.is_zakharov:
        raise ConfigurationError(f"step_zakharov does not handle {spec.kind.value}")
    return get_solver(state.grid, params, spec, float(dt)).step(state)


def step_nlfse(state: ContinuumState, params: ModelParams, spec: ScenarioSpec, dt: float) -> ContinuumState:
    """One Strang step of a cubic Schroedinger-type equation (half linear, phase, half linear)."""
    if spec.kind.is_zakharov:
        raise ConfigurationError(f"step_nlfse does not handle {spec.kind.value}")
    return get_solver(state.grid, params, spec, float(dt)).step(state)


# -- observables -------------------------------------------------------------


def _spectral_quadratic(f: np.ndarray, symbol: np.ndarray, grid: SpectralGrid) -> float:
    """integral of conj(f) * Op(f) dx for a real symbol, via Parseval."""
    fh = np.fft.fft(f)
    return float(grid.dx / grid.points * np.sum(symbol * np.abs(fh) ** 2))


def phonon_energy(state: ContinuumState, params: ModelParams, dt: float | None = None) -> float:
    """(m/2) integral of (V^2 + v^2 sigma^2) dx with V_x = sigma_t (k = 0 mode of V dropped).

    With ``dt`` the velocity-Verlet modified energy is returned
    (v^2 -> v^2 (1 - (v k dt)^2 / 4) per mode), which that integrator
    conserves exactly for free phonons.
    """
    grid = state.grid
    k2 = grid.wavenumbers**2
    s_hat = np.fft.fft(state.sigma)
    r_hat = np.fft.fft(state.sigma_rate)
    v2 = params.sound_speed**2
    stiff = v2 * np.ones_like(k2) if dt is None else v2 * (1 - v2 * k2 * dt**2 / 4)
    with np.errstate(divide="ignore", invalid="ignore"):
        kinetic = np.where(k2 > 0, np.abs(r_hat) ** 2 / k2, 0.0)
    mode_sum = np.sum(kinetic + stiff * np.abs(s_hat) ** 2)
    return float(0.5 * params.mass * grid.dx / grid.points * mode_sum)


def observables(state: ContinuumState, params: ModelParams, spec: ScenarioSpec) -> dict[str, float]:
    """norm, hamiltonian, momentum and max density of a continuum state."""
    grid, psi = state.grid, state.psi
    rho = np.abs(psi) ** 2
    norm = float(grid.dx * np.sum(rho))
    omega = dispersion_symbol(grid, params, spec)
    linear = _spectral_quadratic(psi, omega + spec.lambda_shift, grid)
    if spec.kind.is_zakharov:
        c = spec.source_prefactor
        weight = 1.0 / c if c else 1.0
        ham = (linear + params.coupling_chi * float(grid.dx * np.sum(state.sigma * rho))
               + weight * phonon_energy(state, params))
    else:
        g = resolved_nonlinearity(params, spec)
        ham = linear - 0.5 * g * float(grid.dx * np.sum(rho**2))
    dpsi = np.fft.ifft(first_derivative_symbol(grid) * np.fft.fft(psi))
    momentum = float(grid.dx * np.sum(np.imag(np.conj(psi) * dpsi)))
    return {"norm": norm, "hamiltonian": ham, "momentum": momentum,
            "max_density": float(rho.max()) if rho.size else 0.0}


# -- initial conditions ------------------------------------------------------


def gaussian_packet(grid: SpectralGrid, x0: float = 0.0, width: float = 1.0, k0: float = 0.0,
                    amplitude: float = 1.0) -> np.ndarray:
    x = grid.x
    return amplitude * np.exp(-((x - x0) ** 2) / (2 * width**2)) * np.exp(1j * k0 * x)


def plane_wave(grid: SpectralGrid, k0: float, amplitude: float = 1.0) -> np.ndarray:
    return amplitude * np.exp(1j * k0 * grid.x)


def sech_soliton(grid: SpectralGrid, eta: float, x0: float = 0.0, kappa: float | None = None) -> np.ndarray:
    kap = eta if kappa is None else kappa
    return eta / np.cosh(kap * (grid.x - x0))


def nls_soliton_kappa(params: ModelParams, g: float) -> float:
    """kappa / eta for the bright soliton of i hbar phi_t = -A phi_xx - g |phi|^2 phi."""
    A = quadratic_coefficient(params)
    return math.sqrt(g / (2 * A))


def with_sigma(state: ContinuumState, sigma=None, sigma_rate=None) -> ContinuumState:
    return replace(state,
                   sigma=state.sigma if sigma is None else np.asarray(sigma, float),
                   sigma_rate=state.sigma_rate if sigma_rate is None else np.asarray(sigma_rate, float))
