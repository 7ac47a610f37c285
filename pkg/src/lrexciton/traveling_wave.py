"""Traveling-wave profiles of the Ginzburg-Landau reductions.

A Zakharov-type solution moving rigidly at speed v,
``psi(x, t) = exp(-i mu t / hbar) u(x - v t)``, slaves the strain to the
density (``sigma = 2 chi / (m (v^2 - v_s^2)) (|u|^2 - mean)``) and leaves a
single equation for the profile u on the periodic zeta = x - v t domain::

    mu u - i hbar v u' = Omega(-i d/dzeta) u + gamma |u|^2 u,
    gamma = 2 chi^2 / (m (v^2 - v_s^2)),

with Omega(k) = D_s|k|^(s-1) (fractional), pi J |k| (Hilbert) or A k^2
(quadratic, used as a closed-form cross-check).  In Fourier space the
linear part is the real symbol L(k) = Omega(k) - hbar v k - mu, so the
profile equation reads ``L u = -gamma |u|^2 u``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import continuum_sim as cs
from .errors import (
    ConvergenceFailure,
    ParameterDomainError,
    SonicSingularityError,
    TrivialAttractorError,
)
from .model_core import ModelParams, fractional_coefficient, quadratic_coefficient
from .spectral_ops import SpectralGrid, first_derivative_symbol

DISPERSION_MODES = ("fractional", "hilbert", "quadratic")


def _sonic_denominator(v: float, params: ModelParams) -> float:
    vs2 = params.sound_speed**2
    den = params.mass * (v * v - vs2)
    if abs(v * v - vs2) <= 1e-12 * vs2:
        raise SonicSingularityError(
            f"wave speed |v|={abs(v):.12g} equals the sound velocity sqrt(w/m)={math.sqrt(vs2):.12g}")
    return den


def gamma_coefficient(v: float, params: ModelParams) -> float:
    """gamma = 2 chi^2 / (m (v^2 - v_s^2)); equals -2 chi^2 / w at v = 0."""
    return 2 * params.coupling_chi**2 / _sonic_denominator(float(v), params)


def sigma_profile(psi: np.ndarray, v: float, params: ModelParams) -> np.ndarray:
    """Zero-mean strain slaved to a profile moving at speed v."""
    rho = np.abs(psi) ** 2
    return (2 * params.coupling_chi / _sonic_denominator(float(v), params)) * (rho - rho.mean())


@dataclass(frozen=True)
class TravelingWaveProblem:
    wave_speed: float
    params: ModelParams
    grid: SpectralGrid
    dispersion_mode: str = "fractional"
    gamma: float = field(init=False)

    def __post_init__(self):
        if self.dispersion_mode not in DISPERSION_MODES:
            raise ParameterDomainError(f"dispersion_mode must be one of {DISPERSION_MODES}")
        object.__setattr__(self, "wave_speed", float(self.wave_speed))
        object.__setattr__(self, "gamma", gamma_coefficient(self.wave_speed, self.params))
        # fail early on exponents outside the mode's regime
        self.coefficient

    @property
    def coefficient(self) -> float:
        p = self.params
        if self.dispersion_mode == "fractional":
            return fractional_coefficient(p)
        if self.dispersion_mode == "hilbert":
            return math.pi * p.interaction_J
        return quadratic_coefficient(p)

    @property
    def v_sound(self) -> float:
        return self.params.sound_speed

    def omega(self) -> np.ndarray:
        k = np.abs(self.grid.wavenumbers)
        if self.dispersion_mode == "fractional":
            return self.coefficient * k ** (self.params.exponent_s - 1)
        if self.dispersion_mode == "hilbert":
            return self.coefficient * k
        return self.coefficient * k**2

    def linear_symbol(self, frequency_shift: float = 0.0) -> np.ndarray:
        """L(k) = Omega(k) - hbar v k - mu (Nyquist advection term dropped)."""
        advect = -1j * self.params.hbar * self.wave_speed * first_derivative_symbol(self.grid)
        return self.omega() - advect.real - frequency_shift

    def scenario(self) -> cs.ScenarioSpec:
        """Time-dependent model whose rigidly moving solutions obey the profile equation."""
        kind = {"fractional": cs.ScenarioKind.FRACTIONAL_ZAKHAROV,
                "hilbert": cs.ScenarioKind.HILBERT_ZAKHAROV,
                "quadratic": cs.ScenarioKind.GENERAL_NONLOCAL}[self.dispersion_mode]
        return cs.ScenarioSpec(kind)


def fgl_residual(phi: np.ndarray, problem: TravelingWaveProblem, frequency_shift: float = 0.0) -> np.ndarray:
    """R = mu phi - i hbar v phi' - Omega phi - gamma |phi|^2 phi, evaluated spectrally.

    For a plane wave a e^{iq zeta}: R = (mu + hbar v q - Omega(q) - gamma a^2) a e^{iq zeta}.
    """
    phi = np.asarray(phi, dtype=complex)
    linear = np.fft.ifft(-problem.linear_symbol(frequency_shift) * np.fft.fft(phi))
    return linear - problem.gamma * np.abs(phi) ** 2 * phi


def plane_wave_amplitude(problem: TravelingWaveProblem, q: float, frequency_shift: float = 0.0) -> float:
    """a with a^2 = (mu + hbar v q - Omega(q)) / gamma; raises if no real amplitude exists."""
    p = problem.params
    if problem.dispersion_mode == "fractional":
        om = problem.coefficient * abs(q) ** (p.exponent_s - 1)
    elif problem.dispersion_mode == "hilbert":
        om = problem.coefficient * abs(q)
    else:
        om = problem.coefficient * q * q
    if problem.gamma == 0:
        raise ParameterDomainError("plane-wave amplitude undefined for gamma = 0")
    a2 = (frequency_shift + p.hbar * problem.wave_speed * q - om) / problem.gamma
    if not a2 > 0:
        raise ParameterDomainError(f"no plane wave at q={q}: a^2 = {a2:.6g} <= 0")
    return math.sqrt(a2)


def carrier_wavenumber(problem: TravelingWaveProblem) -> float:
    """q minimizing Omega(k) - hbar v k (band bottom seen in the moving frame)."""
    hv = problem.params.hbar * problem.wave_speed
    c = problem.coefficient
    if problem.dispersion_mode == "hilbert":
        if abs(hv) > c:
            raise ParameterDomainError("hbar|v| > pi J: the Hilbert band has no bottom")
        return 0.0
    if problem.dispersion_mode == "quadratic":
        return hv / (2 * c)
    s = problem.params.exponent_s
    if hv == 0:
        return 0.0
    return math.copysign((abs(hv) / ((s - 1) * c)) ** (1 / (s - 2)), hv)


def band_bottom(problem: TravelingWaveProblem) -> float:
    """min over grid wavenumbers of Omega(k) - hbar v k."""
    return float(np.min(problem.linear_symbol(0.0)))


def carrier_wave(problem: TravelingWaveProblem, center: float = 0.0) -> np.ndarray:
    """exp(i q (zeta - center)) with q the grid wavenumber nearest to :func:`carrier_wavenumber`."""
    grid = problem.grid
    dk = 2 * math.pi / grid.length
    q = round(carrier_wavenumber(problem) / dk) * dk
    return np.exp(1j * q * (grid.x - center))


def localized_guess(problem: TravelingWaveProblem, amplitude: float = 1.0, width: float = 2.0,
                    center: float = 0.0) -> np.ndarray:
    """sech envelope on the carrier wave."""
    return amplitude / np.cosh((problem.grid.x - center) / width) * carrier_wave(problem, center)


@dataclass
class ProfileResult:
    phi: np.ndarray
    frequency_shift: float
    residual: float
    iterations: int
    method: str
    history: list = field(default_factory=list, repr=False)


def _sup(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def _petviashvili(problem, u, mu, tol, max_iter):
    L = problem.linear_symbol(mu)
    g = problem.gamma
    scale0 = _sup(u)
    history = []
    for it in range(1, max_iter + 1):
        u_hat = np.fft.fft(u)
        n_hat = np.fft.fft(-g * np.abs(u) ** 2 * u)
        num = float(np.real(np.vdot(u_hat, L * u_hat)))
        den = float(np.real(np.vdot(u_hat, n_hat)))
        if not (den > 0 and num > 0):
            raise TrivialAttractorError("stabilizing factor is not positive; no bright profile on this branch",
                                        _sup(fgl_residual(u, problem, mu)), it)
        M = num / den
        u = np.fft.ifft(M**1.5 * n_hat / L)
        if _sup(u) < 1e-12 * scale0:
            raise TrivialAttractorError("profile collapsed to zero", _sup(fgl_residual(u, problem, mu)), it)
        res = _sup(fgl_residual(u, problem, mu))
        history.append(res)
        if not math.isfinite(res):
            raise ConvergenceFailure("Petviashvili iteration diverged", res, it)
        if res < tol:
            return u, res, it, history
        if it >= 20 and res > 0.999 * min(history[-20:-10]):
            break  # stalled at round-off or on a slow manifold
    return u, history[-1] if history else math.inf, it, history


def _newton(problem, u, mu, tol, max_iter):
    M = u.size

    def f(x):
        r = fgl_residual(x[:M] + 1j * x[M:], problem, mu)
        return np.concatenate([r.real, r.imag])

    x0 = np.concatenate([u.real, u.imag])
    count = [0]

    def tick(x, fx):
        count[0] += 1

    try:
        x = optimize.newton_krylov(f, x0, f_tol=tol, maxiter=max_iter, method="lgmres", callback=tick)
    except (optimize.NoConvergence, ValueError, np.linalg.LinAlgError) as exc:
        x = exc.args[0] if exc.args and isinstance(exc.args[0], np.ndarray) else x0
    phi = x[:M] + 1j * x[M:]
    return phi, _sup(fgl_residual(phi, problem, mu)), count[0]


def solve_profile(problem: TravelingWaveProblem, initial_guess, frequency_shift: float = 0.0,
                  tol: float = 1e-10, max_iter: int = 500, method: str = "auto") -> ProfileResult:
    """Solve the profile equation from ``initial_guess``.

    ``method``: "petviashvili", "newton" (Newton-Krylov) or "auto"
    (Petviashvili when L(k) > 0 on the grid, Newton-Krylov to finish or
    as the fallback).
    """
    if method not in ("auto", "petviashvili", "newton"):
        raise ValueError(f"unknown method {method!r}")
    u = np.asarray(initial_guess, dtype=complex).copy()
    if u.shape != (problem.grid.points,):
        raise ParameterDomainError(f"initial guess must have shape ({problem.grid.points},)")
    if not _sup(u) > 0:
        raise TrivialAttractorError("initial guess is identically zero", 0.0, 0)
    if problem.gamma == 0:
        raise ParameterDomainError("gamma = 0 (chi = 0): the profile equation is linear")
    mu = float(frequency_shift)
    positive = bool(np.all(problem.linear_symbol(mu) > 0))
    if method == "petviashvili" and not positive:
        raise ParameterDomainError("Petviashvili needs L(k) = Omega - hbar v k - mu > 0 on every mode")
    iterations, history, used = 0, [], method
    res = math.inf
    if method == "petviashvili" or (method == "auto" and positive):
        u, res, iterations, history = _petviashvili(problem, u, mu, tol, max_iter)
        used = "petviashvili"
    if res >= tol and method != "petviashvili":
        u, res, extra = _newton(problem, u, mu, tol, max_iter)
        iterations += extra
        used = "newton" if used != "petviashvili" else "petviashvili+newton"
    if not res < tol:
        raise ConvergenceFailure(f"{used} did not reach tol={tol:g}", res, iterations)
    if _sup(u) < 1e-12:
        raise TrivialAttractorError("converged to the zero solution", res, iterations)
    _warn_boundary(u)
    return ProfileResult(u, mu, res, iterations, used, history)


def _warn_boundary(u: np.ndarray) -> None:
    amp = np.abs(u)
    peak = amp.max()
    if amp.min() < 0.5 * peak and max(amp[0], amp[-1]) > 1e-10 * peak:
        warnings.warn(f"profile has not decayed at the domain edge (|phi|/max = {max(amp[0], amp[-1]) / peak:.2e}); "
                      "enlarge the zeta domain", RuntimeWarning, stacklevel=3)


def profile_table(result: ProfileResult, problem: TravelingWaveProblem) -> dict[str, np.ndarray]:
    """Columns zeta, Re phi, Im phi, sigma for CSV output."""
    phi = result.phi
    return {"zeta": np.asarray(problem.grid.x), "re_phi": phi.real, "im_phi": phi.imag,
            "sigma": sigma_profile(phi, problem.wave_speed, problem.params)}


def profile_metadata(result: ProfileResult, problem: TravelingWaveProblem) -> dict:
    return {"wave_speed": problem.wave_speed, "v_sound": problem.v_sound, "gamma": problem.gamma,
            "s": problem.params.exponent_s, "dispersion_mode": problem.dispersion_mode,
            "frequency_shift": result.frequency_shift, "residual": result.residual,
            "iterations": result.iterations, "method": result.method}


def moving_state(phi: np.ndarray, problem: TravelingWaveProblem) -> cs.ContinuumState:
    """Continuum state whose strain and strain rate move rigidly with the profile."""
    grid = problem.grid
    sigma = sigma_profile(phi, problem.wave_speed, problem.params)
    rate = -problem.wave_speed * np.fft.ifft(first_derivative_symbol(grid) * np.fft.fft(sigma)).real
    return cs.ContinuumState(grid, phi, sigma, rate)


def shift_profile(phi: np.ndarray, grid: SpectralGrid, distance: float) -> np.ndarray:
    """phi(zeta - distance) by Fourier interpolation."""
    return np.fft.ifft(np.exp(-1j * grid.wavenumbers * distance) * np.fft.fft(phi))


def phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    """min over theta of ||a e^{i theta} - b|| / ||b||."""
    na2 = float(np.vdot(a, a).real)
    nb2 = float(np.vdot(b, b).real)
    d2 = max(na2 + nb2 - 2 * abs(np.vdot(b, a)), 0.0)
    return math.sqrt(d2 / nb2)


def translation_check(result: ProfileResult, problem: TravelingWaveProblem, transits: float = 1.0,
                      dt: float | None = None) -> dict:
    """Evolve the profile in the time-dependent model and measure its shape change.

    Returns the phase-aligned relative L2 distance to the rigidly shifted
    profile after ``transits`` domain lengths of travel.
    """
    v = problem.wave_speed
    if v == 0:
        raise ParameterDomainError("translation check needs a nonzero wave speed")
    grid = problem.grid
    t_end = transits * grid.length / abs(v)
    if dt is None:
        dt = min(0.4 / (problem.v_sound * grid.k_max), 0.05)
    n = max(1, math.ceil(t_end / dt))
    dt = t_end / n
    solver = cs.ContinuumSolver(grid, problem.params, problem.scenario(), dt)
    out = solver.run(moving_state(result.phi, problem), n)
    target = shift_profile(result.phi, grid, v * t_end)
    return {"time": t_end, "steps": n, "dt": dt,
            "l2_shape_change": phase_aligned_distance(out.psi, target),
            "norm_drift": abs(np.vdot(out.psi, out.psi).real / np.vdot(result.phi, result.phi).real - 1)}
