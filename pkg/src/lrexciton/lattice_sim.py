"""Semiclassical Davydov chain with power-law exciton transfer.

State variables per site: complex exciton amplitude ``psi``, displacement
``xi`` and momentum ``eta``.  Equations of motion::

    i hbar dpsi_n/dt = Lambda psi_n - sum_{m != n} J_{n-m} psi_m + chi (xi_{n+1} - xi_n) psi_n
    dxi_n/dt  = eta_n / m
    deta_n/dt = w (xi_{n+1} - 2 xi_n + xi_{n-1}) + chi * source_n

with Lambda = eps + phonon energy (time dependent).  ``source_n`` is selected
by ``source_stencil``:

``"hamiltonian"`` (default)
    |psi_n|^2 - |psi_{n-1}|^2, i.e. -dH_int/dxi_n for the interaction energy
    chi * sum (xi_{n+1} - xi_n)|psi_n|^2.  Conserves the total energy.
``"forward"``
    |psi_{n+1}|^2 - |psi_n|^2, the forward difference usually written for
    this model.  Does not conserve the energy below exactly.
``"symmetric"``
    (|psi_{n+1}|^2 - |psi_{n-1}|^2) / 2.

Periodic chains with no cutoff use the image-summed coupling
J * sum_q |d + qL|^-s (including the self-images of each site), which is the
infinite chain restricted to L-periodic data: plane waves on the ring then
see exactly the infinite-lattice J(k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import ConfigurationError, ParameterDomainError, SimulationDivergence
from .model_core import ModelParams, require_convergent

STENCILS = ("hamiltonian", "forward", "symmetric")


@dataclass
class LatticeState:
    psi: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        self.xi = np.asarray(self.xi, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        if not (self.psi.ndim == self.xi.ndim == self.eta.ndim == 1):
            raise ParameterDomainError("lattice fields must be one-dimensional")
        if not (len(self.psi) == len(self.xi) == len(self.eta)):
            raise ParameterDomainError("psi, xi and eta must have equal length")
        if len(self.psi) < 2:
            raise ParameterDomainError("a lattice needs at least 2 sites")

    @property
    def sites(self) -> int:
        return len(self.psi)

    @classmethod
    def zeros(cls, sites: int) -> "LatticeState":
        return cls(np.zeros(sites, complex), np.zeros(sites), np.zeros(sites))

    def copy(self) -> "LatticeState":
        return LatticeState(self.psi.copy(), self.xi.copy(), self.eta.copy(), self.time)


@dataclass(frozen=True)
class LatticeTopology:
    """Boundary condition and interaction range.

    ``interaction_cutoff=None`` couples all pairs (image-summed on a ring);
    an integer R keeps |n - m| <= R, using the minimum-image distance on a
    ring, where R < L/2 is required.
    """

    boundary: str = "periodic"
    interaction_cutoff: int | None = None

    def __post_init__(self):
        if self.boundary not in ("periodic", "open"):
            raise ParameterDomainError(f"boundary must be 'periodic' or 'open' (got {self.boundary!r})")
        if self.interaction_cutoff is not None and self.interaction_cutoff < 1:
            raise ParameterDomainError("interaction_cutoff must be >= 1")

    def validate(self, sites: int) -> None:
        R = self.interaction_cutoff
        if self.boundary == "periodic" and R is not None and not R < sites / 2:
            raise ParameterDomainError(f"periodic cutoff R={R} must satisfy R < L/2 = {sites / 2}")


def coupling_column(sites: int, params: ModelParams, topo: LatticeTopology) -> np.ndarray:
    """J_{d} for d = 0..L-1 on a ring.

    Without a cutoff the d = 0 entry holds the self-images n - m = qL,
    q != 0, i.e. 2 J zeta(s) L^-s; with a cutoff it is zero.
    """
    s, J = params.exponent_s, params.interaction_J
    require_convergent(s)
    d = np.arange(1, sites, dtype=float)
    col = np.zeros(sites)
    if topo.interaction_cutoff is None:
        q = d / sites
        col[1:] = J * sites ** (-s) * (special.zeta(s, q) + special.zeta(s, 1 - q))
        col[0] = 2 * J * special.zeta(s) * sites ** (-s)
    else:
        dmin = np.minimum(d, sites - d)
        col[1:] = np.where(dmin <= topo.interaction_cutoff, J / dmin**s, 0.0)
    return col


@lru_cache(maxsize=32)
def _coupling_matrix(sites: int, params: ModelParams, topo: LatticeTopology) -> np.ndarray:
    topo.validate(sites)
    n = np.arange(sites)
    if topo.boundary == "periodic":
        col = coupling_column(sites, params, topo)
        C = col[(n[:, None] - n[None, :]) % sites]
    else:
        dist = np.abs(n[:, None] - n[None, :]).astype(float)
        with np.errstate(divide="ignore"):
            C = params.interaction_J / dist**params.exponent_s
        C[dist == 0] = 0.0
        if topo.interaction_cutoff is not None:
            C[dist > topo.interaction_cutoff] = 0.0
    C.setflags(write=False)
    return C


@dataclass
class LatticeSystem:
    """Precomputed coupling data and right-hand side for one (params, topology, L)."""

    params: ModelParams
    topology: LatticeTopology
    sites: int
    source_stencil: str = "hamiltonian"
    source_prefactor: float = 1.0
    use_fft: bool = False
    rotating_frame: bool = True
    _C: np.ndarray = field(init=False, repr=False)
    _eig: np.ndarray | None = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.source_stencil not in STENCILS:
            raise ParameterDomainError(f"source_stencil must be one of {STENCILS}")
        if self.use_fft and self.topology.boundary != "periodic":
            raise ConfigurationError("the FFT hopping path needs a periodic chain")
        self._C = _coupling_matrix(self.sites, self.params, self.topology)
        if self.use_fft:
            self._eig = np.fft.fft(self._C[:, 0]).real
        # largest row sum; equals J(0) on a full periodic ring
        self.reference_energy = float(np.max(self._C.sum(axis=1)))
        self._bond_mask = np.ones(self.sites)
        if self.topology.boundary == "open":
            self._bond_mask[-1] = 0.0

    # -- building blocks --------------------------------------------------

    def hopping(self, psi: np.ndarray) -> np.ndarray:
        """sum_{m != n} J_{n-m} psi_m (over the infinite chain when image-summed)."""
        if self._eig is not None:
            return np.fft.ifft(self._eig * np.fft.fft(psi))
        return self._C @ psi

    def bonds(self, xi: np.ndarray) -> np.ndarray:
        """xi_{n+1} - xi_n (zero past the last site of an open chain)."""
        return (np.roll(xi, -1) - xi) * self._bond_mask

    def laplacian(self, xi: np.ndarray) -> np.ndarray:
        b = self.bonds(xi)
        return b - np.roll(b, 1)

    def source(self, rho: np.ndarray) -> np.ndarray:
        mask = self._bond_mask
        if self.source_stencil == "hamiltonian":
            out = rho * mask - np.roll(rho * mask, 1)
        elif self.source_stencil == "forward":
            out = (np.roll(rho, -1) - rho) * mask
        else:
            up = np.roll(rho, -1)
            down = np.roll(rho, 1)
            if self.topology.boundary == "open":
                up[-1] = 0.0
                down[0] = 0.0
            out = 0.5 * (up - down)
        return self.source_prefactor * out

    # -- energies ---------------------------------------------------------

    def energy_exciton(self, state: LatticeState) -> float:
        psi = state.psi
        return float(self.params.site_energy * np.sum(np.abs(psi) ** 2)
                     - np.real(np.vdot(psi, self.hopping(psi))))

    def energy_phonon(self, state: LatticeState) -> float:
        p = self.params
        b = self.bonds(state.xi)
        return float(np.sum(state.eta**2) / (2 * p.mass) + 0.5 * p.elasticity * np.sum(b**2))

    def energy_interaction(self, state: LatticeState) -> float:
        return float(self.params.coupling_chi * np.sum(self.bonds(state.xi) * np.abs(state.psi) ** 2))

    def total_energy(self, state: LatticeState) -> float:
        return self.energy_exciton(state) + self.energy_phonon(state) + self.energy_interaction(state)

    def lambda_term(self, state: LatticeState) -> float:
        """Lambda = eps + sum(eta^2/(2m) + (w/2)(xi_{n+1} - xi_n)^2)."""
        p = self.params
        eta, b = state.eta, self.bonds(state.xi)
        # separate code path from energy_phonon on purpose (cross-checked in tests)
        return p.site_energy + float(np.dot(eta, eta) / (2 * p.mass) + p.elasticity * np.dot(b, b) / 2)

    # -- dynamics ---------------------------------------------------------

    def rhs(self, state: LatticeState):
        """(dpsi/dt, dxi/dt, deta/dt) of the lattice equations in the lab frame."""
        dpsi, dxi, deta, _ = self._rhs_arrays(state.psi, state.xi, state.eta, frame_energy=None)
        return dpsi, dxi, deta

    def stable_dt(self, state: LatticeState) -> float:
        """0.5 * min(hbar / (|eps| + J(0) + |chi| max|dxi|), sqrt(m/w) / 2)."""
        p = self.params
        exc = abs(p.site_energy) + self.reference_energy + abs(p.coupling_chi) * float(
            np.max(np.abs(self.bonds(state.xi))))
        return 0.5 * min(p.hbar / exc if exc > 0 else math.inf, math.sqrt(p.mass / p.elasticity) / 2)

    def _rhs_arrays(self, psi, xi, eta, frame_energy):
        """Lab-frame derivatives when ``frame_energy`` is None.

        Otherwise psi is the rotated amplitude phi = exp(i theta) psi with
        hbar dtheta/dt = Lambda - frame_energy, so phi sees frame_energy in
        place of Lambda and the last entry is dtheta/dt.
        """
        p = self.params
        b = self.bonds(xi)
        lam = p.site_energy + float(np.dot(eta, eta) / (2 * p.mass) + p.elasticity * np.dot(b, b) / 2)
        diag = lam if frame_energy is None else frame_energy
        dpsi = -1j / p.hbar * (diag * psi - self.hopping(psi) + p.coupling_chi * b * psi)
        dxi = eta / p.mass
        deta = p.elasticity * (b - np.roll(b, 1)) + p.coupling_chi * self.source(np.abs(psi) ** 2)
        dtheta = 0.0 if frame_energy is None else (lam - frame_energy) / p.hbar
        return dpsi, dxi, deta, dtheta

    def step_rk4(self, state: LatticeState, dt: float, step_index: int = 0,
                 check_stability: bool = True) -> LatticeState:
        """Classical RK4 step.

        With ``rotating_frame`` the global phase generated by Lambda - J(0) is
        carried as an extra RK4 variable and applied exactly at the end of the
        step; the stiff uniform rotation never enters the RK4 amplitudes.
        """
        if not dt > 0:
            raise ConfigurationError("dt must be > 0")
        if check_stability:
            bound = self.stable_dt(state)
            if dt > bound * (1 + 1e-12):
                raise ConfigurationError(f"dt={dt:.6g} exceeds the stability bound {bound:.6g}")
        e_ref = self.reference_energy if self.rotating_frame else None

        def f(y):
            return self._rhs_arrays(y[0], y[1], y[2], e_ref)

        y0 = (state.psi, state.xi, state.eta, 0.0)
        k1 = f(y0)
        k2 = f([a + 0.5 * dt * b for a, b in zip(y0, k1)])
        k3 = f([a + 0.5 * dt * b for a, b in zip(y0, k2)])
        k4 = f([a + dt * b for a, b in zip(y0, k3)])
        phi, xi, eta, theta = (a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                               for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4))
        psi = phi * np.exp(-1j * theta) if self.rotating_frame else phi
        out = LatticeState(psi, xi, eta, state.time + dt)
        for name in ("psi", "xi", "eta"):
            if not np.all(np.isfinite(getattr(out, name))):
                raise SimulationDivergence(name, step_index, out.time)
        return out


@lru_cache(maxsize=32)
def _system(sites, params, topo, source_stencil, source_prefactor, use_fft, rotating_frame):
    return LatticeSystem(params, topo, sites, source_stencil, source_prefactor, use_fft, rotating_frame)


def get_system(state_or_sites, params: ModelParams, topo: LatticeTopology | None = None,
               source_stencil: str = "hamiltonian", source_prefactor: float = 1.0,
               use_fft: bool = False, rotating_frame: bool = True) -> LatticeSystem:
    sites = state_or_sites if isinstance(state_or_sites, int) else state_or_sites.sites
    return _system(sites, params, topo or LatticeTopology(), source_stencil,
                   float(source_prefactor), bool(use_fft), bool(rotating_frame))


# -- functional interface ----------------------------------------------------


def norm(state: LatticeState) -> float:
    """N = sum |psi_n|^2."""
    return float(np.sum(np.abs(state.psi) ** 2))


def lambda_term(state: LatticeState, params: ModelParams, topo: LatticeTopology | None = None) -> float:
    return get_system(state, params, topo).lambda_term(state)


def rhs(state: LatticeState, params: ModelParams, topo: LatticeTopology | None = None, **options):
    return get_system(state, params, topo, **options).rhs(state)


def step_rk4(state: LatticeState, params: ModelParams, topo: LatticeTopology | None, dt: float,
             **options) -> LatticeState:
    return get_system(state, params, topo, **options).step_rk4(state, dt)


def total_energy(state: LatticeState, params: ModelParams, topo: LatticeTopology | None = None,
                 **options) -> float:
    return get_system(state, params, topo, **options).total_energy(state)


def energy_parts(state: LatticeState, params: ModelParams, topo: LatticeTopology | None = None,
                 **options) -> dict[str, float]:
    sys_ = get_system(state, params, topo, **options)
    ex, ph, it = sys_.energy_exciton(state), sys_.energy_phonon(state), sys_.energy_interaction(state)
    return {"E_total": ex + ph + it, "E_ex": ex, "E_ph": ph, "E_int": it}


def integrate(state: LatticeState, system: LatticeSystem, dt: float, n_steps: int,
              every: int = 0, callback=None) -> LatticeState:
    """Advance ``n_steps`` RK4 steps; ``callback(step, state)`` runs every ``every`` steps."""
    for i in range(1, n_steps + 1):
        state = system.step_rk4(state, dt, step_index=i)
        if callback is not None and every and i % every == 0:
            callback(i, state)
    return state


def gaussian_packet(sites: int, x0: float, width: float, k0: float = 0.0, amplitude: float = 1.0,
                    normalize: bool = False) -> LatticeState:
    """psi_n = A exp(-(n - x0)^2 / (2 width^2)) exp(i k0 n), phonons at rest."""
    n = np.arange(sites, dtype=float)
    psi = amplitude * np.exp(-((n - x0) ** 2) / (2 * width**2)) * np.exp(1j * k0 * n)
    if normalize:
        psi /= np.sqrt(np.sum(np.abs(psi) ** 2))
    return LatticeState(psi, np.zeros(sites), np.zeros(sites))


def with_time(state: LatticeState, t: float) -> LatticeState:
    return replace(state, time=t)
