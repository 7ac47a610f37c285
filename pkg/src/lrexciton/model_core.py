"""Power-law coupling, lattice dispersion J(k) and the gap G(k) = J(0) - J(k).

The lattice sums are evaluated as a direct head sum over ``1 <= n < N`` plus an
Euler-Maclaurin tail for ``n >= N``.  The tail integral is an exponential
integral ``E_s`` of imaginary argument (mpmath); boundary corrections are
summed in closed form, so the result is accurate for every ``k`` in
``[-pi, pi]`` including ``k -> 0`` where ``G`` is tiny.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, special

from .errors import (
    ParameterDomainError,
    SingularityError,
    SumDivergenceError,
    UnsupportedRegimeError,
)

DEFAULT_TOL = 1e-12
_HEAD_TERMS = 64
_MAX_HEAD_TERMS = 1 << 16
_MAX_EM_ORDER = 40


@dataclass(frozen=True)
class ModelParams:
    """Physical constants shared by every solver (model units)."""

    hbar: float = 1.0
    mass: float = 1.0
    elasticity: float = 1.0
    coupling_chi: float = 0.0
    site_energy: float = 0.0
    interaction_J: float = 1.0
    exponent_s: float = 2.5

    def __post_init__(self):
        bad = []
        for name in ("hbar", "mass", "elasticity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                bad.append(f"{name} must be finite and > 0 (got {value!r})")
        for name in ("coupling_chi", "site_energy", "interaction_J", "exponent_s"):
            if not math.isfinite(getattr(self, name)):
                bad.append(f"{name} must be finite")
        if bad:
            raise ParameterDomainError("; ".join(bad))

    @property
    def sound_speed(self) -> float:
        """v_s = sqrt(w/m)."""
        return math.sqrt(self.elasticity / self.mass)

    def replace(self, **changes) -> "ModelParams":
        return ModelParams(**{**asdict(self), **changes})

    def to_dict(self) -> dict:
        return asdict(self)


class RegimeTag(str, enum.Enum):
    HILBERT = "Hilbert"
    FRACTIONAL = "Fractional"
    LOGARITHMIC = "Logarithmic"
    QUADRATIC = "Quadratic"


@dataclass(frozen=True)
class Regime:
    """Small-k regime of G(k) and its leading coefficient.

    ``coefficient`` multiplies |k| (Hilbert), |k|^(s-1) (Fractional),
    -k^2 ln|k| (Logarithmic) or k^2 (Quadratic).
    """

    tag: RegimeTag
    coefficient: float


def require_convergent(s: float) -> None:
    if not s > 1:
        raise SumDivergenceError(
            f"exponent s={s!r}: the lattice sum J(0) = 2J*zeta(s) diverges for s <= 1"
        )


def coupling(n: int, m: int, params: ModelParams) -> float:
    """Exciton transfer amplitude J / |n - m|^s between sites n and m."""
    if n == m:
        raise ParameterDomainError("self-coupling is undefined (requires n != m)")
    return params.interaction_J / abs(n - m) ** params.exponent_s


# -- lattice sums ------------------------------------------------------------


@lru_cache(maxsize=64)
def _em_tables(s: float, N: int, order: int):
    """Derivatives of x^-s at N, binomial rows and Bernoulli weights."""
    r_max = 2 * order
    d = np.empty(r_max)
    d[0] = N ** (-s)
    for j in range(1, r_max):
        d[j] = -d[j - 1] * (s + j - 1) / N
    weights = np.array(
        [float(mpmath.bernoulli(2 * p) / mpmath.factorial(2 * p)) for p in range(1, order + 1)]
    )
    binom = [special.comb(r, np.arange(r + 1), exact=False) for r in range(r_max)]
    return d, weights, binom


def _tail_gap(k: float, s: float, N: int) -> tuple[float, float]:
    """Sum over n >= N of (1 - cos kn) n^-s, and the magnitude of the last EM term."""
    if k == 0.0:
        return 0.0, 0.0
    with mpmath.workdps(30):
        z = -1j * mpmath.mpf(k) * N
        integral = mpmath.mpf(N) ** (1 - s) * (1 / mpmath.mpf(s - 1) - mpmath.expint(s, z))
        integral = complex(integral)
    d, weights, binom = _em_tables(float(s), N, _MAX_EM_ORDER)
    ik = 1j * k
    phase = np.exp(ik * N)
    one_minus_phase = -np.expm1(ik * N)
    total = integral + one_minus_phase * d[0] / 2
    # f(x) = (1 - e^{ikx}) x^-s ; f^(r)(N) = d_r (1 - e^{ikN}) - e^{ikN} sum_{j<r} C(r,j)(ik)^(r-j) d_j
    ik_pow = ik ** np.arange(2 * _MAX_EM_ORDER)
    last = 0.0
    for p in range(1, _MAX_EM_ORDER + 1):
        r = 2 * p - 1
        j = np.arange(r)
        deriv = d[r] * one_minus_phase - phase * np.sum(binom[r][:r] * ik_pow[r - j] * d[j])
        term = -weights[p - 1] * deriv
        total += term
        last = abs(term)
        if last < 1e-18 * abs(total):
            break
    return float(total.real), float(last)


def _gap_unit(k: float, s: float, tol: float) -> float:
    """G(k) / (2J) = sum_{n>=1} (1 - cos kn) / n^s for scalar k."""
    k = abs(float(k))
    if k > math.pi:
        # 2pi-periodic in k
        k = abs(math.remainder(k, 2 * math.pi))
    if k == 0.0:
        return 0.0
    N = _HEAD_TERMS
    while True:
        n = np.arange(1, N, dtype=float)
        head = float(np.sum(2.0 * np.sin(0.5 * k * n) ** 2 / n**s))
        tail, last = _tail_gap(k, s, N)
        value = head + tail
        if last <= tol * abs(value) or N >= _MAX_HEAD_TERMS:
            return value
        N *= 4


@lru_cache(maxsize=200_000)
def _gap_unit_cached(k: float, s: float, tol: float) -> float:
    return _gap_unit(k, s, tol)


def _zeta(s: float) -> float:
    return float(special.zeta(s))


def spectral_gap(k, params: ModelParams, tol: float = DEFAULT_TOL):
    """G(k) = J(0) - J(k) = 2J * sum_{n>=1} (1 - cos kn) / n^s.

    Accepts a scalar or an array of wavenumbers; values outside [-pi, pi]
    are folded back (the lattice sum is 2pi-periodic).
    """
    s = params.exponent_s
    require_convergent(s)
    if not tol > 0:
        raise ParameterDomainError("tol must be > 0")
    scale = 2.0 * params.interaction_J
    k_arr = np.asarray(k, dtype=float)
    flat = np.abs(k_arr).ravel()
    out = np.array([_gap_unit_cached(float(kk), float(s), float(tol)) for kk in flat])
    out = scale * out.reshape(k_arr.shape)
    return float(out) if out.ndim == 0 else out


def lattice_dispersion(k, params: ModelParams, tol: float = DEFAULT_TOL):
    """J(k) = 2J * sum_{n>=1} cos(kn) / n^s, with J(0) = 2J*zeta(s)."""
    s = params.exponent_s
    require_convergent(s)
    j0 = 2.0 * params.interaction_J * _zeta(s)
    return j0 - spectral_gap(k, params, tol)


def lattice_dispersion_at_zero(params: ModelParams) -> float:
    require_convergent(params.exponent_s)
    return 2.0 * params.interaction_J * _zeta(params.exponent_s)


# -- small-k asymptotics -------------------------------------------------------


def fractional_coefficient(params: ModelParams) -> float:
    """D_s = pi J / (Gamma(s) sin(pi (s-1)/2)), valid for 2 <= s < 3."""
    s = params.exponent_s
    if s == 3:
        raise SingularityError(
            "D_s is singular at s=3 (sin(pi)=0); the logarithmic regime applies"
        )
    if not 2 <= s < 3:
        raise ParameterDomainError(f"D_s is defined for 2 <= s < 3 (got s={s!r})")
    return math.pi * params.interaction_J / (math.gamma(s) * math.sin(math.pi * (s - 1) / 2))


def quadratic_coefficient(params: ModelParams, convention: str = "half") -> float:
    """Coefficient of k^2 in G(k) for s > 3.

    ``convention="half"`` (default) gives J*zeta(s-2)/2, the conventional
    s > 3 coefficient; ``"lattice"`` gives J*zeta(s-2), the actual k -> 0 limit of
    G(k)/k^2 for the two-sided lattice sum.
    """
    s = params.exponent_s
    if not s > 3:
        raise ParameterDomainError(f"quadratic regime requires s > 3 (got s={s!r})")
    value = params.interaction_J * _zeta(s - 2)
    if convention == "half":
        return value / 2
    if convention == "lattice":
        return value
    raise ValueError(f"unknown convention {convention!r}")


def classify_regime(s: float, interaction_J: float = 1.0) -> Regime:
    require_convergent(s)
    params = ModelParams(interaction_J=interaction_J, exponent_s=s)
    if s == 2:
        return Regime(RegimeTag.HILBERT, math.pi * interaction_J)
    if 2 < s < 3:
        return Regime(RegimeTag.FRACTIONAL, fractional_coefficient(params))
    if s == 3:
        return Regime(RegimeTag.LOGARITHMIC, interaction_J)
    if s > 3:
        return Regime(RegimeTag.QUADRATIC, quadratic_coefficient(params))
    raise UnsupportedRegimeError(f"no small-k regime for 1 < s < 2 (got s={s!r})")


def asymptotic_gap(k, params: ModelParams, quadratic_convention: str = "half"):
    """Leading small-k form of G(k), dispatched on the regime of s."""
    s = params.exponent_s
    if s < 2:
        raise UnsupportedRegimeError(f"asymptotic form requires s >= 2 (got s={s!r})")
    regime = classify_regime(s, params.interaction_J)
    ak = np.abs(np.asarray(k, dtype=float))
    if regime.tag is RegimeTag.HILBERT:
        out = regime.coefficient * ak
    elif regime.tag is RegimeTag.FRACTIONAL:
        out = regime.coefficient * ak ** (s - 1)
    elif regime.tag is RegimeTag.LOGARITHMIC:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(ak > 0, -regime.coefficient * ak**2 * np.log(ak), 0.0)
    else:
        out = quadratic_coefficient(params, quadratic_convention) * ak**2
    return float(out) if np.ndim(out) == 0 else out


def gap_expansion(k, params: ModelParams, analytic_terms: int = 1):
    """Small-k series of G(k) for non-integer s > 2.

    From the polylogarithm expansion of the lattice sum:
    G(k) = D(s)|k|^(s-1) - 2J sum_{j>=1} (-1)^j zeta(s-2j) k^(2j) / (2j)!
    with D(s) = pi J / (Gamma(s) sin(pi(s-1)/2)).  ``analytic_terms`` even
    powers are kept; the first is J*zeta(s-2) k^2.  The series converges for
    |k| < 2 pi.
    """
    s, J = params.exponent_s, params.interaction_J
    if not s > 2 or float(s).is_integer():
        raise ParameterDomainError(f"expansion needs non-integer s > 2 (got s={s!r})")
    ak = np.abs(np.asarray(k, dtype=float))
    out = math.pi * J / (math.gamma(s) * math.sin(math.pi * (s - 1) / 2)) * ak ** (s - 1)
    for j in range(1, analytic_terms + 1):
        out = out - 2 * J * (-1) ** j * float(special.zeta(s - 2 * j)) * ak ** (2 * j) / math.factorial(2 * j)
    return float(out) if np.ndim(out) == 0 else out


# -- diagnostic kernel ---------------------------------------------------------


def kernel_K(x, params: ModelParams, grid) -> np.ndarray | float:
    """K(x) = (1/pi) * integral of e^{ikx} G(k)/k^2 over the grid's band |k| <= k_c.

    ``k_c`` is the largest wavenumber the grid resolves, capped at the
    Brillouin-zone edge pi.  Diagnostic only: the solvers apply G(k) in
    Fourier space.  Requires s > 2 (for s <= 2 the integrand is not
    integrable at k = 0).
    """
    s = params.exponent_s
    if not s > 2:
        raise UnsupportedRegimeError("K(x) diverges for s <= 2 (G(k)/k^2 ~ |k|^(s-3))")
    k_c = min(math.pi, float(np.max(np.abs(grid.wavenumbers))))

    def one(xv: float) -> float:
        if s < 3:
            # integrand = [cos(kx) G(k)/k^(s-1)] * k^(s-3); the bracket is bounded at 0
            def f(kk):
                return math.cos(kk * xv) * spectral_gap(kk, params) / kk ** (s - 1) if kk > 0 else (
                    fractional_coefficient(params)
                )

            val, _ = integrate.quad(f, 0.0, k_c, weight="alg", wvar=(s - 3, 0.0), limit=200,
                                    epsabs=1e-13, epsrel=1e-11)
        else:
            def f(kk):
                return math.cos(kk * xv) * spectral_gap(kk, params) / kk**2 if kk > 0 else 0.0

            val, _ = integrate.quad(f, 0.0, k_c, limit=400, epsabs=1e-13, epsrel=1e-11)
        return 2.0 * val / math.pi

    xs = np.asarray(x, dtype=float)
    out = np.array([one(float(v)) for v in xs.ravel()]).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out
