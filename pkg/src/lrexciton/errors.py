"""Exception types shared by the solvers and the CLI."""

from __future__ import annotations


class ParameterDomainError(ValueError):
    """A physical parameter lies outside the domain an operation supports."""


class SumDivergenceError(ParameterDomainError):
    """The lattice sum for J(0) diverges (exponent s <= 1)."""


class SingularityError(ParameterDomainError):
    """A closed-form coefficient is singular at the requested parameters."""


class UnsupportedRegimeError(ParameterDomainError):
    """No small-k asymptote is implemented for this exponent."""


class SonicSingularityError(SingularityError):
    """Wave speed equals the sound velocity sqrt(w/m)."""


class AliasingError(ValueError):
    """Grid wavenumbers leave the lattice Brillouin zone |k| <= pi."""


class ConfigurationError(ValueError):
    """Integrator or scenario settings are inconsistent (CFL guard, kind/exponent mismatch)."""


class SimulationDivergence(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, field: str, step: int, time: float | None = None):
        self.field = field
        self.step = step
        self.time = time
        msg = f"non-finite values in {field!r} at step {step}"
        if time is not None:
            msg += f" (t={time:.6g})"
        super().__init__(msg)


class ConvergenceFailure(RuntimeError):
    """An iterative profile solver exhausted its iteration budget."""

    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")


class TrivialAttractorError(ConvergenceFailure):
    """The iteration collapsed onto the zero solution."""
