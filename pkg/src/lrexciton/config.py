"""Run configuration: JSON schema, defaults and physical-domain validation."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

import jsonschema
from scipy import special

from .continuum_sim import ScenarioKind, ScenarioSpec
from .errors import ParameterDomainError
from .model_core import ModelParams
from .spectral_ops import SpectralGrid

LATTICE = "Lattice"
TRAVELING_WAVE = "TravelingWave"
KINDS = [k.value for k in ScenarioKind] + [LATTICE, TRAVELING_WAVE]
FAMILIES = ["gaussian_packet", "plane_wave", "sech_soliton", "zero"]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


SCHEMA = _obj({
    "scenario": _obj({
        "kind": {"enum": KINDS},
        "dispersion_mode": {"enum": ["asymptotic", "exact_gap"]},
        "nonlinearity_g": {"type": ["number", "null"]},
        "lambda_shift": _num,
        "source_prefactor": _num,
        "hilbert_normalized": {"type": "boolean"},
        "literal_nonlinearity": {"type": "boolean"},
        "potential": {"enum": ["average", "start"]},
    }, required=["kind"]),
    "params": _obj({
        "hbar": _pos, "mass": _pos, "elasticity": _pos, "coupling_chi": _num,
        "site_energy": _num, "interaction_J": _num, "exponent_s": _num,
    }),
    "grid": _obj({"length": _pos, "points": {"type": "integer"}, "origin": {"type": ["number", "null"]}}),
    "lattice": _obj({
        "sites": {"type": "integer"},
        "boundary": {"enum": ["periodic", "open"]},
        "interaction_cutoff": {"type": ["integer", "null"]},
        "source_stencil": {"enum": ["hamiltonian", "forward", "symmetric"]},
        "source_prefactor": _num,
        "use_fft": {"type": "boolean"},
    }),
    "traveling_wave": _obj({
        "wave_speed": {"type": ["number", "null"]},
        "speed_fraction": {"type": ["number", "null"]},
        "dispersion_mode": {"enum": ["fractional", "hilbert", "quadratic"]},
        "frequency_shift": {"type": ["number", "null"]},
        "detuning": _pos,
        "carrier": {"type": "boolean"},
        "guess_noise": {"type": "number", "minimum": 0},
        "method": {"enum": ["auto", "petviashvili", "newton"]},
        "tol": _pos,
        "max_iter": {"type": "integer", "minimum": 1},
        "check_translation": {"type": "boolean"},
        "transits": _pos,
    }),
    "initial_condition": _obj({
        "family": {"enum": FAMILIES},
        "x0": _num, "width": _pos, "k0": _num, "amplitude": _num, "eta": _pos,
        "sigma": {"enum": ["zero", "stationary"]},
    }),
    "integrator": _obj({
        "dt": _pos, "t_end": _pos,
        "snapshot_every": {"type": ["number", "null"]},
        "series_every": {"type": ["number", "null"]},
    }),
    "outputs": _obj({"directory": {"type": "string"}, "snapshots": {"type": "boolean"},
                     "series": {"type": "boolean"}}),
    "seed": {"type": "integer"},
}, required=["scenario"])

DEFAULTS = {
    "scenario": {"dispersion_mode": "asymptotic", "nonlinearity_g": None, "lambda_shift": 0.0,
                 "source_prefactor": 2.0, "hilbert_normalized": True, "literal_nonlinearity": False,
                 "potential": "average"},
    "params": ModelParams().to_dict(),
    "grid": {"length": 128.0, "points": 256, "origin": None},
    "lattice": {"sites": 256, "boundary": "periodic", "interaction_cutoff": None,
                "source_stencil": "hamiltonian", "source_prefactor": 1.0, "use_fft": False},
    "traveling_wave": {"wave_speed": None, "speed_fraction": None, "dispersion_mode": "fractional",
                       "frequency_shift": None, "detuning": 0.5, "carrier": True, "guess_noise": 0.0,
                       "method": "auto", "tol": 1e-10, "max_iter": 500, "check_translation": False,
                       "transits": 1.0},
    "initial_condition": {"family": "gaussian_packet", "x0": 0.0, "width": 4.0, "k0": 0.0,
                          "amplitude": 1.0, "eta": 1.0, "sigma": "zero"},
    "integrator": {"dt": 0.01, "t_end": 1.0, "snapshot_every": None, "series_every": None},
    "outputs": {"directory": "output", "snapshots": True, "series": True},
    "seed": 0,
}


class ConfigError(ValueError):
    """Invalid configuration; ``violations`` lists every problem found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))


@dataclass
class RunConfig:
    resolved: dict
    kind: str
    params: ModelParams
    grid: SpectralGrid | None
    scenario: ScenarioSpec | None
    dt: float
    n_steps: int
    series_steps: int
    snapshot_steps: int


def _zeta_or_inf(s: float) -> float:
    return float(special.zeta(s)) if s > 1 else math.inf


def _multiple(every, dt, name, out) -> int:
    if every is None:
        return 0
    ratio = every / dt
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-12 * max(1.0, ratio):
        out.append(f"integrator.{name}={every!r} must be a positive multiple of dt={dt!r}")
        return 0
    return n


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_text(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from None


def parse_config(text_or_dict) -> RunConfig:
    raw = parse_text(text_or_dict) if isinstance(text_or_dict, str) else text_or_dict
    raw = copy.deepcopy(raw)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    problems = [f"{'.'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
    if any(e.validator != "additionalProperties" for e in errors):
        raise ConfigError(problems)
    # unknown keys are reported but do not hide the physical-domain checks below
    for e in errors:
        for key in [k for k in e.instance if k not in e.schema["properties"]]:
            del e.instance[key]
    cfg = _merge(DEFAULTS, raw)
    kind = cfg["scenario"]["kind"]
    if kind not in (LATTICE, TRAVELING_WAVE):
        # defaults of inactive sections are dropped so the manifest shows what ran
        for name in ("lattice", "traveling_wave"):
            if name in raw:
                problems.append(f"{name}: section not used by kind {kind}")
            cfg.pop(name)
    elif kind == LATTICE:
        for name in ("grid", "traveling_wave"):
            if name in raw:
                problems.append(f"{name}: section not used by kind {kind}")
            cfg.pop(name)
    else:
        cfg.pop("lattice")
        if "lattice" in raw:
            problems.append("lattice: section not used by kind TravelingWave")
        cfg.pop("integrator")
        if "integrator" in raw:
            problems.append("integrator: section not used by kind TravelingWave")

    if kind in (LATTICE, TRAVELING_WAVE):
        extra = sorted(set(raw["scenario"]) - {"kind"})
        if extra:
            problems.append(f"scenario: options {extra} apply to continuum kinds only")
        cfg["scenario"] = {"kind": kind}

    params = None
    p = cfg["params"]
    if not p["exponent_s"] > 1:
        problems.append(f"params.exponent_s={p['exponent_s']!r}: must exceed 1 (the lattice sum J(0) diverges)")
    try:
        params = ModelParams(**p)
    except ParameterDomainError as exc:
        problems.append(f"params: {exc}")

    grid = None
    if "grid" in cfg:
        g = cfg["grid"]
        try:
            grid = SpectralGrid(float(g["length"]), int(g["points"]), g["origin"])
        except ParameterDomainError as exc:
            problems.append(f"grid: {exc}")

    spec = None
    if kind in [k.value for k in ScenarioKind]:
        sc = dict(cfg["scenario"])
        sc.pop("kind")
        spec = ScenarioSpec(ScenarioKind(kind), **sc)
        if params is not None:
            problems += [f"scenario: {m}" for m in spec.violations(params)]
        if grid is not None and spec.dispersion_mode == "exact_gap" and grid.dx < 1 - 1e-12:
            problems.append(f"scenario: exact_gap needs grid spacing dx >= 1 (lattice constant), got {grid.dx:.6g}")

    dt = n_steps = series_steps = snapshot_steps = 0
    if "integrator" in cfg:
        it = cfg["integrator"]
        dt = float(it["dt"])
        n_steps = max(1, math.ceil(it["t_end"] / dt - 1e-9))
        series_steps = _multiple(it["series_every"], dt, "series_every", problems) if it["series_every"] else 1
        snapshot_steps = _multiple(it["snapshot_every"], dt, "snapshot_every", problems) if it["snapshot_every"] \
            else n_steps
        if spec is not None and spec.kind.is_zakharov and params is not None and grid is not None:
            limit = 0.5 / (params.sound_speed * grid.k_max)
            if dt > limit * (1 + 1e-12):
                problems.append(f"integrator.dt={dt!r} violates the phonon guard dt <= 0.5/(v k_max) = {limit:.6g}")

    if kind == LATTICE:
        lat = cfg["lattice"]
        if lat["sites"] < 2:
            problems.append("lattice.sites must be >= 2")
        cut = lat["interaction_cutoff"]
        if cut is not None and cut < 1:
            problems.append("lattice.interaction_cutoff must be >= 1")
        elif cut is not None and lat["boundary"] == "periodic" and not cut < lat["sites"] / 2:
            problems.append(f"lattice.interaction_cutoff={cut} must be < sites/2 on a periodic chain")
        if params is not None and dt:
            exc_scale = abs(params.site_energy) + 2 * abs(params.interaction_J) * _zeta_or_inf(params.exponent_s)
            bound = 0.5 * min(params.hbar / exc_scale if exc_scale else math.inf,
                              math.sqrt(params.mass / params.elasticity) / 2)
            if dt > bound * (1 + 1e-12):
                problems.append(f"integrator.dt={dt!r} exceeds the RK4 stability bound {bound:.6g} "
                                "for the initial state")
        if cfg["initial_condition"]["sigma"] != "zero":
            problems.append("initial_condition.sigma applies to continuum runs only")

    if kind == TRAVELING_WAVE:
        tw = cfg["traveling_wave"]
        if (tw["wave_speed"] is None) == (tw["speed_fraction"] is None):
            problems.append("traveling_wave: give exactly one of wave_speed, speed_fraction")
        elif params is not None:
            v = tw["wave_speed"] if tw["wave_speed"] is not None else tw["speed_fraction"] * params.sound_speed
            if abs(v * v - params.sound_speed**2) <= 1e-12 * params.sound_speed**2:
                problems.append(f"traveling_wave: wave speed |v|={abs(v):.12g} equals the sound velocity "
                                f"sqrt(w/m) (sonic singularity of the strain slaving)")
            s = params.exponent_s
            mode = tw["dispersion_mode"]
            if mode == "fractional" and not 2 < s < 3:
                problems.append(f"traveling_wave: fractional dispersion requires 2 < s < 3 (got s={s})"
                                + ("; D_s is singular at s=3" if s == 3 else ""))
            if mode == "hilbert" and s != 2:
                problems.append(f"traveling_wave: hilbert dispersion requires s = 2 (got s={s})")
            if mode == "quadratic" and not s > 3:
                problems.append(f"traveling_wave: quadratic dispersion requires s > 3 (got s={s})")
            if params.coupling_chi == 0:
                problems.append("traveling_wave: coupling_chi = 0 leaves no nonlinearity to balance dispersion")
        if cfg["initial_condition"]["family"] == "zero":
            problems.append("traveling_wave: the initial guess must be nonzero")

    if problems:
        raise ConfigError(problems)
    return RunConfig(cfg, kind, params, grid, spec, dt, n_steps, series_steps, snapshot_steps)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
