"""Execute a validated :class:`RunConfig` and write its data products.

Products in the run directory:

``series.csv``
    one row per ``series_every`` interval (header row, fixed column order).
``snapshot_NNNNNN.csv`` + ``snapshot_NNNNNN.json``
    field dump at step NNNNNN and its metadata sidecar.
``manifest.json``
    resolved configuration, version, timing and status.  It says
    ``"running"`` while the run is in progress and is rewritten as
    ``"success"`` or ``"failed"`` (with the failing step) at the end.

Floats are printed with 17 significant digits, so identical configs give
identical CSV bytes.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import os
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import continuum_sim as cs
from . import lattice_sim as ls
from . import traveling_wave as tw
from .config import LATTICE, TRAVELING_WAVE, RunConfig
from .errors import ConfigurationError, ConvergenceFailure, SimulationDivergence

OUTPUT_ROOT_ENV = "LREXCITON_OUTPUT_ROOT"


def fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


class CsvWriter:
    """Line-buffered CSV writer so partial output survives a failed run."""

    def __init__(self, path: Path, header):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self._fh.write(",".join(header) + "\n")
        self._fh.flush()

    def row(self, values):
        self._fh.write(",".join(fmt(v) for v in values) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


def write_table(path: Path, columns: dict) -> None:
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    w = CsvWriter(path, names)
    for i in range(len(data[0]) if data else 0):
        w.row([col[i] for col in data])
    w.close()


def write_json(path: Path, obj) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    os.replace(tmp, path)


def resolve_directory(directory: str | os.PathLike) -> Path:
    path = Path(directory)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# -- initial conditions ------------------------------------------------------


def continuum_initial(cfg: RunConfig) -> cs.ContinuumState:
    ic, grid, p = cfg.resolved["initial_condition"], cfg.grid, cfg.params
    fam = ic["family"]
    x = grid.x
    if fam == "gaussian_packet":
        psi = cs.gaussian_packet(grid, ic["x0"], ic["width"], ic["k0"], ic["amplitude"])
    elif fam == "plane_wave":
        psi = cs.plane_wave(grid, ic["k0"], ic["amplitude"])
    elif fam == "sech_soliton":
        kappa = ic["eta"]
        if cfg.scenario.kind is cs.ScenarioKind.CLASSICAL_NLS:
            kappa = ic["eta"] * cs.nls_soliton_kappa(p, cs.resolved_nonlinearity(p, cfg.scenario))
        psi = cs.sech_soliton(grid, ic["eta"], ic["x0"], kappa) * np.exp(1j * ic["k0"] * x)
    else:
        psi = np.zeros(grid.points, dtype=complex)
    sigma = cs.stationary_sigma(psi, p) if ic["sigma"] == "stationary" else None
    return cs.ContinuumState.from_psi(grid, psi, sigma)


def lattice_coordinates(sites: int) -> np.ndarray:
    """Site n sits at x = n - L//2, matching a dx = 1 continuum grid centred on 0."""
    return np.arange(sites, dtype=float) - sites // 2


def lattice_initial(cfg: RunConfig) -> ls.LatticeState:
    ic, L = cfg.resolved["initial_condition"], cfg.resolved["lattice"]["sites"]
    x = lattice_coordinates(L)
    fam = ic["family"]
    if fam == "gaussian_packet":
        psi = ic["amplitude"] * np.exp(-((x - ic["x0"]) ** 2) / (2 * ic["width"] ** 2)) * np.exp(1j * ic["k0"] * x)
    elif fam == "plane_wave":
        psi = ic["amplitude"] * np.exp(1j * ic["k0"] * x)
    elif fam == "sech_soliton":
        psi = ic["eta"] / np.cosh(ic["eta"] * (x - ic["x0"])) * np.exp(1j * ic["k0"] * x)
    else:
        psi = np.zeros(L, dtype=complex)
    return ls.LatticeState(psi, np.zeros(L), np.zeros(L))


# -- per-kind drivers ----------------------------------------------------------


def _snapshot(outdir: Path, step: int, t: float, cfg: RunConfig, columns: dict, products: list):
    stem = f"snapshot_{step:06d}"
    write_table(outdir / f"{stem}.csv", columns)
    header = {"step": step, "time": t, "kind": cfg.kind, "columns": list(columns),
              "params": cfg.resolved["params"]}
    for section in ("grid", "lattice"):
        if section in cfg.resolved:
            header[section] = cfg.resolved[section]
    write_json(outdir / f"{stem}.json", header)
    products += [f"{stem}.csv", f"{stem}.json"]


def _run_continuum(cfg: RunConfig, outdir: Path, products: list, progress: dict):
    p, spec = cfg.params, cfg.scenario
    state = continuum_initial(cfg)
    solver = cs.ContinuumSolver(cfg.grid, p, spec, cfg.dt)
    out = cfg.resolved["outputs"]
    series = CsvWriter(outdir / "series.csv", ["step", "t", "norm", "hamiltonian", "momentum", "max_density"]) \
        if out["series"] else None
    if series:
        products.append("series.csv")

    def emit(step, st):
        progress["step"], progress["time"] = step, st.time
        if series and step % cfg.series_steps == 0:
            o = cs.observables(st, p, spec)
            series.row([step, st.time, o["norm"], o["hamiltonian"], o["momentum"], o["max_density"]])
        if out["snapshots"] and step % cfg.snapshot_steps == 0:
            _snapshot(outdir, step, st.time, cfg,
                      {"x": cfg.grid.x, "re_psi": st.psi.real, "im_psi": st.psi.imag,
                       "sigma": st.sigma, "sigma_rate": st.sigma_rate}, products)

    try:
        emit(0, state)
        every = math.gcd(cfg.series_steps if series else 0, cfg.snapshot_steps if out["snapshots"] else 0)
        state = solver.run(state, cfg.n_steps, every=every or cfg.n_steps, callback=emit)
    finally:
        if series:
            series.close()
    return {"final_time": state.time, "steps": cfg.n_steps}


def _run_lattice(cfg: RunConfig, outdir: Path, products: list, progress: dict):
    p, lat = cfg.params, cfg.resolved["lattice"]
    topo = ls.LatticeTopology(lat["boundary"], lat["interaction_cutoff"])
    system = ls.get_system(lat["sites"], p, topo, source_stencil=lat["source_stencil"],
                           source_prefactor=lat["source_prefactor"], use_fft=lat["use_fft"])
    state = lattice_initial(cfg)
    out = cfg.resolved["outputs"]
    x = lattice_coordinates(lat["sites"])
    series = CsvWriter(outdir / "series.csv",
                       ["step", "t", "norm", "E_total", "E_ex", "E_ph", "E_int", "max_density", "Lambda"]) if out["series"] else None
    if series:
        products.append("series.csv")

    def emit(step, st):
        if series and step % cfg.series_steps == 0:
            ex, ph, it = system.energy_exciton(st), system.energy_phonon(st), system.energy_interaction(st)
            series.row([step, st.time, ls.norm(st), ex + ph + it, ex, ph, it,
                        float(np.max(np.abs(st.psi) ** 2)), system.lambda_term(st)])
        if out["snapshots"] and step % cfg.snapshot_steps == 0:
            _snapshot(outdir, step, st.time, cfg,
                      {"n": np.arange(lat["sites"]), "x": x, "re_psi": st.psi.real, "im_psi": st.psi.imag,
                       "xi": st.xi, "eta": st.eta}, products)

    try:
        emit(0, state)
        for step in range(1, cfg.n_steps + 1):
            progress["step"] = step
            state = system.step_rk4(state, cfg.dt, step_index=step)
            progress["time"] = state.time
            emit(step, state)
    finally:
        if series:
            series.close()
    return {"final_time": state.time, "steps": cfg.n_steps}


def traveling_problem(cfg: RunConfig) -> tw.TravelingWaveProblem:
    t = cfg.resolved["traveling_wave"]
    v = t["wave_speed"] if t["wave_speed"] is not None else t["speed_fraction"] * cfg.params.sound_speed
    return tw.TravelingWaveProblem(v, cfg.params, cfg.grid, t["dispersion_mode"])


def _run_traveling(cfg: RunConfig, outdir: Path, products: list, progress: dict):
    t, ic = cfg.resolved["traveling_wave"], cfg.resolved["initial_condition"]
    problem = traveling_problem(cfg)
    grid = cfg.grid
    x = grid.x
    if ic["family"] == "gaussian_packet":
        guess = ic["amplitude"] * np.exp(-((x - ic["x0"]) ** 2) / (2 * ic["width"] ** 2)) * np.exp(1j * ic["k0"] * x)
    elif ic["family"] == "sech_soliton":
        guess = ic["eta"] / np.cosh(ic["eta"] * (x - ic["x0"])) * np.exp(1j * ic["k0"] * x)
    else:
        guess = ic["amplitude"] * np.exp(1j * ic["k0"] * x)
    if t["carrier"] and ic["family"] != "plane_wave":
        guess = guess * tw.carrier_wave(problem, ic["x0"])
    if t["guess_noise"] > 0:
        rng = np.random.default_rng(cfg.resolved["seed"])
        guess = guess + t["guess_noise"] * (rng.standard_normal(grid.points) + 1j * rng.standard_normal(grid.points))
    mu = t["frequency_shift"] if t["frequency_shift"] is not None else tw.band_bottom(problem) - t["detuning"]
    result = tw.solve_profile(problem, guess, mu, tol=t["tol"], max_iter=t["max_iter"], method=t["method"])
    progress["step"] = result.iterations
    write_table(outdir / "series.csv", {"iteration": np.arange(1, len(result.history) + 1),
                                        "residual": np.asarray(result.history, dtype=float)})
    write_table(outdir / "profile.csv", tw.profile_table(result, problem))
    meta = tw.profile_metadata(result, problem)
    if t["check_translation"]:
        meta["translation"] = tw.translation_check(result, problem, t["transits"])
    write_json(outdir / "profile.json", meta)
    products += ["series.csv", "profile.csv", "profile.json"]
    summary = {"residual": result.residual, "iterations": result.iterations, "method": result.method}
    if "translation" in meta:
        summary["translation"] = meta["translation"]
    return summary


_DRIVERS = {LATTICE: _run_lattice, TRAVELING_WAVE: _run_traveling}


def run(cfg: RunConfig, directory=None) -> tuple[int, Path]:
    """Run ``cfg``; returns (exit status, output directory).  0 success, 3 runtime failure."""
    outdir = resolve_directory(directory if directory is not None else cfg.resolved["outputs"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "status": "running",
        "version": __version__,
        "config": cfg.resolved,
        "derived": {"kind": cfg.kind, "dt": cfg.dt, "n_steps": cfg.n_steps,
                    "series_every_steps": cfg.series_steps, "snapshot_every_steps": cfg.snapshot_steps},
        "started_at": _now(),
        "products": [],
    }
    write_json(outdir / "manifest.json", manifest)
    products: list[str] = []
    progress = {"step": 0, "time": 0.0}
    driver = _DRIVERS.get(cfg.kind, _run_continuum)
    t0 = time.perf_counter()
    status = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            manifest["result"] = driver(cfg, outdir, products, progress)
            manifest["status"] = "success"
        except (SimulationDivergence, ConvergenceFailure, ConfigurationError, FloatingPointError) as exc:
            status = 3
            step = getattr(exc, "step", None)
            manifest["status"] = "failed"
            manifest["failure"] = {"type": type(exc).__name__, "message": str(exc),
                                   "step": progress["step"] if step is None else step,
                                   "time": progress["time"]}
        except BaseException as exc:
            manifest["status"] = "failed"
            manifest["failure"] = {"type": type(exc).__name__, "message": str(exc),
                                   "step": progress["step"], "time": progress["time"]}
            manifest["products"] = products
            manifest["finished_at"] = _now()
            write_json(outdir / "manifest.json", manifest)
            raise
    manifest["warnings"] = [str(w.message) for w in caught]
    manifest["products"] = products
    manifest["finished_at"] = _now()
    manifest["wall_seconds"] = time.perf_counter() - t0
    write_json(outdir / "manifest.json", manifest)
    return status, outdir
