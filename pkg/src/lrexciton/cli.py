"""Command-line entry point: ``lrexciton {run,validate,dispersion,compare,sweep,schema}``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime
failure (divergence, non-convergence), 1 when ``validate`` finds a
failing invariant.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import continuum_sim as cs
from . import runner
from .comparison import ComparisonSetup, lattice_vs_continuum
from .errors import ParameterDomainError
from .model_core import ModelParams, asymptotic_gap, gap_expansion, spectral_gap

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _report_config_error(exc: cfgmod.ConfigError) -> int:
    print("configuration invalid:", file=sys.stderr)
    for v in exc.violations:
        print(f"  - {v}", file=sys.stderr)
    return EXIT_CONFIG


def _load(path: str) -> cfgmod.RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise cfgmod.ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return cfgmod.parse_config(text)


# -- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        cfg = _load(args.config)
    except cfgmod.ConfigError as exc:
        return _report_config_error(exc)
    status, outdir = runner.run(cfg, args.out)
    word = "success" if status == 0 else "failed"
    print(f"{word}: {outdir}")
    return status


# -- validate ----------------------------------------------------------------


def _check(results, name, value, limit):
    ok = bool(value < limit)
    results.append(ok)
    print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.3e} (limit {limit:g})")


def invariant_suite(cfg: cfgmod.RunConfig, steps: int = 200) -> bool:
    """Short invariant checks on the configured scenario; prints one line per check."""
    from . import lattice_sim as ls
    from . import spectral_ops as so
    from . import traveling_wave as tw

    results: list[bool] = []
    p = cfg.params
    n = min(steps, cfg.n_steps) if cfg.n_steps else steps
    if cfg.grid is not None:
        grid = cfg.grid
        rng = np.random.default_rng(cfg.resolved["seed"])
        f = rng.standard_normal(grid.points)
        fh = np.fft.fft(f)
        fh[0] = fh[grid.nyquist_index] = 0
        f = np.fft.ifft(fh).real
        hh = so.hilbert_transform(so.hilbert_transform(f, grid), grid)
        _check(results, "hilbert(hilbert(f)) + f", float(np.max(np.abs(hh + f))), 1e-12 * max(1, np.abs(f).max()))
        d2 = so.second_derivative(f, grid)
        scale = max(1.0, float(np.abs(d2).max()))
        _check(results, "riesz(2) - second derivative",
               float(np.max(np.abs(so.riesz_derivative(f, grid, 2.0) - d2))) / scale, 1e-12)
    if cfg.scenario is not None:
        state = runner.continuum_initial(cfg)
        n0 = cs.observables(state, p, cfg.scenario)["norm"]
        out = cs.ContinuumSolver(cfg.grid, p, cfg.scenario, cfg.dt).run(state, n)
        n1 = cs.observables(out, p, cfg.scenario)["norm"]
        _check(results, f"norm drift over {n} steps", abs(n1 - n0) / n0 if n0 else abs(n1), 1e-12)
    elif cfg.kind == cfgmod.LATTICE:
        lat = cfg.resolved["lattice"]
        system = ls.get_system(lat["sites"], p, ls.LatticeTopology(lat["boundary"], lat["interaction_cutoff"]),
                               source_stencil=lat["source_stencil"], source_prefactor=lat["source_prefactor"],
                               use_fft=lat["use_fft"])
        state = runner.lattice_initial(cfg)
        n0, e0 = ls.norm(state), system.total_energy(state)
        out = ls.integrate(state, system, cfg.dt, n)
        _check(results, f"norm drift over {n} steps", abs(ls.norm(out) - n0) / max(n0, 1e-300), 1e-8)
        _check(results, f"energy drift over {n} steps",
               abs(system.total_energy(out) - e0) / max(abs(e0), 1e-300), 1e-6)
        _check(results, "Lambda - phonon energy - eps",
               abs(system.lambda_term(out) - system.energy_phonon(out) - p.site_energy), 1e-10)
    else:
        problem = runner.traveling_problem(cfg)
        g0 = tw.gamma_coefficient(0.0, p) + cs.effective_nonlinearity(p)
        _check(results, "gamma(0) + effective nonlinearity", abs(g0), 1e-12)
        psi = cs.gaussian_packet(cfg.grid, 0.0, 2.0)
        _check(results, "sigma_profile(v=0) - stationary_sigma",
               float(np.max(np.abs(tw.sigma_profile(psi, 0.0, p) - cs.stationary_sigma(psi, p)))), 1e-12)
        phi = tw.localized_guess(problem)
        res = tw.fgl_residual(phi, problem)
        _check(results, "residual phase covariance",
               float(np.max(np.abs(tw.fgl_residual(phi * np.exp(0.7j), problem) - res * np.exp(0.7j)))), 1e-12)
    return all(results)


def cmd_validate(args) -> int:
    try:
        cfg = _load(args.config)
    except cfgmod.ConfigError as exc:
        return _report_config_error(exc)
    print(f"configuration valid: kind={cfg.kind}")
    if args.no_invariants:
        return EXIT_OK
    return EXIT_OK if invariant_suite(cfg, args.steps) else EXIT_INVARIANT


# -- dispersion ----------------------------------------------------------------


def dispersion_table(s: float, J: float, kmax: float, n: int, kmin: float | None = None,
                     spacing: str = "linear") -> dict[str, np.ndarray]:
    if n < 1 or not kmax > 0:
        raise ParameterDomainError("need n >= 1 and kmax > 0")
    params = ModelParams(interaction_J=J, exponent_s=s)
    lo = kmax / n if kmin is None else kmin
    k = np.geomspace(lo, kmax, n) if spacing == "log" else np.linspace(lo, kmax, n)
    gap = np.asarray(spectral_gap(k, params), dtype=float)
    try:
        asym = np.asarray(asymptotic_gap(k, params), dtype=float)
    except ParameterDomainError:
        asym = np.full(n, np.nan)
    try:
        two = np.asarray(gap_expansion(k, params, analytic_terms=1), dtype=float)
    except ParameterDomainError:
        two = np.full(n, np.nan)
    return {"k": k, "G": gap, "asymptote": asym, "two_term": two}


def _emit_table(table: dict, out: str | None) -> None:
    if out:
        path = runner.resolve_directory(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        runner.write_table(path, table)
        print(f"wrote {path}")
        return
    names = list(table)
    sys.stdout.write(",".join(names) + "\n")
    for row in zip(*(table[n] for n in names)):
        sys.stdout.write(",".join(runner.fmt(v) for v in row) + "\n")


def cmd_dispersion(args) -> int:
    try:
        table = dispersion_table(args.s, args.J, args.kmax, args.n, args.kmin, args.spacing)
    except ParameterDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit_table(table, args.out)
    return EXIT_OK


# -- compare -------------------------------------------------------------------


def cmd_compare(args) -> int:
    try:
        params = ModelParams(coupling_chi=args.chi, interaction_J=args.J, exponent_s=args.s,
                             mass=args.mass, elasticity=args.elasticity)
        setup = ComparisonSetup(params, args.sites, args.width, args.k0, args.amplitude,
                                args.t_end, args.dt, args.every)
        table = lattice_vs_continuum(setup)
    except (ParameterDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit_table(table, args.out)
    return EXIT_OK


# -- sweep ---------------------------------------------------------------------


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def _parse_assignment(text: str):
    if "=" not in text:
        raise cfgmod.ConfigError([f"--set expects path=v1,v2,... (got {text!r})"])
    path, values = text.split("=", 1)
    try:
        parsed = [json.loads(v) for v in values.split(",")]
    except json.JSONDecodeError:
        parsed = values.split(",")
    return path.strip(), parsed


def _sweep_point(job):
    index, raw, directory = job
    try:
        cfg = cfgmod.parse_config(raw)
    except cfgmod.ConfigError as exc:
        return index, EXIT_CONFIG, exc.violations
    status, _ = runner.run(cfg, directory)
    return index, status, []


def cmd_sweep(args) -> int:
    try:
        base = cfgmod.parse_text(Path(args.config).read_text(encoding="utf-8"))
        axes = [_parse_assignment(a) for a in args.set]
    except cfgmod.ConfigError as exc:
        return _report_config_error(exc)
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    root = runner.resolve_directory(args.out)
    root.mkdir(parents=True, exist_ok=True)
    jobs, points = [], []
    for index, combo in enumerate(itertools.product(*(vals for _, vals in axes))):
        raw = copy.deepcopy(base)
        values = {}
        for (path, _), value in zip(axes, combo):
            _set_path(raw, path, value)
            values[path] = value
        directory = root / f"point_{index:04d}"
        jobs.append((index, raw, str(directory)))
        points.append({"index": index, "directory": directory.name, "values": values})
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(_sweep_point, jobs))
    else:
        outcomes = [_sweep_point(j) for j in jobs]
    worst = EXIT_OK
    for index, status, violations in outcomes:
        points[index]["exit_code"] = status
        points[index]["status"] = {0: "success", 2: "invalid", 3: "failed"}.get(status, "failed")
        if violations:
            points[index]["violations"] = violations
        worst = max(worst, status)
    runner.write_json(root / "index.json", {"version": __version__, "base_config": args.config,
                                            "axes": [p for p, _ in axes], "points": points})
    print(f"{len(points)} points -> {root / 'index.json'}")
    return worst


def cmd_schema(args) -> int:
    print(json.dumps(cfgmod.SCHEMA, indent=2, sort_keys=True))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrexciton", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a JSON run configuration")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides outputs.directory)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a configuration and run short invariant checks")
    p.add_argument("config")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--no-invariants", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dispersion", help="tabulate k, G(k), its leading asymptote and two-term expansion")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--kmax", type=float, default=0.1)
    p.add_argument("--kmin", type=float, default=None)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--spacing", choices=["linear", "log"], default="linear")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("compare", help="lattice vs continuum L2 distance for a Gaussian packet")
    p.add_argument("--s", type=float, default=2.5)
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--chi", type=float, default=0.5)
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--elasticity", type=float, default=1.0)
    p.add_argument("--sites", type=int, default=1024)
    p.add_argument("--width", type=float, default=50.0)
    p.add_argument("--k0", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--t-end", dest="t_end", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--every", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="run a Cartesian grid of configurations")
    p.add_argument("config")
    p.add_argument("--set", action="append", default=[], metavar="PATH=V1,V2",
                   help="dotted config path and comma-separated JSON values; repeat for more axes")
    p.add_argument("--out", default="sweep")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schema", help="print the configuration JSON schema")
    p.set_defaults(func=cmd_schema)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
