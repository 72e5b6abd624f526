"""``nmtherm`` command-line front end.

    nmtherm <dynamics|steady|spectrum|heatspec|fit|validate>
            --config FILE [--out DIR] [--workers N] [--override key=value ...]

Exit codes: 0 success (warnings allowed), 2 configuration error,
3 numerical failure or failed validation.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, RunConfig, load, loads
from .dynamics import (compute_v, heat_exchange_spectrum, markovian_rate,
                       master_eq_coefficients, solve_u_spectral, solve_u_volterra)
from .grids import FrequencyGrid, TimeGrid
from .metrology import f_scaled, qfi_direct_array, qfi_markovian
from .oracle import DiscretizedModel, build_and_diagonalize
from .spectral import DomainError, SolverError, SpectralDensity, find_bound_state
from .steady import (asymptotic_spectrum, critical_window, landau_factor,
                     locate_peak_and_fit, qfi_upper_bound, steady_qfi)

log = logging.getLogger("nmtherm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# --- output helpers ---------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def _tag(eta, s, wc, temp=None) -> str:
    tag = f"eta{eta:g}_s{s:g}_wc{wc:g}"
    return tag if temp is None else f"{tag}_T{temp:g}"


# --- per-point workers (top level so they pickle) ---------------------------

def _dynamics_point(cfg: RunConfig, point):
    eta, s, wc = point
    c, opts = cfg.common, cfg["dynamics"]
    sd = SpectralDensity(eta, s, wc)
    omega0 = c["omega0"]
    grid = TimeGrid.from_dt(c["t_max"], c["dt"])
    fgrid = FrequencyGrid.build(wc, c["t_max"], omega0=omega0, omega_lo=c["omega_lo"],
                                max_width=c["max_panel_width"])
    if opts["solver"] == "spectral":
        traj = solve_u_spectral(sd, omega0, grid, fgrid=fgrid)
    else:
        traj = solve_u_volterra(sd, omega0, grid, fgrid=fgrid, snapshots=())
    kappa = markovian_rate(sd, omega0)
    temps = list(c["temperature"])
    files, summaries = {}, []
    idx = np.arange(0, len(grid), opts["stride"])
    t = grid.times
    for noise in compute_v(traj, sd, temps):
        coef = master_eq_coefficients(traj, noise)
        f = qfi_direct_array(noise.v, noise.dv_dT)
        fma = qfi_markovian(t, omega0, kappa, noise.temperature)
        u = traj.u
        rows = zip(t[idx], u.real[idx], u.imag[idx], (np.abs(u) ** 2)[idx], noise.v[idx],
                   noise.dv_dT[idx], coef.omega[idx], coef.gamma[idx], coef.gamma_beta[idx],
                   f[idx], fma[idx], [int(noise.converged)] * idx.size)
        name = f"dynamics_{_tag(eta, s, wc, noise.temperature)}.csv"
        files[name] = csv_text(["t", "re_u", "im_u", "abs_u2", "v", "dv_dT", "Omega", "Gamma",
                                "Gamma_beta", "F_T", "F_T_MA", "converged"], rows)
        summaries.append({"eta": eta, "s": s, "omega_c": wc, "T": noise.temperature,
                          "file": name, "converged": noise.converged,
                          "F_T_final": float(f[-1]), "singular_nodes": int(coef.singular.size)})
        if not noise.converged:
            log.warning("%s: not stationary at t_max", name)
    return files, summaries


def _steady_point(cfg: RunConfig, point):
    eta, s, wc = point
    c, opts = cfg.common, cfg["steady"]
    sd = SpectralDensity(eta, s, wc)
    spec = asymptotic_spectrum(sd, c["omega0"])
    sweep_value = {"eta": eta, "s": s, "omega_c": wc}[opts["sweep"]]
    rows = []
    for temp in c["temperature"]:
        q = steady_qfi(spec, temp, t_max=opts["horizon"], dt=opts["horizon_dt"])
        bound = qfi_upper_bound(spec, temp)
        flags = []
        if spec.diverges_ir:
            flags.append("critical")
        if not q.converged:
            flags.append("finite-horizon")
        rows.append((sweep_value, temp, eta, s, wc, q.value, bound.value,
                     landau_factor(spec, temp), spec.z,
                     spec.e_b if spec.e_b is not None else float("nan"),
                     "|".join(flags) or "-"))
    return rows


def _spectrum_point(cfg: RunConfig, point):
    eta, s, wc = point
    c, opts = cfg.common, cfg["spectrum"]
    sd = SpectralDensity(eta, s, wc)
    model = DiscretizedModel(sd, opts["n_modes"], c["omega0"], opts["omega_max"] or None)
    res = build_and_diagonalize(model, vectors=False)
    bs = find_bound_state(sd, c["omega0"]) if eta > 0 else None
    name = f"spectrum_{_tag(eta, s, wc)}.csv"
    text = csv_text(["index", "eigenvalue"], enumerate(res.eigenvalues))
    summary = {"eta": eta, "s": s, "omega_c": wc, "file": name,
               "lowest_eigenvalue": res.lowest,
               "isolated_levels": [float(x) for x in res.isolated_levels()],
               "E_b": bs.e_b if bs else None, "Z": bs.z if bs else None,
               "recurrence_time": model.recurrence_time}
    return {name: text}, [summary]


def _heatspec_point(cfg: RunConfig, point):
    eta, s, wc = point
    c, opts = cfg.common, cfg["heatspec"]
    sd = SpectralDensity(eta, s, wc)
    omega0 = c["omega0"]
    spec = asymptotic_spectrum(sd, omega0)
    keep = spec.nodes <= opts["omega_plot_max"]
    cols = [spec.nodes[keep], spec.theta[keep], spec.a_inf[keep]]
    header = ["omega", "theta", "A_inf"]
    times = opts["times"]
    if times:
        grid = TimeGrid.from_dt(max(times), c["dt"])
        snaps = [int(round(t / grid.dt)) for t in times]
        traj = solve_u_volterra(sd, omega0, grid, fgrid=spec.fgrid, snapshots=snaps)
        for t, k in zip(times, snaps):
            cols.append(heat_exchange_spectrum(traj, sd, k)[keep])
            header.append(f"A_t{t:g}")
    name = f"heatspec_{_tag(eta, s, wc)}.csv"
    summary = {"eta": eta, "s": s, "omega_c": wc, "file": name, "Z": spec.z,
               "E_b": spec.e_b, "diverges_ir": spec.diverges_ir}
    return {name: csv_text(header, zip(*cols))}, [summary]


# --- commands ---------------------------------------------------------------

def _map(fn: Callable, cfg: RunConfig, points, workers: int):
    """Evaluate ``fn(cfg, p)`` for every point; results keep config order."""
    if workers <= 1 or len(points) <= 1:
        return [fn(cfg, p) for p in points]
    with ProcessPoolExecutor(max_workers=min(workers, len(points))) as pool:
        futures = [pool.submit(fn, cfg, p) for p in points]
        return [f.result() for f in futures]


def _write(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _summary(out: Path, command: str, cfg: RunConfig, body: dict) -> None:
    data = {"command": command, "version": __version__, "config": cfg.echo(), **body}
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{command}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _per_point(command: str, fn: Callable, cfg: RunConfig, out: Path, workers: int) -> int:
    results = _map(fn, cfg, cfg.points(), workers)
    files, summaries = {}, []
    for f, s in results:
        files.update(f)
        summaries.extend(s)
    _write(out, files)
    _summary(out, command, cfg, {"points": summaries})
    return EXIT_OK


def cmd_dynamics(cfg, out, workers):
    return _per_point("dynamics", _dynamics_point, cfg, out, workers)


def cmd_spectrum(cfg, out, workers):
    return _per_point("spectrum", _spectrum_point, cfg, out, workers)


def cmd_heatspec(cfg, out, workers):
    return _per_point("heatspec", _heatspec_point, cfg, out, workers)


def cmd_steady(cfg, out, workers):
    rows = [r for chunk in _map(_steady_point, cfg, cfg.points(), workers) for r in chunk]
    rows.sort(key=lambda r: (r[0], r[1]))
    header = ["sweep_value", "T", "eta", "s", "omega_c", "F_inf", "bound", "landau_factor",
              "Z", "E_b", "flags"]
    _write(out, {"steady.csv": csv_text(header, rows)})
    best = {}
    for r in rows:
        if r[1] not in best or r[5] > best[r[1]][1]:
            best[r[1]] = (r[0], r[5])
    _summary(out, "steady", cfg, {
        "sweep": cfg["steady"]["sweep"], "file": "steady.csv",
        "argmax": [{"T": t, "sweep_value": v, "F_inf": f} for t, (v, f) in sorted(best.items())]})
    return EXIT_OK


def cmd_fit(cfg, out, workers):
    c = cfg.common
    eta, s, omega0 = c["eta"][0], c["s"][0], c["omega0"]
    fit = locate_peak_and_fit(eta, s, omega0, cfg["fit"]["detunings"])
    window_rows = []
    for wc in c["omega_c"]:
        sd = SpectralDensity(eta, s, wc)
        for temp in c["temperature"]:
            inside, margin = critical_window(omega0, sd, temp)
            window_rows.append((wc, temp, abs(omega0 - eta * wc), inside, margin))
    _write(out, {
        "fit_samples.csv": csv_text(["detuning", "omega_max"], fit.samples),
        "fit_window.csv": csv_text(["omega_c", "T", "detuning", "inside", "margin"], window_rows),
    })
    _summary(out, "fit", cfg, {
        "prefactor": fit.c, "exponent": fit.p, "r2": fit.r2, "residual": fit.residual,
        "good_fit": fit.good, "rejected": fit.rejected, "f_at_1": f_scaled(1.0)})
    return EXIT_OK


def cmd_validate(cfg, out, workers):
    from .validate import report, run_suite
    checks = run_suite(cfg["validate"]["dt_scale"])
    rep = report(checks)
    for chk in checks:
        print(f"{'PASS' if chk.passed else 'FAIL'} {chk.name}: {chk.measured} "
              f"(expected {chk.expected}) [{chk.seconds:.1f}s]")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "validate_report.json", "w", encoding="utf-8") as fh:
        json.dump({"version": __version__, **rep}, fh, indent=2)
        fh.write("\n")
    return EXIT_OK if rep["passed"] else EXIT_NUMERIC


HANDLERS = {
    "dynamics": cmd_dynamics, "steady": cmd_steady, "spectrum": cmd_spectrum,
    "heatspec": cmd_heatspec, "fit": cmd_fit, "validate": cmd_validate,
}


def run_command(command: str, cfg: RunConfig, out, workers: int = 1) -> int:
    return HANDLERS[command](cfg, Path(out), workers)


def resolve_workers(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise ConfigError("--workers must be a positive integer")
        return flag
    env = os.environ.get("NMTHERM_WORKERS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            n = 0
        if n < 1:
            raise ConfigError(f"NMTHERM_WORKERS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nmtherm", description=(
        "Non-Markovian quantum thermometry: dynamics, steady state, spectra and fits."))
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI run configuration (optional for validate)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: NMTHERM_WORKERS or CPU count)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config value; KEY or SECTION.KEY")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is None and args.command != "validate":
            raise ConfigError(f"{args.command} needs --config")
        cfg = load(args.config) if args.config else loads("")
        for item in args.override:
            cfg.override(item, args.command)
        cfg.check()
        workers = resolve_workers(args.workers)
        return run_command(args.command, cfg, args.out, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, DomainError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
