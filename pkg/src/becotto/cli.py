"""Command-line interface.

Every subcommand reads an optional config file (``-c``) plus ``--set key=value``
overrides, writes into its own run directory (``-o``, guarded by a lock
file) and exits with

* 0 on success
* 2 on invalid configuration or input
* 3 on a numerical abort (the last good state is dumped to ``abort.bin``)
* 4 when a thermalization hit its step cap without becoming stationary
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, CheckpointMeta, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, parse_config, write_config
from .diagnostics import (compressible_spectrum, density_pdf, energy_breakdown, spectrum_slope,
                          tail_exceedance)
from .engine import (CycleState, EnsembleResult, SimulationContext, adiabatic, detect_transition,
                     ensemble_run, fit_through_origin, isochoric, mc_efficiency_distribution,
                     otto_reference, prepare_hot_state, run_cycle, tlambda_sweep, work_heat)
from .gpe import NumericalAbort, WaveFunction
from .sgle import make_rng
from .tables import (read_table, write_energy_series, write_histogram, write_pdf, write_records,
                     write_spectrum, write_table, write_trace)

log = logging.getLogger("becotto")

EXIT_OK, EXIT_INVALID, EXIT_ABORT, EXIT_NONSTATIONARY = 0, 2, 3, 4
LOCK_NAME = ".lock"


class NotStationary(RuntimeError):
    pass


class RunDirectoryBusy(RuntimeError):
    pass


@contextmanager
def run_directory(path):
    """Create ``path`` and hold its lock file for the duration of a run."""
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    lock = d / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunDirectoryBusy(f"run directory {d} is locked by another run ({lock})") from None
    try:
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        yield d
    finally:
        lock.unlink(missing_ok=True)


# ---------------------------------------------------------------------------
# State I/O


def save_state(path, state: CycleState, cfg: RunConfig, omega: float, T_code: float) -> None:
    meta = CheckpointMeta(N=state.wf.grid.N, L=state.wf.grid.L, t=state.wf.t, omega=omega,
                          alpha=cfg.alpha, mu=state.mu, T=T_code)
    save_checkpoint(state.wf.psi, meta, path)


def load_state(path, cfg: RunConfig, ctx: SimulationContext) -> tuple[CycleState, CheckpointMeta]:
    psi, meta = load_checkpoint(path)
    if meta.N != cfg.N or meta.L != cfg.L:
        raise ConfigError(f"checkpoint grid (N={meta.N}, L={meta.L}) does not match config "
                          f"(N={cfg.N}, L={cfg.L})")
    wf = WaveFunction(psi, ctx.grid, meta.t)
    rho_m = cfg.rho_m
    if cfg.mass_policy == "fixed-central-density":
        rho_m = ctx.params.m * wf.mass()
    elif meta.alpha != cfg.alpha:
        wf = WaveFunction(psi * math.sqrt(cfg.rho_m / (ctx.params.m * wf.mass())), ctx.grid, meta.t)
    return CycleState(wf, meta.mu, rho_m), meta


def _initial_hot(args, cfg: RunConfig, ctx: SimulationContext, rng) -> CycleState:
    if args.input:
        return load_state(args.input, cfg, ctx)[0]
    return prepare_hot_state(cfg.cycle_config(), ctx, rng)


def _stroke_checkpointer(cfg: RunConfig, d: Path, prefix: str):
    omegas = {"initial": cfg.omega_h, "expansion": cfg.omega_c, "cold": cfg.omega_c,
              "compression": cfg.omega_h, "hot": cfg.omega_h}
    temps = {"initial": cfg.T_h, "expansion": cfg.T_h, "cold": cfg.T_c, "compression": cfg.T_c, "hot": cfg.T_h}

    def cb(name, state):
        if cfg.checkpoint_strokes:
            save_state(d / f"{prefix}{name}.bin", state, cfg, omegas[name], temps[name] * cfg.t_lambda_code)
    return cb


def _write_cycle_outputs(d: Path, records, prefix: str = "cycle") -> None:
    write_records(d / "records.csv", records)
    for r in records:
        tag = f"{prefix}{r.cycle_id:02d}"
        if r.expansion is not None:
            write_energy_series(d / f"{tag}_expansion.csv", r.expansion)
            write_energy_series(d / f"{tag}_compression.csv", r.compression)
            write_trace(d / f"{tag}_cold_trace.csv", r.cold_trace)
            write_trace(d / f"{tag}_hot_trace.csv", r.hot_trace)


# ---------------------------------------------------------------------------
# Statistics summaries


@dataclass
class PointSummary:
    value: float
    eta_O: float
    W_mean: float
    W_std: float
    Q_h_mean: float
    Q_h_std: float
    eta_mean: float
    eta_std: float
    eta_ratio: float
    n_cycles: int
    n_rejected: int

    COLUMNS = ("value", "eta_O", "W_mean", "W_std", "Q_h_mean", "Q_h_std", "eta_mean", "eta_std",
               "eta_over_eta_O", "n_cycles", "n_rejected")

    def row(self):
        return [self.value, self.eta_O, self.W_mean, self.W_std, self.Q_h_mean, self.Q_h_std,
                self.eta_mean, self.eta_std, self.eta_ratio, self.n_cycles, self.n_rejected]


def summarize(records, cfg: RunConfig, value: float = math.nan, d: Path | None = None) -> PointSummary:
    recs = [r for r in records if not r.failed]
    W = np.array([r.W for r in recs])
    Q = np.array([work_heat(r, cfg.heat_convention)[3] for r in recs])
    dist = mc_efficiency_distribution((W, Q), n_mc=cfg.n_mc, rng=make_rng(cfg.seed, 10_000),
                                      guard=cfg.mc_guard)
    if d is not None:
        dens, edges = dist.histogram()
        write_histogram(d / "efficiency_hist.csv", dens, edges)
    eta_O = otto_reference(cfg.omega_c, cfg.omega_h)
    return PointSummary(value, eta_O, float(W.mean()), float(W.std(ddof=1)), float(Q.mean()),
                        float(Q.std(ddof=1)), dist.mean, dist.std, dist.mean / eta_O, len(recs),
                        dist.n_rejected)


def _write_summary(path, summaries) -> None:
    write_table(path, PointSummary.COLUMNS, [s.row() for s in summaries])


# ---------------------------------------------------------------------------
# Subcommands


def cmd_thermalize(args, cfg: RunConfig, d: Path) -> int:
    ctx = SimulationContext.from_config(cfg)
    rng = make_rng(cfg.seed)
    omega = {"c": cfg.omega_c, "h": cfg.omega_h}.get(args.omega) or float(args.omega)
    T_rel = cfg.T_h if args.temperature is None else args.temperature
    if args.input:
        state = load_state(args.input, cfg, ctx)[0]
    else:
        from .engine import ground_state
        state = ground_state(cfg.cycle_config(), ctx, omega, cfg.rho_m)
    state, trace = isochoric(state, omega, T_rel, cfg.cycle_config(), ctx, rng)
    write_trace(d / "trace.csv", trace)
    save_state(d / "state.bin", state, cfg, omega, T_rel * cfg.t_lambda_code)
    print(f"E_total={trace.E_total[-1]:.17g} mu={state.mu:.17g} steps={trace.step[-1]} "
          f"stationary={trace.stationary}")
    if not trace.stationary:
        raise NotStationary("thermalization not stationary")
    return EXIT_OK


def cmd_stroke(args, cfg: RunConfig, d: Path) -> int:
    ctx = SimulationContext.from_config(cfg)
    rng = make_rng(cfg.seed)
    if args.kind == "expand":
        w0, w1 = cfg.omega_h, cfg.omega_c
        state = _initial_hot(args, cfg, ctx, rng)
    else:
        w0, w1 = cfg.omega_c, cfg.omega_h
        if args.input:
            state = load_state(args.input, cfg, ctx)[0]
        else:
            hot = prepare_hot_state(cfg.cycle_config(), ctx, rng)
            state, _ = isochoric(hot, cfg.omega_c, cfg.T_c, cfg.cycle_config(), ctx, rng)
    save_state(d / "start.bin", state, cfg, w0, 0.0)
    out, series = adiabatic(state, w0, w1, cfg.cycle_config(), ctx)
    write_energy_series(d / "energy.csv", series)
    save_state(d / "end.bin", out, cfg, w1, 0.0)
    E0, E1 = series.column("E_total")[0], series.column("E_total")[-1]
    print(f"E_start={E0:.17g} E_end={E1:.17g} work_extracted={E0 - E1:.17g}")
    return EXIT_OK


def cmd_cycle(args, cfg: RunConfig, d: Path) -> int:
    ctx = SimulationContext.from_config(cfg)
    rng = make_rng(cfg.seed)
    state = _initial_hot(args, cfg, ctx, rng)
    save_state(d / "initial.bin", state, cfg, cfg.omega_h, cfg.T_h * cfg.t_lambda_code)
    rec, last = run_cycle(state, cfg.cycle_config(), ctx, rng, on_stroke=_stroke_checkpointer(cfg, d, ""))
    if rec.failed:
        save_state(d / "abort.bin", last, cfg, math.nan, math.nan)
        raise NumericalAbort("cycle failed; last good state in abort.bin")
    _write_cycle_outputs(d, [rec])
    W_e, W_c, W, Q_h = work_heat(rec, cfg.heat_convention)
    print(f"W_e={W_e:.17g} W_c={W_c:.17g} W={W:.17g} Q_h={Q_h:.17g}")
    if not rec.stationary:
        raise NotStationary("an isochoric stroke was not stationary")
    return EXIT_OK


def _ensemble(cfg: RunConfig, d: Path, input_path=None) -> EnsembleResult:
    cc = cfg.cycle_config()
    state = None
    if input_path:
        state = load_state(input_path, cfg, SimulationContext.from_config(cfg))[0]
    cbs = {}

    def on_stroke(i, name, st):
        if i < 0:
            _stroke_checkpointer(cfg, d, "")("initial", st)
            return
        cb = cbs.setdefault(i, _stroke_checkpointer(cfg, d, f"cycle{i:02d}_"))
        cb(name, st)

    res = ensemble_run(cc, state=state, on_stroke=on_stroke)
    _write_cycle_outputs(d, res.records)
    return res


def _report(res: EnsembleResult, cfg: RunConfig, d: Path, value=math.nan) -> PointSummary:
    if len(res.completed) < 2:
        raise ValueError("fewer than two completed cycles; statistics refused")
    s = summarize(res.records, cfg, value, d)
    _write_summary(d / "summary.csv", [s])
    print(f"eta={s.eta_mean:.6g} +- {s.eta_std:.3g}  eta_O={s.eta_O:.6g}  eta/eta_O={s.eta_ratio:.4g}  "
          f"W={s.W_mean:.6g}  Q_h={s.Q_h_mean:.6g}")
    return s


def cmd_ensemble(args, cfg: RunConfig, d: Path) -> int:
    res = _ensemble(cfg, d, args.input)
    if any(r.failed for r in res.records) and len(res.completed) < 2:
        raise NumericalAbort("too many failed cycles")
    _report(res, cfg, d)
    if not all(r.stationary for r in res.completed):
        raise NotStationary("an isochoric stroke was not stationary")
    return EXIT_OK


SWEEP_KEYS = {"alpha": "alpha", "omega": "omega_c", "temperature": "T_h", "tau": "tau_ec"}


def cmd_sweep(args, cfg: RunConfig, d: Path) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    if args.kind == "tlambda":
        pts = tlambda_sweep(sorted(values), cfg.cycle_config(), r0=cfg.r0)
        write_table(d / "tlambda.csv", ("T", "order_parameter", "stationary", "rho_bar"),
                    [(p.T, p.order_parameter, p.stationary, p.rho_bar) for p in pts])
        if len(pts) >= 4:
            tr = detect_transition([p.T for p in pts], [p.order_parameter for p in pts])
            write_table(d / "transition.csv", ("T_break", "slope_below", "slope_above", "sse"),
                        [(tr.T_break, tr.slope_below, tr.slope_above, tr.sse)])
            print(f"transition at T = {tr.T_break:.6g} (units of the configured t_lambda)")
        if not all(p.stationary for p in pts):
            raise NotStationary("some sweep points were not stationary")
        return EXIT_OK
    key = SWEEP_KEYS[args.kind]
    summaries, stationary = [], True
    for v in values:
        pc = parse_config(None, {**_as_overrides(cfg), key: repr(v)})
        sub = d / f"{args.kind}_{v:.6g}"
        sub.mkdir(parents=True, exist_ok=True)
        write_config(pc, sub)
        res = _ensemble(pc, sub)
        summaries.append(_report(res, pc, sub, v))
        stationary &= all(r.stationary for r in res.completed)
    _write_summary(d / "sweep.csv", summaries)
    if args.kind == "omega":
        s, r2 = fit_through_origin([x.eta_O for x in summaries], [x.eta_mean for x in summaries])
        print(f"eta = {s:.4g} eta_O  (R^2 = {r2:.4f})")
    if not stationary:
        raise NotStationary("some sweep points were not stationary")
    return EXIT_OK


def _as_overrides(cfg: RunConfig) -> dict:
    from dataclasses import fields
    return {f.name: ("none" if getattr(cfg, f.name) is None else str(getattr(cfg, f.name)))
            for f in fields(cfg)}


def cmd_analyze(args, cfg: RunConfig, d: Path) -> int:
    ctx = SimulationContext.from_config(cfg)
    if args.kind == "efficiency-stats":
        paths = args.records or ([args.input] if args.input else [])
        if not paths:
            raise ConfigError("efficiency-stats needs --records")
        rows = np.vstack([read_table(p)[1] for p in paths])
        from .engine import CycleRecord
        recs = [CycleRecord(*row[1:5], cycle_id=int(row[0])) for row in rows]
        recs = [r for r in recs if all(np.isfinite([r.E_e_i, r.E_e_f, r.E_c_i, r.E_c_f]))]
        if len(recs) < 2:
            raise ValueError("fewer than two completed cycles; statistics refused")
        s = summarize(recs, cfg, d=d)
        _write_summary(d / "summary.csv", [s])
        print(f"eta={s.eta_mean:.6g} +- {s.eta_std:.3g}  eta/eta_O={s.eta_ratio:.4g}")
        return EXIT_OK
    if not args.input:
        raise ConfigError(f"analyze {args.kind} needs --input checkpoint")
    state, meta = load_state(args.input, cfg, ctx)
    if args.kind == "spectrum":
        k, E = compressible_spectrum(state.wf, ctx.params)
        write_spectrum(d / "spectrum.csv", k, E)
        print(f"slope over shells {args.k_lo:g}-{args.k_hi:g}: {spectrum_slope(k, E, args.k_lo, args.k_hi):.4f}")
    elif args.kind == "pdf":
        rho = ctx.params.m * np.abs(state.wf.psi) ** 2
        pdf = density_pdf(rho, ctx.grid, bins=cfg.pdf_bins)
        write_pdf(d / "pdf.csv", pdf)
        c = pdf.bin_centers
        mean = float(np.sum(c * pdf.pdf * np.diff(pdf.bin_edges)))
        var = float(np.sum((c - mean) ** 2 * pdf.pdf * np.diff(pdf.bin_edges)))
        print(f"variance={var:.6g} tail(>1.5 median)={tail_exceedance(rho, ctx.grid):.6g}")
    elif args.kind == "energy":
        b = energy_breakdown(state.wf, ctx.potential(meta.omega), ctx.params, t=meta.t, omega=meta.omega)
        keys = ("t", "omega", "E_total", "E_kin_inc", "E_kin_comp", "E_quantum", "E_int", "E_trap", "mass")
        write_table(d / "energy.csv", keys, [[getattr(b, k) for k in keys]])
        print("  ".join(f"{k}={getattr(b, k):.10g}" for k in keys))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key = value configuration file")
    common.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("-o", "--output-dir", help="run directory (overrides output_dir)")
    common.add_argument("-i", "--input", help="input checkpoint")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="becotto", description="BEC quantum Otto engine simulations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("thermalize", parents=[common], help="SGLE relaxation to a stationary state")
    t.add_argument("--omega", default="h", help="'c', 'h' or a trap frequency")
    t.add_argument("--temperature", type=float, help="T / T_lambda (default: T_h)")
    t.set_defaults(func=cmd_thermalize)

    s = sub.add_parser("stroke", parents=[common], help="one adiabatic stroke")
    s.add_argument("kind", choices=("expand", "compress"))
    s.set_defaults(func=cmd_stroke)

    sub.add_parser("cycle", parents=[common], help="one Otto cycle").set_defaults(func=cmd_cycle)
    sub.add_parser("ensemble", parents=[common], help="n_cycles chained cycles plus statistics") \
        .set_defaults(func=cmd_ensemble)

    w = sub.add_parser("sweep", parents=[common], help="ensembles over a parameter")
    w.add_argument("kind", choices=("alpha", "omega", "temperature", "tlambda", "tau"))
    w.add_argument("--values", required=True, help="comma-separated values (temperatures in T_lambda)")
    w.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", parents=[common], help="diagnostics of a checkpoint or record table")
    a.add_argument("kind", choices=("spectrum", "pdf", "energy", "efficiency-stats"))
    a.add_argument("--records", action="append", help="records.csv (efficiency-stats, repeatable)")
    a.add_argument("--k-lo", type=float, default=4.0)
    a.add_argument("--k-hi", type=float, default=16.0)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        overrides = list(args.set)
        if args.output_dir:
            overrides.append(f"output_dir={args.output_dir}")
        cfg = parse_config(args.config, overrides)
        with run_directory(cfg.output_dir) as d:
            write_config(cfg, d)
            (d / "seed.txt").write_text(f"{cfg.seed}\n")
            return args.func(args, cfg, d)
    except (ConfigError, CheckpointError, RunDirectoryBusy, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        if exc.state is not None:
            try:
                meta = CheckpointMeta(N=exc.state.grid.N, L=exc.state.grid.L, t=exc.state.t)
                save_checkpoint(exc.state.psi, meta, Path(cfg.output_dir) / "abort.bin")
            except OSError:
                pass
        return EXIT_ABORT
    except NotStationary as exc:
        print(f"not stationary: {exc}", file=sys.stderr)
        return EXIT_NONSTATIONARY


if __name__ == "__main__":
    sys.exit(main())
