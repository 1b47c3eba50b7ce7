"""Command-line entry point: ``pqslab {criteria,figure,estimate,state}``."""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import asdict, fields

import numpy as np

from . import __version__
from .criteria import report
from .ensemble import moments
from .errors import ConfigError, NonConvergenceError, StateFactoryError, UndefinedCriterionError
from .io import (
    parse_bool,
    parse_config,
    parse_grid,
    parse_overrides,
    svg_lines,
    to_json,
    write_csv,
)
from .measurement import rms_error_scan
from .states import spin_moments
from .sweeps import (
    DEFAULT_G_GRID,
    FIG3_INSET_NS,
    FIG4_NG,
    SweepSpec,
    build_ensemble,
    figure_fig2,
    figure_fig3,
    figure_fig4,
    resolve_threads,
    run_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CRITERIA_COLUMNS = (
    "state", "number_model", "n", "g_over_kappa", "ng_over_kappa", "mz", "input_phase",
    "mean_n", "mean_n_plus", "mean_jx_t", "var_jx_t", "var_jy_t", "var_jz_t",
    "e_hz", "e_ph", "xi_s_y", "xi_s_z", "xi_s_ph_y", "xi_s_ph_z", "eta_ph",
    "entangled_modes", "entangled_particles", "subshot_all_angles",
)

_EPILOG = f"""\
criteria CSV columns: {', '.join(CRITERIA_COLUMNS)}, then dphi@<p>pi for each
phi_over_pi entry.  Empty cells mark undefined values (e.g. xi_s_* for a
fluctuating number).  Floats carry 17 significant digits.

config keys (file lines 'key = value', or --set key=value):
  state            ground | pqs-optimal | pqs-gaussian | phase | coherent
  number_model     fixed | poisson
  n                fixed number or Poisson mean
  tail_mass        Poisson truncation mass (default 1e-12)
  kappa            tunneling (default 1)
  g_over_kappa     grid, e.g. -logspace(-3,3,25), logspace(-3,3,25)
  ng_over_kappa    grid of <N> g/kappa (alternative to g_over_kappa)
  mz               true to apply phase shift + MZ beam splitter
  input_phase      auto | radians
  align, theta, sigma_m, exact_covariance, phi_over_pi, pqs_tol, pqs_max_iters
  shots, trials, seed, theta_ref            (estimate)
  inset_n, curves_ng, critical_ng           (figure)
exit codes: 0 ok, 2 configuration error, 3 numerical non-convergence
"""

_SPEC_FIELDS = {f.name for f in fields(SweepSpec)}
_EXTRA_KEYS = {"ng_over_kappa", "mean", "shots", "trials", "seed", "theta_ref",
               "inset_n", "curves_ng", "critical_ng"}
_FLOAT_KEYS = {"n", "mean", "tail_mass", "kappa", "theta", "sigma_m", "pqs_tol", "theta_ref"}
_INT_KEYS = {"pqs_max_iters", "shots", "trials", "seed"}
_BOOL_KEYS = {"mz", "align", "exact_covariance"}
_GRID_KEYS = {"g_over_kappa", "ng_over_kappa", "phi_over_pi", "inset_n", "curves_ng", "critical_ng"}


def load_config(path: str | None, overrides) -> dict:
    """Merge a config file with ``--set`` overrides and type every value."""
    raw = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_config(fh.read(), source=os.path.basename(path))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    raw.update(parse_overrides(overrides or []))
    cfg = {}
    for key, (value, line) in raw.items():
        if key not in _SPEC_FIELDS | _EXTRA_KEYS:
            raise ConfigError("unknown key", line=line, field=key)
        try:
            if key in _GRID_KEYS:
                cfg[key] = parse_grid(value, key, line)
            elif key in _BOOL_KEYS:
                cfg[key] = parse_bool(value, key, line)
            elif key in _INT_KEYS:
                cfg[key] = int(value)
            elif key in _FLOAT_KEYS:
                cfg[key] = float(value)
                if not math.isfinite(cfg[key]):
                    raise ValueError("not finite")
            elif key == "input_phase":
                cfg[key] = None if value.strip().lower() == "auto" else float(value)
            else:
                cfg[key] = value.strip()
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value {value!r}", line=line, field=key) from exc
    return cfg


def spec_from_config(cfg: dict, **defaults) -> SweepSpec:
    merged = dict(defaults)
    merged.update({k: v for k, v in cfg.items() if k in _SPEC_FIELDS})
    if "mean" in cfg:
        if "n" in cfg:
            raise ConfigError("give either n or mean, not both", field="mean")
        merged["n"] = cfg["mean"]
    if "ng_over_kappa" in cfg:
        if "g_over_kappa" in cfg:
            raise ConfigError("give either g_over_kappa or ng_over_kappa", field="ng_over_kappa")
        merged["g_over_kappa"] = tuple(x / merged.get("n", 100) for x in cfg["ng_over_kappa"])
    if merged.get("number_model", "poisson") == "fixed" and "n" in merged:
        n = merged["n"]
        if n != int(n):
            raise ConfigError("fixed n must be an integer", field="n")
        merged["n"] = int(n)
    return SweepSpec(**merged)


def _emit(text: str, out_dir: str | None, filename: str):
    if out_dir is None:
        sys.stdout.write(text)
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, filename), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_criteria(args, cfg) -> int:
    spec = spec_from_config(cfg)
    rows = run_sweep(spec, resolve_threads(args.threads))
    if args.format == "json":
        _emit(to_json(rows), args.out, "criteria.json")
    else:
        cols = list(CRITERIA_COLUMNS) + [k for k in rows[0] if k not in CRITERIA_COLUMNS]
        _emit(write_csv(rows, cols), args.out, "criteria.csv")
    return EXIT_OK


def _series(rows, x, ys, keep=lambda r: True, xfn=lambda v: v):
    return {y: [(xfn(r[x]), r[y]) for r in rows if keep(r)] for y in ys}


def _branch_svgs(rows, ys, name, title, ylabel, out_dir, hlines):
    for branch in ("attractive", "repulsive"):
        series = _series(rows, "ng_over_kappa", ys, lambda r: r["branch"] == branch, abs)
        svg = svg_lines(series, title=f"{title} ({branch})", xlabel="|<N> g / kappa|",
                        ylabel=ylabel, logx=True, logy=True, hlines=hlines)
        _emit(svg, out_dir, f"{name}_{branch}.svg")


def cmd_figure(args, cfg) -> int:
    out = args.out or "."
    threads = resolve_threads(args.threads)
    grid = cfg.get("g_over_kappa", DEFAULT_G_GRID)
    meta_common = {"version": __version__, "seed": args.seed}
    if args.name == "fig2":
        rows, meta = figure_fig2(grid, threads)
        _emit(write_csv(rows), out, "fig2.csv")
        _branch_svgs(rows, [k for k in rows[0] if k.startswith("e_")], "fig2",
                     "E_HZ and E_ph, N = 100", "criterion", out, [(1.0, "1")])
    elif args.name == "fig3":
        ns = tuple(int(v) for v in cfg.get("inset_n", FIG3_INSET_NS))
        rows, inset, meta = figure_fig3(grid, ns, threads)
        _emit(write_csv(rows), out, "fig3.csv")
        _emit(write_csv(inset), out, "fig3_inset.csv")
        _branch_svgs(rows, ["xi_s_y", "xi_s_z", "xi_s_ph_y", "xi_s_ph_z"], "fig3",
                     "spin squeezing, <N> = 100", "xi", out, [(1.0, "1")])
        _emit(svg_lines(_series(inset, "n", ["xi_s_ph_y_sqrt_n", "xi_s_y_sqrt_n_fixed"]),
                        title="xi * sqrt(N) at g/kappa = 1e3", xlabel="N", ylabel="xi sqrt(N)",
                        logx=True, hlines=[(math.sqrt(2), "sqrt 2"), (1.0, "HL guide")]),
              out, "fig3_inset.svg")
    else:
        phis = cfg.get("phi_over_pi")
        ngs = cfg.get("curves_ng", FIG4_NG)
        crit_grid = cfg.get("critical_ng")
        rows, crit, meta = figure_fig4(phis, ngs, crit_grid, threads)
        _emit(write_csv(rows), out, "fig4.csv")
        _emit(write_csv(crit), out, "fig4_critical.csv")
        ys = [k for k in rows[0] if k.startswith("dphi_")]
        _emit(svg_lines(_series(rows, "phi_over_pi", ys), title="phase uncertainty, <N> = 100",
                        xlabel="phi / pi", ylabel="delta phi", logy=True,
                        hlines=[(0.1, "SQL")]), out, "fig4.svg")
        _emit(svg_lines(_series(crit, "ng_over_kappa", ["e_ph"]), title="E_ph, repulsive, MZ",
                        xlabel="<N> g / kappa", ylabel="E_ph", logx=True,
                        hlines=[(1.0, "1")]), out, "fig4_critical.svg")
    meta.update(meta_common)
    _emit(to_json(meta), out, f"{args.name}_meta.json")
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    spec = spec_from_config(cfg, state="coherent", number_model="poisson", n=100)
    if len(spec.grid) != 1:
        raise ConfigError("estimate takes a single g_over_kappa value", field="g_over_kappa")
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    shots = cfg.get("shots", 10_000)
    trials = cfg.get("trials", 200)
    theta_ref = cfg.get("theta_ref", 0.0)
    phis_pi = cfg.get("phi_over_pi", tuple(np.arange(8) / 8))
    if shots < 1:
        raise ConfigError("shots must be >= 1", field="shots")
    if trials < 100:
        raise ConfigError("trials must be >= 100", field="trials")
    ens, phase = build_ensemble(spec, spec.grid[0])
    mom = moments(ens)
    rows = rms_error_scan(ens, [p * math.pi for p in phis_pi], shots, seed, trials,
                          theta_ref, resolve_threads(args.threads))
    table = []
    for p, r in zip(phis_pi, rows):
        row = asdict(r)
        row["phi_over_pi"] = p
        row["ratio"] = r.rms_normalized / r.analytic if r.analytic else None
        table.append(row)
    try:
        eta = report(mom).eta_ph
    except UndefinedCriterionError:
        eta = None
    doc = {
        "version": __version__,
        "config": {**{k: v for k, v in asdict(spec).items()}, "shots_per_setting": shots,
                   "trials": trials, "seed": seed, "theta_ref": theta_ref},
        "input_phase": phase,
        "calibration": mom.transverse_mean_t,
        "mean_n": mom.mean_n,
        "sql": 1 / math.sqrt(mom.mean_n) if mom.mean_n > 0 else None,
        "eta_ph": eta,
        "quiet_fraction_mean": float(np.mean([r.quiet_fraction for r in rows])),
        "rows": table,
    }
    _emit(to_json(doc), args.out, "estimate.json")
    return EXIT_OK


def cmd_state(args, cfg) -> int:
    if args.kind:
        cfg = {**cfg, "state": args.kind}
    cfg.setdefault("number_model", "fixed")
    if cfg["number_model"] != "fixed":
        raise ConfigError("state dumps a single sector; use number_model = fixed", field="number_model")
    spec = spec_from_config(cfg, n=10)
    if len(spec.grid) != 1:
        raise ConfigError("state takes a single g_over_kappa value", field="g_over_kappa")
    ens, phase = build_ensemble(spec, spec.grid[0])
    (_, st), = ens.members
    amps = st.amplitudes
    sm = spin_moments(st)
    mom = moments(ens)
    doc = {
        "version": __version__,
        "state": spec.state, "n": st.n, "g_over_kappa": spec.grid[0], "kappa": spec.kappa,
        "mz": spec.mz, "input_phase": phase,
        "m": st.m.tolist(),
        "re": amps.real.tolist(), "im": amps.imag.tolist(),
        "prob": st.probabilities.tolist(),
        "phase": np.angle(amps).tolist(),
        "moments": {"jx": sm.jx, "jy": sm.jy, "jz": sm.jz,
                    "var_jx": sm.var_jx, "var_jy": sm.var_jy, "var_jz": sm.var_jz,
                    "cov_jxjy": sm.cov_jxjy},
        "normalized_moments": asdict(mom),
    }
    _emit(to_json(doc), args.out, "state.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--seed", type=int, default=None, help="random seed (estimate)")
    common.add_argument("--out", default=None, help="output directory (default: stdout; figure: .)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads, 0 = one per CPU (fallback: PQSLAB_THREADS)")

    parser = argparse.ArgumentParser(prog="pqslab", description=__doc__, epilog=_EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("criteria", parents=[common], help="criterion values over a sweep grid",
                   epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    fig = sub.add_parser("figure", parents=[common], help="figure tables (CSV) and SVG plots")
    fig.add_argument("name", choices=("fig2", "fig3", "fig4"))
    sub.add_parser("estimate", parents=[common], help="Monte Carlo two-setting phase estimation")
    st = sub.add_parser("state", parents=[common], help="dump one sector state and its moments")
    st.add_argument("kind", nargs="?", default=None,
                    choices=("ground", "pqs-optimal", "pqs-gaussian", "phase", "coherent"))
    return parser


_COMMANDS = {"criteria": cmd_criteria, "figure": cmd_figure, "estimate": cmd_estimate,
             "state": cmd_state}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg["seed"] = args.seed
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"pqslab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"pqslab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StateFactoryError as exc:
        if isinstance(exc.cause, NonConvergenceError):
            print(f"pqslab: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"pqslab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
