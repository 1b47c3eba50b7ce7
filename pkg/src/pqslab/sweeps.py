"""Ensemble construction from sweep specs, grid evaluation and figure tables."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .criteria import delta_phi_curve, e_hz, e_ph, report
from .ensemble import (
    Ensemble,
    align_frame,
    attach,
    coherent_product_ensemble,
    delta_distribution,
    moments,
    mz_prepare,
    optimal_mz_phase,
    poisson_distribution,
)
from .errors import ConfigError, NonConvergenceError, UndefinedCriterionError
from .sectors import HamiltonianParams
from .states import (
    PqsSpec,
    SectorState,
    gaussian_pqs_state,
    ground_state,
    optimal_pqs_state,
    phase_eigenstate,
    pqs_sigma,
    spin_moments,
    su2_coherent_x,
)

__all__ = [
    "STATE_KINDS",
    "SweepSpec",
    "build_ensemble",
    "evaluate_point",
    "run_sweep",
    "resolve_threads",
    "figure_fig2",
    "figure_fig3",
    "figure_fig4",
    "fig3_inset_point",
    "critical_sweep_point",
    "DEFAULT_G_GRID",
]

STATE_KINDS = ("ground", "pqs-optimal", "pqs-gaussian", "phase", "coherent")
DEFAULT_G_GRID = tuple(np.concatenate([-np.logspace(3, -3, 25), np.logspace(-3, 3, 25)]).tolist())


@dataclass(frozen=True)
class SweepSpec:
    state: str = "ground"
    number_model: str = "poisson"     # fixed | poisson
    n: float = 100                    # fixed n, or the Poisson mean
    tail_mass: float = 1e-12
    kappa: float = 1.0
    g_over_kappa: tuple[float, ...] = (0.0,)
    mz: bool = False
    input_phase: float | None = None  # None = optimize
    align: bool = True
    theta: float = 0.0
    sigma_m: float | None = None
    phi_over_pi: tuple[float, ...] = ()
    exact_covariance: bool = False
    pqs_tol: float = 1e-10
    pqs_max_iters: int = 5000

    def __post_init__(self):
        if self.state not in STATE_KINDS:
            raise ConfigError(f"unknown state kind {self.state!r}; expected one of {STATE_KINDS}",
                              field="state")
        if self.number_model not in ("fixed", "poisson"):
            raise ConfigError("number_model must be 'fixed' or 'poisson'", field="number_model")
        if self.number_model == "fixed" and (self.n < 0 or int(self.n) != self.n):
            raise ConfigError("fixed n must be a non-negative integer", field="n")
        if self.number_model == "poisson" and not self.n > 0:
            raise ConfigError("Poisson mean must be positive", field="n")
        if not 0 < self.tail_mass <= 1e-6:
            raise ConfigError("tail_mass must be in (0, 1e-6]", field="tail_mass")
        if not self.g_over_kappa:
            raise ConfigError("g_over_kappa grid is empty", field="g_over_kappa")
        if not all(math.isfinite(g) for g in self.g_over_kappa):
            raise ConfigError("g_over_kappa values must be finite", field="g_over_kappa")
        if self.state == "ground" and self.kappa == 0:
            raise ConfigError("kappa must be nonzero for g/kappa sweeps", field="kappa")
        if self.sigma_m is not None and not self.sigma_m > 0:
            raise ConfigError("sigma_m must be positive", field="sigma_m")

    @property
    def grid(self) -> tuple[float | None, ...]:
        return self.g_over_kappa if self.state == "ground" else (None,)


def _aligned(state: SectorState) -> SectorState:
    s = spin_moments(state)
    if s.jx == 0 and s.jy == 0:
        return state
    return state.rotated_z(-math.atan2(s.jy, s.jx))


@lru_cache(maxsize=2048)
def _pqs_optimal(n, tol, max_iters):
    if n == 0:
        return SectorState(0, [1.0])
    res = optimal_pqs_state(n, tol=tol, max_iters=max_iters)
    if not res.converged:
        raise NonConvergenceError(f"optimal PQS iteration did not converge for n={n}")
    return _aligned(res.state)


def _factory(spec: SweepSpec, g_over_kappa):
    kind = spec.state
    if kind == "ground":
        params = HamiltonianParams.from_ratio(g_over_kappa, spec.kappa)
        return lambda n: ground_state(n, params)
    if kind == "phase":
        return lambda n: phase_eigenstate(n, spec.theta)
    if kind == "pqs-gaussian":
        def gauss(n):
            sigma = spec.sigma_m if spec.sigma_m is not None else max(pqs_sigma(n), 1e-12)
            return gaussian_pqs_state(n, PqsSpec(sigma, spec.theta))
        return gauss
    if kind == "pqs-optimal":
        return lambda n: _pqs_optimal(n, spec.pqs_tol, spec.pqs_max_iters)
    return su2_coherent_x


def build_ensemble(spec: SweepSpec, g_over_kappa: float | None = None) -> tuple[Ensemble, float | None]:
    """Ensemble for one grid point, plus the MZ input phase used (if any)."""
    if spec.state == "coherent" and spec.number_model == "poisson":
        ens = coherent_product_ensemble(spec.n / 2, spec.n / 2, 0.0, spec.tail_mass)
    else:
        dist = (delta_distribution(int(spec.n)) if spec.number_model == "fixed"
                else poisson_distribution(spec.n, spec.tail_mass))
        ens = attach(_factory(spec, g_over_kappa), dist)
    phase = None
    if spec.mz:
        phase = optimal_mz_phase(ens) if spec.input_phase is None else spec.input_phase
        ens = mz_prepare(ens, phase, align=spec.align)
    elif spec.align:
        ens = align_frame(ens)
    return ens, phase


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedCriterionError:
        return None


def evaluate_point(spec: SweepSpec, g_over_kappa: float | None) -> dict:
    """One flat result row: sweep coordinates, moments summary and every criterion."""
    ens, phase = build_ensemble(spec, g_over_kappa)
    mom = moments(ens)
    row = {
        "state": spec.state,
        "number_model": spec.number_model,
        "n": spec.n,
        "g_over_kappa": g_over_kappa,
        "ng_over_kappa": None if g_over_kappa is None else spec.n * g_over_kappa,
        "mz": spec.mz,
        "input_phase": phase,
        "mean_n": mom.mean_n,
        "mean_n_plus": mom.mean_n_plus,
        "mean_jx_t": mom.mean_jx_t,
        "var_jx_t": mom.var_jx_t,
        "var_jy_t": mom.var_jy_t,
        "var_jz_t": mom.var_jz_t,
    }
    rep = _safe(report, mom)
    names = ("e_hz", "e_ph", "xi_s_y", "xi_s_z", "xi_s_ph_y", "xi_s_ph_z", "eta_ph",
             "entangled_modes", "entangled_particles", "subshot_all_angles")
    if rep is None:
        row.update({k: None for k in names})
        row["e_hz"] = _safe(e_hz, mom)
        row["e_ph"] = _safe(e_ph, mom)
    else:
        row.update({k: getattr(rep, k) for k in names})
    if spec.phi_over_pi:
        curve = _safe(delta_phi_curve, mom, [p * math.pi for p in spec.phi_over_pi],
                      spec.exact_covariance)
        for i, p in enumerate(spec.phi_over_pi):
            val = None if curve is None or curve.divergent[i] else float(curve.delta_phi[i])
            row[f"dphi@{p:g}pi"] = val
    return row


def resolve_threads(threads: int | None) -> int:
    """``None`` falls back to PQSLAB_THREADS; 0 means one worker per CPU."""
    if threads is None:
        env = os.environ.get("PQSLAB_THREADS", "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(f"PQSLAB_THREADS must be an integer, got {env!r}") from exc
        else:
            threads = 0
    if threads < 0:
        raise ConfigError("threads must be >= 0", field="threads")
    return threads or (os.cpu_count() or 1)


def _pmap(fn, items, threads):
    # results always come back in input order
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[dict]:
    return _pmap(lambda g: evaluate_point(spec, g), list(spec.grid), threads)


# --- figures -------------------------------------------------------------

FIG_N = 100
FIG3_INSET_G = 1e3
FIG3_INSET_NS = (25, 50, 100, 200, 400)
FIG4_NG = (43.6, 1e3, 1e4)


def _branch_spec(g, number_model, n=FIG_N):
    # attractive wells are used directly; repulsive ones through the MZ sequence
    return SweepSpec(state="ground", number_model=number_model, n=n,
                     g_over_kappa=(g,), mz=g > 0)


def _fig2_point(g):
    row = {"g_over_kappa": g, "ng_over_kappa": FIG_N * g,
           "branch": "attractive" if g < 0 else "repulsive"}
    for prep in ("direct", "mz"):
        for model in ("fixed", "poisson"):
            spec = replace(_branch_spec(g, model), mz=prep == "mz")
            mom = moments(build_ensemble(spec, g)[0])
            row[f"e_hz_{prep}_{model}"] = e_hz(mom)
            row[f"e_ph_{prep}_{model}"] = e_ph(mom)
    return row


def figure_fig2(grid=DEFAULT_G_GRID, threads: int = 1):
    """E_HZ and E_ph of the N = 100 ground state, fixed versus Poissonian number."""
    rows = _pmap(_fig2_point, list(grid), threads)
    meta = {
        "figure": "fig2",
        "x_axis": "g_over_kappa (signed, log-spaced per branch)",
        "assumed_axis_note": "N fixed at 100 while g/kappa is swept; +-1e3 marked",
        "n": FIG_N,
        "marked_values": {"g_over_kappa": [-1e3, 1e3]},
        "series": ["direct = modes a,b of the wells", "mz = modes after phase shift and MZ beam splitter"],
        "threshold": 1.0,
    }
    return rows, meta


def _xi_row(g, n, number_model):
    spec = _branch_spec(g, number_model, n)
    return report(moments(build_ensemble(spec, g)[0]))


def _fig3_point(g):
    row = {"g_over_kappa": g, "ng_over_kappa": FIG_N * g,
           "branch": "attractive" if g < 0 else "repulsive"}
    fixed = _xi_row(g, FIG_N, "fixed")
    pois = _xi_row(g, FIG_N, "poisson")
    row.update(xi_s_y=fixed.xi_s_y, xi_s_z=fixed.xi_s_z,
               xi_s_ph_y=pois.xi_s_ph_y, xi_s_ph_z=pois.xi_s_ph_z,
               xi_s_ph_y_fixed=fixed.xi_s_ph_y, xi_s_ph_z_fixed=fixed.xi_s_ph_z)
    return row


def fig3_inset_point(n: int, g: float = FIG3_INSET_G) -> dict:
    pois = _xi_row(g, n, "poisson")
    fixed = _xi_row(g, n, "fixed")
    root = math.sqrt(n)
    return {"n": n, "g_over_kappa": g,
            "xi_s_ph_y_sqrt_n": pois.xi_s_ph_y * root,
            "xi_s_ph_z_sqrt_n": pois.xi_s_ph_z * root,
            "xi_s_y_sqrt_n_fixed": fixed.xi_s_y * root,
            "xi_s_z_sqrt_n_fixed": fixed.xi_s_z * root,
            "target": math.sqrt(2), "heisenberg_guide": 1.0}


def figure_fig3(grid=DEFAULT_G_GRID, inset_ns=FIG3_INSET_NS, threads: int = 1):
    """Spin squeezing versus g/kappa, plus the sqrt(N)-scaled inset at g/kappa = 1e3."""
    rows = _pmap(_fig3_point, list(grid), threads)
    inset = _pmap(fig3_inset_point, list(inset_ns), threads)
    meta = {
        "figure": "fig3",
        "x_axis": "g_over_kappa (signed, log-spaced per branch)",
        "n": FIG_N,
        "solid": "xi_s (fixed N)", "dashed": "xi_s_ph (Poissonian N)",
        "inset": {"g_over_kappa": FIG3_INSET_G, "ns": list(inset_ns),
                  "quantity": "xi * sqrt(N)", "target": "sqrt(2)",
                  "heisenberg_guide": "prefactor 1, drawn as a guide only"},
    }
    return rows, inset, meta


def critical_sweep_point(ng: float, mean_n: float = FIG_N) -> dict:
    g = ng / mean_n
    spec = SweepSpec(state="ground", number_model="poisson", n=mean_n, g_over_kappa=(g,), mz=True)
    ens, phase = build_ensemble(spec, g)
    mom = moments(ens)
    return {"ng_over_kappa": ng, "g_over_kappa": g, "input_phase": phase,
            "e_ph": e_ph(mom), "eta_ph": report(mom).eta_ph}


def figure_fig4(phi_over_pi=None, ng_values=FIG4_NG, critical_grid=None, threads: int = 1):
    """Delta-phi versus phi/pi for the MZ-prepared repulsive ground state, and the E_ph dip."""
    if phi_over_pi is None:
        phi_over_pi = np.linspace(0, 1, 101)[1:-1]
    if critical_grid is None:
        critical_grid = np.round(np.geomspace(10, 200, 61), 6)
    phis = [float(p) for p in phi_over_pi]

    def curve_for(ng):
        g = ng / FIG_N
        spec = SweepSpec(state="ground", number_model="poisson", n=FIG_N, g_over_kappa=(g,), mz=True)
        mom = moments(build_ensemble(spec, g)[0])
        return delta_phi_curve(mom, [p * math.pi for p in phis])

    curves = _pmap(curve_for, list(ng_values), threads)
    rows = []
    for i, p in enumerate(phis):
        row = {"phi_over_pi": p}
        for ng, c in zip(ng_values, curves):
            row[f"dphi_ng{ng:g}"] = None if c.divergent[i] else float(c.delta_phi[i])
        row["sql"] = 1 / math.sqrt(FIG_N)
        rows.append(row)
    crit = _pmap(critical_sweep_point, [float(x) for x in critical_grid], threads)
    best = min(crit, key=lambda r: r["e_ph"])
    meta = {
        "figure": "fig4",
        "x_axis": "phi_over_pi (offset phi - theta' in units of pi)",
        "mean_n": FIG_N, "ng_over_kappa": list(ng_values),
        "sql": 1 / math.sqrt(FIG_N),
        "quiet_quadrant": [0.25, 0.75],
        "critical_sweep": {"range": [float(critical_grid[0]), float(critical_grid[-1])],
                           "argmin_ng_over_kappa": best["ng_over_kappa"],
                           "min_e_ph": best["e_ph"], "reference": 43.6},
    }
    return rows, crit, meta
