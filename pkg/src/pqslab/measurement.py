"""Monte Carlo number-difference counting and two-setting phase estimation.

A shot in sector ``n`` yields output counts ``n_+ = n/2 + m`` and
``n_- = n/2 - m`` where ``m`` is an eigenvalue of ``J^(phi - theta)``.  The
per-shot ratio reading is ``m n+``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .criteria import delta_phi_curve
from .ensemble import Ensemble, moments
from .errors import UndeterminedPhaseError
from .sectors import ladder_coefficients, m_values

__all__ = [
    "MeasurementSetting",
    "ShotRecord",
    "EstimationResult",
    "ScanRow",
    "outcome_distribution",
    "sample_shots",
    "ratio_estimate",
    "estimate_phase",
    "rms_error_scan",
    "wrap_angle",
]

TWO_PI = 2 * math.pi


def wrap_angle(a: float) -> float:
    """Reduce to ``(-pi, pi]``."""
    r = math.remainder(a, TWO_PI)
    return math.pi if r == -math.pi else r


@dataclass(frozen=True)
class MeasurementSetting:
    phi: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @property
    def offset(self) -> float:
        return self.phi - self.theta


@dataclass(frozen=True)
class ShotRecord:
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n(self) -> int:
        return self.n_plus + self.n_minus

    @property
    def m(self) -> float:
        return (self.n_plus - self.n_minus) / 2

    @property
    def reading(self) -> float:
        n = self.n
        return self.m / n if n else 0.0


@lru_cache(maxsize=512)
def _jx_eigvecs(n):
    # Jx eigenvectors (real); eigenvalues are exactly -J..J in ascending order.
    if n == 0:
        return np.ones((1, 1))
    _, v = eigh_tridiagonal(np.zeros(n + 1), ladder_coefficients(n) / 2)
    v.flags.writeable = False
    return v


def _member_probs(state, angle):
    # J^a = exp(-i a Jz) Jx exp(i a Jz), so project exp(i a Jz)|psi> onto Jx eigenvectors.
    v = _jx_eigvecs(state.n)
    amp = v.T @ (np.exp(1j * angle * state.m) * state.amplitudes)
    return amp.real ** 2 + amp.imag ** 2


def _outcome_table(ens: Ensemble, angle: float):
    ns, ms, ps = [], [], []
    for w, s in ens.members:
        ns.append(np.full(s.n + 1, s.n))
        ms.append(m_values(s.n))
        ps.append(w * _member_probs(s, angle))
    return np.concatenate(ns), np.concatenate(ms), np.concatenate(ps)


def outcome_distribution(ens: Ensemble, setting: MeasurementSetting) -> list[tuple[tuple[int, float], float]]:
    """Joint ``(n, m)`` outcome probabilities; members sharing a sector are merged."""
    ns, ms, ps = _outcome_table(ens, setting.offset)
    acc: dict[tuple[int, float], float] = {}
    for n, m, p in zip(ns.tolist(), ms.tolist(), ps.tolist()):
        acc[(n, m)] = acc.get((n, m), 0.0) + p
    return sorted(acc.items())


def _reading_table(ens, angle):
    ns, ms, ps = _outcome_table(ens, angle)
    r = np.divide(ms, ns, out=np.zeros_like(ms), where=ns > 0)
    ps = np.clip(ps, 0.0, None)
    return ns, ms, r, ps / ps.sum()


def sample_shots(ens: Ensemble, setting: MeasurementSetting, shots: int, seed: int) -> list[ShotRecord]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    ns, ms, _, ps = _reading_table(ens, setting.offset)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(ps), size=shots, p=ps)
    plus = np.rint(ns[idx] / 2 + ms[idx]).astype(int)
    return [ShotRecord(int(a), int(n - a)) for a, n in zip(plus, ns[idx])]


def ratio_estimate(records: Sequence[ShotRecord]) -> float:
    """Sample mean of ``m n+`` (vacuum shots read 0)."""
    if not records:
        raise ValueError("need at least one record")
    return math.fsum(r.reading for r in records) / len(records)


@dataclass(frozen=True)
class EstimationResult:
    r0: float
    r1: float
    phi_hat: float        # refined estimate from the quiet-quadrant reading
    phi_ls: float         # least-squares location atan2(-r1, r0)
    chosen_setting: int   # 0 for theta', 1 for the orthogonal setting
    shots_used: int
    theta_ref: float = 0.0


def estimate_phase(r0: float, r1: float, calibration: float, theta_ref: float = 0.0,
                   shots_used: int = 0) -> EstimationResult:
    """Locate the phase from the readings of two orthogonal settings.

    Model: ``r0 = c cos(phi - theta')``, ``r1 = -c sin(phi - theta')``.  The
    least-squares location picks the quadrant; the setting that lies in a
    quiet quadrant is then inverted on its own, since its noise is the one
    the single-setting sensitivity formula describes.
    """
    if not calibration > 0:
        raise ValueError("calibration must be positive")
    if r0 == 0 and r1 == 0:
        raise UndeterminedPhaseError("both readings vanish")
    ls = math.atan2(-r1, r0)
    if abs(math.sin(ls)) >= abs(math.cos(ls)):
        setting = 0
        delta = math.acos(min(1.0, max(-1.0, r0 / calibration)))
        delta = math.copysign(delta, math.sin(ls))
    else:
        setting = 1
        s = math.asin(min(1.0, max(-1.0, -r1 / calibration)))
        delta = s if math.cos(ls) >= 0 else math.pi - s
    return EstimationResult(
        r0=float(r0), r1=float(r1),
        phi_hat=wrap_angle(theta_ref + delta), phi_ls=wrap_angle(theta_ref + ls),
        chosen_setting=setting, shots_used=int(shots_used), theta_ref=float(theta_ref),
    )


@dataclass(frozen=True)
class ScanRow:
    phi: float
    rms: float
    rms_normalized: float     # rms * sqrt(shots per setting)
    analytic: float           # single-shot delta-phi of the quiet setting
    quiet_fraction: float     # fraction of trials that chose the truly quiet setting
    bias: float


def _trial_readings(tables, shots, rng):
    out = []
    for r, ps in tables:
        counts = rng.multinomial(shots, ps)
        out.append(float(counts @ r) / shots)
    return out


def _scan_point(ens, i, phi, theta_ref, calibration, shots, seed, trials, analytic):
    offset = phi - theta_ref
    # second setting's operator angle is offset + pi/2, giving mean -c sin(offset)
    tables = []
    for angle in (offset, offset + math.pi / 2):
        _, _, r, ps = _reading_table(ens, angle)
        tables.append((r, ps))
    quiet_true = 0 if abs(math.sin(offset)) >= abs(math.cos(offset)) else 1
    errs = np.empty(trials)
    hits = 0
    for t in range(trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i, t]))
        r0, r1 = _trial_readings(tables, shots, rng)
        try:
            est = estimate_phase(r0, r1, calibration, theta_ref, 2 * shots)
        except UndeterminedPhaseError:
            errs[t] = math.pi  # no information: count as a maximal miss
            continue
        errs[t] = wrap_angle(est.phi_hat - phi)
        hits += est.chosen_setting == quiet_true
    rms = float(math.sqrt(np.mean(errs ** 2)))
    return ScanRow(phi, rms, rms * math.sqrt(shots), analytic, hits / trials, float(np.mean(errs)))


def rms_error_scan(ens: Ensemble, true_phis: Sequence[float], shots_per_setting: int, seed: int,
                   trials: int = 200, theta_ref: float = 0.0, threads: int = 1) -> list[ScanRow]:
    """RMS estimation error versus true phase, with the analytic comparison column.

    Each trial draws fresh shots for both settings from a generator seeded by
    ``(seed, phi index, trial)``, so results do not depend on ``threads``.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if shots_per_setting < 1:
        raise ValueError("shots_per_setting must be >= 1")
    mom = moments(ens)
    calibration = mom.transverse_mean_t
    phis = [float(p) for p in true_phis]
    analytic = []
    for phi in phis:
        off = phi - theta_ref
        quiet = off if abs(math.sin(off)) >= abs(math.cos(off)) else off + math.pi / 2
        analytic.append(float(delta_phi_curve(mom, [quiet]).delta_phi[0]))
    args = [(ens, i, phi, theta_ref, calibration, shots_per_setting, seed, trials, analytic[i])
            for i, phi in enumerate(phis)]
    if threads <= 1:
        return [_scan_point(*a) for a in args]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda a: _scan_point(*a), args))
