"""Entanglement, squeezing and phase-sensitivity measures computed from moments."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .ensemble import NormalizedMoments
from .errors import FixedNumberRequiredError, UndefinedCriterionError

__all__ = [
    "CriterionReport",
    "PhaseNoiseCurve",
    "e_hz",
    "e_ph",
    "xi_s",
    "xi_s_ph",
    "eta_ph",
    "delta_phi_curve",
    "cj_asymptote",
    "report",
]

# offsets closer than this to 0 or pi are treated as the divergent points
DIVERGENCE_TOL = 1e-12
# witness flags need a margin so that rounding at exactly 1 is not reported
FLAG_TOL = 1e-9


def _require_mean_x(m: NormalizedMoments, normalized: bool = True) -> float:
    mean = abs(m.mean_jx_t if normalized else m.mean_jx)
    if mean == 0:
        raise UndefinedCriterionError("mean spin along x vanishes")
    return mean


def e_hz(m: NormalizedMoments) -> float:
    """``(Var Jx + Var Jy) / (<N>/2)``; below 1 only for mode-entangled states."""
    if not m.mean_n > 0:
        raise UndefinedCriterionError("E_HZ needs <N> > 0")
    return (m.var_jx + m.var_jy) / (m.mean_n / 2)


def e_ph(m: NormalizedMoments) -> float:
    """Number-normalized analogue ``(Var J~x + Var J~y) / (<N+>/2)``."""
    if not m.mean_n_plus > 0:
        raise UndefinedCriterionError("E_ph needs <N+> > 0 (ensemble is all vacuum)")
    return (m.var_jx_t + m.var_jy_t) / (m.mean_n_plus / 2)


def xi_s(m: NormalizedMoments, fixed_n: int | None = None) -> tuple[float, float]:
    """Fixed-number spin squeezing ``sqrt(n) dJ^{Y,Z} / |<Jx>|``.

    Refuses ensembles with a fluctuating number; the unnormalized parameter
    has no meaning there.
    """
    n = m.fixed_n if fixed_n is None else fixed_n
    if m.fixed_n is None or n != m.fixed_n:
        raise FixedNumberRequiredError("xi_s is only defined for a fixed total number")
    mean = _require_mean_x(m, normalized=False)
    root = math.sqrt(n)
    return (root * math.sqrt(max(m.var_jy, 0.0)) / mean,
            root * math.sqrt(max(m.var_jz, 0.0)) / mean)


def xi_s_ph(m: NormalizedMoments) -> tuple[float, float]:
    """Number-normalized squeezing ``sqrt(<N>) dJ~^{Y,Z} / |<J~x>|``."""
    mean = _require_mean_x(m)
    root = math.sqrt(m.mean_n)
    return (root * math.sqrt(max(m.var_jy_t, 0.0)) / mean,
            root * math.sqrt(max(m.var_jz_t, 0.0)) / mean)


def eta_ph(m: NormalizedMoments) -> float:
    """Worst-case sensitivity over the quiet quadrants relative to shot noise."""
    mean = _require_mean_x(m)
    return math.sqrt(m.mean_n * max(m.var_jx_t + m.var_jy_t, 0.0)) / mean


@dataclass(frozen=True)
class PhaseNoiseCurve:
    offsets: np.ndarray
    delta_phi: np.ndarray      # nan at the divergent offsets
    divergent: np.ndarray      # bool mask
    worst_case: float          # value at pi/4 (equal to 3pi/4 up to covariance)
    exact_covariance: bool

    def rows(self):
        return list(zip(self.offsets.tolist(), self.delta_phi.tolist()))


def _dphi_sq(m, phi, mean, exact):
    s, c = math.sin(phi), math.cos(phi)
    if exact:
        return (c * c * m.var_jx_t + s * s * m.var_jy_t + 2 * s * c * m.cov_jxjy_t) / (mean * s) ** 2
    return (m.var_jx_t * (c / s) ** 2 + m.var_jy_t) / mean ** 2


def delta_phi_curve(m: NormalizedMoments, offsets: Sequence[float],
                    exact_covariance: bool = False) -> PhaseNoiseCurve:
    """Single-shot phase uncertainty versus offset ``phi - theta'``.

    Offsets at 0 or pi (mod pi) diverge and are marked rather than evaluated.
    """
    mean = _require_mean_x(m)
    offs = np.asarray(offsets, dtype=float).reshape(-1)
    out = np.full(offs.shape, np.nan)
    div = np.zeros(offs.shape, dtype=bool)
    for i, phi in enumerate(offs):
        if abs(math.sin(phi)) < DIVERGENCE_TOL:
            div[i] = True
            continue
        out[i] = math.sqrt(max(_dphi_sq(m, phi, mean, exact_covariance), 0.0))
    worst = max(math.sqrt(max(_dphi_sq(m, a, mean, exact_covariance), 0.0))
                for a in (math.pi / 4, 3 * math.pi / 4))
    return PhaseNoiseCurve(offs, out, div, worst, exact_covariance)


def cj_asymptote(J: float) -> float:
    """Large-J form ``3 (2J)^(2/3) / 8`` of the planar variance bound."""
    if not J > 0:
        raise ValueError("J must be positive")
    return 3 * (2 * J) ** (2 / 3) / 8


@dataclass(frozen=True)
class CriterionReport:
    e_hz: float
    e_ph: float
    xi_s_y: float | None
    xi_s_z: float | None
    xi_s_ph_y: float
    xi_s_ph_z: float
    eta_ph: float
    entangled_modes: bool
    entangled_particles: bool
    subshot_all_angles: bool

    def as_dict(self) -> dict:
        return asdict(self)


def report(m: NormalizedMoments) -> CriterionReport:
    xs = xi_s(m) if m.fixed_n is not None else (None, None)
    xy, xz = xi_s_ph(m)
    eph = e_ph(m)
    eta = eta_ph(m)
    return CriterionReport(
        e_hz=e_hz(m), e_ph=eph, xi_s_y=xs[0], xi_s_z=xs[1],
        xi_s_ph_y=xy, xi_s_ph_z=xz, eta_ph=eta,
        entangled_modes=eph < 1 - FLAG_TOL,
        entangled_particles=min(xy, xz) < 1 - FLAG_TOL,
        subshot_all_angles=eta < 1 - FLAG_TOL,
    )
