"""Named pure states within a fixed-number sector.

Every factory returns a :class:`SectorState` whose amplitudes run over
``m = -J..J`` (ascending).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

from .sectors import (
    HamiltonianParams,
    _check_n,
    hamiltonian_bands,
    ladder_coefficients,
    m_values,
    z_rotation_phases,
)

__all__ = [
    "SectorState",
    "SpinMoments",
    "PqsSpec",
    "PqsResult",
    "GroundStateSolution",
    "spin_moments",
    "variance_sum",
    "phase_eigenstate",
    "pqs_sigma",
    "gaussian_pqs_state",
    "optimal_pqs_state",
    "su2_coherent",
    "su2_coherent_x",
    "solve_ground_state",
    "ground_state",
]

NORM_TOL = 1e-10


@dataclass(frozen=True)
class SectorState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        n = _check_n(self.n)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (n + 1,):
            raise ValueError(f"state for n={n} needs {n + 1} amplitudes, got {amps.shape[0]}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, n: int, amplitudes) -> "SectorState":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize a zero vector")
        return cls(n, amps / norm)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def m(self) -> np.ndarray:
        return m_values(self.n)

    def overlap(self, other: "SectorState") -> complex:
        if other.n != self.n:
            raise ValueError("states live in different sectors")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def rotated_z(self, angle: float) -> "SectorState":
        """``exp(-i angle Jz) |psi>``; turns the mean spin by ``+angle`` about z."""
        return SectorState(self.n, z_rotation_phases(self.n, angle) * self.amplitudes)


@dataclass(frozen=True)
class SpinMoments:
    """First and second spin moments of a single sector state."""

    n: int
    jx: float
    jy: float
    jz: float
    jx2: float
    jy2: float
    jz2: float
    jxjy: float  # <(Jx Jy + Jy Jx)/2>

    @property
    def var_jx(self):
        return self.jx2 - self.jx ** 2

    @property
    def var_jy(self):
        return self.jy2 - self.jy ** 2

    @property
    def var_jz(self):
        return self.jz2 - self.jz ** 2

    @property
    def cov_jxjy(self):
        return self.jxjy - self.jx * self.jy


def _raw_moments(n, c):
    # Banded sums over the ladder J_+|m> = L_m |m+1>; O(n), no dense matrices.
    p = (c.real ** 2 + c.imag ** 2)
    m = m_values(n)
    jz = float(p @ m)
    jz2 = float(p @ (m * m))
    if n == 0:
        return 0.0, 0.0, jz, 0.0, 0.0, jz2, 0.0
    L = ladder_coefficients(n)
    jp = np.vdot(c[1:], L * c[:-1])
    L2 = L * L
    sym = float(p[1:] @ L2 + p[:-1] @ L2)  # <J+J- + J-J+>
    if n > 1:
        jpp = np.vdot(c[2:], L[1:] * L[:-1] * c[:-2])
    else:
        jpp = 0j
    jx2 = (2 * jpp.real + sym) / 4
    jy2 = (sym - 2 * jpp.real) / 4
    return float(jp.real), float(jp.imag), jz, float(jx2), float(jy2), jz2, float(jpp.imag / 2)


def spin_moments(state: SectorState) -> SpinMoments:
    return SpinMoments(state.n, *_raw_moments(state.n, state.amplitudes))


def variance_sum(state: SectorState) -> float:
    """Planar variance ``Var(Jx) + Var(Jy)``."""
    s = spin_moments(state)
    return s.var_jx + s.var_jy


def phase_eigenstate(n: int, theta: float = 0.0) -> SectorState:
    """Relative-phase state: uniform magnitudes with phases ``exp(i m theta)``."""
    n = _check_n(n)
    amps = np.exp(1j * theta * m_values(n)) / math.sqrt(n + 1)
    return SectorState(n, amps)


@dataclass(frozen=True)
class PqsSpec:
    """Gaussian planar-squeezed envelope: ``sigma_m`` is the variance of Jz."""

    sigma_m: float
    theta: float = 0.0

    def __post_init__(self):
        if not self.sigma_m > 0:
            raise ValueError("sigma_m must be positive")


def pqs_sigma(n: int) -> float:
    """Asymptotically optimal Jz variance ``(J^2/2)^(2/3)``."""
    J = n / 2
    return (J * J / 2) ** (2 / 3)


def gaussian_pqs_state(n: int, spec: PqsSpec) -> SectorState:
    # |c_m|^2 is a Gaussian of variance sigma_m, truncated to |m| <= J.
    n = _check_n(n)
    m = m_values(n)
    amps = np.exp(-m * m / (4 * spec.sigma_m)) * np.exp(1j * spec.theta * m)
    return SectorState.normalized(n, amps)


@dataclass(frozen=True)
class PqsResult:
    state: SectorState
    cj: float
    converged: bool
    iterations: int
    restarts: int


def _pqs_update(n, mean_x, mean_y):
    # Ground vector of J(J+1) - Jz^2 - 2(x Jx + y Jy), solved in the frame
    # where the mean lies on +x and rotated back.
    J = n / 2
    m = m_values(n)
    r = math.hypot(mean_x, mean_y)
    alpha = math.atan2(mean_y, mean_x)
    if n == 0:
        return np.ones(1, dtype=complex)
    _, v = eigh_tridiagonal(J * (J + 1) - m * m, -r * ladder_coefficients(n),
                            select="i", select_range=(0, 0))
    return v[:, 0] * np.exp(-1j * alpha * m)


def _planar_f(n, c):
    jx, jy, _, jx2, jy2, _, _ = _raw_moments(n, c)
    return jx2 - jx * jx + jy2 - jy * jy, jx, jy


def optimal_pqs_state(n: int, tol: float = 1e-10, max_iters: int = 5000,
                      restarts: int = 5, seed: int = 0) -> PqsResult:
    """Minimize ``Var(Jx) + Var(Jy)`` over sector states.

    Self-consistent iteration: given the current mean spin, the next state is
    the ground vector of ``Jx^2 + Jy^2 - 2<Jx>Jx - 2<Jy>Jy``; this never
    increases the variance sum.  Runs from the Gaussian warm start plus
    ``restarts`` random starts (seeded) and keeps the lowest value.
    """
    n = _check_n(n)
    if n < 1:
        raise ValueError("optimal PQS state needs n >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    starts = [gaussian_pqs_state(n, PqsSpec(pqs_sigma(n))).amplitudes]
    for _ in range(restarts):
        z = rng.normal(size=n + 1) + 1j * rng.normal(size=n + 1)
        starts.append(z / np.linalg.norm(z))

    best = None
    for c0 in starts:
        c = np.asarray(c0, dtype=complex)
        f, mx, my = _planar_f(n, c)
        converged = False
        it = 0
        for it in range(1, max_iters + 1):
            c = _pqs_update(n, mx, my)
            f_new, mx, my = _planar_f(n, c)
            delta = abs(f - f_new)
            f = f_new
            if delta < tol:
                converged = True
                break
        if best is None or f < best[0]:
            best = (f, c, converged, it)
    f, c, converged, it = best
    return PqsResult(SectorState.normalized(n, c), float(f), converged, it, restarts)


def su2_coherent(n: int, polar: float, azimuth: float = 0.0) -> SectorState:
    """Beam-split number state pointing at ``(polar, azimuth)`` on the Bloch sphere.

    ``polar = 0`` puts all bosons in mode a (``m = +J``).
    """
    n = _check_n(n)
    k = np.arange(n + 1)  # occupation of mode a
    cos_h, sin_h = math.cos(polar / 2), math.sin(polar / 2)
    amps = np.zeros(n + 1, dtype=complex)
    if sin_h == 0:
        amps[n] = 1.0
    elif cos_h == 0:
        amps[0] = 1.0
    else:
        # log-space binomials: C(n, k) overflows long before n ~ 10^3
        logmag = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))
        logmag += k * math.log(abs(cos_h)) + (n - k) * math.log(abs(sin_h))
        amps[:] = np.sign(cos_h) ** k * np.sign(sin_h) ** (n - k) * np.exp(logmag)
    amps *= np.exp(-1j * azimuth * m_values(n))
    return SectorState.normalized(n, amps)


def su2_coherent_x(n: int) -> SectorState:
    """Maximal-Jx eigenstate: binomial amplitudes ``sqrt(C(n, J+m)) / 2^(n/2)``."""
    return su2_coherent(n, math.pi / 2, 0.0)


@dataclass(frozen=True)
class GroundStateSolution:
    state: SectorState
    energy: float
    gap: float
    degenerate: bool


def _fix_frame(n, v):
    # Real ground vector; flip alternate signs (a pi rotation about z) so <Jx> >= 0.
    if n > 0:
        jx = float(v[1:] @ (ladder_coefficients(n) * v[:-1]))
        if jx < 0:
            v = v * (-1.0) ** np.arange(n + 1)
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0:
        v = -v
    return v


def solve_ground_state(n: int, params: HamiltonianParams) -> GroundStateSolution:
    """Lowest eigenvector of the two-well Hamiltonian, with its frame fixed.

    After the solve the state is rotated about z so that ``<Jx> >= 0`` and
    ``<Jy> = 0``.  A level gap below ``1e-12 * ||H||`` is flagged as degenerate
    and resolved by taking the eigenvector with the larger ``|<Jx>|``.
    """
    n = _check_n(n)
    if n == 0:
        return GroundStateSolution(SectorState(0, [1.0]), 0.0, math.inf, False)
    diag, off = hamiltonian_bands(n, params)
    k_hi = min(1, n)
    w, v = eigh_tridiagonal(diag, off, select="i", select_range=(0, k_hi))
    gap = float(w[1] - w[0]) if len(w) > 1 else math.inf
    scale = float(np.max(np.abs(diag)) + 2 * np.max(np.abs(off))) or 1.0
    degenerate = gap < 1e-12 * scale
    pick = 0
    if degenerate:
        L = ladder_coefficients(n)
        jx = [abs(float(v[1:, i] @ (L * v[:-1, i]))) for i in range(2)]
        pick = int(jx[1] > jx[0])
    vec = _fix_frame(n, v[:, pick] / np.linalg.norm(v[:, pick]))
    return GroundStateSolution(SectorState(n, vec), float(w[pick]), gap, bool(degenerate))


def ground_state(n: int, params: HamiltonianParams) -> SectorState:
    return solve_ground_state(n, params).state
