"""Fixed-number angular-momentum sectors of a two-mode boson system.

A sector with total number ``n`` is spanned by ``|J, m>`` with ``J = n/2`` and
``m = -J..J`` in ascending order, so basis index ``k = m + J``.  The mode
occupations are ``n_a = J + m`` and ``n_b = J - m``.  Everything downstream
shares this convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "SectorBasis",
    "SectorOperator",
    "HamiltonianParams",
    "m_values",
    "ladder_coefficients",
    "build_spin_operators",
    "generalized_inverse_scalar",
    "build_jphi",
    "hamiltonian_bands",
    "build_hamiltonian",
    "su2_rotation",
    "rotate_amplitudes",
    "z_rotation_phases",
    "mz_input_rotation",
    "MZ_AXIS",
    "MZ_ANGLE",
]


def _check_n(n):
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValueError(f"sector label must be a non-negative integer, got {n!r}")
    return int(n)


@dataclass(frozen=True)
class SectorBasis:
    """The ``|J, m>`` basis of the sector with ``n`` bosons."""

    n: int

    def __post_init__(self):
        object.__setattr__(self, "n", _check_n(self.n))

    @property
    def J(self) -> float:
        return self.n / 2

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def m(self) -> np.ndarray:
        return m_values(self.n)

    def index(self, m: float) -> int:
        k = m + self.J
        if abs(k - round(k)) > 1e-9 or not 0 <= round(k) <= self.n:
            raise ValueError(f"m={m} is not in the sector n={self.n}")
        return int(round(k))

    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        """Mode occupations ``(n_a, n_b)`` per basis index."""
        k = np.arange(self.n + 1)
        return k, self.n - k


@dataclass(frozen=True)
class SectorOperator:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        n = _check_n(self.n)
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (n + 1, n + 1):
            raise ValueError(f"operator for n={n} must be {(n + 1, n + 1)}, got {mat.shape}")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "matrix", mat)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def unitarity_error(self) -> float:
        eye = np.eye(self.n + 1)
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - eye)))

    def expectation(self, amplitudes) -> complex:
        psi = np.asarray(amplitudes)
        return complex(np.vdot(psi, self.matrix @ psi))

    def __matmul__(self, other):
        if isinstance(other, SectorOperator):
            if other.n != self.n:
                raise ValueError("sector mismatch")
            return SectorOperator(self.n, self.matrix @ other.matrix)
        return self.matrix @ other


@dataclass(frozen=True)
class HamiltonianParams:
    """Two-well couplings: tunneling ``kappa`` and self-interaction ``g``."""

    kappa: float = 1.0
    g: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and math.isfinite(self.g)):
            raise ValueError("kappa and g must be finite")

    @classmethod
    def from_ratio(cls, g_over_kappa: float, kappa: float = 1.0) -> "HamiltonianParams":
        return cls(kappa=kappa, g=g_over_kappa * kappa)


def m_values(n: int) -> np.ndarray:
    n = _check_n(n)
    return np.arange(n + 1) - n / 2


@lru_cache(maxsize=1024)
def _ladder(n):
    m = m_values(n)[:-1]
    J = n / 2
    out = np.sqrt((J - m) * (J + m + 1))
    out.flags.writeable = False
    return out


def ladder_coefficients(n: int) -> np.ndarray:
    """``<J, m+1| J_+ |J, m>`` for ``m = -J..J-1`` (length ``n``)."""
    return _ladder(_check_n(n))


@lru_cache(maxsize=64)
def _spin_matrices(n):
    L = _ladder(n)
    jp = np.diag(L, -1).astype(complex)  # J_+ raises the index by one
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    jz = np.diag(m_values(n)).astype(complex)
    num = n * np.eye(n + 1, dtype=complex)
    return jx, jy, jz, num


def build_spin_operators(n: int) -> dict[str, SectorOperator]:
    """Schwinger spin operators and total number in sector ``n``.

    Returns a dict with keys ``"Jx"``, ``"Jy"``, ``"Jz"`` and ``"N"``.
    """
    n = _check_n(n)
    jx, jy, jz, num = _spin_matrices(n)
    return {
        "Jx": SectorOperator(n, jx),
        "Jy": SectorOperator(n, jy),
        "Jz": SectorOperator(n, jz),
        "N": SectorOperator(n, num),
    }


def generalized_inverse_scalar(n: int) -> float:
    """Eigenvalue of the Moore-Penrose inverse of the number operator: 1/n, or 0 for vacuum."""
    n = _check_n(n)
    return 0.0 if n == 0 else 1.0 / n


def build_jphi(n: int, angle: float) -> SectorOperator:
    n = _check_n(n)
    jx, jy, _, _ = _spin_matrices(n)
    return SectorOperator(n, math.cos(angle) * jx + math.sin(angle) * jy)


def hamiltonian_bands(n: int, params: HamiltonianParams) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the (real, symmetric, tridiagonal) two-well Hamiltonian."""
    n = _check_n(n)
    J = n / 2
    m = m_values(n)
    na, nb = J + m, J - m
    diag = 0.5 * params.g * (na * (na - 1) + nb * (nb - 1))
    off = params.kappa * _ladder(n)
    return diag, np.array(off)


def build_hamiltonian(n: int, params: HamiltonianParams) -> SectorOperator:
    diag, off = hamiltonian_bands(n, params)
    return SectorOperator(n, np.diag(diag) + np.diag(off, 1) + np.diag(off, -1))


def _unit_axis(axis):
    ax = np.asarray(axis, dtype=float).reshape(3)
    norm = float(np.linalg.norm(ax))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"rotation axis must be normalized (|axis| = {norm})")
    return ax


@lru_cache(maxsize=128)
def _generator_eig(n, ax, ay, az):
    # G = ax Jx + ay Jy + az Jz = D Gr D^dagger with D = diag(exp(-i beta k)), Gr real.
    L = _ladder(n)
    rho = math.hypot(ax, ay)
    beta = math.atan2(ay, ax)
    diag = az * m_values(n)
    if n == 0:
        w, v = np.zeros(1), np.ones((1, 1))
    else:
        w, v = eigh_tridiagonal(diag, rho * L / 2)
    phases = np.exp(-1j * beta * np.arange(n + 1))
    v.flags.writeable = False
    w.flags.writeable = False
    phases.flags.writeable = False
    return phases, v, w


def su2_rotation(n: int, axis, angle: float) -> SectorOperator:
    """``exp(-i angle axis.J)`` from the eigendecomposition of its Hermitian generator."""
    n = _check_n(n)
    ax = _unit_axis(axis)
    d, v, w = _generator_eig(n, *map(float, ax))
    core = (v * np.exp(-1j * angle * w)) @ v.T
    return SectorOperator(n, d[:, None] * core * d.conj()[None, :])


def rotate_amplitudes(amplitudes, axis, angle: float) -> np.ndarray:
    """Apply ``exp(-i angle axis.J)`` to a sector vector without forming the dense matrix."""
    psi = np.asarray(amplitudes, dtype=complex)
    n = psi.shape[0] - 1
    ax = _unit_axis(axis)
    d, v, w = _generator_eig(n, *map(float, ax))
    return d * (v @ (np.exp(-1j * angle * w) * (v.T @ (d.conj() * psi))))


def z_rotation_phases(n: int, angle: float) -> np.ndarray:
    """Diagonal of ``exp(-i angle Jz)``."""
    return np.exp(-1j * angle * m_values(n))


# Beam splitter a = (-i a_i + b_i)/sqrt2, b = -(i a_i + b_i)/sqrt2 acts on the
# spin vector as the proper rotation Jx -> Jz_i, Jy -> -Jx_i, Jz -> -Jy_i:
# 2pi/3 about (-1, 1, -1)/sqrt3.
MZ_AXIS = (-1 / math.sqrt(3), 1 / math.sqrt(3), -1 / math.sqrt(3))
MZ_ANGLE = 2 * math.pi / 3


def mz_input_rotation(n: int) -> SectorOperator:
    """Sector unitary ``U`` with ``U^+ Jx U = Jz`` and ``U^+ Jy U = -Jx``.

    Intermediate-mode states are ``U @ psi_in`` for Mach-Zehnder input states
    ``psi_in``.
    """
    return su2_rotation(n, MZ_AXIS, MZ_ANGLE)
