"""Number-fluctuating ensembles and their number-normalized spin moments.

An :class:`Ensemble` is a weighted list of pure sector states, i.e. a density
operator that is block diagonal in total number.  All spin observables and
``N`` conserve total number, so coherences between sectors never enter the
quantities computed here.

Normalized spins are ``J~ = J N+`` with ``N+`` the Moore-Penrose inverse of
the number operator (``1/n``, and ``0`` on the vacuum).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import poisson

from .errors import StateFactoryError
from .sectors import MZ_ANGLE, MZ_AXIS, generalized_inverse_scalar, rotate_amplitudes
from .states import SectorState, _raw_moments, su2_coherent

__all__ = [
    "NumberDistribution",
    "Ensemble",
    "NormalizedMoments",
    "delta_distribution",
    "poisson_distribution",
    "attach",
    "coherent_product_ensemble",
    "product_state_ensemble",
    "mix",
    "normalized_expectation",
    "moments",
    "align_frame",
    "mz_prepare",
    "optimal_mz_phase",
]

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class NumberDistribution:
    """Probabilities ``P_n`` over total boson number, ascending in ``n``."""

    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        pairs = tuple(sorted((int(n), float(p)) for n, p in self.support))
        ns = [n for n, _ in pairs]
        if not pairs:
            raise ValueError("empty number distribution")
        if len(set(ns)) != len(ns):
            raise ValueError("duplicate n in number distribution")
        if any(n < 0 for n in ns):
            raise ValueError("negative particle number")
        if any(p < 0 for _, p in pairs):
            raise ValueError("negative probability")
        total = math.fsum(p for _, p in pairs)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"probabilities sum to {total}, not 1")
        object.__setattr__(self, "support", pairs)

    @property
    def ns(self) -> np.ndarray:
        return np.array([n for n, _ in self.support], dtype=int)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.support])

    @property
    def mean(self) -> float:
        return float(self.probs @ self.ns)

    @property
    def std(self) -> float:
        ns, p = self.ns, self.probs
        mu = p @ ns
        return float(math.sqrt(p @ (ns - mu) ** 2))

    @property
    def fixed_n(self) -> int | None:
        return self.support[0][0] if len(self.support) == 1 else None


def delta_distribution(n: int) -> NumberDistribution:
    return NumberDistribution(((n, 1.0),))


def poisson_distribution(mean: float, tail_mass: float = 1e-12) -> NumberDistribution:
    """Poisson ``P(N)`` truncated to a contiguous window and renormalized.

    The window is the smallest ``[n_lo, n_hi]`` found by trimming the lower
    and upper tails with at most ``tail_mass / 2`` each, so the omitted mass
    never exceeds ``tail_mass``.
    """
    if not mean > 0:
        raise ValueError("Poisson mean must be positive")
    if not 0 < tail_mass <= 1e-6:
        raise ValueError("tail_mass must be in (0, 1e-6]")
    half = tail_mass / 2
    # ppf/isf give the first n whose cdf/sf crosses the tail bound
    n_lo = int(poisson.ppf(half, mean))
    if poisson.cdf(n_lo - 1, mean) > half:
        n_lo -= 1
    n_lo = max(n_lo, 0)
    while n_lo > 0 and poisson.cdf(n_lo - 1, mean) > half:
        n_lo -= 1
    n_hi = int(poisson.isf(half, mean))
    while poisson.sf(n_hi, mean) > half:
        n_hi += 1
    ns = np.arange(n_lo, n_hi + 1)
    p = poisson.pmf(ns, mean)
    p = p / p.sum()
    return NumberDistribution(tuple(zip(ns.tolist(), p.tolist())))


@dataclass(frozen=True)
class Ensemble:
    """Weighted pure sector states. Members may share a sector."""

    members: tuple[tuple[float, SectorState], ...]

    def __post_init__(self):
        members = tuple((float(w), s) for w, s in self.members)
        if not members:
            raise ValueError("empty ensemble")
        if any(w < 0 for w, _ in members):
            raise ValueError("negative ensemble weight")
        total = math.fsum(w for w, _ in members)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"ensemble weights sum to {total}, not 1")
        # fixed reduction order: ascending n, then original member index
        order = sorted(range(len(members)), key=lambda i: (members[i][1].n, i))
        object.__setattr__(self, "members", tuple(members[i] for i in order))

    @property
    def ns(self) -> list[int]:
        return [s.n for _, s in self.members]

    @property
    def fixed_n(self) -> int | None:
        ns = {s.n for w, s in self.members if w > 0}
        return ns.pop() if len(ns) == 1 else None

    def number_distribution(self) -> NumberDistribution:
        acc: dict[int, float] = {}
        for w, s in self.members:
            acc[s.n] = acc.get(s.n, 0.0) + w
        return NumberDistribution(tuple(acc.items()))

    def map_states(self, fn: Callable[[SectorState], SectorState]) -> "Ensemble":
        return Ensemble(tuple((w, fn(s)) for w, s in self.members))


def attach(factory: Callable[[int], SectorState], dist: NumberDistribution) -> Ensemble:
    """One member per support point of ``dist``, built by ``factory(n)``."""
    members = []
    for n, p in dist.support:
        try:
            state = factory(n)
        except Exception as exc:  # tag the sector that failed
            raise StateFactoryError(n, exc) from exc
        if state.n != n:
            raise StateFactoryError(n, f"factory returned a state for n={state.n}")
        members.append((p, state))
    return Ensemble(tuple(members))


def coherent_product_ensemble(alpha_sq: float, beta_sq: float, rel_phase: float = 0.0,
                              tail_mass: float = 1e-12) -> Ensemble:
    """Block-diagonal form of the product coherent state ``|alpha>|beta>``.

    Total number is Poissonian with mean ``alpha_sq + beta_sq``; each sector
    holds the SU(2) coherent state whose polar angle is set by the intensity
    split and whose azimuth is ``rel_phase`` (the phase of ``<a^+ b>``).
    """
    if alpha_sq < 0 or beta_sq < 0 or alpha_sq + beta_sq <= 0:
        raise ValueError("need alpha_sq, beta_sq >= 0, not both zero")
    total = alpha_sq + beta_sq
    polar = 2 * math.atan2(math.sqrt(beta_sq), math.sqrt(alpha_sq))
    dist = poisson_distribution(total, tail_mass)
    return attach(lambda n: su2_coherent(n, polar, rel_phase), dist)


def product_state_ensemble(mode_a, mode_b) -> Ensemble:
    """Sector decomposition of a pure product state ``|psi_a> (x) |psi_b>``.

    ``mode_a`` and ``mode_b`` are Fock amplitudes of the two modes.  Sectors
    with zero weight are dropped.
    """
    a = np.asarray(mode_a, dtype=complex)
    b = np.asarray(mode_b, dtype=complex)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    members = []
    for n in range(len(a) + len(b) - 1):
        k = np.arange(n + 1)  # occupation of mode a, i.e. index m + J
        ok = (k < len(a)) & (n - k < len(b))
        amps = np.zeros(n + 1, dtype=complex)
        amps[ok] = a[k[ok]] * b[n - k[ok]]
        w = float(np.vdot(amps, amps).real)
        if w > 0:
            members.append((w, SectorState.normalized(n, amps)))
    total = math.fsum(w for w, _ in members)
    return Ensemble(tuple((w / total, s) for w, s in members))


def mix(ensembles: Iterable[Ensemble], weights: Iterable[float]) -> Ensemble:
    """Convex combination of ensembles."""
    ensembles = list(ensembles)
    weights = [float(w) for w in weights]
    if len(ensembles) != len(weights):
        raise ValueError("one weight per ensemble")
    members = [(w * v, s) for e, w in zip(ensembles, weights) for v, s in e.members]
    return Ensemble(tuple(members))


def _op_angle(op):
    if op == "Jx":
        return "x", None
    if op == "Jy":
        return "y", None
    if op == "Jz":
        return "z", None
    if isinstance(op, (int, float)) and not isinstance(op, bool):
        return "phi", float(op)
    if isinstance(op, tuple) and len(op) == 2 and op[0] in ("Jphi", "Jφ"):
        return "phi", float(op[1])
    raise ValueError(f"unknown operator label {op!r}")


def normalized_expectation(ens: Ensemble, op) -> float:
    """``<O N+>`` for ``op`` in ``"Jx" | "Jy" | "Jz"`` or a ``J^phi`` angle.

    A bare float (or ``("Jphi", angle)``) selects ``cos(a) Jx + sin(a) Jy``.
    """
    kind, angle = _op_angle(op)
    total = 0.0
    for w, s in ens.members:
        jx, jy, jz, *_ = _raw_moments(s.n, s.amplitudes)
        val = {"x": jx, "y": jy, "z": jz}.get(kind)
        if kind == "phi":
            val = math.cos(angle) * jx + math.sin(angle) * jy
        total += w * val * generalized_inverse_scalar(s.n)
    return total


@dataclass(frozen=True)
class NormalizedMoments:
    """Moments of the normalized spins ``J~ = J N+`` plus their raw counterparts."""

    mean_jx_t: float
    mean_jy_t: float
    mean_jz_t: float
    var_jx_t: float
    var_jy_t: float
    var_jz_t: float
    cov_jxjy_t: float
    mean_n: float
    mean_n_plus: float
    mean_jx: float
    mean_jy: float
    mean_jz: float
    var_jx: float
    var_jy: float
    var_jz: float
    cov_jxjy: float
    nonvacuum_weight: float = 1.0
    fixed_n: int | None = None
    # sum_n P_n (n+)^2 Var_n(J) per axis: the floor of the normalized variances
    conditional_var_t: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    def var_jphi_t(self, angle: float, exact_covariance: bool = True) -> float:
        c, s = math.cos(angle), math.sin(angle)
        v = c * c * self.var_jx_t + s * s * self.var_jy_t
        if exact_covariance:
            v += 2 * s * c * self.cov_jxjy_t
        return v

    def mean_jphi_t(self, angle: float) -> float:
        return math.cos(angle) * self.mean_jx_t + math.sin(angle) * self.mean_jy_t

    @property
    def transverse_mean_t(self) -> float:
        """``|<a^+ b N+>|``: length of the normalized mean spin in the x-y plane."""
        return math.hypot(self.mean_jx_t, self.mean_jy_t)


def moments(ens: Ensemble) -> NormalizedMoments:
    """All first and second moments of ``J~`` and ``J`` for an ensemble.

    Variances use the law of total variance (within-sector variance plus the
    spread of the sector means) so that each sector's contribution is
    accumulated in centred form.
    """
    rows = []
    for w, s in ens.members:
        jx, jy, jz, jx2, jy2, jz2, jxy = _raw_moments(s.n, s.amplitudes)
        rows.append((w, s.n, generalized_inverse_scalar(s.n),
                     (jx, jy, jz), (jx2 - jx * jx, jy2 - jy * jy, jz2 - jz * jz),
                     jxy - jx * jy))
    w = np.array([r[0] for r in rows])
    n = np.array([r[1] for r in rows], dtype=float)
    ninv = np.array([r[2] for r in rows])
    mu = np.array([r[3] for r in rows])          # (members, 3)
    var = np.array([r[4] for r in rows])
    cov = np.array([r[5] for r in rows])

    mean_raw = w @ mu
    dev_raw = mu - mean_raw
    var_raw = w @ var + w @ dev_raw ** 2
    cov_raw = w @ cov + w @ (dev_raw[:, 0] * dev_raw[:, 1])

    mu_t = mu * ninv[:, None]
    mean_t = w @ mu_t
    dev_t = mu_t - mean_t
    cond_t = w @ (var * (ninv ** 2)[:, None])
    var_t = cond_t + w @ dev_t ** 2
    cov_t = w @ (cov * ninv ** 2) + w @ (dev_t[:, 0] * dev_t[:, 1])

    return NormalizedMoments(
        mean_jx_t=float(mean_t[0]), mean_jy_t=float(mean_t[1]), mean_jz_t=float(mean_t[2]),
        var_jx_t=float(var_t[0]), var_jy_t=float(var_t[1]), var_jz_t=float(var_t[2]),
        cov_jxjy_t=float(cov_t),
        mean_n=float(w @ n), mean_n_plus=float(w @ ninv),
        mean_jx=float(mean_raw[0]), mean_jy=float(mean_raw[1]), mean_jz=float(mean_raw[2]),
        var_jx=float(var_raw[0]), var_jy=float(var_raw[1]), var_jz=float(var_raw[2]),
        cov_jxjy=float(cov_raw),
        nonvacuum_weight=float(w[n > 0].sum()),
        fixed_n=ens.fixed_n,
        conditional_var_t=tuple(float(x) for x in cond_t),
    )


def align_frame(ens: Ensemble) -> Ensemble:
    """Rotate every member about z so that ``<J~x> >= 0`` and ``<J~y> = 0``.

    The same angle is used for all sectors (a single reference-phase choice).
    """
    mx = normalized_expectation(ens, "Jx")
    my = normalized_expectation(ens, "Jy")
    if mx == 0 and my == 0:
        return ens
    angle = -math.atan2(my, mx)
    return ens.map_states(lambda s: s.rotated_z(angle))


def _mz_transverse(means, phase):
    # |<J~+>| after input z-rotation by `phase` and the MZ beam splitter:
    # out x = in z, out y = -(in x rotated by phase).
    mx, my, mz = means
    x_rot = math.cos(phase) * mx - math.sin(phase) * my
    return math.hypot(mz, x_rot)


def optimal_mz_phase(ens: Ensemble, grid_points: int = 181) -> float:
    """Input phase shift maximizing the transverse normalized mean after the beam splitter.

    Coarse grid on ``[-pi/2, pi/2]`` then bounded golden-section refinement
    around the best grid point.  Ties go to the smallest ``|phase|``.
    """
    means = tuple(normalized_expectation(ens, k) for k in ("Jx", "Jy", "Jz"))
    grid = np.linspace(-math.pi / 2, math.pi / 2, grid_points)
    vals = np.array([_mz_transverse(means, p) for p in grid])
    best = np.flatnonzero(vals >= vals.max() - 1e-15 * max(1.0, vals.max()))
    i = int(best[np.argmin(np.abs(grid[best]))])
    step = grid[1] - grid[0]
    lo, hi = grid[i] - step, grid[i] + step
    res = minimize_scalar(lambda p: -_mz_transverse(means, p), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-10})
    cand = float(res.x) if -res.fun > vals[i] + 1e-15 else float(grid[i])
    return 0.0 if abs(cand) < 1e-9 else cand


def mz_prepare(ens: Ensemble, input_phase: float | None = None, align: bool = True) -> Ensemble:
    """Send each member through the input phase shift and the MZ beam splitter.

    ``input_phase=None`` picks :func:`optimal_mz_phase`.  With ``align`` the
    result is rotated so its mean normalized spin lies along +x.
    """
    phase = optimal_mz_phase(ens) if input_phase is None else float(input_phase)

    def prep(s):
        amps = s.amplitudes * np.exp(-1j * phase * s.m)
        return SectorState.normalized(s.n, rotate_amplitudes(amps, MZ_AXIS, MZ_ANGLE))

    out = ens.map_states(prep)
    return align_frame(out) if align else out
