"""Spin-wave free energies of the six periodic bond patterns.

Infinite-volume values are Brillouin-zone integrals evaluated by the
midpoint rule on the shifted grid ``k = 2*pi*(n + 1/2)/M - pi``.  All
integrands depend on ``k`` only through ``cos k1`` and ``cos k2`` so only
the quarter zone ``[0, pi]^2`` is summed.

Finite-volume values are exact: the Fourier transform block-diagonalizes
any 2-periodic coupling into 4x4 blocks indexed by the orbits
``{q, q + pi e1, q + pi e2, q + pi e1 + pi e2}`` of the reciprocal torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ValidationError
from .torus import ModelParams, PatternId, build_torus, pattern_coupling, pattern_mask

CATALAN = 0.915965594177219015
#: the integral I in closed form, 2G/pi
I_EXACT = 2 * CATALAN / math.pi

INHOMOGENEOUS = (PatternId.UO, PatternId.UD, PatternId.MP, PatternId.MA)
ORBIT_SHIFTS = np.array([(0, 0), (1, 0), (0, 1), (1, 1)])


@dataclass(frozen=True)
class Momentum:
    k1: float
    k2: float

    @property
    def a_minus_sq(self):
        return 2 - 2 * np.cos(self.k1)

    @property
    def a_plus_sq(self):
        return 2 + 2 * np.cos(self.k1)

    @property
    def b_minus_sq(self):
        return 2 - 2 * np.cos(self.k2)

    @property
    def b_plus_sq(self):
        return 2 + 2 * np.cos(self.k2)


def _as_momentum(k) -> Momentum:
    if isinstance(k, Momentum):
        return k
    k1, k2 = k
    return Momentum(np.asarray(k1, dtype=float), np.asarray(k2, dtype=float))


@dataclass(frozen=True)
class Quadrature:
    """Grid specification for zone integrals.

    With ``adaptive`` the grid is doubled from ``M`` until two successive
    values differ by less than ``tol`` or ``max_M`` is reached.  Otherwise
    the value is taken at ``M`` and compared against ``M // 2``.
    """

    M: int = 512
    tol: float = 1e-7
    max_M: int = 4096
    adaptive: bool = True

    def __post_init__(self):
        for v in (self.M, self.max_M):
            if v < 64 or v & (v - 1):
                raise ValidationError(f"grid size must be a power of two >= 64, got {v}")


DEFAULT_QUADRATURE = Quadrature()


@dataclass(frozen=True)
class FreeEnergyReport:
    """Free energy per site; ``L is None`` marks the infinite-volume value."""

    pattern: PatternId
    p: float
    kappa_o: float
    kappa_d: float
    value: float
    L: int | None = None
    grid_size: int | None = None
    error: float | None = None

    @property
    def infinite(self) -> bool:
        return self.L is None


# --------------------------------------------------------------------------
# symbols


def lattice_propagator(k) -> np.ndarray | float:
    """Fourier symbol ``4 - 2 cos k1 - 2 cos k2`` of the lattice Laplacian."""
    k = _as_momentum(k)
    return k.a_minus_sq + k.b_minus_sq


def _uo_det(am, ap, bm, ko, kd):
    diag = 0.5 * (ko + kd) * bm
    off = 0.5 * (ko - kd) * bm
    return (ko * am + diag) * (ko * ap + diag) - off * off


def det_pi_uo(k, m: ModelParams):
    """Determinant of the 2x2 block of the UO pattern."""
    k = _as_momentum(k)
    return _uo_det(k.a_minus_sq, k.a_plus_sq, k.b_minus_sq, m.kappa_o, m.kappa_d)


def pi_ma_matrix(k, m: ModelParams) -> np.ndarray:
    """The 4x4 block of the MA pattern at a single momentum (``r`` finite)."""
    r = _finite_r(m)
    k = _as_momentum(k)
    am, ap, bm, bp = (float(v) for v in (k.a_minus_sq, k.a_plus_sq, k.b_minus_sq, k.b_plus_sq))
    return np.array(
        [
            [r * (am + bm), bm, am, 0.0],
            [bm, r * (ap + bm), 0.0, ap],
            [am, 0.0, r * (am + bp), bp],
            [0.0, ap, bp, r * (ap + bp)],
        ]
    )


def _finite_r(m: ModelParams) -> float:
    if m.kappa_o == m.kappa_d:
        raise ValidationError(
            "degenerate r: equal stiffnesses make the MA block singular and the "
            "ordered/disordered distinction void"
        )
    return m.r


def det_pi_ma_closed(am, ap, bm, bp, r):
    """Factorized determinant of the MA block from the squared moduli."""
    cross = ap * am - bp * bm
    prod = (ap + bp) * (am + bp) * (ap + bm) * (am + bm)
    return (r * r - 1) * (prod * r * r - cross * cross)


def det_pi_ma(k, m: ModelParams):
    """Closed-form determinant of the MA block; requires unequal stiffnesses."""
    r = _finite_r(m)
    k = _as_momentum(k)
    return det_pi_ma_closed(k.a_minus_sq, k.a_plus_sq, k.b_minus_sq, k.b_plus_sq, r)


def _ma_scaled_det(am, ap, bm, bp, ko, kd):
    # ((kO - kD)/2)^4 det Pi_MA, rewritten so that it stays finite at kO = kD
    s, d = ko + kd, ko - kd
    cross = ap * am - bp * bm
    prod = (ap + bp) * (am + bp) * (ap + bm) * (am + bm)
    return 0.25 * ko * kd * (prod * s * s - cross * cross * d * d)


# --------------------------------------------------------------------------
# quadrature


def _log_integrand(pattern: PatternId, ko: float, kd: float):
    """Return f(c1, c2) whose zone average is the pattern's log integral.

    The returned callable already carries the pattern's prefactor
    (1/2, 1/4 or 1/8).
    """

    def moduli(c1, c2):
        return 2 - 2 * c1, 2 + 2 * c1, 2 - 2 * c2, 2 + 2 * c2

    if pattern in (PatternId.O, PatternId.D):
        kappa = ko if pattern is PatternId.O else kd
        return lambda c1, c2: 0.5 * np.log(kappa * (4 - 2 * c1 - 2 * c2))
    if pattern is PatternId.MP:
        return lambda c1, c2: 0.5 * np.log(ko * (2 - 2 * c1) + kd * (2 - 2 * c2))
    if pattern in (PatternId.UO, PatternId.UD):
        a, b = (ko, kd) if pattern is PatternId.UO else (kd, ko)

        def uo(c1, c2):
            am, ap, bm, _ = moduli(c1, c2)
            return 0.25 * np.log(_uo_det(am, ap, bm, a, b))

        return uo

    def ma(c1, c2):
        return 0.125 * np.log(_ma_scaled_det(*moduli(c1, c2), ko, kd))

    return ma


def _zone_average(f, M: int, chunk: int = 256) -> float:
    """Midpoint average of ``f(cos k1, cos k2)`` over the zone on an M x M grid."""
    h = M // 2
    c = np.cos(np.pi * (2 * np.arange(h) + 1) / M)
    total = 0.0
    for start in range(0, h, chunk):
        rows = c[start : start + chunk, None]
        total += math.fsum(np.sum(f(rows, c[None, :]), axis=1))
    return total / (h * h)


def _converged_average(f, quad: Quadrature) -> tuple[float, int, float]:
    if not quad.adaptive:
        value = _zone_average(f, quad.M)
        coarse = _zone_average(f, quad.M // 2)
        return value, quad.M, abs(value - coarse)
    M = quad.M
    prev = _zone_average(f, M)
    while True:
        nxt = _zone_average(f, 2 * M)
        err = abs(nxt - prev)
        M *= 2
        if err < quad.tol or 2 * M > quad.max_M:
            return nxt, M, err
        prev = nxt


@lru_cache(maxsize=256)
def _pattern_integral(pattern: PatternId, ko: float, kd: float, quad: Quadrature):
    return _converged_average(_log_integrand(pattern, ko, kd), quad)


@dataclass(frozen=True)
class ZoneConstants:
    I: float
    J: float
    grid_size: int
    error_I: float
    error_J: float

    @property
    def c1(self) -> float:
        return self.J - self.I


def _j_midpoint(M: int) -> float:
    # J depends on k1 alone, so the tensor rule reduces to a 1D midpoint sum
    h = M // 2
    c = np.cos(np.pi * (2 * np.arange(h) + 1) / M)
    return 0.5 * math.fsum(np.log(2 - 2 * c)) / h


def constants_I_J(quad: Quadrature = Quadrature(M=2048, adaptive=False)) -> ZoneConstants:
    """The zone integrals ``I = 1/2 <log D>`` and ``J = <log |1 - e^{ik1}|>``.

    The 1D logarithmic singularity of J leaves an O(1/M) midpoint error,
    which one Richardson step removes.  I converges at O(M^-2) unaided.
    """
    M = quad.M
    f_i = _log_integrand(PatternId.O, 1.0, 1.0)
    I = _zone_average(f_i, M)
    err_i = abs(I - _zone_average(f_i, M // 2))
    j_fine, j_mid, j_coarse = _j_midpoint(M), _j_midpoint(M // 2), _j_midpoint(M // 4)
    J = 2 * j_fine - j_mid
    err_j = abs(J - (2 * j_mid - j_coarse))
    return ZoneConstants(I, J, M, err_i, err_j)


# --------------------------------------------------------------------------
# free energies


def _neg_log(x: float) -> float:
    return math.inf if x <= 0 else -math.log(x)


def _weight_term(pattern: PatternId, p: float) -> float:
    """The closed-form ``-log`` prefix coming from the mixture weights."""
    q = 1.0 - p
    if pattern is PatternId.O:
        return 2 * _neg_log(p)
    if pattern is PatternId.D:
        return 2 * _neg_log(q)
    if pattern in (PatternId.MP, PatternId.MA):
        return _neg_log(p) + _neg_log(q)
    if pattern is PatternId.UO:
        return 1.5 * _neg_log(p) + 0.5 * _neg_log(q)
    return 0.5 * _neg_log(p) + 1.5 * _neg_log(q)


def infinite_free_energy(
    pattern: PatternId | str, m: ModelParams, quad: Quadrature = DEFAULT_QUADRATURE
) -> FreeEnergyReport:
    """Infinite-volume spin-wave free energy; ``+inf`` where a weight vanishes."""
    pattern = PatternId(pattern)
    integral, M, err = _pattern_integral(pattern, m.kappa_o, m.kappa_d, quad)
    value = _weight_term(pattern, m.p) + integral
    return FreeEnergyReport(pattern, m.p, m.kappa_o, m.kappa_d, value, None, M, err)


def _unit_cell_coefficients(pattern: PatternId, m: ModelParams) -> np.ndarray:
    """``A[sigma, s1, s2]``: 2x2 Fourier coefficients of the coupling per direction."""
    cell = pattern_coupling(pattern, build_torus(2), m).kappa.reshape(2, 2, 2)  # [y, x, dir]
    signs = np.array([1, -1])
    A = np.empty((2, 2, 2))
    for sigma in range(2):
        kc = cell[:, :, sigma]
        for s1 in range(2):
            for s2 in range(2):
                A[sigma, s1, s2] = 0.25 * np.sum(
                    kc * np.outer(signs**s2, signs**s1)
                )
    return A


def orbit_blocks(pattern: PatternId | str, m: ModelParams, L: int) -> np.ndarray:
    """The 4x4 Hermitian blocks, one per orbit, zero mode regularized by +1."""
    pattern = PatternId(pattern)
    build_torus(L)  # validates L
    A = _unit_cell_coefficients(pattern, m)
    h = L // 2
    n1, n2 = np.meshgrid(np.arange(h), np.arange(h), indexing="ij")
    base = 2 * np.pi * np.stack([n1.ravel(), n2.ravel()], axis=1) / L  # (n_orb, 2)
    q = base[:, None, :] + np.pi * ORBIT_SHIFTS[None, :, :]  # (n_orb, 4, 2)
    rel = ORBIT_SHIFTS[:, None, :] ^ ORBIT_SHIFTS[None, :, :]  # (4, 4, 2)
    theta = np.zeros((len(base), 4, 4), dtype=complex)
    for sigma in range(2):
        coef = A[sigma][rel[..., 0], rel[..., 1]]  # (4, 4)
        u = 1 - np.exp(1j * q[:, :, sigma])  # (n_orb, 4)
        theta += coef[None] * np.conj(u)[:, :, None] * u[:, None, :]
    theta[0, 0, 0] += 1.0
    return theta


def finite_free_energy(pattern: PatternId | str, m: ModelParams, L: int) -> FreeEnergyReport:
    """Exact free energy per site of the pattern on the ``L x L`` torus.

    Equals ``-(1/L^2) [log Z - ((N-1)/2) log 2 pi + N_O log p + N_D log(1-p)]``
    with ``Z`` the Gaussian integral pinned at the origin.
    """
    pattern = PatternId(pattern)
    theta = orbit_blocks(pattern, m, L)
    sign, logdet = np.linalg.slogdet(theta)
    gauss = -math.log(L) + 0.5 * math.fsum(logdet)
    n_o = int(pattern_mask(pattern, build_torus(L)).sum())
    n_d = 2 * L * L - n_o
    weights = 0.0
    for count, w in ((n_o, m.p), (n_d, 1.0 - m.p)):
        if count:
            weights += count * _neg_log(w)
    value = (gauss + weights) / (L * L)
    return FreeEnergyReport(pattern, m.p, m.kappa_o, m.kappa_d, value, L)


# --------------------------------------------------------------------------
# gap and crossing


@dataclass(frozen=True)
class GapReport:
    p: float
    kappa_o: float
    kappa_d: float
    lhs: float
    rhs: float
    argmin: PatternId
    holds: bool

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def gap_check(
    m: ModelParams, quad: Quadrature = DEFAULT_QUADRATURE, tol: float = 1e-9
) -> GapReport:
    """Excess free energy of the mixed patterns over the homogeneous minimum.

    The lower bound is ``1/8 log(kO/kD) + 1/4 log(1 - xi) + J - I``.
    """
    if not m.kappa_d < m.kappa_o:
        raise ValidationError("gap check requires kappa_d < kappa_o")
    values = {pat: infinite_free_energy(pat, m, quad).value for pat in PatternId}
    homogeneous = min(values[PatternId.O], values[PatternId.D])
    argmin = min(INHOMOGENEOUS, key=lambda pat: values[pat])
    lhs = values[argmin] - homogeneous
    consts = constants_I_J()
    one_minus_xi = 1.0 - m.xi
    rhs = 0.125 * math.log(m.kappa_o / m.kappa_d) + 0.25 * math.log(one_minus_xi) + consts.c1
    return GapReport(m.p, m.kappa_o, m.kappa_d, lhs, rhs, argmin, bool(lhs >= rhs - tol))


def crossing_p(m: ModelParams) -> float:
    """The ``p`` at which the ordered and disordered free energies coincide."""
    t = (m.kappa_o / m.kappa_d) ** 0.25
    return t / (1.0 + t)
