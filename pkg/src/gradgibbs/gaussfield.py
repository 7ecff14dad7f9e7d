"""Exact Gaussian computations for a fixed coupling configuration.

The pinned precision (origin fixed at zero) is stored in LAPACK lower band
format.  Sites are ordered row by row with the rows folded as
``0, L-1, 1, L-2, ...`` so that the periodic wrap in the vertical direction
stays inside a band of half-width about ``2L``.  This keeps a Cholesky
factorization at O(L^4) work instead of O(L^6) for a dense one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import lapack

from .errors import InvalidCouplingError, NotPositiveDefiniteError
from .torus import CouplingConfig, GradientConfig, SpaceTag, TorusGeometry, build_torus

LOG_2PI = math.log(2 * math.pi)


@dataclass(frozen=True, eq=False)
class _BandLayout:
    n: int  # matrix dimension N - 1
    kd: int  # number of subdiagonals
    site_of: np.ndarray  # band position -> site
    pos_of: np.ndarray  # site -> band position, -1 for the origin
    flat: np.ndarray  # target entries in the flattened band
    bond: np.ndarray  # contributing bond per entry
    sign: np.ndarray


@lru_cache(maxsize=None)
def _layout(L: int) -> _BandLayout:
    g = build_torus(L)
    rows, lo, hi = [], 0, L - 1
    while lo <= hi:
        rows.append(lo)
        if hi != lo:
            rows.append(hi)
        lo, hi = lo + 1, hi - 1
    order = np.array([y * L + x for y in rows for x in range(L)])
    assert order[0] == 0
    pos = np.empty(g.n_sites, dtype=np.int64)
    pos[order] = np.arange(g.n_sites) - 1
    n = g.n_sites - 1

    pt, ph = pos[g.tail], pos[g.head]
    both = (pt >= 0) & (ph >= 0)
    kd = int(np.abs(pt - ph)[both].max()) if both.any() else 0
    bonds = np.arange(g.n_bonds)

    flat, bond, sign = [], [], []
    for p in (pt, ph):
        keep = p >= 0
        flat.append(p[keep])  # diagonal row of the band
        bond.append(bonds[keep])
        sign.append(np.ones(keep.sum()))
    i = np.maximum(pt, ph)[both]
    j = np.minimum(pt, ph)[both]
    flat.append((i - j) * n + j)
    bond.append(bonds[both])
    sign.append(-np.ones(both.sum()))
    return _BandLayout(
        n=n,
        kd=kd,
        site_of=order[1:],
        pos_of=pos,
        flat=np.concatenate(flat),
        bond=np.concatenate(bond),
        sign=np.concatenate(sign),
    )


def _kappa_array(kappa, g: TorusGeometry) -> np.ndarray:
    k = kappa.kappa if isinstance(kappa, CouplingConfig) else np.asarray(kappa, dtype=float)
    if k.shape != (g.n_bonds,):
        raise InvalidCouplingError(f"expected {g.n_bonds} couplings, got shape {k.shape}")
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        raise InvalidCouplingError("all couplings must be positive and finite")
    return k


class PinnedPrecision:
    """Weighted Laplacian with the origin removed, factorized on construction.

    ``phi^T A phi = sum_b kappa_b (grad_b phi)^2`` for pinned ``phi``.
    """

    def __init__(self, kappa, g: TorusGeometry, *, validate: bool = True):
        self.g = g
        self._layout = lay = _layout(g.L)
        k = _kappa_array(kappa, g) if validate else kappa
        self.kappa = k
        band = np.bincount(lay.flat, weights=lay.sign * k[lay.bond], minlength=(lay.kd + 1) * lay.n)
        self.band = band.reshape(lay.kd + 1, lay.n)
        factor, info = lapack.dpbtrf(self.band, lower=1)
        if info != 0:
            raise NotPositiveDefiniteError(f"band Cholesky failed (info={info})")
        self.factor = factor

    @cached_property
    def logdet(self) -> float:
        return 2.0 * math.fsum(np.log(self.factor[0]))

    @property
    def dim(self) -> int:
        return self._layout.n

    def dense(self) -> np.ndarray:
        """The matrix indexed by sites ``1 .. N-1`` in natural order."""
        lay = self._layout
        A = np.zeros((lay.n, lay.n))
        for d in range(lay.kd + 1):
            idx = np.arange(lay.n - d)
            A[idx + d, idx] = self.band[d, : lay.n - d]
            A[idx, idx + d] = self.band[d, : lay.n - d]
        perm = np.argsort(lay.site_of)  # natural order -> band position
        return A[np.ix_(perm, perm)]

    def covariance(self) -> np.ndarray:
        """Dense inverse, with a zero row and column for the origin."""
        n = self.g.n_sites
        C = np.zeros((n, n))
        C[1:, 1:] = np.linalg.inv(self.dense())
        return C

    def sample_phi(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Exact draw(s) of the pinned field; shape ``(N,)`` or ``(size, N)``."""
        lay = self._layout
        cols = 1 if size is None else size
        z = rng.standard_normal((lay.n, cols))
        x, info = lapack.dtbtrs(self.factor, z, uplo="L", trans="T")
        if info != 0:
            raise NotPositiveDefiniteError(f"triangular solve failed (info={info})")
        phi = np.zeros((cols, self.g.n_sites))
        phi[:, lay.site_of] = x.T
        return phi[0] if size is None else phi

    def sample_eta(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        phi = self.sample_phi(rng, size)
        return phi[..., self.g.head] - phi[..., self.g.tail]


def log_partition(kappa, g: TorusGeometry) -> float:
    """``log Z`` of the Gaussian gradient field pinned at the origin."""
    prec = PinnedPrecision(kappa, g)
    return 0.5 * (g.n_sites - 1) * LOG_2PI - 0.5 * prec.logdet


def star_precision(kappa, g: TorusGeometry) -> np.ndarray:
    """Dense precision over ``(phi_1..phi_{N-1}, S, T)``.

    Bond values are ``grad phi + S / L^2`` on horizontal bonds and
    ``grad phi + T / L^2`` on vertical ones, so ``S`` and ``T`` are the two
    windings.
    """
    k = _kappa_array(kappa, g)
    N = g.n_sites
    # columns: sites 1..N-1, then S, then T
    grad = np.zeros((g.n_bonds, N + 1))
    rows = np.arange(g.n_bonds)
    keep = g.head > 0
    np.add.at(grad, (rows[keep], g.head[keep] - 1), 1.0)
    keep = g.tail > 0
    np.add.at(grad, (rows[keep], g.tail[keep] - 1), -1.0)
    grad[g.is_horizontal, N - 1] = 1.0 / N
    grad[g.is_vertical, N] = 1.0 / N
    return grad.T @ (k[:, None] * grad)


def _chol_logdet(A: np.ndarray) -> float:
    c, info = lapack.dpotrf(A, lower=1)
    if info != 0:
        raise NotPositiveDefiniteError(f"Cholesky failed (info={info})")
    return 2.0 * math.fsum(np.log(np.diag(c)))


def log_partition_star(kappa, g: TorusGeometry) -> float:
    """``log Z*`` for the field with free windings."""
    return 0.5 * (g.n_sites + 1) * LOG_2PI - 0.5 * _chol_logdet(star_precision(kappa, g))


def sample_eta(kappa, g: TorusGeometry, rng: np.random.Generator) -> GradientConfig:
    """One exact draw of the gradient field given the couplings."""
    eta = PinnedPrecision(kappa, g).sample_eta(rng)
    return GradientConfig(eta, g.L, SpaceTag.FULL)


def bond_variances(kappa, g: TorusGeometry) -> np.ndarray:
    """``Var(eta_b)`` for every bond, from the dense covariance."""
    C = PinnedPrecision(kappa, g).covariance()
    t, h = g.tail, g.head
    return C[t, t] + C[h, h] - 2 * C[t, h]


def line_variance(kappa, g: TorusGeometry, lengths, star: bool = False) -> np.ndarray:
    """Variance of the sum of ``m`` consecutive horizontal bonds from the origin.

    With ``star`` the windings are free and the sum picks up ``m S / L^2``.
    """
    lengths = np.asarray(lengths, dtype=int)
    N = g.n_sites
    if star:
        cov = np.linalg.inv(star_precision(kappa, g))
        out = []
        for m in lengths:
            e = np.zeros(N + 1)
            if m % g.L:
                e[g.site(m, 0) - 1] = 1.0
            e[N - 1] = m / N
            out.append(e @ cov @ e)
        return np.array(out)
    C = PinnedPrecision(kappa, g).covariance()
    return np.array([C[g.site(m, 0), g.site(m, 0)] for m in lengths])


def fit_line_constant(variances, lengths) -> float:
    """Smallest ``c`` with ``variances <= c (1 + log m)`` on the given lengths."""
    lengths = np.asarray(lengths, dtype=float)
    return float(np.max(np.asarray(variances) / (1.0 + np.log(lengths))))
