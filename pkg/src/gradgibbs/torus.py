"""Torus geometry, bond and plaquette combinatorics, and reflections.

Conventions used everywhere in the package:

* site ``(x, y)`` has index ``y * L + x``;
* bond index ``2 * site + d`` where ``d = 0`` is the horizontal bond
  ``(x, y) -> (x + 1, y)`` and ``d = 1`` the vertical bond
  ``(x, y) -> (x, y + 1)``;
* the plaquette with lower-left corner ``s`` lists its bonds
  counterclockwise as ``(bottom, right, top, left)`` and its curl is
  ``eta[bottom] + eta[right] - eta[top] - eta[left]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import InvalidCouplingError, ValidationError

#: absolute tolerance for curl and winding checks of loaded configurations
CURL_TOL = 1e-9


class PatternId(str, enum.Enum):
    O = "O"
    D = "D"
    UO = "UO"
    UD = "UD"
    MP = "MP"
    MA = "MA"

    def swapped(self) -> "PatternId":
        """Pattern obtained by exchanging ordered and disordered bonds."""
        return _SWAP[self]


_SWAP = {
    PatternId.O: PatternId.D,
    PatternId.D: PatternId.O,
    PatternId.UO: PatternId.UD,
    PatternId.UD: PatternId.UO,
    PatternId.MP: PatternId.MP,
    PatternId.MA: PatternId.MA,
}


class SpaceTag(str, enum.Enum):
    FULL = "full"  # curl-free with zero windings (gradients of a height field)
    STAR = "star"  # plaquette curls vanish, windings free


@dataclass(frozen=True)
class ModelParams:
    """Mixture weight ``p`` and the two stiffnesses of the double-well potential."""

    p: float
    kappa_o: float
    kappa_d: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValidationError(f"p must lie in [0, 1], got {self.p}")
        for name in ("kappa_o", "kappa_d"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidCouplingError(f"{name} must be positive and finite, got {v}")

    @property
    def r(self) -> float:
        """(kO + kD) / (kO - kD); infinite when the stiffnesses coincide."""
        if self.kappa_o == self.kappa_d:
            return math.inf
        return (self.kappa_o + self.kappa_d) / (self.kappa_o - self.kappa_d)

    @property
    def xi(self) -> float:
        return self.kappa_d / self.kappa_o

    def swapped(self) -> "ModelParams":
        """Exchange the roles of the two wells (and of p and 1 - p)."""
        return ModelParams(1.0 - self.p, self.kappa_d, self.kappa_o)

    def with_p(self, p: float) -> "ModelParams":
        return ModelParams(p, self.kappa_o, self.kappa_d)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TorusGeometry:
    """Immutable combinatorial data of the even ``L x L`` torus."""

    L: int
    tail: np.ndarray = field(repr=False)
    head: np.ndarray = field(repr=False)
    direction: np.ndarray = field(repr=False)
    is_even: np.ndarray = field(repr=False)
    plaquettes: np.ndarray = field(repr=False)
    dual_map: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return self.L * self.L

    @property
    def n_bonds(self) -> int:
        return 2 * self.L * self.L

    @property
    def is_horizontal(self) -> np.ndarray:
        return self.direction == 0

    @property
    def is_vertical(self) -> np.ndarray:
        return self.direction == 1

    def site(self, x: int, y: int) -> int:
        return (y % self.L) * self.L + (x % self.L)

    def coords(self, site):
        return np.asarray(site) % self.L, np.asarray(site) // self.L

    def bond(self, x: int, y: int, d: int) -> int:
        return 2 * self.site(x, y) + d


@lru_cache(maxsize=None)
def build_torus(L: int) -> TorusGeometry:
    """Construct the ``L x L`` torus; ``L`` must be even and positive."""
    if not isinstance(L, (int, np.integer)) or L < 2 or L % 2:
        raise ValidationError(f"torus side L must be an even integer >= 2, got {L!r}")
    L = int(L)
    N = L * L
    sites = np.arange(N)
    x, y = sites % L, sites // L

    tail = np.repeat(sites, 2)
    head = np.empty(2 * N, dtype=np.int64)
    head[0::2] = y * L + (x + 1) % L
    head[1::2] = ((y + 1) % L) * L + x
    direction = np.tile([0, 1], N)
    is_even = np.empty(2 * N, dtype=bool)
    is_even[0::2] = y % 2 == 0
    is_even[1::2] = x % 2 == 0

    xr = (x + 1) % L
    yu = (y + 1) % L
    plaq = np.stack(
        [2 * sites, 2 * (y * L + xr) + 1, 2 * (yu * L + x), 2 * sites + 1], axis=1
    )

    # b -> dual bond, composed with the point reflection u -> -u - (1, 1) that
    # identifies the dual torus with the direct one; this makes it an involution
    xd = (-x - 1) % L
    yd = (-y - 1) % L
    dual = np.empty(2 * N, dtype=np.int64)
    dual[0::2] = 2 * (yd * L + xd) + 1
    dual[1::2] = 2 * (yd * L + xd)

    return TorusGeometry(
        L=L,
        tail=_frozen(tail),
        head=_frozen(head),
        direction=_frozen(direction),
        is_even=_frozen(is_even),
        plaquettes=_frozen(plaq),
        dual_map=_frozen(dual),
    )


# --------------------------------------------------------------------------
# configurations


@dataclass(frozen=True, eq=False)
class HeightField:
    """Site heights pinned at the origin."""

    phi: np.ndarray
    L: int

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.shape != (self.L * self.L,):
            raise ValidationError(f"expected {self.L * self.L} heights, got shape {phi.shape}")
        if phi[0] != 0.0:
            raise ValidationError("height field must be pinned: phi[origin] == 0")
        object.__setattr__(self, "phi", phi)

    @classmethod
    def pinned(cls, phi, L: int) -> "HeightField":
        phi = np.asarray(phi, dtype=float)
        return cls(phi - phi[0], L)


@dataclass(frozen=True, eq=False)
class GradientConfig:
    eta: np.ndarray
    L: int
    tag: SpaceTag = SpaceTag.FULL

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != (2 * self.L * self.L,):
            raise ValidationError(f"expected {2 * self.L * self.L} bond values, got {eta.shape}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "tag", SpaceTag(self.tag))

    def validate(self, tol: float = CURL_TOL) -> None:
        """Raise :class:`ValidationError` unless the tag's constraints hold."""
        g = build_torus(self.L)
        c = np.abs(curl(self, g)).max()
        if c > tol:
            raise ValidationError(f"plaquette curl {c:.3g} exceeds tolerance {tol:g}")
        if self.tag is SpaceTag.FULL:
            w = max(abs(v) for v in windings(self, g))
            if w > tol:
                raise ValidationError(f"winding {w:.3g} exceeds tolerance {tol:g}")


@dataclass(frozen=True, eq=False)
class CouplingConfig:
    kappa: np.ndarray
    L: int

    def __post_init__(self):
        k = np.asarray(self.kappa, dtype=float)
        if k.shape != (2 * self.L * self.L,):
            raise ValidationError(f"expected {2 * self.L * self.L} couplings, got {k.shape}")
        if not np.all(np.isfinite(k)) or np.any(k <= 0):
            raise InvalidCouplingError("all couplings must be positive and finite")
        object.__setattr__(self, "kappa", k)

    @classmethod
    def homogeneous(cls, L: int, kappa: float) -> "CouplingConfig":
        return cls(np.full(2 * L * L, float(kappa)), L)

    def count(self, value: float) -> int:
        return int(np.count_nonzero(self.kappa == value))


def gradient_of(phi: HeightField, g: TorusGeometry) -> GradientConfig:
    """Bond differences ``phi[head] - phi[tail]``."""
    return GradientConfig(phi.phi[g.head] - phi.phi[g.tail], g.L, SpaceTag.FULL)


def curl(eta: GradientConfig | np.ndarray, g: TorusGeometry, q: int | None = None):
    """Plaquette curl(s); all plaquettes when ``q`` is None."""
    e = eta.eta if isinstance(eta, GradientConfig) else np.asarray(eta)
    P = g.plaquettes if q is None else g.plaquettes[q]
    return e[..., P[..., 0]] + e[..., P[..., 1]] - e[..., P[..., 2]] - e[..., P[..., 3]]


def windings(eta: GradientConfig | np.ndarray, g: TorusGeometry) -> tuple[float, float]:
    """Total sums over horizontal and over vertical bonds."""
    e = eta.eta if isinstance(eta, GradientConfig) else np.asarray(eta)
    return float(e[0::2].sum()), float(e[1::2].sum())


# --------------------------------------------------------------------------
# reflections


class PlaneKind(str, enum.Enum):
    DIRECT = "direct"
    DIAGONAL_PLUS = "diagonal+"
    DIAGONAL_MINUS = "diagonal-"


@dataclass(frozen=True, eq=False)
class ReflectionPlane:
    """A reflection of the torus through a plane of sites.

    ``bond_map[b]`` is the image bond and ``sign_map[b]`` the factor picked
    up by ``eta``: ``(reflect eta)[b] = sign_map[b] * eta[bond_map[b]]``.
    """

    kind: PlaneKind
    anchor: tuple[int, int]
    axis: int | None
    site_map: np.ndarray = field(repr=False)
    bond_map: np.ndarray = field(repr=False)
    sign_map: np.ndarray = field(repr=False)


def _affine_plane(g: TorusGeometry, R: np.ndarray, c: np.ndarray):
    """Site and bond maps of the torus isometry ``u -> R u + c``."""
    L = g.L
    s = np.arange(g.n_sites)
    u = np.stack([s % L, s // L])
    v = (R @ u + c[:, None]) % L
    site_map = v[1] * L + v[0]

    # bonds are located by doubled midpoints so that L = 2 is unambiguous
    d = g.direction
    mid2 = np.stack([2 * (g.tail % L) + (d == 0), 2 * (g.tail // L) + (d == 1)])
    img2 = (R @ mid2 + 2 * c[:, None]) % (2 * L)
    dirvec = R[:, d]  # image of the unit vector e_d, a signed unit vector
    d_img = np.where(dirvec[0] != 0, 0, 1)
    sign = dirvec[0] + dirvec[1]
    tx = (img2[0] - (d_img == 0)) // 2 % L
    ty = (img2[1] - (d_img == 1)) // 2 % L
    bond_img = 2 * (ty * L + tx) + d_img
    return site_map, bond_img, sign.astype(float)


def direct_plane(g: TorusGeometry, axis: int, offset: int) -> ReflectionPlane:
    """Plane of sites ``{u_axis = offset} U {u_axis = offset + L/2}``."""
    if axis not in (0, 1):
        raise ValidationError("axis must be 0 (plane normal to x) or 1 (normal to y)")
    R = np.eye(2, dtype=np.int64)
    R[axis, axis] = -1
    c = np.zeros(2, dtype=np.int64)
    c[axis] = 2 * offset
    sm, bm, sg = _affine_plane(g, R, c)
    anchor = (offset, 0) if axis == 0 else (0, offset)
    return ReflectionPlane(PlaneKind.DIRECT, anchor, axis, _frozen(sm), _frozen(bm), _frozen(sg))


def diagonal_plane(g: TorusGeometry, kind: PlaneKind | str, anchor=(0, 0)) -> ReflectionPlane:
    """Diagonal reflection fixing the diagonal through ``anchor`` pointwise.

    The second component of the plane (offset ``L/2``) is mapped onto itself.
    """
    kind = PlaneKind(kind)
    a1, a2 = anchor
    if kind is PlaneKind.DIAGONAL_PLUS:
        R = np.array([[0, 1], [1, 0]])
        c = np.array([a1 - a2, a2 - a1])
    elif kind is PlaneKind.DIAGONAL_MINUS:
        R = np.array([[0, -1], [-1, 0]])
        c = np.array([a1 + a2, a1 + a2])
    else:
        raise ValidationError("use direct_plane for direct reflections")
    sm, bm, sg = _affine_plane(g, R, c)
    return ReflectionPlane(kind, (a1, a2), None, _frozen(sm), _frozen(bm), _frozen(sg))


def all_planes(g: TorusGeometry) -> list[ReflectionPlane]:
    """Every distinct direct and diagonal plane of the torus."""
    half = g.L // 2
    planes = [direct_plane(g, ax, o) for ax in (0, 1) for o in range(half)]
    for kind in (PlaneKind.DIAGONAL_PLUS, PlaneKind.DIAGONAL_MINUS):
        planes += [diagonal_plane(g, kind, (a, 0)) for a in range(g.L)]
    return planes


def reflect(config, plane: ReflectionPlane):
    """Apply ``plane`` to a gradient, coupling or height configuration."""
    if isinstance(config, GradientConfig):
        return GradientConfig(plane.sign_map * config.eta[plane.bond_map], config.L, config.tag)
    if isinstance(config, CouplingConfig):
        return CouplingConfig(config.kappa[plane.bond_map], config.L)
    if isinstance(config, HeightField):
        return HeightField.pinned(config.phi[plane.site_map], config.L)
    raise TypeError(f"cannot reflect {type(config).__name__}")


# --------------------------------------------------------------------------
# bond patterns


def pattern_mask(pattern: PatternId | str, g: TorusGeometry) -> np.ndarray:
    """Boolean mask of the bonds carrying the ordered stiffness."""
    pattern = PatternId(pattern)
    hor = g.is_horizontal
    if pattern is PatternId.O:
        return np.ones(g.n_bonds, dtype=bool)
    if pattern is PatternId.D:
        return np.zeros(g.n_bonds, dtype=bool)
    if pattern is PatternId.UO:
        return hor | g.is_even
    if pattern is PatternId.UD:
        return ~(hor | g.is_even)
    if pattern is PatternId.MP:
        return hor.copy()
    return g.is_even.copy()  # MA


def pattern_coupling(pattern: PatternId | str, g: TorusGeometry, m: ModelParams) -> CouplingConfig:
    mask = pattern_mask(pattern, g)
    return CouplingConfig(np.where(mask, m.kappa_o, m.kappa_d), g.L)


# --------------------------------------------------------------------------
# text format


def write_config(config: GradientConfig | CouplingConfig, path) -> None:
    """Write ``L=<n> kind=<eta|kappa> tag=<full|star>`` then ``index value`` lines."""
    if isinstance(config, GradientConfig):
        kind, tag, values = "eta", config.tag.value, config.eta
    else:
        kind, tag, values = "kappa", SpaceTag.FULL.value, config.kappa
    lines = [f"L={config.L} kind={kind} tag={tag}"]
    lines += [f"{i} {v:.17g}" for i, v in enumerate(values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_config(path) -> GradientConfig | CouplingConfig:
    """Parse and validate a configuration file."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValidationError(f"{path}: empty configuration file")
    try:
        header = dict(tok.split("=", 1) for tok in text[0].split())
        L = int(header["L"])
        kind = header["kind"]
        tag = SpaceTag(header.get("tag", "full"))
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed header {text[0]!r}") from exc
    g = build_torus(L)
    values = np.full(g.n_bonds, np.nan)
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        try:
            i, v = line.split()
            values[int(i)] = float(v)
        except (ValueError, IndexError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad entry {line!r}") from exc
    if np.isnan(values).any():
        raise ValidationError(f"{path}: {int(np.isnan(values).sum())} bonds missing")
    if kind == "kappa":
        return CouplingConfig(values, L)
    if kind == "eta":
        cfg = GradientConfig(values, L, tag)
        cfg.validate()
        return cfg
    raise ValidationError(f"{path}: unknown kind {kind!r}")
