"""Brute-force sums over all 2^8 two-state coupling configurations at L = 2."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .gaussfield import PinnedPrecision, log_partition_star
from .torus import ModelParams, PatternId, build_torus

L_ENUM = 2
_G = build_torus(L_ENUM)
N_BONDS = _G.n_bonds
N_SITES = _G.n_sites
#: ``CONFIG_BITS[c, b]`` is True when bond b of configuration c is ordered
CONFIG_BITS = ((np.arange(2**N_BONDS)[:, None] >> np.arange(N_BONDS)) & 1).astype(bool)
N_ORDERED = CONFIG_BITS.sum(axis=1)


@dataclass(frozen=True)
class _ConfigTable:
    log_z: np.ndarray  # per configuration
    log_zstar: np.ndarray
    kappa_eta_sq: np.ndarray  # sum_b kappa_b Var(eta_b), per configuration


@lru_cache(maxsize=64)
def _config_table(kappa_o: float, kappa_d: float) -> _ConfigTable:
    n = len(CONFIG_BITS)
    log_z, log_zstar, energy = np.empty(n), np.empty(n), np.empty(n)
    t, h = _G.tail, _G.head
    for c, bits in enumerate(CONFIG_BITS):
        kappa = np.where(bits, kappa_o, kappa_d)
        prec = PinnedPrecision(kappa, _G)
        log_z[c] = 0.5 * (N_SITES - 1) * math.log(2 * math.pi) - 0.5 * prec.logdet
        log_zstar[c] = log_partition_star(kappa, _G)
        C = prec.covariance()
        var = C[t, t] + C[h, h] - 2 * C[t, h]
        energy[c] = float(np.dot(kappa, var))
    return _ConfigTable(log_z, log_zstar, energy)


def _log_weights(p: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lp, lq = np.log(p), np.log1p(-p)
    out = np.zeros(len(N_ORDERED))
    # 0 * log 0 counts as 0
    for count, logw in ((N_ORDERED, lp), (N_BONDS - N_ORDERED, lq)):
        nz = count > 0
        out[nz] += count[nz] * logw
    return out


# --------------------------------------------------------------------------
# plaquette events


def _plaquette_states() -> np.ndarray:
    """``STATE[c, x]``: index of plaquette x's (bottom, right, top, left) bits.

    The bits are read after reflecting plaquette x back onto the origin
    plaquette, so that ``event[STATE[c, x]]`` tests the reflected event.
    """
    states = np.empty((len(CONFIG_BITS), N_SITES), dtype=np.int64)
    for x in range(N_SITES):
        x1, x2 = x % L_ENUM, x // L_ENUM
        sides = list(_G.plaquettes[x])  # bottom, right, top, left
        if x1 % 2:
            sides[1], sides[3] = sides[3], sides[1]
        if x2 % 2:
            sides[0], sides[2] = sides[2], sides[0]
        bits = CONFIG_BITS[:, sides].astype(np.int64)
        states[:, x] = bits @ (1 << np.arange(4))
    return states


STATE = _plaquette_states()


def _arrangement(bits) -> int:
    return int(np.dot(bits, 1 << np.arange(4)))


def _rotations(bits):
    # the four counterclockwise rotations of a (bottom, right, top, left) tuple
    return {tuple(np.roll(bits, s)) for s in range(4)}


def oriented_arrangements() -> dict[str, tuple[PatternId, int]]:
    """Name -> (pattern type, arrangement index) for all 16 plaquette states."""
    seeds = {
        PatternId.O: (1, 1, 1, 1),
        PatternId.D: (0, 0, 0, 0),
        PatternId.UO: (1, 0, 1, 1),
        PatternId.UD: (0, 1, 0, 0),
        PatternId.MP: (1, 0, 1, 0),
        PatternId.MA: (1, 0, 0, 1),
    }
    out = {}
    for pattern, seed in seeds.items():
        for i, bits in enumerate(sorted(_rotations(seed), reverse=True)):
            out[f"{pattern.value}#{i}"] = (pattern, _arrangement(bits))
    assert sorted(a for _, a in out.values()) == list(range(16))
    return out


def pattern_event(pattern: PatternId | str) -> np.ndarray:
    """16-entry mask of the plaquette states belonging to a pattern type."""
    pattern = PatternId(pattern)
    mask = np.zeros(16, dtype=bool)
    for pat, arr in oriented_arrangements().values():
        if pat is pattern:
            mask[arr] = True
    return mask


def bad_event() -> np.ndarray:
    """Plaquette neither fully ordered nor fully disordered."""
    mask = np.ones(16, dtype=bool)
    mask[[0, 15]] = False
    return mask


def event_catalogue() -> dict[str, np.ndarray]:
    """The six type events, the bad event, and the 14 mixed arrangements."""
    events = {pat.value: pattern_event(pat) for pat in PatternId}
    events["B"] = bad_event()
    for name, (pat, arr) in oriented_arrangements().items():
        if pat not in (PatternId.O, PatternId.D):
            mask = np.zeros(16, dtype=bool)
            mask[arr] = True
            events[name] = mask
    return events


# --------------------------------------------------------------------------
# summaries


@dataclass(frozen=True)
class ExactSummary:
    p: float
    kappa_o: float
    kappa_d: float
    log_z_v: float
    log_zstar_v: float
    marginal_ordered: np.ndarray = field(repr=False)  # P(kappa_b = kappa_O) per bond
    chi: float  # E[R]
    r_one_minus_r: float  # E[R (1 - R)]
    mean_kappa_eta_sq: float  # E[kappa_b eta_b^2] per bond
    pattern_prob: dict = field(repr=False)  # P(origin plaquette of type alpha)
    pattern_z: dict = field(repr=False)  # disseminated probability to the power 1/4

    @property
    def mean_bond_energy(self) -> float:
        """``E[kappa_b eta_b^2 / 2]`` per bond."""
        return 0.5 * self.mean_kappa_eta_sq

    @property
    def marginal_spread(self) -> float:
        return float(np.ptp(self.marginal_ordered))


class ExactModel:
    """Normalized configuration weights of the L = 2 model at fixed parameters."""

    def __init__(self, m: ModelParams):
        self.m = m
        self.table = _config_table(m.kappa_o, m.kappa_d)
        logw = _log_weights(m.p)
        self.log_z_v = float(logsumexp(logw + self.table.log_z))
        self.log_zstar_v = float(logsumexp(logw + self.table.log_zstar))
        self.weights = np.exp(logw + self.table.log_z - self.log_z_v)

    def expect(self, values) -> float:
        return float(np.dot(self.weights, values))

    def event_mask(self, placements) -> np.ndarray:
        """Configurations in which every ``(site, event)`` pair holds."""
        ok = np.ones(len(CONFIG_BITS), dtype=bool)
        for site, event in placements:
            ok &= event[STATE[:, site]]
        return ok

    def prob(self, placements) -> float:
        return float(self.weights[self.event_mask(placements)].sum())

    def disseminated(self, event: np.ndarray) -> float:
        """The probability that every plaquette shows the reflected event, to the 1/4."""
        return self.prob([(x, event) for x in range(N_SITES)]) ** (1.0 / N_SITES)

    def summary(self) -> ExactSummary:
        R = N_ORDERED / N_BONDS
        pattern_prob = {pat.value: self.prob([(0, pattern_event(pat))]) for pat in PatternId}
        pattern_z = {pat.value: self.disseminated(pattern_event(pat)) for pat in PatternId}
        return ExactSummary(
            p=self.m.p,
            kappa_o=self.m.kappa_o,
            kappa_d=self.m.kappa_d,
            log_z_v=self.log_z_v,
            log_zstar_v=self.log_zstar_v,
            marginal_ordered=self.weights @ CONFIG_BITS,
            chi=self.expect(R),
            r_one_minus_r=self.expect(R * (1 - R)),
            mean_kappa_eta_sq=self.expect(self.table.kappa_eta_sq) / N_BONDS,
            pattern_prob=pattern_prob,
            pattern_z=pattern_z,
        )


def enumerate_exact(m: ModelParams) -> ExactSummary:
    """Exact summary statistics of the L = 2 model."""
    return ExactModel(m).summary()


@dataclass(frozen=True)
class ChessboardReport:
    m: ModelParams
    n_checks: int
    max_violation: float  # max over placements of LHS - RHS; <= 0 when all hold
    worst: tuple
    z_bad: float
    z_bad_parts: float  # sum of the disseminated probabilities of the 14 mixed arrangements
    r_one_minus_r: float

    @property
    def holds(self) -> bool:
        return self.max_violation <= 1e-12 and self.z_bad <= self.z_bad_parts + 1e-12

    @property
    def fitted_constant(self) -> float:
        """Smallest C with ``E[R(1-R)] <= C z(B)``."""
        return self.r_one_minus_r / self.z_bad if self.z_bad > 0 else math.inf


def chessboard_check(m: ModelParams, events: dict[str, np.ndarray] | None = None) -> ChessboardReport:
    """Compare ``P(all placed events)`` with the product of disseminated probabilities.

    Every event is tried alone at each plaquette and in every ordered pair of
    events at every ordered pair of distinct plaquettes.
    """
    model = ExactModel(m)
    events = event_catalogue() if events is None else events
    z = {name: model.disseminated(ev) for name, ev in events.items()}
    worst, worst_case, n = -math.inf, None, 0
    for name, ev in events.items():
        for x in range(N_SITES):
            gap = model.prob([(x, ev)]) - z[name]
            n += 1
            if gap > worst:
                worst, worst_case = gap, ((name, x),)
    for (na, ea), (nb, eb) in itertools.product(events.items(), repeat=2):
        for x, y in itertools.permutations(range(N_SITES), 2):
            gap = model.prob([(x, ea), (y, eb)]) - z[na] * z[nb]
            n += 1
            if gap > worst:
                worst, worst_case = gap, ((na, x), (nb, y))
    mixed = [
        model.disseminated(np.eye(16, dtype=bool)[arr])
        for pat, arr in oriented_arrangements().values()
        if pat not in (PatternId.O, PatternId.D)
    ]
    R = N_ORDERED / N_BONDS
    return ChessboardReport(
        m=m,
        n_checks=n,
        max_violation=worst,
        worst=worst_case,
        z_bad=model.disseminated(bad_event()),
        z_bad_parts=math.fsum(mixed),
        r_one_minus_r=model.expect(R * (1 - R)),
    )
