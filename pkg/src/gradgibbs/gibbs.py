"""Two-block Gibbs sampler for the joint law of gradients and bond stiffnesses.

One sweep draws the gradient field exactly given the stiffnesses, then
redraws every stiffness independently given its bond value.  Both steps
sample exact conditionals, so the joint law is invariant without any
accept/reject step.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ValidationError
from .gaussfield import PinnedPrecision
from .rng import make_rng
from .torus import CouplingConfig, GradientConfig, ModelParams, SpaceTag, TorusGeometry, build_torus

WORKERS_ENV = "GRADGIBBS_WORKERS"


class Init(str, enum.Enum):
    ORDERED = "ordered"
    DISORDERED = "disordered"


def conditional_kappa_prob(eta, m: ModelParams):
    """Probability that a bond with value ``eta`` sits in the ordered well."""
    eta = np.asarray(eta, dtype=float)
    if m.p == 0.0:
        return np.zeros_like(eta)[()]
    if m.p == 1.0:
        return np.ones_like(eta)[()]
    with np.errstate(over="ignore"):  # eta^2 -> inf saturates the logistic cleanly
        logit = math.log(m.p) - math.log1p(-m.p) - 0.5 * (m.kappa_o - m.kappa_d) * eta * eta
    return expit(logit)[()]


# --------------------------------------------------------------------------
# boxes and tilt


@dataclass(frozen=True)
class Box:
    """Axis-aligned block of sites ``[x0, x0 + width) x [y0, y0 + height)`` (periodic)."""

    x0: int
    y0: int
    width: int
    height: int

    @classmethod
    def centered(cls, L: int) -> "Box":
        """The ``L/2 x L/2`` box in the middle of the torus; the whole torus for L = 2."""
        if L < 4:
            return cls(0, 0, L, L)
        half = L // 2
        return cls(half // 2, half // 2, half, half)

    def site_mask(self, g: TorusGeometry) -> np.ndarray:
        if not (0 < self.width <= g.L and 0 < self.height <= g.L):
            raise ValidationError(f"box {self} does not fit in the {g.L}x{g.L} torus")
        x = np.arange(g.n_sites) % g.L
        y = np.arange(g.n_sites) // g.L
        return ((x - self.x0) % g.L < self.width) & ((y - self.y0) % g.L < self.height)

    def bond_mask(self, g: TorusGeometry) -> np.ndarray:
        """Bonds with both endpoints in the box."""
        s = self.site_mask(g)
        return s[g.tail] & s[g.head]


def _tilt_weights(box: Box, g: TorusGeometry) -> np.ndarray:
    """Matrix W with ``eta @ W`` giving the two tilt components."""
    mask = box.bond_mask(g)
    n = int(mask.sum())
    if n == 0:
        raise ValidationError(f"box {box} contains no bonds")
    W = np.zeros((g.n_bonds, 2))
    W[mask & g.is_horizontal, 0] = 1.0 / n
    W[mask & g.is_vertical, 1] = 1.0 / n
    return W


def empirical_tilt(eta: GradientConfig | np.ndarray, box: Box, g: TorusGeometry | None = None):
    """Average of ``eta`` over the box's horizontal and vertical bonds, each divided by |B_box|."""
    if isinstance(eta, GradientConfig):
        g = g or build_torus(eta.L)
        eta = eta.eta
    if g is None:
        raise ValidationError("geometry required for raw arrays")
    u = np.asarray(eta) @ _tilt_weights(box, g)
    return u[0], u[1]


@dataclass(frozen=True)
class TiltTailReport:
    L: int
    kappa: float
    box: Box
    n_box_bonds: int
    n_draws: int
    deltas: tuple
    empirical: tuple
    bounds: tuple

    @property
    def holds(self) -> bool:
        return all(e <= b for e, b in zip(self.empirical, self.bounds))


def tilt_tail_check(
    L: int = 8,
    kappa: float = 1.0,
    deltas=(0.1, 0.2, 0.4),
    n_draws: int = 100_000,
    seed: int = 1,
    box: Box | None = None,
    batch: int = 5000,
) -> TiltTailReport:
    """Empirical ``P(|U_box| >= delta)`` under homogeneous couplings against ``4 exp(-kappa delta^2 |B_box| / 8)``."""
    g = build_torus(L)
    box = box or Box.centered(L)
    W = _tilt_weights(box, g)
    nb = int(box.bond_mask(g).sum())
    prec = PinnedPrecision(np.full(g.n_bonds, float(kappa)), g)
    rng = make_rng(seed, "tilt")
    norms = []
    done = 0
    while done < n_draws:
        k = min(batch, n_draws - done)
        u = prec.sample_eta(rng, k) @ W
        norms.append(np.hypot(u[:, 0], u[:, 1]))
        done += k
    norms = np.concatenate(norms)
    emp = tuple(float(np.mean(norms >= d)) for d in deltas)
    bounds = tuple(4.0 * math.exp(-0.125 * kappa * d * d * nb) for d in deltas)
    return TiltTailReport(L, kappa, box, nb, n_draws, tuple(deltas), emp, bounds)


# --------------------------------------------------------------------------
# chain


@dataclass(eq=False)
class ChainState:
    L: int
    eta: np.ndarray
    ordered: np.ndarray  # boolean mask of bonds in the ordered well
    m: ModelParams
    sweep_count: int = 0
    stream: str = "chain"

    @property
    def kappa(self) -> np.ndarray:
        return np.where(self.ordered, self.m.kappa_o, self.m.kappa_d)

    def gradient(self) -> GradientConfig:
        return GradientConfig(self.eta.copy(), self.L, SpaceTag.FULL)

    def coupling(self) -> CouplingConfig:
        return CouplingConfig(self.kappa, self.L)


def init_state(m: ModelParams, L: int, init: Init | str, rng: np.random.Generator, stream="chain") -> ChainState:
    """All bonds in one well, gradients from one exact draw given that."""
    g = build_torus(L)
    ordered = np.full(g.n_bonds, Init(init) is Init.ORDERED)
    state = ChainState(L, np.zeros(g.n_bonds), ordered, m, 0, stream)
    state.eta = PinnedPrecision(state.kappa, g, validate=False).sample_eta(rng)
    return state


def sweep(state: ChainState, rng: np.random.Generator) -> ChainState:
    """One full update: gradients given stiffnesses, then stiffnesses given gradients."""
    g = build_torus(state.L)
    eta = PinnedPrecision(state.kappa, g, validate=False).sample_eta(rng)
    prob = conditional_kappa_prob(eta, state.m)
    ordered = rng.random(g.n_bonds) < prob
    return ChainState(state.L, eta, ordered, state.m, state.sweep_count + 1, state.stream)


@dataclass(eq=False)
class ObservableSeries:
    """Per-sweep observables, one row per recorded sweep.

    ``mean_energy`` is the bond average of ``kappa eta^2 / 2``;
    ``mean_kappa_eta_sq`` is the bond average of ``kappa eta^2``.  The pair
    (eta, kappa) is recorded after both halves of the sweep.
    """

    L: int
    m: ModelParams
    init: Init
    seed: int
    box: Box
    sweep: np.ndarray
    n_ordered: np.ndarray
    tilt: np.ndarray  # (n, 2)
    mean_kappa_eta_sq: np.ndarray
    bond_ordered: np.ndarray | None = field(default=None, repr=False)

    @property
    def r_ord(self) -> np.ndarray:
        return self.n_ordered / (2 * self.L * self.L)

    @property
    def mean_energy(self) -> np.ndarray:
        return 0.5 * self.mean_kappa_eta_sq

    def __len__(self) -> int:
        return len(self.sweep)

    def rows(self):
        """Tuples ``(sweep, r_ord, tilt_x, tilt_y, mean_energy, n_ordered)``."""
        r, e = self.r_ord, self.mean_energy
        for i in range(len(self)):
            yield (
                int(self.sweep[i]),
                float(r[i]),
                float(self.tilt[i, 0]),
                float(self.tilt[i, 1]),
                float(e[i]),
                int(self.n_ordered[i]),
            )


def run_chain(
    m: ModelParams,
    L: int,
    init: Init | str = Init.ORDERED,
    n_sweeps: int = 10_000,
    burn_in: int = 1_000,
    seed: int = 1,
    *,
    stream: str = "chain",
    box: Box | None = None,
    record_bonds: bool = False,
) -> ObservableSeries:
    """Run ``burn_in`` discarded sweeps and then record ``n_sweeps`` sweeps."""
    if n_sweeps <= 0 or burn_in < 0:
        raise ValidationError("need n_sweeps > 0 and burn_in >= 0")
    init = Init(init)
    g = build_torus(L)
    box = box or Box.centered(L)
    W = _tilt_weights(box, g)
    rng = make_rng(seed, stream)
    state = init_state(m, L, init, rng, stream)

    n_b = g.n_bonds
    ko, kd = m.kappa_o, m.kappa_d
    if 0.0 < m.p < 1.0:
        log_odds = math.log(m.p) - math.log1p(-m.p)
    half_gap = 0.5 * (ko - kd)
    ordered = state.ordered

    n_ord = np.empty(n_sweeps, dtype=np.int64)
    tilt = np.empty((n_sweeps, 2))
    energy = np.empty(n_sweeps)
    bonds = np.empty((n_sweeps, n_b), dtype=bool) if record_bonds else None

    for t in range(burn_in + n_sweeps):
        kappa = np.where(ordered, ko, kd)
        eta = PinnedPrecision(kappa, g, validate=False).sample_eta(rng)
        u = rng.random(n_b)
        if m.p == 1.0:
            ordered = np.ones(n_b, dtype=bool)
        elif m.p == 0.0:
            ordered = np.zeros(n_b, dtype=bool)
        else:
            ordered = u < expit(log_odds - half_gap * eta * eta)
        i = t - burn_in
        if i >= 0:
            kappa = np.where(ordered, ko, kd)
            n_ord[i] = np.count_nonzero(ordered)
            tilt[i] = eta @ W
            energy[i] = np.dot(kappa, eta * eta) / n_b
            if bonds is not None:
                bonds[i] = ordered
    return ObservableSeries(
        L=L,
        m=m,
        init=init,
        seed=seed,
        box=box,
        sweep=np.arange(burn_in + 1, burn_in + n_sweeps + 1),
        n_ordered=n_ord,
        tilt=tilt,
        mean_kappa_eta_sq=energy,
        bond_ordered=bonds,
    )


def batch_means(x, n_batches: int = 100):
    """Mean and batch-means standard error of a (possibly correlated) series.

    A 2D input is treated column by column and returns arrays.
    """
    x = np.asarray(x, dtype=float)
    n = len(x) // n_batches * n_batches
    if n == 0:
        raise ValidationError("series shorter than the number of batches")
    means = x[:n].reshape(n_batches, -1, *x.shape[1:]).mean(axis=1)
    se = means.std(axis=0, ddof=1) / math.sqrt(n_batches)
    mean = x[:n].mean(axis=0)
    if x.ndim == 1:
        return float(mean), float(se)
    return mean, se


# --------------------------------------------------------------------------
# p scans


@dataclass(frozen=True)
class ScanRun:
    p: float
    init: Init
    seed: int
    mean_r_ord: float
    stderr: float


@dataclass(frozen=True)
class ScanReport:
    L: int
    kappa_o: float
    kappa_d: float
    p_grid: tuple
    runs: tuple  # ScanRun, ordered by (p, init, seed)
    jump_estimate: float | None
    hysteresis_interval: tuple | None

    def mean_by_init(self, p: float, init: Init | str) -> float:
        vals = [r.mean_r_ord for r in self.runs if r.p == p and r.init is Init(init)]
        return float(np.mean(vals))

    def chi(self) -> np.ndarray:
        """Ordered fraction averaged over both initializations and all seeds."""
        return np.array([np.mean([r.mean_r_ord for r in self.runs if r.p == p]) for p in self.p_grid])


def _scan_stream(p: float, init: Init) -> str:
    return f"scan/p={p!r}/init={init.value}"


def _scan_job(args) -> ScanRun:
    m, L, init, seed, n_sweeps, burn_in = args
    s = run_chain(m, L, init, n_sweeps, burn_in, seed, stream=_scan_stream(m.p, init))
    mean, se = batch_means(s.r_ord)
    return ScanRun(m.p, init, seed, mean, se)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer") from None


def scan_p(
    m: ModelParams,
    L: int,
    p_grid,
    n_sweeps: int = 10_000,
    burn_in: int = 1_000,
    seeds=(1, 2, 3, 4),
    workers: int | None = None,
    disagreement: float = 0.5,
) -> ScanReport:
    """Dual-initialization chains on a grid of ``p`` values.

    The jump estimate is the midpoint of the grid interval where the
    seed- and init-averaged ordered fraction rises fastest.  The hysteresis
    interval spans the grid points where the two initializations disagree
    by more than ``disagreement``.
    """
    p_grid = tuple(sorted(float(p) for p in p_grid))
    jobs = [
        (m.with_p(p), L, init, seed, n_sweeps, burn_in)
        for p in p_grid
        for init in Init
        for seed in seeds
    ]
    workers = default_workers() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = tuple(pool.map(_scan_job, jobs))
    else:
        runs = tuple(map(_scan_job, jobs))

    report = ScanReport(L, m.kappa_o, m.kappa_d, p_grid, runs, None, None)
    chi = report.chi()
    jump = None
    if len(p_grid) >= 2:
        slope = np.diff(chi) / np.diff(p_grid)
        i = int(np.argmax(slope))
        jump = 0.5 * (p_grid[i] + p_grid[i + 1])
    split = [
        p
        for p in p_grid
        if abs(report.mean_by_init(p, Init.ORDERED) - report.mean_by_init(p, Init.DISORDERED)) > disagreement
    ]
    hyst = (min(split), max(split)) if split else None
    return ScanReport(L, m.kappa_o, m.kappa_d, p_grid, runs, jump, hyst)
