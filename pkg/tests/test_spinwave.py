import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradgibbs.errors import ValidationError
from gradgibbs.gaussfield import LOG_2PI, log_partition
from gradgibbs.spinwave import (
    I_EXACT,
    Momentum,
    Quadrature,
    constants_I_J,
    crossing_p,
    det_pi_ma,
    det_pi_uo,
    finite_free_energy,
    gap_check,
    infinite_free_energy,
    lattice_propagator,
    orbit_blocks,
    pi_ma_matrix,
)
from gradgibbs.torus import ModelParams, PatternId, build_torus, pattern_coupling, pattern_mask

M = ModelParams(0.5, 100.0, 0.01)
angles = st.floats(-math.pi, math.pi, allow_nan=False)


def oracle_free_energy(pattern, m, L):
    """Free energy from the pinned log-determinant, independent of Fourier blocks."""
    g = build_torus(L)
    kappa = pattern_coupling(pattern, g, m)
    n_o = int(pattern_mask(pattern, g).sum())
    n_d = 2 * L * L - n_o
    log_z = log_partition(kappa, g)
    return -(log_z + n_o * math.log(m.p) + n_d * math.log(1 - m.p) - 0.5 * (L * L - 1) * LOG_2PI) / (L * L)


def test_propagator_examples():
    assert lattice_propagator((0.0, 0.0)) == 0
    assert lattice_propagator((math.pi, math.pi)) == pytest.approx(8)
    assert lattice_propagator(Momentum(math.pi, 0.0)) == pytest.approx(4)


def test_det_uo_examples():
    assert det_pi_uo((math.pi, math.pi), ModelParams(0.5, 1, 1)) == pytest.approx(32)
    k = Momentum(0.3, -1.1)
    kap = 2.5
    expected = kap**2 * (k.a_minus_sq + k.b_minus_sq) * (k.a_plus_sq + k.b_minus_sq)
    assert det_pi_uo(k, ModelParams(0.5, kap, kap)) == pytest.approx(expected)


@settings(max_examples=200, deadline=None)
@given(k1=angles, k2=angles)
def test_det_uo_bound(k1, k2):
    k = Momentum(k1, k2)
    bound = M.kappa_o**2 * k.a_minus_sq * k.a_plus_sq + M.kappa_o * M.kappa_d * k.b_minus_sq**2
    assert det_pi_uo(k, M) >= bound * (1 - 1e-12) - 1e-12


@settings(max_examples=200, deadline=None)
@given(k1=angles, k2=angles, logr=st.floats(-3, 2))
def test_det_ma_closed_form_and_bound(k1, k2, logr):
    r = 1 + 10**logr
    m = ModelParams(0.5, r + 1, r - 1)
    k = Momentum(k1, k2)
    direct = np.linalg.det(pi_ma_matrix(k, m))
    closed = det_pi_ma(k, m)
    assert abs(direct - closed) <= 1e-10 * abs(closed) + 1e-300
    bound = 4 * (r * r - 1) * k.a_minus_sq * k.a_plus_sq * k.b_minus_sq * k.b_plus_sq
    assert closed >= bound * (1 - 1e-12)


def test_det_ma_degenerate_r_rejected():
    with pytest.raises(ValidationError, match="degenerate"):
        det_pi_ma((0.1, 0.2), ModelParams(0.5, 1.0, 1.0))


def test_det_ma_vanishes_like_r_squared_minus_one():
    k = (0.7, -2.1)
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        r = 1 + eps
        m = ModelParams(0.5, r + 1, r - 1)
        ratios.append(det_pi_ma(k, m) / (r * r - 1))
    assert abs(ratios[-1] - ratios[-2]) < 1e-3 * abs(ratios[-1])
    dets = [ratios[i] * ((1 + e) ** 2 - 1) for i, e in enumerate((1e-2, 1e-3, 1e-4, 1e-5))]
    assert all(abs(b) < 0.2 * abs(a) for a, b in zip(dets, dets[1:]))


def test_ma_matrix_null_vector_at_r_one():
    k = Momentum(0.4, 1.3)
    am, ap, bm, bp = k.a_minus_sq, k.a_plus_sq, k.b_minus_sq, k.b_plus_sq
    P = np.array(
        [[am + bm, bm, am, 0], [bm, ap + bm, 0, ap], [am, 0, am + bp, bp], [0, ap, bp, ap + bp]]
    )
    assert np.allclose(P @ np.array([1, -1, -1, 1]), 0)


@settings(max_examples=100, deadline=None)
@given(k1=angles, k2=angles)
def test_symbol_symmetries(k1, k2):
    m = ModelParams(0.5, 3.0, 0.5)
    k, neg = Momentum(k1, k2), Momentum(-k1, -k2)
    s1, s2 = Momentum(k1 + math.pi, k2), Momentum(k1, k2 + math.pi)
    d = det_pi_ma(k, m)
    for other in (neg, s1, s2):
        assert det_pi_ma(other, m) == pytest.approx(d, rel=1e-12, abs=1e-12)
    u = det_pi_uo(k, m)
    assert det_pi_uo(neg, m) == pytest.approx(u, rel=1e-12, abs=1e-12)
    assert det_pi_uo(s1, m) == pytest.approx(u, rel=1e-12, abs=1e-12)
    orbit = det_pi_uo(k, m) * det_pi_uo(s2, m)
    shifted = det_pi_uo(s2, m) * det_pi_uo(Momentum(k1, k2 + 2 * math.pi), m)
    assert shifted == pytest.approx(orbit, rel=1e-12, abs=1e-12)


def test_constants():
    c = constants_I_J()
    assert abs(c.J) < 1e-6
    assert abs(c.I - 0.5831218) < 1e-5
    assert abs(c.I - I_EXACT) < 1e-6
    assert c.c1 == pytest.approx(-0.583122, abs=1e-5)


def test_quadrature_error_decreases_under_doubling():
    errs = [infinite_free_energy("MA", M, Quadrature(M=n, adaptive=False)).error for n in (128, 256, 512)]
    assert errs[0] > errs[1] > errs[2]
    rep = infinite_free_energy("O", M)
    assert rep.infinite and rep.error < 1e-7


def test_ordered_at_p_one():
    rep = infinite_free_energy("O", ModelParams(1.0, 1.0, 1.0))
    assert rep.value == pytest.approx(0.583122, abs=1e-6)


def test_endpoints_are_infinite():
    assert infinite_free_energy("D", ModelParams(1.0, 2, 1)).value == math.inf
    assert infinite_free_energy("MP", ModelParams(0.0, 2, 1)).value == math.inf
    assert finite_free_energy("UO", ModelParams(0.0, 2, 1), 4).value == math.inf
    assert math.isfinite(finite_free_energy("O", ModelParams(1.0, 2, 1), 4).value)


@pytest.mark.parametrize("p", [0.1, 0.37, 0.5, 0.8])
@pytest.mark.parametrize("ko,kd", [(100, 0.01), (3, 2), (0.5, 7)])
def test_ordered_minus_disordered(p, ko, kd):
    m = ModelParams(p, ko, kd)
    diff = infinite_free_energy("O", m).value - infinite_free_energy("D", m).value
    expected = -2 * math.log(p / (1 - p)) + 0.5 * math.log(ko / kd)
    assert diff == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("pat", list(PatternId))
@pytest.mark.parametrize("p", [0.2, 0.5, 0.9])
def test_swap_symmetry(pat, p):
    m = ModelParams(p, 100, 0.01)
    a = infinite_free_energy(pat, m).value
    b = infinite_free_energy(pat.swapped(), m.swapped()).value
    assert a == pytest.approx(b, abs=1e-10)
    fa = finite_free_energy(pat, m, 8).value
    fb = finite_free_energy(pat.swapped(), m.swapped(), 8).value
    assert fa == pytest.approx(fb, abs=1e-10)


@pytest.mark.parametrize("pat", list(PatternId))
@pytest.mark.parametrize("L", [2, 4, 8])
@pytest.mark.parametrize("m", [ModelParams(0.3, 100, 0.01), ModelParams(0.7, 2.0, 5.0)], ids=["strong", "inverted"])
def test_finite_matches_oracle(pat, L, m):
    assert finite_free_energy(pat, m, L).value == pytest.approx(oracle_free_energy(pat.value, m, L), abs=1e-9)


def _orbit(k):
    k1, k2 = k
    return [(k1, k2), (k1 + math.pi, k2), (k1, k2 + math.pi), (k1 + math.pi, k2 + math.pi)]


def test_orbit_blocks_match_closed_forms():
    m = ModelParams(0.5, 3.0, 0.25)
    L = 8
    blocks = orbit_blocks("UO", m, L)
    ma_blocks = orbit_blocks("MA", m, L)
    h = L // 2
    for idx in range(1, h * h):
        n1, n2 = divmod(idx, h)
        k = (2 * math.pi * n1 / L, 2 * math.pi * n2 / L)
        uo = det_pi_uo(k, m) * det_pi_uo((k[0], k[1] + math.pi), m)
        assert np.linalg.det(blocks[idx]).real == pytest.approx(uo, rel=1e-10)
        ma = ((m.kappa_o - m.kappa_d) / 2) ** 4 * det_pi_ma(k, m)
        assert np.linalg.det(ma_blocks[idx]).real == pytest.approx(ma, rel=1e-10)


def test_homogeneous_block_is_diagonal():
    m = ModelParams(0.5, 2.0, 2.0)
    blocks = orbit_blocks("O", m, 4)
    off = blocks - np.einsum("kii->ki", blocks)[:, :, None] * np.eye(4)
    assert np.abs(off).max() < 1e-12


def test_disordered_converges():
    m = ModelParams(0.5, 100, 0.01)
    inf = infinite_free_energy("D", m).value
    errs = [abs(finite_free_energy("D", m, L).value - inf) for L in (8, 16, 32, 64)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


@pytest.mark.parametrize("pat", list(PatternId))
def test_convergence_at_moderate_contrast(pat):
    m = ModelParams(0.5, 2.0, 0.5)
    inf = infinite_free_energy(pat, m).value
    errs = [abs(finite_free_energy(pat, m, L).value - inf) for L in (8, 16, 32, 64)]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_gap_examples():
    assert gap_check(ModelParams(0.5, 100, 0.01)).holds
    rep = gap_check(ModelParams(0.5, 1.0 + 1e-6, 1.0))
    assert rep.rhs < -3 and rep.holds
    for i in range(1, 20):
        assert gap_check(ModelParams(0.05 * i, 10.0, 0.1)).holds
    with pytest.raises(ValidationError):
        gap_check(ModelParams(0.5, 1.0, 2.0))


def test_crossing_examples():
    assert crossing_p(ModelParams(0.5, 100, 0.01)) == pytest.approx(10 / 11, abs=1e-12)
    assert crossing_p(ModelParams(0.5, 3, 3)) == 0.5
    assert crossing_p(ModelParams(0.5, 16, 1)) == pytest.approx(2 / 3, abs=1e-12)


@pytest.mark.parametrize("ko,kd", [(100, 0.01), (16, 1)])
def test_crossing_equalizes_homogeneous_free_energies(ko, kd):
    m = ModelParams(0.5, ko, kd).with_p(crossing_p(ModelParams(0.5, ko, kd)))
    assert infinite_free_energy("O", m).value == pytest.approx(infinite_free_energy("D", m).value, abs=1e-8)
