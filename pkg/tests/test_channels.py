import numpy as np
import pytest

from swan_isac.baselines import mimo_array, mpass_array, mpass_offsets
from swan_isac.channels import (
    array_channels,
    assemble_channels,
    channel_to_point,
    fixed_swan_array,
    receive_channel,
    swan_array,
    tsw_guide_coeff,
    rsw_guide_coeff,
    wireless_coeff,
)
from swan_isac.errors import DegenerateGeometry, SegmentViolation
from swan_isac.geometry import Scenario, SwanLayout, project_rpa, project_tpa

LAM = 3e8 / 28e9
LAM_G = LAM / 1.4
K = 2 * np.pi / LAM
ETA = LAM ** 2 / (16 * np.pi ** 2)


def straight_line_channels(M, N, L, d, kappa, psi, phi, cus, targets):
    """Term-by-term evaluation of the channel model with plain loops."""
    def g(px, point):
        r = np.sqrt((point[0] - px) ** 2 + point[1] ** 2 + d ** 2)
        return np.sqrt(ETA) * np.exp(-1j * K * r) / r

    def guide(delta):
        return 10 ** (-kappa * delta / 20) * np.exp(-1j * 2 * np.pi * delta / LAM_G)

    def tx(point):
        out = []
        for m in range(M):
            acc = 0j
            for n in range(N):
                x = psi[m * N + n]
                acc += np.conj(guide(x - 2 * m * L) * g(x, point))
            out.append(acc)
        return np.array(out)

    def rx(point):
        return np.array([np.conj(guide(phi[m] - (2 * m + 1) * L) * g(phi[m], point)) for m in range(M)])

    return (np.array([tx(p) for p in cus]), np.array([tx(p) for p in targets]),
            np.array([rx(p) for p in targets]))


def test_wireless_coeff_below_pa(layout):
    assert abs(wireless_coeff((5, 0, 3), (5, 0), layout)) == pytest.approx(np.sqrt(ETA) / 3, rel=1e-12)


def test_wireless_coeff_345(layout):
    c = wireless_coeff((0, 0, 3), (4, 0), layout)
    assert abs(c) == pytest.approx(np.sqrt(ETA) / 5, rel=1e-12)
    assert np.angle(c * np.exp(1j * K * 5)) == pytest.approx(0.0, abs=1e-9)


def test_wireless_coeff_isotropic(layout):
    a = wireless_coeff((10, 0, 3), (13, 4), layout)
    b = wireless_coeff((10, 0, 3), (6, -3), layout)
    assert abs(a) == pytest.approx(abs(b), rel=1e-12)


def test_wireless_coeff_degenerate(layout):
    with pytest.raises(DegenerateGeometry):
        wireless_coeff((1, 2, 0), (1, 2), layout)


def test_guide_coeff(layout):
    assert tsw_guide_coeff(layout, 1, 0.0) == 1 + 0j
    c = tsw_guide_coeff(layout, 1, LAM_G)
    assert abs(c) == pytest.approx(10 ** (-0.08 * LAM_G / 20), rel=1e-12)
    assert abs(c) == pytest.approx(0.99992952, abs=1e-8)
    assert np.angle(c) == pytest.approx(0.0, abs=1e-9)  # -2*pi wraps to 0
    assert abs(tsw_guide_coeff(layout, 2, 9.0)) == pytest.approx(0.97275, abs=1e-5)
    assert rsw_guide_coeff(layout, 1, 3.0) == 1 + 0j
    assert abs(rsw_guide_coeff(layout, 1, 6.0)) == pytest.approx(0.97275, abs=1e-5)
    with pytest.raises(SegmentViolation):
        tsw_guide_coeff(layout, 1, 3.5)


def test_single_pa_at_feed():
    lay = SwanLayout(num_segments=2, tpas_per_segment=1)
    h = channel_to_point(lay, [0.0, 6.0], (0.0, 0.0))
    assert h[0] == pytest.approx(np.sqrt(ETA) * np.exp(1j * K * 3) / 3, rel=1e-12)


def test_coherent_pair():
    # two PAs mirrored about the point see the same distance; with equal guide phase the sum is coherent
    lay = SwanLayout(num_segments=1, tpas_per_segment=2, attenuation=0.0)
    x0 = 1.0
    x1 = x0 + 100 * LAM_G  # whole number of guided wavelengths: identical guide phase
    mid = 0.5 * (x0 + x1)
    h = channel_to_point(lay, [x0, x1], (mid, 0.0))
    single = abs(wireless_coeff((x0, 0, 3), (mid, 0.0), lay))
    assert abs(h[0]) == pytest.approx(2 * single, rel=1e-9)


def test_receive_channel_basics(layout):
    phi = 3.0 + 6.0 * np.arange(layout.M)
    h = receive_channel(layout, phi, (3.0, 0.0))
    assert abs(h[0]) == pytest.approx(np.sqrt(ETA) / 3, rel=1e-12)
    assert np.angle(h[0] * np.exp(-1j * K * 3)) == pytest.approx(0.0, abs=1e-9)
    # same guide distance, doubled range
    near = receive_channel(layout, phi, (3.0 + 3.0, 0.0))[0]
    far_pt = np.array([3.0 + 3.0 * np.sqrt(7.0), 0.0])  # sqrt(63 + 9) = 2 * sqrt(18)
    far = receive_channel(layout, phi, far_pt)[0]
    assert abs(far) == pytest.approx(abs(near) / 2, rel=1e-12)


def test_random_instance_matches_straight_line(rng):
    lay = SwanLayout.for_area(2, 2, 12.0)
    psi_t, phi_t = rng.normal(size=4), rng.normal(size=2)
    psi, phi = project_tpa(lay, psi_t), project_rpa(lay, phi_t)
    sc = Scenario(cu_positions=rng.uniform([0, -20], [12, 20], (3, 2)),
                  target_positions=rng.uniform([0, -20], [12, 20], (2, 2)))
    ref = straight_line_channels(2, 2, lay.L, lay.d, lay.attenuation, psi, phi,
                                 sc.cu_positions, sc.target_positions)
    for got in (assemble_channels(lay, sc, psi, phi), array_channels(lay, sc, swan_array(lay), psi_t, phi_t)):
        for a, b in zip((got.h_c, got.h_t, got.h_r), ref):
            assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)


def test_empty_cus_and_mirror_symmetry(layout, rng):
    psi = project_tpa(layout, rng.normal(size=40))
    phi = project_rpa(layout, rng.normal(size=10))
    ch = assemble_channels(layout, Scenario(np.empty((0, 2)), [[10.0, 5.0]]), psi, phi)
    assert ch.h_c.shape == (0, layout.M)
    ch = assemble_channels(layout, Scenario([[20.0, 7.0], [20.0, -7.0]], [[1.0, 1.0]]), psi, phi)
    assert np.abs(ch.h_c[0]) == pytest.approx(np.abs(ch.h_c[1]), rel=1e-12)


def test_mimo_single_antenna_is_pure_wireless():
    lay = SwanLayout(num_segments=3, tpas_per_segment=1)
    sc = Scenario([[4.0, 2.0]], [[7.0, -3.0]])
    h = array_channels(lay, sc, mimo_array(lay), np.zeros(3), np.zeros(3)).h_c[0]
    ref = [np.conj(wireless_coeff((6.0 * m, 0, 3), (4.0, 2.0), lay)) for m in range(3)]
    assert h == pytest.approx(ref, rel=1e-12)


def test_mimo_has_no_guide_loss():
    lay = SwanLayout(num_segments=10, tpas_per_segment=1)
    sc = Scenario([[30.0, 5.0], [2.0, -9.0]], [[10.0, 0.0]])
    pos = 6.0 * np.arange(10) + 1.7
    mimo = mimo_array(lay)
    mimo = type(mimo)(**{**mimo.__dict__, "tx_offset": pos})
    swan = fixed_swan_array(lay, pos, mimo.rx_offset)
    ha = np.abs(array_channels(lay, sc, mimo, np.zeros(10), np.zeros(10)).h_c)
    hb = np.abs(array_channels(lay, sc, swan, np.zeros(10), np.zeros(10)).h_c)
    assert np.all(ha >= hb)
    assert hb / ha == pytest.approx(np.full_like(ha, 10 ** (-0.08 * 1.7 / 20)), rel=1e-12)


def test_mpass_guide_loss_and_offsets(layout):
    arr = mpass_array(layout, "dis")
    lay1 = SwanLayout(num_segments=1, tpas_per_segment=1)
    sc = Scenario([[54.0, 0.0]], [[54.0, 0.0]])
    one = mpass_array(lay1, "cen")
    pinned = type(one)(**{**one.__dict__, "tx_offset": np.array([54.0]), "tx_span": np.zeros(1)})
    h = array_channels(layout, sc, pinned, np.zeros(1), np.zeros(1)).h_c[0, 0]
    free = abs(wireless_coeff((54.0, one.tx_y[0], 3.0), (54.0, 0.0), layout))
    assert abs(h) / free == pytest.approx(10 ** (-0.216), rel=1e-12)
    assert abs(h) / free == pytest.approx(0.6081, abs=1e-4)
    ty, ry = mpass_offsets(layout, "cen")
    y = np.sort(np.concatenate([ty, ry]))
    assert np.diff(y) == pytest.approx(np.full(2 * layout.M - 1, LAM / 2))
    assert 0.0 in y and y[0] < 0 < y[-1]
    assert arr.tx_span == pytest.approx(np.full(arr.num_tx, 60.0))
