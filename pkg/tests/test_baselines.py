import numpy as np
import pytest

from swan_isac.baselines import (
    ALL_SCHEMES,
    Scheme,
    SchemeSpec,
    midpoint_positions,
    mpass_array,
    mpass_channels,
    mpass_offsets,
    run_scheme,
)
from swan_isac.errors import InvalidInput
from swan_isac.geometry import Scenario
from swan_isac.harness import Template, generate_scenario
from swan_isac.solver import SolverConfig

LAM = 3e8 / 28e9


def test_scheme_parse():
    assert Scheme.parse("mpass-dis") is Scheme.MPASS_DIS
    assert Scheme.parse(" Proposed ") is Scheme.PROPOSED
    with pytest.raises(InvalidInput):
        Scheme.parse("nope")
    assert len(ALL_SCHEMES) == 6


def test_midpoint_single_cu(layout):
    sc = Scenario([[7.1, 0.0]], [[20.0, 0.0]])
    two = layout.with_(tpas_per_segment=2)
    psi, phi = midpoint_positions(two, sc, "CU")
    assert psi[2:4] == pytest.approx([7.1 - LAM / 4, 7.1 + LAM / 4], abs=1e-12)


def test_midpoint_clamped(layout):
    two = layout.with_(tpas_per_segment=2)
    psi, _ = midpoint_positions(two, Scenario([[30.0, 0.0]], [[30.0, 0.0]]), "TA")
    assert psi[:2] == pytest.approx([3.0 - LAM / 2, 3.0], abs=1e-12)


def test_midpoint_symmetric(layout):
    two = layout.with_(tpas_per_segment=2)
    psi, _ = midpoint_positions(two, Scenario([[0.5, 3.0], [2.5, -1.0]], [[50.0, 0.0]]), "CU")
    assert psi[:2].mean() == pytest.approx(1.5, abs=1e-12)


def test_midpoint_needs_anchor(layout):
    with pytest.raises(InvalidInput):
        midpoint_positions(layout, Scenario(np.empty((0, 2)), [[1.0, 1.0]]), "CU")
    with pytest.raises(InvalidInput):
        midpoint_positions(layout, Scenario([[1.0, 1.0]], [[1.0, 1.0]]), "XY")


def test_mpass_layout(layout):
    ty, ry = mpass_offsets(layout, "dis")
    assert ty[0] == -20.0 and ry[-1] == 20.0
    with pytest.raises(InvalidInput):
        mpass_offsets(layout, "spiral")
    arr = mpass_array(layout, "cen")
    assert np.all(arr.tx_feed == 0) and np.all(arr.rx_feed == 0)


def test_mpass_channel_at_feed_and_validation(layout):
    lay = layout.with_(num_segments=1, tpas_per_segment=1)
    sc = Scenario([[0.0, 0.0]], [[5.0, 0.0]])
    ty, _ = mpass_offsets(lay, "cen")
    h = mpass_channels(lay, sc, "cen", [0.0], [1.0]).h_c[0, 0]
    r = np.sqrt(ty[0] ** 2 + 9.0)
    eta = LAM ** 2 / (16 * np.pi ** 2)
    assert abs(h) == pytest.approx(np.sqrt(eta) / r, rel=1e-12)
    with pytest.raises(InvalidInput):
        mpass_channels(lay, sc, "cen", [61.0])
    with pytest.raises(InvalidInput):
        mpass_channels(lay, sc, "cen", [1.0, 2.0])


@pytest.fixture(scope="module")
def desk():
    tmpl = Template.desk_scale()
    return tmpl.layout(), generate_scenario(tmpl, 5)


def test_frozen_proposed_reproduces_midpoint(desk):
    layout, sc = desk
    cfg = SolverConfig(outer_max=20)
    mid = run_scheme(layout, sc, Scheme.MIDPOINT_CU, cfg)
    psi, phi = midpoint_positions(layout, sc, "CU")
    frozen = run_scheme(layout, sc, SchemeSpec(Scheme.PROPOSED, psi, phi), cfg)
    assert frozen.report.crlb == mid.report.crlb
    assert np.array_equal(frozen.point.W, mid.point.W)


@pytest.mark.parametrize("scheme", [Scheme.MIMO, Scheme.MPASS_CEN, Scheme.MIDPOINT_TA])
def test_power_budget_respected(desk, scheme):
    layout, sc = desk
    res = run_scheme(layout, sc, scheme, SolverConfig(outer_max=20))
    assert abs(res.point.power - sc.power_budget) <= 1e-10 * sc.power_budget
