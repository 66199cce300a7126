import numpy as np
import pytest

from swan_isac.channels import swan_array
from swan_isac.errors import InvalidInput
from swan_isac.gradients import fd_gradient, grad_crlb
from swan_isac.geometry import SwanLayout, project_tpa
from swan_isac.manifold import ProductPoint
from swan_isac.metrics import evaluate
from swan_isac.oracles import random_instance
from swan_isac.penalty import (
    PenalizedProblem,
    PenaltyState,
    constraint_values,
    penalized_gradient,
    penalized_objective,
    smoothed_max,
    smoothed_max_derivative,
    spacing_values,
)


@pytest.mark.parametrize("x, u, p", [(-0.5, 0.1, 0.0), (0.1, 0.1, 0.05), (0.3, 0.1, 0.25)])
def test_smoothed_max(x, u, p):
    assert smoothed_max(x, u) == pytest.approx(p, abs=1e-15)


def test_smoothed_max_continuity():
    u = 0.1
    assert smoothed_max(u - 1e-12, u) == pytest.approx(smoothed_max(u + 1e-12, u), abs=1e-11)


@pytest.mark.parametrize("x, u, d", [(-1.0, 0.1, 0.0), (0.05, 0.1, 0.5), (1.0, 0.1, 1.0)])
def test_smoothed_max_derivative(x, u, d):
    assert smoothed_max_derivative(x, u) == pytest.approx(d)


def test_penalty_state():
    st = PenaltyState()
    assert st.advance(False).rho == 3.0 and st.advance(True).rho == 1.0
    assert st.advance(True).u == pytest.approx(0.05)
    tiny = PenaltyState(u=1.5e-6)
    assert tiny.advance(True).u == 1e-6
    with pytest.raises(InvalidInput):
        PenaltyState(theta_rho=1.0)
    with pytest.raises(InvalidInput):
        PenaltyState(u=0.0)


def _single_segment():
    lay = SwanLayout(num_segments=1, tpas_per_segment=2)
    return lay, swan_array(lay)


def test_spacing_values():
    lay, arr = _single_segment()
    lam = lay.wavelength
    psi_t = np.log(np.array([1.0, 1.0 + lam]) / (3.0 - np.array([1.0, 1.0 + lam])))
    assert spacing_values(lay, arr, psi_t)[0] == pytest.approx(-lam / 2, rel=1e-6)
    assert spacing_values(lay, arr, np.zeros(2))[0] == pytest.approx(lam / 2)


def _feasible_instance(rng):
    layout, scenario, point = random_instance(rng, N=1)
    return layout, scenario.with_(rate_thresholds=0.0), point


def test_satisfied_constraints_leave_crlb(rng):
    layout, scenario, point = _feasible_instance(rng)
    crlb = evaluate(layout, scenario, point).crlb
    assert penalized_objective(layout, scenario, point, PenaltyState(rho=5.0)) == crlb
    g = penalized_gradient(layout, scenario, point, PenaltyState(rho=5.0))
    ref = grad_crlb(layout, scenario, point)
    assert np.array_equal(g.g_W, ref.g_W) and np.array_equal(g.g_psi, ref.g_psi)


def test_zero_rho(rng):
    layout, scenario, point = random_instance(rng)
    sc = scenario.with_(rate_thresholds=50.0)
    assert penalized_objective(layout, sc, point, PenaltyState(rho=0.0)) == evaluate(layout, sc, point).crlb


def test_linear_branch(rng):
    layout, scenario, point = _feasible_instance(rng)
    rep = evaluate(layout, scenario, point)
    u, rho = 0.1, 2.5
    gam = np.zeros(scenario.num_cus)
    gam[0] = rep.rates[0] + 2 * u
    sc = scenario.with_(rate_thresholds=gam)
    h = constraint_values(layout, sc, point)
    assert h[0] == pytest.approx(2 * u)
    g = penalized_objective(layout, sc, point, PenaltyState(rho=rho, u=u))
    assert g == pytest.approx(rep.crlb + rho * 1.5 * u, rel=1e-12)


def test_rate_boundary_is_zero(rng):
    layout, scenario, point = _feasible_instance(rng)
    rep = evaluate(layout, scenario, point)
    sc = scenario.with_(rate_thresholds=rep.rates)
    assert constraint_values(layout, sc, point)[:scenario.num_cus] == pytest.approx(0.0, abs=1e-12)


def test_spacing_violation_leaves_W_gradient(rng):
    layout, scenario, point = random_instance(rng)
    sc = scenario.with_(rate_thresholds=0.0)
    psi = point.psi_tilde.copy()
    psi[1] = psi[0] + 1e-4  # same segment, far too close
    p = ProductPoint(point.W, psi, point.phi_tilde)
    assert constraint_values(layout, sc, p)[scenario.num_cus] > 0
    g = penalized_gradient(layout, sc, p, PenaltyState(rho=3.0))
    assert np.array_equal(g.g_W, grad_crlb(layout, sc, p).g_W)


def test_penalized_gradient_vs_fd(rng):
    for _ in range(3):
        layout, scenario, point = random_instance(rng)
        rep = evaluate(layout, scenario, point)
        # one rate constraint in each smoothing branch, away from the kinks
        sc = scenario.with_(rate_thresholds=[rep.rates[0] + 0.05, rep.rates[1] + 0.5])
        psi = point.psi_tilde.copy()
        psi[1] = psi[0] + 2e-4
        p = ProductPoint(point.W, psi, point.phi_tilde)
        st = PenaltyState(rho=3.0, u=0.1)
        prob = PenalizedProblem(layout, sc, st)
        g = prob.gradient(p)
        fd = fd_gradient(prob.value, p, w_step=1e-6 * np.sqrt(sc.power_budget))
        rel = lambda a, b: np.linalg.norm(a - b) / np.linalg.norm(b)
        assert rel(g.g_W, fd.g_W) <= 1e-5
        assert rel(np.r_[g.g_psi, g.g_phi], np.r_[fd.g_psi, fd.g_phi]) <= 1e-4


def test_singular_fim_gives_sentinel(rng):
    layout, scenario, point = random_instance(rng)
    zero = ProductPoint(np.zeros_like(point.W), point.psi_tilde, point.phi_tilde)
    ev = PenalizedProblem(layout, scenario, PenaltyState()).evaluate(zero)
    assert ev.singular and ev.gradient is None and ev.crlb == np.inf
