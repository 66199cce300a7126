import numpy as np
import pytest

from swan_isac.channels import swan_array
from swan_isac.gradients import fd_gradient, fim_block_adjoints, grad_crlb, grad_rate
from swan_isac.manifold import ProductPoint, TangentVector, inner, riemannian_gradient, transport
from swan_isac.metrics import evaluate
from swan_isac.oracles import gradient_oracle, random_instance


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_fd_gradient_of_power(rng):
    W = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    p = ProductPoint(W, rng.normal(size=4), rng.normal(size=2))
    g = fd_gradient(lambda q: float(np.vdot(q.W, q.W).real), p)
    assert np.allclose(g.g_W, W, atol=1e-8)
    assert np.allclose(g.g_psi, 0) and np.allclose(g.g_phi, 0)
    c = fd_gradient(lambda q: 3.0, p)
    assert np.all(c.g_W == 0) and np.all(c.g_psi == 0)


def test_rate_gradient_stationary_at_zero(rng):
    layout, scenario, point = random_instance(rng)
    W = np.zeros_like(point.W)
    g = grad_rate(layout, scenario, ProductPoint(W, point.psi_tilde, point.phi_tilde), 0)
    assert np.all(g.g_W == 0)


def test_rate_gradient_vs_fd(rng):
    for _ in range(3):
        layout, scenario, point = random_instance(rng)
        arr = swan_array(layout)
        for k in range(scenario.num_cus):
            g = grad_rate(layout, scenario, point, k, arr)
            fd = fd_gradient(lambda p: evaluate(layout, scenario, p, arr).rates[k], point,
                             w_step=1e-6 * np.sqrt(scenario.power_budget))
            assert _rel(g.g_W, fd.g_W) <= 1e-5
            assert _rel(g.g_psi, fd.g_psi) <= 1e-5
            assert np.all(g.g_phi == 0)


def test_crlb_gradient_vs_fd(rng):
    for _ in range(3):
        layout, scenario, point = random_instance(rng)
        g = grad_crlb(layout, scenario, point)
        fd = fd_gradient(lambda p: evaluate(layout, scenario, p).crlb, point,
                         w_step=1e-6 * np.sqrt(scenario.power_budget))
        assert _rel(g.g_W, fd.g_W) <= 1e-5
        assert _rel(g.g_psi, fd.g_psi) <= 1e-4
        assert _rel(g.g_phi, fd.g_phi) <= 1e-4


def test_block_adjoint_decoupled(rng):
    A = rng.normal(size=(3, 3))
    F_xx = A @ A.T + np.eye(3)
    G_xx, G_xy, G_yy = fim_block_adjoints(F_xx, np.zeros((3, 3)), 2 * np.eye(3))
    T0 = np.linalg.inv(F_xx)
    assert np.allclose(G_xx, -T0 @ T0, rtol=1e-12, atol=1e-14)
    assert np.allclose(G_yy, -np.eye(3) / 4)


def test_block_adjoints_match_fd(rng):
    A = rng.normal(size=(4, 4))
    F = A @ A.T + np.eye(4)

    def f(F):
        return np.trace(np.linalg.inv(F))

    G_xx, G_xy, G_yy = fim_block_adjoints(F[:2, :2], F[:2, 2:], F[2:, 2:])
    h = 1e-6
    E = np.zeros((4, 4))
    E[0, 1] = E[1, 0] = 1.0
    fd = (f(F + h * E) - f(F - h * E)) / (2 * h)
    assert 2 * G_xx[0, 1] == pytest.approx(fd, rel=1e-6)
    E = np.zeros((4, 4))
    E[0, 3] = E[3, 0] = 1.0
    fd = (f(F + h * E) - f(F - h * E)) / (2 * h)
    assert G_xy[0, 1] == pytest.approx(fd, rel=1e-6)


def test_riemannian_gradient_is_directional_derivative(rng):
    layout, scenario, point = random_instance(rng)
    eg = grad_crlb(layout, scenario, point)
    rg = riemannian_gradient(point, eg)
    u = transport(point, TangentVector.from_parts(rng.normal(size=point.W.shape) + 1j * rng.normal(size=point.W.shape),
                                                   rng.normal(size=point.psi_tilde.size),
                                                   rng.normal(size=point.phi_tilde.size)))
    h = 1e-6
    f = lambda t: evaluate(layout, scenario, ProductPoint(point.W + t * u.z_W, point.psi_tilde + t * u.z_psi,
                                                           point.phi_tilde + t * u.z_phi)).crlb
    fd = (f(h) - f(-h)) / (2 * h)
    assert inner(rg, u) == pytest.approx(fd, rel=1e-4)  # latent directions are oscillatory


def test_gradient_oracle_suite():
    res = gradient_oracle(instances=4)
    assert res.passed, res.line()
