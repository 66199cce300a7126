"""Closed-form Euclidean gradients of the CU rates and of the CRLB.

Conventions
-----------
``g_W`` is the conjugate (Wirtinger) gradient ``df/dW*``: for real ``f`` the
first-order change is ``2 Re Tr(g_W^H dW)``.  ``g_psi``/``g_phi`` are plain
gradients with respect to the latent (pre-sigmoid) position variables.

The CRLB gradient exploits the rank-two structure of the echo-channel
derivatives: every ``M x M`` product collapses to a handful of length-``M``
vectors per target, so nothing larger than ``(K_T, M, K)`` is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import AntennaArray, Fields, compute_fields, swan_array
from .geometry import Scenario, SwanLayout
from .manifold import ProductPoint
from .metrics import EchoDerivatives, fim_from_projected, schur_parts, sinr_all

_LN2 = np.log(2.0)


@dataclass
class EuclideanGradient:
    g_W: np.ndarray
    g_psi: np.ndarray
    g_phi: np.ndarray

    def __add__(self, other: "EuclideanGradient") -> "EuclideanGradient":
        return EuclideanGradient(self.g_W + other.g_W, self.g_psi + other.g_psi, self.g_phi + other.g_phi)

    def __mul__(self, c: float) -> "EuclideanGradient":
        return EuclideanGradient(self.g_W * c, self.g_psi * c, self.g_phi * c)

    __rmul__ = __mul__

    @classmethod
    def zeros_like(cls, point: ProductPoint) -> "EuclideanGradient":
        return cls(np.zeros_like(point.W), np.zeros_like(point.psi_tilde), np.zeros_like(point.phi_tilde))


def fim_block_adjoints(F_xx: np.ndarray, F_xy: np.ndarray, F_yy: np.ndarray, parts=None):
    """Gradients of ``Tr(C_xx) + Tr(C_yy)`` with respect to the three FIM blocks.

    ``F_xy`` is treated as the only free copy of the off-diagonal block, so its
    adjoint already accounts for ``F_yx = F_xy^T``.  ``parts`` may pass in a
    precomputed :func:`schur_parts` result.
    """
    T0, T1 = (parts or schur_parts(F_xx, F_xy, F_yy))[:2]
    F = F_xy
    T1sq = T1 @ T1
    T0sq = T0 @ T0
    FT1 = F @ T1
    T0F = T0 @ F
    g_xx = -(T0sq + T0F @ T1sq @ F.T @ T0)
    g_xy = (2.0 * T0F @ T1sq + 2.0 * T0sq @ FT1
            + 2.0 * T0F @ T1sq @ F.T @ T0F @ T1)
    g_yy = (-T1sq.T - FT1.T @ T0sq @ FT1 - (F @ T1sq).T @ T0F @ T1
            - FT1.T @ T0F @ T1sq @ F.T @ T0F @ T1 - FT1.T @ T0F @ T1sq)
    return g_xx, g_xy, g_yy


def _full_adjoint(F: np.ndarray, kt: int, parts):
    F_xx, F_xy, F_yy = F[:kt, :kt], F[:kt, kt:], F[kt:, kt:]
    g_xx, g_xy, g_yy = fim_block_adjoints(F_xx, F_xy, F_yy, parts)
    A = np.empty_like(F)
    A[:kt, :kt] = g_xx
    A[kt:, kt:] = g_yy
    A[:kt, kt:] = 0.5 * g_xy
    A[kt:, :kt] = 0.5 * g_xy.T
    return 0.5 * (A + A.T)


def crlb_value_and_gradient(fields: Fields, W: np.ndarray, scenario: Scenario, array: AntennaArray,
                            psi_tilde, phi_tilde, positions: bool = True):
    """Return ``(crlb, g_W, g_psi, g_phi)``; raises SingularFim when undefined.

    ``fields`` must carry position terms when ``positions`` is true.
    """
    alpha = scenario.rcs
    scale = 2.0 * scenario.samples / scenario.noise_sense
    ed = EchoDerivatives.from_fields(fields, alpha)
    G = ed.projected(W)
    kt = fields.U.shape[0]
    F = fim_from_projected(G, scale)
    parts = schur_parts(F[:kt, :kt], F[:kt, kt:], F[kt:, kt:])
    value = parts[3]
    A = _full_adjoint(F, kt, parts)
    n2, M, K = G.shape
    B = (A @ G.reshape(n2, -1)).reshape(n2, M, K)
    Bx, By = B[:kt], B[kt:]
    cU, cUx, cUy = fields.U.conj(), fields.Ux.conj(), fields.Uy.conj()
    bx = np.einsum("km,kmj->kj", cUx, Bx)
    b0x = np.einsum("km,kmj->kj", cU, Bx)
    by = np.einsum("km,kmj->kj", cUy, By)
    b0y = np.einsum("km,kmj->kj", cU, By)
    ca = alpha.conj()[:, None]
    g_W = scale * (fields.V.conj().T @ (ca * (bx + by))
                   + fields.Vx.conj().T @ (ca * b0x)
                   + fields.Vy.conj().T @ (ca * b0y))
    g_psi = np.zeros(array.num_tx)
    g_phi = np.zeros(array.num_chains)
    if positions and (array.tx_movable or array.rx_movable):
        al = alpha[:, None]
        if array.tx_movable:
            tx = fields.tx_terms
            Px = (bx + by).conj() @ W.T
            P0x = b0x.conj() @ W.T
            P0y = b0y.conj() @ W.T
            rep = array.per_chain
            term = (np.repeat(Px, rep, axis=1) * tx.sa + np.repeat(P0x, rep, axis=1) * tx.sxa
                    + np.repeat(P0y, rep, axis=1) * tx.sya)
            g_psi = 2.0 * scale * (al * term).real.sum(axis=0) * array.tx_chain_factor(psi_tilde)
        if array.rx_movable:
            rx = fields.rx_terms
            a, ax, ay = fields.V @ W, fields.Vx @ W, fields.Vy @ W
            cBx, cBy = Bx.conj(), By.conj()
            term = (rx.sxa * np.einsum("kmj,kj->km", cBx, a) + rx.sa * np.einsum("kmj,kj->km", cBx, ax)
                    + rx.sya * np.einsum("kmj,kj->km", cBy, a) + rx.sa * np.einsum("kmj,kj->km", cBy, ay))
            g_phi = 2.0 * scale * (al * term).real.sum(axis=0) * array.rx_chain_factor(phi_tilde)
    return value, g_W, g_psi, g_phi


def weighted_rate_gradient(fields: Fields, W: np.ndarray, noise: float, weights, array: AntennaArray,
                           psi_tilde, positions: bool = True):
    """Gradient of ``sum_k weights[k] * R_k`` (rates in bit/s/Hz); returns ``(g_W, g_psi)``."""
    weights = np.asarray(weights, dtype=float)
    kc = fields.Vc.shape[0]
    g_psi = np.zeros(array.num_tx)
    if kc == 0:
        return np.zeros_like(W), g_psi
    gamma, Z, S, I = sinr_all(fields.Vc, W, noise)
    coef = Z * (-S / I ** 2)[:, None]
    idx = np.arange(kc)
    coef[idx, idx] = Z[idx, idx] / I
    beta = weights / ((1.0 + gamma) * _LN2)
    g_W = fields.Vc.conj().T @ (beta[:, None] * coef)
    if positions and array.tx_movable:
        omega = coef.conj() @ W.T  # (K_C, M)
        term = fields.cu_terms.sa * np.repeat(omega, array.per_chain, axis=1)
        g_psi = 2.0 * (beta[:, None] * term.real).sum(axis=0) * array.tx_chain_factor(psi_tilde)
    return g_W, g_psi


def grad_rate(layout: SwanLayout, scenario: Scenario, point: ProductPoint, k: int,
              array: AntennaArray = None) -> EuclideanGradient:
    """Gradient of the rate of CU ``k``; the RPA component is identically zero."""
    array = swan_array(layout) if array is None else array
    fields = compute_fields(layout, scenario, array, point.psi_tilde, point.phi_tilde, with_position_terms=True)
    w = np.zeros(scenario.num_cus)
    w[k] = 1.0
    g_W, g_psi = weighted_rate_gradient(fields, point.W, scenario.noise_comm, w, array, point.psi_tilde)
    return EuclideanGradient(g_W, g_psi, np.zeros_like(point.phi_tilde))


def grad_crlb(layout: SwanLayout, scenario: Scenario, point: ProductPoint,
              array: AntennaArray = None) -> EuclideanGradient:
    array = swan_array(layout) if array is None else array
    fields = compute_fields(layout, scenario, array, point.psi_tilde, point.phi_tilde, with_position_terms=True)
    _, g_W, g_psi, g_phi = crlb_value_and_gradient(fields, point.W, scenario, array,
                                                   point.psi_tilde, point.phi_tilde)
    return EuclideanGradient(g_W, g_psi, g_phi)


def fd_gradient(objective, point: ProductPoint, step: float = 1e-6, w_step: float = None) -> EuclideanGradient:
    """Central-difference gradient in the package's conventions.

    Real and imaginary parts of ``W`` are perturbed independently and combined
    as ``(df/dRe + j df/dIm) / 2``.  ``w_step`` defaults to ``step``.
    """
    w_step = step if w_step is None else w_step
    W = point.W
    gW = np.zeros_like(W)
    for idx in np.ndindex(W.shape):
        parts = []
        for unit in (1.0, 1j):
            Wp = W.copy()
            Wm = W.copy()
            Wp[idx] += unit * w_step
            Wm[idx] -= unit * w_step
            fp = objective(ProductPoint(Wp, point.psi_tilde, point.phi_tilde))
            fm = objective(ProductPoint(Wm, point.psi_tilde, point.phi_tilde))
            parts.append((fp - fm) / (2.0 * w_step))
        gW[idx] = 0.5 * (parts[0] + 1j * parts[1])

    def vec_grad(vec, make):
        g = np.zeros_like(vec)
        for i in range(vec.size):
            vp = vec.copy()
            vm = vec.copy()
            vp[i] += step
            vm[i] -= step
            g[i] = (objective(make(vp)) - objective(make(vm))) / (2.0 * step)
        return g

    g_psi = vec_grad(point.psi_tilde, lambda v: ProductPoint(W, v, point.phi_tilde))
    g_phi = vec_grad(point.phi_tilde, lambda v: ProductPoint(W, point.psi_tilde, v))
    return EuclideanGradient(gW, g_psi, g_phi)
