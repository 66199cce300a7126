"""Communication rates, echo-channel derivatives, Fisher information and the CRLB."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import AntennaArray, ChannelSet, Fields, compute_fields, fixed_swan_array, swan_array
from .errors import SingularFim
from .geometry import Scenario, SwanLayout
from .manifold import ProductPoint

COND_LIMIT = 1e12


def sinr(channels: ChannelSet, W: np.ndarray, k: int, noise: float) -> float:
    """SINR of CU ``k``; every other column of ``W`` (radar columns included) interferes."""
    h = channels.h_c[k]
    z = h.conj() @ W
    p = np.abs(z) ** 2
    return float(p[k] / (p.sum() - p[k] + noise))


def rate(gamma):
    """Achievable rate in bit/s/Hz."""
    return np.log2(1.0 + np.asarray(gamma, dtype=float))


def sinr_all(Vc: np.ndarray, W: np.ndarray, noise: float):
    """Vectorised SINRs from conjugate-domain CU channels ``Vc = conj(h_c)``.

    Returns ``(gamma, Z, signal, interference_plus_noise)`` with
    ``Z[k, j] = h_c,k^H w_j``.
    """
    Z = Vc @ W
    P = Z.real ** 2 + Z.imag ** 2
    kc = Vc.shape[0]
    S = P[np.arange(kc), np.arange(kc)]
    I = P.sum(axis=1) - S + noise
    return S / I, Z, S, I


@dataclass
class EchoDerivatives:
    """Rank-one echo channels ``H_k = alpha_k conj(h_r,k) h_t,k^H`` and their target-coordinate derivatives.

    Stored as the vector factors; the ``H``/``Hdot_*`` properties materialise
    the (K_T, M, M) stacks on demand.
    """

    alpha: np.ndarray
    U: np.ndarray
    Ux: np.ndarray
    Uy: np.ndarray
    V: np.ndarray
    Vx: np.ndarray
    Vy: np.ndarray

    @classmethod
    def from_fields(cls, fields: Fields, alpha) -> "EchoDerivatives":
        return cls(np.asarray(alpha, dtype=complex), fields.U, fields.Ux, fields.Uy,
                   fields.V, fields.Vx, fields.Vy)

    @property
    def H(self) -> np.ndarray:
        return self.alpha[:, None, None] * self.U[:, :, None] * self.V[:, None, :]

    @property
    def Hdot_x(self) -> np.ndarray:
        a = self.alpha[:, None, None]
        return a * (self.Ux[:, :, None] * self.V[:, None, :] + self.U[:, :, None] * self.Vx[:, None, :])

    @property
    def Hdot_y(self) -> np.ndarray:
        a = self.alpha[:, None, None]
        return a * (self.Uy[:, :, None] * self.V[:, None, :] + self.U[:, :, None] * self.Vy[:, None, :])

    def projected(self, W: np.ndarray) -> np.ndarray:
        """``[Hdot_x,1 W, ..., Hdot_x,K W, Hdot_y,1 W, ...]`` as a (2K_T, M, K) stack."""
        a = self.V @ W
        ax = self.Vx @ W
        ay = self.Vy @ W
        al = self.alpha[:, None, None]
        Gx = al * (self.Ux[:, :, None] * a[:, None, :] + self.U[:, :, None] * ax[:, None, :])
        Gy = al * (self.Uy[:, :, None] * a[:, None, :] + self.U[:, :, None] * ay[:, None, :])
        return np.concatenate([Gx, Gy], axis=0)


def echo_derivatives(layout: SwanLayout, scenario: Scenario, psi, phi) -> EchoDerivatives:
    """Echo channels and derivatives for PAs at ``psi``/``phi`` (meters)."""
    array = fixed_swan_array(layout, psi, phi)
    fields = compute_fields(layout, scenario, array, np.zeros(array.num_tx), np.zeros(layout.M))
    return EchoDerivatives.from_fields(fields, scenario.rcs)


def fim_from_projected(G: np.ndarray, scale: float) -> np.ndarray:
    Gf = G.reshape(G.shape[0], -1)
    return scale * (Gf @ Gf.conj().T).real


def fim_blocks(ed: EchoDerivatives, W: np.ndarray, samples: int, noise_sense: float):
    """Sub-blocks ``(F_xx, F_xy, F_yy)`` of the location FIM."""
    F = fim_from_projected(ed.projected(np.asarray(W, dtype=complex)), 2.0 * samples / noise_sense)
    kt = ed.U.shape[0]
    return F[:kt, :kt], F[:kt, kt:], F[kt:, kt:]


def _spd_inverse(A: np.ndarray, what: str) -> np.ndarray:
    A = 0.5 * (A + A.T)
    lam, Q = np.linalg.eigh(A)
    top = lam[-1] if lam.size else 0.0
    if lam.size == 0 or not np.all(np.isfinite(lam)) or lam[0] <= 0 or top > COND_LIMIT * lam[0]:
        raise SingularFim(f"{what} is singular or ill-conditioned")
    return (Q / lam) @ Q.T


def schur_parts(F_xx: np.ndarray, F_xy: np.ndarray, F_yy: np.ndarray):
    """Return ``(T0, T1, C_yy, crlb)`` with ``T1 = F_yy^-1`` and ``T0 = C_xx``."""
    T1 = _spd_inverse(F_yy, "F_yy")
    T0 = _spd_inverse(F_xx - F_xy @ T1 @ F_xy.T, "Schur complement of F_yy")
    B = T1 @ F_xy.T
    C_yy = T1 + B @ T0 @ B.T
    return T0, T1, C_yy, float(np.trace(T0) + np.trace(C_yy))


def crlb(F_xx: np.ndarray, F_xy: np.ndarray, F_yy: np.ndarray):
    """CRLB blocks via Schur complements; returns ``(C_xx, C_yy, trace sum)``."""
    T0, _, C_yy, value = schur_parts(F_xx, F_xy, F_yy)
    return T0, C_yy, value


@dataclass
class CrlbReport:
    F_xx: np.ndarray
    F_xy: np.ndarray
    F_yy: np.ndarray
    C_xx: np.ndarray
    C_yy: np.ndarray
    crlb: float
    crlb_db: float
    rates: np.ndarray
    sinr: np.ndarray
    xi: np.ndarray
    singular: bool = False

    @property
    def fim(self) -> np.ndarray:
        return np.block([[self.F_xx, self.F_xy], [self.F_xy.T, self.F_yy]])

    @property
    def min_rate(self) -> float:
        return float(self.rates.min()) if self.rates.size else float("inf")


def evaluate(layout: SwanLayout, scenario: Scenario, point: ProductPoint,
             array: AntennaArray = None, targets=None) -> CrlbReport:
    """Full metric report at ``point``.

    ``targets`` overrides the target positions used for the channels and the
    FIM (the beamformer is left as is); this is how a design made for assumed
    positions is scored at the true ones.  A singular FIM yields a report
    flagged ``singular`` with infinite CRLB instead of raising.
    """
    array = swan_array(layout) if array is None else array
    fields = compute_fields(layout, scenario, array, point.psi_tilde, point.phi_tilde, targets=targets)
    gamma, *_ = sinr_all(fields.Vc, point.W, scenario.noise_comm)
    ed = EchoDerivatives.from_fields(fields, scenario.rcs)
    F_xx, F_xy, F_yy = fim_blocks(ed, point.W, scenario.samples, scenario.noise_sense)
    tg = scenario.target_positions if targets is None else np.asarray(targets, dtype=float).reshape(-1, 2)
    xi = np.concatenate([tg[:, 0], tg[:, 1]])
    try:
        C_xx, C_yy, value = crlb(F_xx, F_xy, F_yy)
        singular = False
    except SingularFim:
        kt = F_xx.shape[0]
        C_xx = np.full((kt, kt), np.inf)
        C_yy = np.full((kt, kt), np.inf)
        value, singular = float("inf"), True
    crlb_db = 10.0 * np.log10(value) if np.isfinite(value) else float("inf")
    return CrlbReport(F_xx, F_xy, F_yy, C_xx, C_yy, value, float(crlb_db), rate(gamma), gamma, xi, singular)
