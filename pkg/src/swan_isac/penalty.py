"""Constraints, the linear-quadratic smoothed penalty and the penalized objective.

The objective handed to the inner solver is

    g(X) = CRLB(X) + rho * sum_i P(h_i(X), u)

with rate constraints ``h_k = Gamma_k - R_k`` followed by pairwise spacing
constraints ``h = lambda/2 - |p - p'|`` between the transmit antennas that
share an RF chain.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import AntennaArray, compute_fields, swan_array
from .errors import InvalidInput, SingularFim
from .geometry import Scenario, SwanLayout
from .gradients import EuclideanGradient, crlb_value_and_gradient, weighted_rate_gradient
from .manifold import ProductPoint
from .metrics import EchoDerivatives, fim_blocks, rate, schur_parts, sinr_all

# Returned in place of the objective when the FIM cannot be inverted.
SENTINEL = 1e12


@dataclass(frozen=True)
class PenaltyState:
    rho: float = 1.0
    u: float = 0.1
    u_min: float = 1e-6
    theta_rho: float = 3.0
    theta_u: float = 0.5

    def __post_init__(self):
        if not self.rho >= 0:
            raise InvalidInput("rho must be >= 0")
        if not (self.u > 0 and self.u_min > 0):
            raise InvalidInput("u and u_min must be positive")
        if not self.theta_rho > 1:
            raise InvalidInput("theta_rho must exceed 1")
        if not 0 < self.theta_u < 1:
            raise InvalidInput("theta_u must lie in (0, 1)")

    def advance(self, feasible: bool) -> "PenaltyState":
        """Outer-loop update: escalate rho unless feasible, shrink u toward its floor."""
        rho = self.rho if feasible else self.theta_rho * self.rho
        return replace(self, rho=rho, u=max(self.u_min, self.theta_u * self.u))


def smoothed_max(x, u):
    """Linear-quadratic smoothing of ``max(0, x)`` with width ``u``."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= u, 0.5 * x * x / u, x - 0.5 * u)
    out = np.where(x <= 0, 0.0, out)
    return out if out.ndim else float(out)


def smoothed_max_derivative(x, u):
    x = np.asarray(x, dtype=float)
    out = np.clip(x / u, 0.0, 1.0)
    return out if out.ndim else float(out)


def _spacing_pairs(array: AntennaArray):
    """Index pairs ``(i, j)`` of transmit antennas on the same chain, ordered by (m, n, n')."""
    n = array.per_chain
    local_i, local_j = np.triu_indices(n, k=1)
    base = np.repeat(np.arange(array.num_chains) * n, local_i.size)
    return base + np.tile(local_i, array.num_chains), base + np.tile(local_j, array.num_chains)


def spacing_values(layout: SwanLayout, array: AntennaArray, psi_tilde) -> np.ndarray:
    i, j = _spacing_pairs(array)
    x = array.tx_positions(psi_tilde)
    return 0.5 * layout.wavelength - np.abs(x[i] - x[j])


def constraint_values(layout: SwanLayout, scenario: Scenario, point: ProductPoint,
                      array: AntennaArray = None) -> np.ndarray:
    """Rate constraints (CU order) followed by spacing constraints."""
    array = swan_array(layout) if array is None else array
    fields = compute_fields(layout, scenario, array, point.psi_tilde, point.phi_tilde)
    gamma, *_ = sinr_all(fields.Vc, point.W, scenario.noise_comm)
    return np.concatenate([scenario.rate_thresholds - rate(gamma),
                           spacing_values(layout, array, point.psi_tilde)])


@dataclass
class PenaltyEvaluation:
    value: float
    crlb: float
    constraints: np.ndarray
    gradient: EuclideanGradient = None

    @property
    def singular(self) -> bool:
        return self.value >= SENTINEL

    @property
    def max_violation(self) -> float:
        return float(self.constraints.max()) if self.constraints.size else -np.inf


class PenalizedProblem:
    """Penalized objective bound to one layout, scenario, antenna array and penalty state.

    ``freeze_positions`` zeroes the latent-position gradient so the solver
    moves on the beamformer alone; ``freeze_W`` does the same for ``W``.
    """

    def __init__(self, layout: SwanLayout, scenario: Scenario, state: PenaltyState,
                 array: AntennaArray = None, freeze_positions: bool = False, freeze_W: bool = False):
        self.layout = layout
        self.scenario = scenario
        self.state = state
        self.array = swan_array(layout) if array is None else array
        self.freeze_positions = freeze_positions or not (self.array.tx_movable or self.array.rx_movable)
        self.freeze_W = freeze_W
        self._pairs = _spacing_pairs(self.array)

    def with_state(self, state: PenaltyState) -> "PenalizedProblem":
        out = PenalizedProblem.__new__(PenalizedProblem)
        out.__dict__.update(self.__dict__)
        out.state = state
        return out

    def evaluate(self, point: ProductPoint, gradient: bool = True) -> PenaltyEvaluation:
        sc, arr, st = self.scenario, self.array, self.state
        positions = gradient and not self.freeze_positions
        fields = compute_fields(self.layout, sc, arr, point.psi_tilde, point.phi_tilde,
                                with_position_terms=positions)
        W = point.W
        gamma, *_ = sinr_all(fields.Vc, W, sc.noise_comm)
        i, j = self._pairs
        x = arr.tx_positions(point.psi_tilde)
        diff = x[i] - x[j]
        h = np.concatenate([sc.rate_thresholds - rate(gamma), 0.5 * self.layout.wavelength - np.abs(diff)])
        penalty = st.rho * float(np.sum(smoothed_max(h, st.u))) if h.size else 0.0
        try:
            if gradient:
                f, g_W, g_psi, g_phi = crlb_value_and_gradient(fields, W, sc, arr, point.psi_tilde,
                                                               point.phi_tilde, positions=positions)
            else:
                ed = EchoDerivatives.from_fields(fields, sc.rcs)
                f = schur_parts(*fim_blocks(ed, W, sc.samples, sc.noise_sense))[3]
        except SingularFim:
            return PenaltyEvaluation(SENTINEL, np.inf, h)
        out = PenaltyEvaluation(f + penalty, f, h)
        if not gradient:
            return out
        if st.rho > 0 and h.size:
            dP = st.rho * smoothed_max_derivative(h, st.u)
            kc = sc.num_cus
            if np.any(dP[:kc] > 0):
                rW, rpsi = weighted_rate_gradient(fields, W, sc.noise_comm, -dP[:kc], arr,
                                                  point.psi_tilde, positions=positions)
                g_W = g_W + rW
                g_psi = g_psi + rpsi
            ds = dP[kc:]
            if positions and np.any(ds > 0):
                # d h / d x_i = -sign(x_i - x_j), d h / d x_j = +sign(x_i - x_j)
                c = ds * np.sign(diff)
                gx = np.zeros(arr.num_tx)
                np.add.at(gx, i, -c)
                np.add.at(gx, j, c)
                g_psi = g_psi + gx * arr.tx_chain_factor(point.psi_tilde)
        if self.freeze_positions:
            g_psi = np.zeros_like(point.psi_tilde)
            g_phi = np.zeros_like(point.phi_tilde)
        if self.freeze_W:
            g_W = np.zeros_like(W)
        out.gradient = EuclideanGradient(g_W, g_psi, g_phi)
        return out

    def value(self, point: ProductPoint) -> float:
        return self.evaluate(point, gradient=False).value

    def gradient(self, point: ProductPoint) -> EuclideanGradient:
        ev = self.evaluate(point)
        if ev.gradient is None:
            raise SingularFim("gradient undefined where the FIM is singular")
        return ev.gradient


def penalized_objective(layout: SwanLayout, scenario: Scenario, point: ProductPoint, ps: PenaltyState,
                        array: AntennaArray = None) -> float:
    return PenalizedProblem(layout, scenario, ps, array).value(point)


def penalized_gradient(layout: SwanLayout, scenario: Scenario, point: ProductPoint, ps: PenaltyState,
                       array: AntennaArray = None) -> EuclideanGradient:
    return PenalizedProblem(layout, scenario, ps, array).gradient(point)
