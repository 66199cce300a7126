"""Outer exact-penalty loop around the inner quasi-Newton solver, plus the ZF start."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import AntennaArray, compute_fields, swan_array
from .errors import InvalidInput
from .geometry import Scenario, SwanLayout, uniform_latent
from .manifold import ProductPoint
from .metrics import CrlbReport, evaluate
from .penalty import PenalizedProblem, PenaltyState
from .rbfgs import InnerOptions, MemoryBuffer, minimize

FEASIBILITY_TOL = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    rho0: float = 1.0
    theta_rho: float = 3.0
    u0: float = 0.1
    theta_u: float = 0.5
    u_min: float = 1e-6
    tau: float = 1e-6
    inner_max: int = 500
    outer_max: int = 60
    memory: int = 30
    armijo_sigma: float = 1e-4
    armijo_gamma: float = 0.5
    armijo_tau: float = 1.0
    keep_memory: bool = True  # carry curvature pairs from one outer pass to the next

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidInput("rho0 must be positive")
        if not self.tau > 0:
            raise InvalidInput("tau must be positive")
        if self.memory < 1 or self.inner_max < 1 or self.outer_max < 1:
            raise InvalidInput("memory, inner_max and outer_max must be at least 1")
        PenaltyState(self.rho0, self.u0, self.u_min, self.theta_rho, self.theta_u)

    def initial_state(self) -> PenaltyState:
        return PenaltyState(self.rho0, self.u0, self.u_min, self.theta_rho, self.theta_u)

    def inner_options(self) -> InnerOptions:
        return InnerOptions(memory=self.memory, max_iters=self.inner_max, tol=self.tau,
                            sigma=self.armijo_sigma, gamma=self.armijo_gamma, tau_init=self.armijo_tau)


@dataclass
class OuterRecord:
    g: float
    crlb: float
    max_violation: float
    rho: float
    u: float


@dataclass
class SolveResult:
    point: ProductPoint
    report: CrlbReport
    feasible: bool
    outer_iters: int
    inner_iters_total: int
    trace: list = field(default_factory=list)
    inner_traces: list = field(default_factory=list)
    array: AntennaArray = None


def zero_forcing(Vc: np.ndarray, num_targets: int, power: float):
    """ZF communication columns with zero sensing columns; returns ``(W, used_fallback)``.

    ``Vc`` holds the conjugated CU channels row-wise, so ``H = Vc^H``.  A
    rank-deficient ``H^H H`` falls back to matched-filter columns.
    """
    H = Vc.conj().T
    M, kc = H.shape
    W = np.zeros((M, kc + num_targets), dtype=complex)
    if kc == 0:
        W[:, :] = 1.0
        return W * np.sqrt(power / np.vdot(W, W).real), True
    gram = H.conj().T @ H
    fallback = kc > M or np.linalg.cond(gram) > 1e12
    if fallback:
        Wc = H.copy()
    else:
        Wc = H @ np.linalg.inv(gram)
    W[:, :kc] = Wc * np.sqrt(power / np.vdot(Wc, Wc).real)
    return W, fallback


def initial_latents(array: AntennaArray):
    """Uniform placement along each chain's span for the transmit side, span midpoint for the receive side."""
    psi = np.tile(uniform_latent(array.per_chain), array.num_chains)
    return psi, np.zeros(array.rx_offset.size)


def default_initialization(layout: SwanLayout, scenario: Scenario, array: AntennaArray = None) -> ProductPoint:
    array = swan_array(layout) if array is None else array
    psi, phi = initial_latents(array)
    fields = compute_fields(layout, scenario, array, psi, phi)
    W, _ = zero_forcing(fields.Vc, scenario.num_targets, scenario.power_budget)
    return ProductPoint(W, psi, phi)


def solve(layout: SwanLayout, scenario: Scenario, init: ProductPoint = None, cfg: SolverConfig = None,
          array: AntennaArray = None, freeze_positions: bool = False) -> SolveResult:
    """Minimize the CRLB subject to the rate and spacing constraints.

    Never raises on non-convergence: after ``outer_max`` passes the best
    feasible iterate (or the last one if none was feasible) is returned with
    an honest ``feasible`` flag.
    """
    cfg = cfg or SolverConfig()
    array = swan_array(layout) if array is None else array
    x_out = default_initialization(layout, scenario, array) if init is None else init
    problem = PenalizedProblem(layout, scenario, cfg.initial_state(), array, freeze_positions=freeze_positions)
    options = cfg.inner_options()
    memory = MemoryBuffer(cfg.memory, x_out.dims, x_out)
    trace, inner_traces = [], []
    inner_total = 0
    best = None
    for outer in range(1, cfg.outer_max + 1):
        if not cfg.keep_memory:
            memory.clear()
        res = minimize(problem.evaluate, x_out, options, memory)
        inner_total += res.iterations
        inner_traces.append(res.trace)
        ev = res.evaluation
        feasible = ev.max_violation <= FEASIBILITY_TOL and np.isfinite(ev.crlb)
        st = problem.state
        trace.append(OuterRecord(ev.value, ev.crlb, ev.max_violation, st.rho, st.u))
        if feasible and (best is None or ev.crlb <= best[1]):
            best = (res.point, ev.crlb)
        moved = res.point.distance(x_out)
        x_out = res.point
        state = st.advance(feasible)
        problem = problem.with_state(state)
        if moved < cfg.tau and feasible and state.u <= state.u_min:
            return _finish(layout, scenario, array, x_out, True, outer, inner_total, trace, inner_traces)
    point, feasible = (best[0], True) if best is not None else (x_out, False)
    return _finish(layout, scenario, array, point, feasible, cfg.outer_max, inner_total, trace, inner_traces)


def _finish(layout, scenario, array, point, feasible, outer, inner, trace, inner_traces) -> SolveResult:
    report = evaluate(layout, scenario, point, array)
    return SolveResult(point, report, feasible, outer, inner, trace, inner_traces, array)
