"""Limited-memory Riemannian BFGS on the product manifold.

Curvature pairs are kept as rows of two stacked float arrays so that
transporting the whole memory to a new base point is a single projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateStep, InvalidInput, LineSearchFailure, PreconditionError
from .manifold import ProductPoint, TangentVector, inner, retract, riemannian_gradient, transport, transport_many
from .geometry import clamp_latent
from .penalty import SENTINEL

CAUTIOUS_FACTOR = 1e-4


@dataclass
class MemoryEntry:
    s: TangentVector
    y: TangentVector
    delta: float

    @classmethod
    def from_pair(cls, s: TangentVector, y: TangentVector) -> "MemoryEntry":
        sy = inner(s, y)
        return cls(s, y, 1.0 / sy if sy else np.inf)


class MemoryBuffer:
    """FIFO store of at most ``capacity`` curvature pairs, oldest first."""

    def __init__(self, capacity: int, dims: tuple, base: ProductPoint = None):
        if int(capacity) != capacity or capacity < 1:
            raise InvalidInput("memory capacity must be a positive integer")
        self.capacity = int(capacity)
        self.dims = dims
        self.base = base
        n = 2 * dims[0] * dims[1] + dims[2] + dims[3]
        self._s = np.empty((0, n))
        self._y = np.empty((0, n))
        self._sy = np.empty(0)

    def __len__(self) -> int:
        return self._sy.size

    @property
    def entries(self) -> list:
        return [MemoryEntry(TangentVector(s.copy(), self.dims), TangentVector(y.copy(), self.dims), 1.0 / sy)
                for s, y, sy in zip(self._s, self._y, self._sy)]

    def clear(self) -> None:
        self._s = self._s[:0]
        self._y = self._y[:0]
        self._sy = self._sy[:0]

    def push(self, entry: MemoryEntry) -> None:
        start = max(0, len(self) + 1 - self.capacity)
        self._s = np.vstack([self._s[start:], entry.s.data])
        self._y = np.vstack([self._y[start:], entry.y.data])
        self._sy = np.append(self._sy[start:], 1.0 / entry.delta)

    def transport_to(self, base: ProductPoint) -> None:
        """Project every stored pair onto the tangent space at ``base`` and drop pairs that lost curvature."""
        if len(self):
            transport_many(base, self._s)
            transport_many(base, self._y)
            self._sy = np.einsum("ij,ij->i", self._s, self._y)
            ok = self._sy > 0
            if not ok.all():
                self._s, self._y, self._sy = self._s[ok], self._y[ok], self._sy[ok]
        self.base = base


def two_loop_direction(grad: TangentVector, buf: MemoryBuffer) -> TangentVector:
    """Limited-memory quasi-Newton direction ``-H grad`` (identity initial operator, scaled by the newest pair)."""
    p = grad.data.copy()
    m = len(buf)
    if m == 0:
        return TangentVector(-p, grad.dims)
    S, Y, sy = buf._s, buf._y, buf._sy
    rho = np.empty(m)
    for i in range(m - 1, -1, -1):
        rho[i] = (S[i] @ p) / sy[i]
        p -= rho[i] * Y[i]
    p *= sy[-1] / (Y[-1] @ Y[-1])
    for i in range(m):
        beta = (Y[i] @ p) / sy[i]
        p += (rho[i] - beta) * S[i]
    return TangentVector(-p, grad.dims)


def cautious_check(s: TangentVector, y: TangentVector, grad_norm: float) -> bool:
    return inner(s, y) >= CAUTIOUS_FACTOR * inner(s, s) * grad_norm


def advance_memory(buf: MemoryBuffer, new_base: ProductPoint, entry: MemoryEntry = None,
                   grad_norm: float = None) -> MemoryBuffer:
    """Transport the memory to ``new_base`` and append ``entry`` if it passes the cautious test.

    With ``grad_norm=None`` the entry is stored unconditionally (it must still
    have positive curvature).
    """
    buf.transport_to(new_base)
    if entry is not None:
        sy = inner(entry.s, entry.y)
        passes = sy > 0 and (grad_norm is None or cautious_check(entry.s, entry.y, grad_norm))
        if passes:
            buf.push(MemoryEntry(entry.s, entry.y, 1.0 / sy))
    return buf


@dataclass
class LineSearchResult:
    step: float
    point: ProductPoint
    value: float
    payload: object
    backtracks: int


def _value(result):
    if isinstance(result, tuple):
        return result
    return getattr(result, "value", result), result


def clamped_retract(base: ProductPoint, step: float, d: TangentVector) -> ProductPoint:
    out = retract(base, step, d)
    return ProductPoint(out.W, clamp_latent(out.psi_tilde), clamp_latent(out.phi_tilde))


def armijo_search(objective, base: ProductPoint, d: TangentVector, grad: TangentVector,
                  sigma: float = 1e-4, gamma: float = 0.5, tau_init: float = 1.0, f0: float = None,
                  max_backtracks: int = 60, retraction=clamped_retract) -> LineSearchResult:
    """Backtracking search for the Armijo sufficient-decrease condition along ``d``.

    ``objective(point)`` may return a float, a ``(value, payload)`` tuple or an
    object with a ``value`` attribute.  Values at or above the singular-FIM
    sentinel are treated as infinite.
    """
    if not (0 < sigma < 1 and 0 < gamma < 1):
        raise InvalidInput("sigma and gamma must lie in (0, 1)")
    slope = inner(grad, d)
    if not slope < 0:
        raise PreconditionError(f"not a descent direction (slope {slope:.3e})")
    if f0 is None:
        f0 = _value(objective(base))[0]
    step = tau_init
    for n in range(max_backtracks + 1):
        try:
            trial = retraction(base, step, d)
        except DegenerateStep:
            step *= gamma
            continue
        value, payload = _value(objective(trial))
        if np.isfinite(value) and value < SENTINEL and value <= f0 + sigma * step * slope:
            return LineSearchResult(step, trial, float(value), payload, n)
        step *= gamma
    raise LineSearchFailure(f"no sufficient decrease after {max_backtracks} backtracks")


@dataclass
class InnerOptions:
    memory: int = 30
    max_iters: int = 500
    tol: float = 1e-6
    sigma: float = 1e-4
    gamma: float = 0.5
    tau_init: float = 1.0
    max_backtracks: int = 60


@dataclass
class InnerResult:
    point: ProductPoint
    evaluation: object
    iterations: int
    trace: list = field(default_factory=list)
    stopped_by: str = "tolerance"


def _riemannian(point: ProductPoint, evaluation) -> TangentVector:
    return riemannian_gradient(point, evaluation.gradient)


def minimize(evaluate, start: ProductPoint, options: InnerOptions = None, memory: MemoryBuffer = None,
             start_evaluation=None) -> InnerResult:
    """Run the inner quasi-Newton loop from ``start``.

    ``evaluate(point, gradient)`` returns an object with ``value`` and
    ``gradient`` (a Euclidean gradient, ``None`` when undefined).  ``memory``
    is updated in place so that a caller can carry curvature pairs across
    calls.  ``trace`` lists the objective at every accepted iterate, starting
    with ``start``.
    """
    opt = options or InnerOptions()
    x = start
    ev = start_evaluation if start_evaluation is not None else evaluate(x, True)
    if memory is None:
        memory = MemoryBuffer(opt.memory, x.dims, x)
    memory.transport_to(x)
    trace = [ev.value]
    if ev.gradient is None:
        return InnerResult(x, ev, 0, trace, "singular")
    grad = _riemannian(x, ev)
    tau = opt.tau_init

    def with_gradient(p):
        # trial points are evaluated with gradients: the first trial is usually accepted
        return evaluate(p, True)

    for it in range(1, opt.max_iters + 1):
        gnorm = grad.norm()
        if gnorm == 0.0:
            return InnerResult(x, ev, it - 1, trace, "stationary")
        d = two_loop_direction(grad, memory)
        if not inner(grad, d) < 0:
            memory.clear()
            d = -grad
        # Quasi-Newton directions are already scaled by the newest pair, so the
        # warm start only governs steepest-descent steps.
        start = tau if len(memory) == 0 else opt.tau_init
        try:
            ls = armijo_search(with_gradient, x, d, grad, opt.sigma, opt.gamma, start, ev.value, opt.max_backtracks)
        except LineSearchFailure:
            return InnerResult(x, ev, it - 1, trace, "line-search")
        x_new, ev_new = ls.point, ls.payload
        if ev_new.gradient is None:
            return InnerResult(x_new, ev_new, it, trace + [ev_new.value], "singular")
        grad_new = _riemannian(x_new, ev_new)
        s = transport(x_new, ls.step * d)
        y = grad_new - transport(x_new, grad)
        advance_memory(memory, x_new, MemoryEntry.from_pair(s, y), gnorm)
        tau = min(opt.tau_init, ls.step / opt.gamma)
        trace.append(ev_new.value)
        moved = x_new.distance(x)
        x, ev, grad = x_new, ev_new, grad_new
        if moved < opt.tol:
            return InnerResult(x, ev, it, trace, "tolerance")
    return InnerResult(x, ev, opt.max_iters, trace, "max-iters")
