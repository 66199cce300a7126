"""Product manifold: complex power sphere x R^{NM} x R^{M}.

The beamformer ``W`` lives on ``{W : ||W||_F^2 = P_t}``; the latent PA
variables are unconstrained.  The metric is the real Euclidean one,
``<a, b> = Re Tr(a_W^H b_W) + a_psi.b_psi + a_phi.b_phi``.

Tangent vectors are backed by one flat float64 buffer (``W`` stored as
interleaved real/imaginary pairs) so that the quasi-Newton memory can stack
them and take inner products with a single dot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateStep, ShapeError


@dataclass(frozen=True)
class ProductPoint:
    W: np.ndarray
    psi_tilde: np.ndarray
    phi_tilde: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", np.ascontiguousarray(self.W, dtype=complex))
        object.__setattr__(self, "psi_tilde", np.ascontiguousarray(self.psi_tilde, dtype=float).reshape(-1))
        object.__setattr__(self, "phi_tilde", np.ascontiguousarray(self.phi_tilde, dtype=float).reshape(-1))
        if self.W.ndim != 2:
            raise ShapeError("W must be a matrix")

    @property
    def dims(self) -> tuple:
        return (self.W.shape[0], self.W.shape[1], self.psi_tilde.size, self.phi_tilde.size)

    @property
    def power(self) -> float:
        return float(np.vdot(self.W, self.W).real)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.reshape(-1).view(float), self.psi_tilde, self.phi_tilde])

    def distance(self, other: "ProductPoint") -> float:
        """Ambient Euclidean distance used by the convergence tests."""
        return float(np.sqrt(np.sum(np.abs(self.W - other.W) ** 2)
                             + np.sum((self.psi_tilde - other.psi_tilde) ** 2)
                             + np.sum((self.phi_tilde - other.phi_tilde) ** 2)))


class TangentVector:
    """A direction ``(z_W, z_psi, z_phi)``; arithmetic acts on the flat buffer."""

    __slots__ = ("data", "dims")

    def __init__(self, data: np.ndarray, dims: tuple):
        self.data = data
        self.dims = dims

    @classmethod
    def from_parts(cls, z_W, z_psi, z_phi) -> "TangentVector":
        z_W = np.asarray(z_W, dtype=complex)
        z_psi = np.asarray(z_psi, dtype=float).reshape(-1)
        z_phi = np.asarray(z_phi, dtype=float).reshape(-1)
        data = np.concatenate([np.ascontiguousarray(z_W).reshape(-1).view(float), z_psi, z_phi])
        return cls(data, (z_W.shape[0], z_W.shape[1], z_psi.size, z_phi.size))

    @classmethod
    def zeros(cls, dims: tuple) -> "TangentVector":
        M, K, npsi, nphi = dims
        return cls(np.zeros(2 * M * K + npsi + nphi), dims)

    @property
    def _nw(self) -> int:
        return 2 * self.dims[0] * self.dims[1]

    @property
    def z_W(self) -> np.ndarray:
        return self.data[: self._nw].view(complex).reshape(self.dims[0], self.dims[1])

    @property
    def z_psi(self) -> np.ndarray:
        return self.data[self._nw: self._nw + self.dims[2]]

    @property
    def z_phi(self) -> np.ndarray:
        return self.data[self._nw + self.dims[2]:]

    def copy(self) -> "TangentVector":
        return TangentVector(self.data.copy(), self.dims)

    def _check(self, other: "TangentVector"):
        if self.dims != other.dims:
            raise ShapeError(f"tangent shapes differ: {self.dims} vs {other.dims}")

    def __add__(self, other):
        self._check(other)
        return TangentVector(self.data + other.data, self.dims)

    def __sub__(self, other):
        self._check(other)
        return TangentVector(self.data - other.data, self.dims)

    def __mul__(self, c):
        return TangentVector(self.data * c, self.dims)

    __rmul__ = __mul__

    def __neg__(self):
        return TangentVector(-self.data, self.dims)

    def norm(self) -> float:
        return float(np.sqrt(self.data @ self.data))

    def __repr__(self):
        return f"TangentVector(dims={self.dims}, norm={self.norm():.3e})"


def inner(a: TangentVector, b: TangentVector) -> float:
    a._check(b)
    return float(a.data @ b.data)


def norm(a: TangentVector) -> float:
    return a.norm()


def _radial_coefficient(W: np.ndarray, z_W: np.ndarray) -> float:
    return float(np.vdot(W, z_W).real / np.vdot(W, W).real)


def transport(base: ProductPoint, v: TangentVector) -> TangentVector:
    """Project ``v`` onto the tangent space at ``base`` (vector transport by projection).

    The W component loses its radial part ``W Re Tr(W^H z_W) / ||W||^2``; the
    Euclidean components pass through unchanged.
    """
    if v.dims != base.dims:
        raise ShapeError(f"tangent shape {v.dims} does not match point {base.dims}")
    out = v.copy()
    zw = out.z_W
    zw -= base.W * _radial_coefficient(base.W, zw)
    return out


def transport_many(base: ProductPoint, rows: np.ndarray) -> None:
    """In-place projection of a stack of flat tangent buffers (one per row)."""
    if rows.shape[0] == 0:
        return
    w = base.W.reshape(-1).view(float)
    nw = w.size
    coef = rows[:, :nw] @ w / (w @ w)
    rows[:, :nw] -= coef[:, None] * w[None, :]


def retract(base: ProductPoint, step: float, d: TangentVector, power: float = None) -> ProductPoint:
    """Move along ``step * d`` and rescale W back onto the power sphere."""
    if d.dims != base.dims:
        raise ShapeError(f"tangent shape {d.dims} does not match point {base.dims}")
    power = base.power if power is None else power
    W = base.W + step * d.z_W
    nrm2 = float(np.vdot(W, W).real)
    if not nrm2 > 0.0 or not np.isfinite(nrm2):
        raise DegenerateStep("beamformer collapsed to zero after the step")
    W = W * np.sqrt(power / nrm2)
    return ProductPoint(W, base.psi_tilde + step * d.z_psi, base.phi_tilde + step * d.z_phi)


def riemannian_gradient(base: ProductPoint, eg) -> TangentVector:
    """Riemannian gradient from a Euclidean gradient.

    ``eg.g_W`` is the conjugate (Wirtinger) gradient, so the real-metric
    gradient of the W block is ``2 * g_W`` before projection.  With that
    scaling ``inner(grad, u)`` is the directional derivative along ``u``.
    """
    gW = 2.0 * np.asarray(eg.g_W, dtype=complex)
    gW = gW - base.W * _radial_coefficient(base.W, gW)
    return TangentVector.from_parts(gW, eg.g_psi, eg.g_phi)


def tangency_residual(base: ProductPoint, v: TangentVector) -> float:
    return abs(float(np.vdot(base.W, v.z_W).real))
