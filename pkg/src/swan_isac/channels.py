"""Wireless and in-waveguide channel models.

Two layers live here.  The scalar functions (``wireless_coeff``,
``tsw_guide_coeff``, ``channel_to_point`` ...) evaluate the channel formulas
one term at a time and are meant for clarity and for cross-checking.  The
vectorised engine (:class:`AntennaArray` and :func:`compute_fields`) evaluates
every channel, and every derivative the optimizer needs, in one pass.  All
schemes (segmented waveguides, conventional MIMO, multi-waveguide PASS) are
described by an :class:`AntennaArray` so that the metric and gradient code is
shared between them.

Phase convention: the BS-side channel entries carry ``exp(+j(k_c r + 2*pi*D/lambda_g))``,
i.e. they are the complex conjugate of (guide coefficient) x (wireless
coefficient).  The engine works with that conjugate directly and calls it the
*element response* ``s``; ``h = conj(sum of s over the PAs of a chain)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DegenerateGeometry, SegmentViolation
from .geometry import (
    Scenario,
    SwanLayout,
    rsw_feed_position,
    rsw_feeds,
    tsw_feed_position,
    tsw_feeds,
)

_LN10_OVER_20 = np.log(10.0) / 20.0


@dataclass(frozen=True)
class ChannelSet:
    """BS->CU (``h_c``), BS->target (``h_t``) and target->BS receive (``h_r``) channels.

    Each array has one row per CU or target and ``M`` columns.
    """

    h_c: np.ndarray
    h_t: np.ndarray
    h_r: np.ndarray


# --------------------------------------------------------------------------
# Scalar reference formulas
# --------------------------------------------------------------------------

def wireless_coeff(pa_position, point, layout: SwanLayout) -> complex:
    """Spherical-wave coefficient ``sqrt(eta) exp(-j k_c r) / r`` between a PA and a ground point."""
    pa = np.asarray(pa_position, dtype=float)
    pt = np.zeros(3)
    pt[: len(point)] = point
    r = float(np.linalg.norm(pt - pa))
    if r == 0.0:
        raise DegenerateGeometry("point coincides with the antenna")
    return np.sqrt(layout.eta) * np.exp(-1j * layout.wavenumber * r) / r


def _guide_coeff(layout: SwanLayout, feed: float, x: float) -> complex:
    delta = x - feed
    slack = 1e-12 * max(layout.L, 1.0)
    if delta < -slack or delta > layout.L + slack:
        raise SegmentViolation(f"position {x!r} is off the segment starting at {feed!r}")
    return 10.0 ** (-layout.attenuation * delta / 20.0) * np.exp(-2j * np.pi * delta / layout.guided_wavelength)


def tsw_guide_coeff(layout: SwanLayout, m: int, psi_entry: float) -> complex:
    """In-waveguide coefficient from the feed of TSW ``m`` to a PA at ``psi_entry``."""
    return _guide_coeff(layout, tsw_feed_position(layout, m)[0], psi_entry)


def rsw_guide_coeff(layout: SwanLayout, m: int, phi_entry: float) -> complex:
    return _guide_coeff(layout, rsw_feed_position(layout, m)[0], phi_entry)


def channel_to_point(layout: SwanLayout, psi, point) -> np.ndarray:
    """BS->point channel through the TPAs, one entry per TSW."""
    psi = np.asarray(psi, dtype=float).reshape(layout.M, layout.N)
    h = np.zeros(layout.M, dtype=complex)
    for m in range(layout.M):
        for n in range(layout.N):
            pa = (psi[m, n], 0.0, layout.d)
            f = tsw_guide_coeff(layout, m + 1, psi[m, n])
            g = wireless_coeff(pa, point, layout)
            h[m] += np.conj(f * g)
    return h


def receive_channel(layout: SwanLayout, phi, target) -> np.ndarray:
    """Target->RPA->feed channel, one entry per RSW."""
    phi = np.asarray(phi, dtype=float).reshape(layout.M)
    h = np.zeros(layout.M, dtype=complex)
    for m in range(layout.M):
        g = wireless_coeff((phi[m], 0.0, layout.d), target, layout)
        h[m] = np.conj(g * rsw_guide_coeff(layout, m + 1, phi[m]))
    return h


def assemble_channels(layout: SwanLayout, scenario: Scenario, psi, phi) -> ChannelSet:
    M = layout.M
    h_c = np.array([channel_to_point(layout, psi, p) for p in scenario.cu_positions]).reshape(-1, M)
    h_t = np.array([channel_to_point(layout, psi, p) for p in scenario.target_positions]).reshape(-1, M)
    h_r = np.array([receive_channel(layout, phi, p) for p in scenario.target_positions]).reshape(-1, M)
    return ChannelSet(h_c=h_c, h_t=h_t, h_r=h_r)


# --------------------------------------------------------------------------
# Vectorised engine
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AntennaArray:
    """Placement rules for the transmit and receive antennas of one scheme.

    Transmit antennas are stored chain-major (``per_chain`` antennas for each
    of the ``num_chains`` RF chains).  The x-coordinate of antenna ``i`` is
    ``offset[i] + span[i] * sig(latent[i])``; a zero span pins it at
    ``offset[i]``.  Guided antennas pick up ``10^(-kappa*D/20)`` attenuation
    and ``2*pi*D/lambda_g`` phase over the distance ``D`` from their feed.
    """

    name: str
    num_chains: int
    per_chain: int
    tx_y: np.ndarray
    tx_feed: np.ndarray
    tx_offset: np.ndarray
    tx_span: np.ndarray
    tx_guided: bool
    rx_y: np.ndarray
    rx_feed: np.ndarray
    rx_offset: np.ndarray
    rx_span: np.ndarray
    rx_guided: bool

    @property
    def num_tx(self) -> int:
        return self.num_chains * self.per_chain

    @property
    def tx_movable(self) -> bool:
        return bool(np.any(self.tx_span > 0))

    @property
    def rx_movable(self) -> bool:
        return bool(np.any(self.rx_span > 0))

    def tx_positions(self, latent) -> np.ndarray:
        return self.tx_offset + self.tx_span * expit(latent)

    def rx_positions(self, latent) -> np.ndarray:
        return self.rx_offset + self.rx_span * expit(latent)

    def tx_chain_factor(self, latent) -> np.ndarray:
        s = expit(latent)
        return self.tx_span * s * (1.0 - s)

    def rx_chain_factor(self, latent) -> np.ndarray:
        s = expit(latent)
        return self.rx_span * s * (1.0 - s)


def swan_array(layout: SwanLayout) -> AntennaArray:
    """Segmented waveguides: N movable TPAs per TSW, one movable RPA per RSW."""
    M, N = layout.M, layout.N
    tx_feed = np.repeat(tsw_feeds(layout), N)
    rx_feed = rsw_feeds(layout)
    return AntennaArray(
        name="swan", num_chains=M, per_chain=N,
        tx_y=np.zeros(M * N), tx_feed=tx_feed, tx_offset=tx_feed.copy(),
        tx_span=np.full(M * N, layout.L), tx_guided=True,
        rx_y=np.zeros(M), rx_feed=rx_feed, rx_offset=rx_feed.copy(),
        rx_span=np.full(M, layout.L), rx_guided=True,
    )


def fixed_swan_array(layout: SwanLayout, psi, phi, name: str = "swan-fixed") -> AntennaArray:
    """Segmented waveguides with PAs pinned at the given positions (meters)."""
    base = swan_array(layout)
    psi = np.asarray(psi, dtype=float).reshape(-1)
    phi = np.asarray(phi, dtype=float).reshape(-1)
    return AntennaArray(
        name=name, num_chains=base.num_chains, per_chain=base.per_chain,
        tx_y=base.tx_y, tx_feed=base.tx_feed, tx_offset=psi.copy(), tx_span=np.zeros_like(psi),
        tx_guided=True,
        rx_y=base.rx_y, rx_feed=base.rx_feed, rx_offset=phi.copy(), rx_span=np.zeros_like(phi),
        rx_guided=True,
    )


@dataclass
class ElementTerms:
    """Element responses of a set of antennas seen from a set of ground points.

    Arrays have shape (points, antennas).  ``s`` is the element response,
    ``sx``/``sy`` its derivatives in the point coordinates, ``sa`` the
    derivative in the antenna x-position and ``sxa``/``sya`` the mixed
    second derivatives.  Derivative entries are ``None`` when not requested.
    """

    s: np.ndarray
    sx: np.ndarray = None
    sy: np.ndarray = None
    sa: np.ndarray = None
    sxa: np.ndarray = None
    sya: np.ndarray = None


def element_terms(layout: SwanLayout, points: np.ndarray, ax, ay, feed, guided: bool,
                  point_derivs: bool = False, antenna_derivs: bool = False) -> ElementTerms:
    k = layout.wavenumber
    dx = points[:, :1] - ax[None, :]
    dy = points[:, 1:2] - ay[None, :]
    r2 = dx * dx + dy * dy + layout.d ** 2
    r = np.sqrt(r2)
    inv_r = 1.0 / r
    if guided:
        delta = ax - feed
        kg = 2.0 * np.pi / layout.guided_wavelength
        eps = np.sqrt(layout.eta) * np.exp(-layout.attenuation * _LN10_OVER_20 * delta - 1j * kg * delta)
        gam = -layout.attenuation * _LN10_OVER_20 - 1j * kg
    else:
        eps = np.full(ax.shape, np.sqrt(layout.eta), dtype=complex)
        gam = 0.0
    s = eps[None, :] * np.exp(-1j * k * r) * inv_r
    out = ElementTerms(s=s)
    if not (point_derivs or antenna_derivs):
        return out
    # d/dr of exp(-jkr)/r is -(jk + 1/r) times the same function.
    c1 = -(1j * k + inv_r)
    ex = dx * inv_r
    ey = dy * inv_r
    s1 = s * c1  # s * q'/q
    if point_derivs:
        out.sx = s1 * ex
        out.sy = s1 * ey
    if antenna_derivs:
        c2 = c1 * c1 + inv_r * inv_r  # q''/q
        s2 = s * c2
        out.sa = gam * s - s1 * ex
        out.sxa = gam * s1 * ex - s2 * ex * ex - s1 * (1.0 - ex * ex) * inv_r
        out.sya = gam * s1 * ey - s2 * ex * ey + s1 * ey * ex * inv_r
    return out


def chain_sum(values: np.ndarray, array: AntennaArray) -> np.ndarray:
    """Sum element responses over the antennas of each RF chain."""
    P = values.shape[0]
    return values.reshape(P, array.num_chains, array.per_chain).sum(axis=2)


@dataclass
class Fields:
    """Conjugate-domain channel quantities at one configuration.

    ``Vc = conj(h_c)``, ``V = conj(h_t)``, ``U = conj(h_r)`` plus their
    derivatives in target coordinates (``Vx``, ``Vy``, ``Ux``, ``Uy``) and,
    when requested, the per-antenna element terms needed for position gradients.
    """

    Vc: np.ndarray
    V: np.ndarray
    Vx: np.ndarray
    Vy: np.ndarray
    U: np.ndarray
    Ux: np.ndarray
    Uy: np.ndarray
    cu_terms: ElementTerms = None
    tx_terms: ElementTerms = None
    rx_terms: ElementTerms = None

    def channel_set(self) -> ChannelSet:
        return ChannelSet(h_c=np.conj(self.Vc), h_t=np.conj(self.V), h_r=np.conj(self.U))


def compute_fields(layout: SwanLayout, scenario: Scenario, array: AntennaArray,
                   psi_tilde, phi_tilde, targets=None, with_position_terms: bool = False) -> Fields:
    """Evaluate every channel (and optional derivative) for one configuration."""
    targets = scenario.target_positions if targets is None else np.asarray(targets, dtype=float).reshape(-1, 2)
    ax = array.tx_positions(psi_tilde)
    rx = array.rx_positions(phi_tilde)
    cu = element_terms(layout, scenario.cu_positions, ax, array.tx_y, array.tx_feed, array.tx_guided,
                       antenna_derivs=with_position_terms)
    tx = element_terms(layout, targets, ax, array.tx_y, array.tx_feed, array.tx_guided,
                       point_derivs=True, antenna_derivs=with_position_terms)
    rr = element_terms(layout, targets, rx, array.rx_y, array.rx_feed, array.rx_guided,
                       point_derivs=True, antenna_derivs=with_position_terms)
    fields = Fields(
        Vc=chain_sum(cu.s, array), V=chain_sum(tx.s, array),
        Vx=chain_sum(tx.sx, array), Vy=chain_sum(tx.sy, array),
        U=rr.s, Ux=rr.sx, Uy=rr.sy,
    )
    if with_position_terms:
        fields.cu_terms, fields.tx_terms, fields.rx_terms = cu, tx, rr
    return fields


def array_channels(layout: SwanLayout, scenario: Scenario, array: AntennaArray, psi_tilde, phi_tilde) -> ChannelSet:
    return compute_fields(layout, scenario, array, psi_tilde, phi_tilde).channel_set()
