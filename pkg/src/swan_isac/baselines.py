"""Comparison schemes expressed as antenna arrays for the shared solver.

Every scheme differs from the proposed design only in where its antennas sit
and whether they can move; metrics, gradients and the solver are shared.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channels import AntennaArray, ChannelSet, array_channels, fixed_swan_array, swan_array
from .errors import InvalidInput
from .geometry import Scenario, SwanLayout, rsw_feeds, tsw_feeds
from .solver import SolveResult, SolverConfig, default_initialization, solve


class Scheme(str, Enum):
    PROPOSED = "Proposed"
    MIMO = "MIMO"
    MPASS_DIS = "MPASS-Dis"
    MPASS_CEN = "MPASS-Cen"
    MIDPOINT_CU = "Midpoint-CU"
    MIDPOINT_TA = "Midpoint-TA"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        for s in cls:
            if s.value.lower() == name.strip().lower():
                return s
        raise InvalidInput(f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}")


ALL_SCHEMES = tuple(Scheme)


@dataclass(frozen=True)
class SchemeSpec:
    """A scheme plus, optionally, frozen transmit/receive positions in meters.

    Frozen positions only apply to the segmented-waveguide schemes; they pin
    the PAs and turn the solve into a beamforming-only problem.
    """

    kind: Scheme
    psi: np.ndarray = None
    phi: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheme.parse(self.kind) if isinstance(self.kind, str) else self.kind)
        if (self.psi is None) != (self.phi is None):
            raise InvalidInput("psi and phi must be frozen together")

    @property
    def name(self) -> str:
        return self.kind.value


def mimo_array(layout: SwanLayout) -> AntennaArray:
    """N free-space antennas at half-wavelength spacing from each TSW feed; one antenna at each RSW feed."""
    M, N = layout.M, layout.N
    tx_feed = np.repeat(tsw_feeds(layout), N)
    tx = tx_feed + np.tile(np.arange(N), M) * layout.wavelength / 2
    rx = rsw_feeds(layout)
    return AntennaArray(
        name="mimo", num_chains=M, per_chain=N,
        tx_y=np.zeros(M * N), tx_feed=tx_feed, tx_offset=tx, tx_span=np.zeros(M * N), tx_guided=False,
        rx_y=np.zeros(M), rx_feed=rx, rx_offset=rx.copy(), rx_span=np.zeros(M), rx_guided=False,
    )


def mpass_offsets(layout: SwanLayout, mode: str) -> tuple:
    """``(tx_y, rx_y)`` of the M transmit and M receive waveguides, interleaved across y."""
    M = layout.M
    mode = mode.strip().lower()
    if mode == "dis":
        y = np.linspace(-layout.area_y / 2, layout.area_y / 2, 2 * M)
    elif mode == "cen":
        y = (np.arange(2 * M) - M) * layout.wavelength / 2
    else:
        raise InvalidInput(f"MPASS mode must be 'dis' or 'cen', got {mode!r}")
    return y[0::2], y[1::2]


def mpass_array(layout: SwanLayout, mode: str) -> AntennaArray:
    """Full-length waveguides fed at x = 0; PAs slide over ``[0, D_x]``."""
    M, N = layout.M, layout.N
    ty, ry = mpass_offsets(layout, mode)
    D = layout.area_x
    return AntennaArray(
        name=f"mpass-{mode.lower()}", num_chains=M, per_chain=N,
        tx_y=np.repeat(ty, N), tx_feed=np.zeros(M * N), tx_offset=np.zeros(M * N),
        tx_span=np.full(M * N, D), tx_guided=True,
        rx_y=ry, rx_feed=np.zeros(M), rx_offset=np.zeros(M), rx_span=np.full(M, D), rx_guided=True,
    )


def mimo_channels(layout: SwanLayout, scenario: Scenario) -> ChannelSet:
    arr = mimo_array(layout)
    return array_channels(layout, scenario, arr, np.zeros(arr.num_tx), np.zeros(layout.M))


def mpass_channels(layout: SwanLayout, scenario: Scenario, mode: str, pa_x, rx_x=None) -> ChannelSet:
    """Channels with PAs pinned at ``pa_x`` (chain-major) and receive PAs at ``rx_x`` (default ``D_x/2``)."""
    arr = mpass_array(layout, mode)
    pa_x = np.asarray(pa_x, dtype=float).reshape(-1)
    rx_x = np.full(layout.M, layout.area_x / 2) if rx_x is None else np.asarray(rx_x, dtype=float).reshape(-1)
    if pa_x.shape != (arr.num_tx,) or rx_x.shape != (layout.M,):
        raise InvalidInput("pa_x must have M*N entries and rx_x M entries")
    for x in (pa_x, rx_x):
        if np.any(x < 0) or np.any(x > layout.area_x) or not np.all(np.isfinite(x)):
            raise InvalidInput("MPASS PA positions must lie in [0, D_x]")
    pinned = AntennaArray(
        name=arr.name, num_chains=arr.num_chains, per_chain=arr.per_chain,
        tx_y=arr.tx_y, tx_feed=arr.tx_feed, tx_offset=pa_x, tx_span=np.zeros_like(pa_x), tx_guided=True,
        rx_y=arr.rx_y, rx_feed=arr.rx_feed, rx_offset=rx_x, rx_span=np.zeros_like(rx_x), rx_guided=True,
    )
    return array_channels(layout, scenario, pinned, np.zeros(pa_x.size), np.zeros(layout.M))


def midpoint_positions(layout: SwanLayout, scenario: Scenario, anchor: str):
    """PA positions (meters) pulled toward the x-centroid of the CUs or of the targets."""
    anchor = anchor.strip().upper()
    if anchor == "CU":
        pts = scenario.cu_positions
    elif anchor in ("TA", "TARGET"):
        pts = scenario.target_positions
    else:
        raise InvalidInput(f"anchor must be 'CU' or 'TA', got {anchor!r}")
    if len(pts) == 0:
        raise InvalidInput("midpoint placement needs at least one anchor point")
    x_mid = float(pts[:, 0].mean())
    N, L, half = layout.N, layout.L, layout.wavelength / 2
    margin = half * (N - 1) / 2
    offsets = (np.arange(N) - (N - 1) / 2) * half
    feeds = tsw_feeds(layout)
    centers = np.clip(x_mid, feeds + margin, feeds + L - margin)
    psi = (centers[:, None] + offsets[None, :]).reshape(-1)
    rf = rsw_feeds(layout)
    phi = np.clip(x_mid, rf, rf + L)
    return psi, phi


def scheme_array(layout: SwanLayout, scenario: Scenario, spec: SchemeSpec) -> AntennaArray:
    kind = spec.kind
    if spec.psi is not None:
        return fixed_swan_array(layout, spec.psi, spec.phi, name=spec.name)
    if kind is Scheme.PROPOSED:
        return swan_array(layout)
    if kind is Scheme.MIMO:
        return mimo_array(layout)
    if kind is Scheme.MPASS_DIS:
        return mpass_array(layout, "dis")
    if kind is Scheme.MPASS_CEN:
        return mpass_array(layout, "cen")
    anchor = "CU" if kind is Scheme.MIDPOINT_CU else "TA"
    psi, phi = midpoint_positions(layout, scenario, anchor)
    return fixed_swan_array(layout, psi, phi, name=spec.name)


def run_scheme(layout: SwanLayout, scenario: Scenario, spec, cfg: SolverConfig = None) -> SolveResult:
    """Solve one scheme; fixed-antenna schemes optimize the beamformer only."""
    spec = spec if isinstance(spec, SchemeSpec) else SchemeSpec(spec)
    array = scheme_array(layout, scenario, spec)
    return solve(layout, scenario, default_initialization(layout, scenario, array), cfg, array=array)
