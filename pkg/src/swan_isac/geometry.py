"""Segmented-waveguide layout, scenario description and the sigmoid position maps.

Lengths are in meters, powers in watts and frequencies in Hz throughout the
package.  Index layout for TPA vectors is segment-major: entry ``(m-1)*N + n``
holds PA ``n`` of segment ``m`` (both 1-based in the formulas, 0-based in code).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit, logit

from .errors import InvalidInput, InvalidSegment

SPEED_OF_LIGHT = 3e8

# Latent position variables are clamped to this magnitude after every update so
# that the sigmoid Jacobian never underflows to exactly zero.
LATENT_CLAMP = 40.0


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


@dataclass(frozen=True)
class SwanLayout:
    """Physical constants and geometry of the segmented waveguide system.

    ``M`` transmit segments (TSWs) and ``M`` receive segments (RSWs) of length
    ``L`` alternate along the x axis at height ``d``, so the service area is
    ``2*L*M`` meters long.  Wavelengths, wavenumber and the free-space gain
    factor are derived from ``carrier_freq`` on access and never stored.
    """

    num_segments: int = 10
    tpas_per_segment: int = 4
    segment_length: float = 3.0
    height: float = 3.0
    area_y: float = 40.0
    carrier_freq: float = 28e9
    effective_index: float = 1.4
    attenuation: float = 0.08  # dB per meter of in-waveguide travel

    def __post_init__(self):
        for name in ("num_segments", "tpas_per_segment"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidInput(f"{name} must be a positive integer, got {value!r}")
        for name in ("segment_length", "height", "area_y", "carrier_freq", "effective_index"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidInput(f"{name} must be finite and positive, got {value!r}")
        if not np.isfinite(self.attenuation) or self.attenuation < 0:
            raise InvalidInput(f"attenuation must be finite and >= 0, got {self.attenuation!r}")

    @classmethod
    def for_area(cls, num_segments: int, tpas_per_segment: int, area_x: float = 60.0, **kwargs) -> "SwanLayout":
        """Build a layout whose segments exactly tile ``area_x`` (L = D_x / 2M)."""
        return cls(num_segments=num_segments, tpas_per_segment=tpas_per_segment,
                   segment_length=area_x / (2.0 * num_segments), **kwargs)

    # Short aliases used in the numerical code.
    @property
    def M(self) -> int:
        return self.num_segments

    @property
    def N(self) -> int:
        return self.tpas_per_segment

    @property
    def L(self) -> float:
        return self.segment_length

    @property
    def d(self) -> float:
        return self.height

    @property
    def area_x(self) -> float:
        return 2.0 * self.segment_length * self.num_segments

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def guided_wavelength(self) -> float:
        return self.wavelength / self.effective_index

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def eta(self) -> float:
        return self.wavelength ** 2 / (16.0 * np.pi ** 2)

    def with_(self, **changes) -> "SwanLayout":
        return replace(self, **changes)


def _as_points(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 2))
    arr = arr.reshape(-1, 2)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Scenario:
    """User and target placement plus the link budget of one ISAC instance.

    Positions are ``(x, y)`` pairs on the ground plane ``z = 0``.
    ``position_error`` is the target-position uncertainty ``nu`` used only by
    the experiment harness; the optimizer always works with the positions
    stored here.
    """

    cu_positions: np.ndarray
    target_positions: np.ndarray
    rcs: np.ndarray = None
    noise_comm: float = float(dbm_to_watts(-90.0))
    noise_sense: float = float(dbm_to_watts(-80.0))
    power_budget: float = float(dbm_to_watts(24.0))
    rate_thresholds: np.ndarray = None
    samples: int = 1024
    position_error: float = 0.0

    def __post_init__(self):
        cu = _as_points(self.cu_positions, "cu_positions")
        tg = _as_points(self.target_positions, "target_positions")
        object.__setattr__(self, "cu_positions", cu)
        object.__setattr__(self, "target_positions", tg)
        rcs = np.ones(len(tg), dtype=complex) if self.rcs is None else np.asarray(self.rcs, dtype=complex).reshape(-1)
        if rcs.shape != (len(tg),):
            raise InvalidInput("rcs must have one entry per target")
        object.__setattr__(self, "rcs", rcs)
        gam = self.rate_thresholds
        if gam is None:
            gam = np.zeros(len(cu))
        gam = np.broadcast_to(np.asarray(gam, dtype=float), (len(cu),)).copy()
        if np.any(gam < 0) or not np.all(np.isfinite(gam)):
            raise InvalidInput("rate thresholds must be finite and >= 0")
        object.__setattr__(self, "rate_thresholds", gam)
        for name in ("noise_comm", "noise_sense", "power_budget"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidInput(f"{name} must be finite and positive, got {value!r}")
        if int(self.samples) != self.samples or self.samples < 1:
            raise InvalidInput("samples must be a positive integer")
        if not np.isfinite(self.position_error) or self.position_error < 0:
            raise InvalidInput("position_error must be >= 0")

    @property
    def num_cus(self) -> int:
        return len(self.cu_positions)

    @property
    def num_targets(self) -> int:
        return len(self.target_positions)

    @property
    def num_streams(self) -> int:
        return self.num_cus + self.num_targets

    def validate_area(self, layout: SwanLayout) -> None:
        """Raise InvalidInput if any CU or target lies outside the service area."""
        for name, pts in (("cu", self.cu_positions), ("target", self.target_positions)):
            if len(pts) == 0:
                continue
            x, y = pts[:, 0], pts[:, 1]
            if np.any(x < 0) or np.any(x > layout.area_x) or np.any(np.abs(y) > layout.area_y / 2):
                raise InvalidInput(f"{name} position outside the service area")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def _check_segment(layout: SwanLayout, m: int) -> None:
    if int(m) != m or not 1 <= m <= layout.M:
        raise InvalidSegment(f"segment index {m!r} outside 1..{layout.M}")


def tsw_feed_position(layout: SwanLayout, m: int) -> np.ndarray:
    """Feed point of transmit segment ``m`` (1-based): ``(2(m-1)L, 0, d)``."""
    _check_segment(layout, m)
    return np.array([2.0 * (m - 1) * layout.L, 0.0, layout.d])


def rsw_feed_position(layout: SwanLayout, m: int) -> np.ndarray:
    """Feed point of receive segment ``m`` (1-based): ``((2m-1)L, 0, d)``."""
    _check_segment(layout, m)
    return np.array([(2.0 * m - 1.0) * layout.L, 0.0, layout.d])


def tsw_feeds(layout: SwanLayout) -> np.ndarray:
    """Feed x-coordinate of every TSW, shape (M,)."""
    return 2.0 * np.arange(layout.M) * layout.L


def rsw_feeds(layout: SwanLayout) -> np.ndarray:
    return (2.0 * np.arange(layout.M) + 1.0) * layout.L


def _finite(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} must be finite")
    return arr


def sigmoid(x):
    return expit(x)


def project_tpa(layout: SwanLayout, psi_tilde) -> np.ndarray:
    """Map latent TPA variables (length N*M) onto their transmit segments."""
    psi_tilde = _finite(psi_tilde, "psi_tilde")
    if psi_tilde.shape != (layout.N * layout.M,):
        raise InvalidInput(f"psi_tilde must have length {layout.N * layout.M}")
    return _open_segment(np.repeat(tsw_feeds(layout), layout.N), layout.L, psi_tilde)


def project_rpa(layout: SwanLayout, phi_tilde) -> np.ndarray:
    """Map latent RPA variables (length M) onto their receive segments."""
    phi_tilde = _finite(phi_tilde, "phi_tilde")
    if phi_tilde.shape != (layout.M,):
        raise InvalidInput(f"phi_tilde must have length {layout.M}")
    return _open_segment(rsw_feeds(layout), layout.L, phi_tilde)


def _open_segment(feed: np.ndarray, length: float, latent: np.ndarray) -> np.ndarray:
    # expit saturates to exactly 0 or 1 for |x| > ~37; keep the result inside the open segment
    x = feed + length * expit(latent)
    return np.clip(x, np.nextafter(feed, np.inf), np.nextafter(feed + length, -np.inf))


def projection_chain_factor(latent, segment_length: float) -> np.ndarray:
    """Derivative of ``L*sig(x)`` with respect to ``x``, entrywise."""
    latent = _finite(latent, "latent")
    s = expit(latent)
    return segment_length * s * (1.0 - s)


def uniform_latent(num_per_segment: int) -> np.ndarray:
    """Latent values placing ``n`` PAs at fractions ``1/(N+1), ..., N/(N+1)``."""
    return logit(np.arange(1, num_per_segment + 1) / (num_per_segment + 1.0))


def clamp_latent(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -LATENT_CLAMP, LATENT_CLAMP)
