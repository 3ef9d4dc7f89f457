"""Planar array geometry and the angle convention shared by both channel models.

The array lies in the x-z plane with outward normal +y. Azimuth and elevation
are both measured from the normal, so ``(0, 0)`` is broadside and a direction
maps to the unit vector ``(sin az cos el, cos az cos el, sin el)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayLayout:
    """Uniform ``n_x`` by ``n_z`` grid with spacing ``delta * wavelength``."""

    n_x: int
    n_z: int
    delta: float
    wavelength: float

    def __post_init__(self):
        for name in ("n_x", "n_z"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v!r}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta!r}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength!r}")

    @property
    def n(self) -> int:
        return self.n_x * self.n_z

    @property
    def spacing(self) -> float:
        return self.delta * self.wavelength

    def indices(self):
        """(m, n) grid index of every element in Kronecker order."""
        m = np.repeat(np.arange(self.n_x), self.n_z)
        n = np.tile(np.arange(self.n_z), self.n_x)
        return m, n


@dataclass(frozen=True)
class PlaneWaveDirection:
    azimuth_deg: float
    elevation_deg: float

    def __post_init__(self):
        for name in ("azimuth_deg", "elevation_deg"):
            v = getattr(self, name)
            if not np.isfinite(v) or not -90.0 <= v <= 90.0:
                raise ValueError(f"{name} must lie in [-90, 90], got {v!r}")

    def mirrored(self) -> "PlaneWaveDirection":
        """Point reflection through broadside, ``(-az, -el)``.

        For an incident direction this is the specular direction.
        """
        return PlaneWaveDirection(-self.azimuth_deg, -self.elevation_deg)

    def unit_vector(self) -> np.ndarray:
        return unit_vectors(self.azimuth_deg, self.elevation_deg)

    def as_tuple(self):
        return (float(self.azimuth_deg), float(self.elevation_deg))


def unit_vectors(azimuth_deg, elevation_deg) -> np.ndarray:
    """Unit vectors for broadcastable azimuth/elevation arrays, shape (..., 3)."""
    az = np.radians(azimuth_deg)
    el = np.radians(elevation_deg)
    az, el = np.broadcast_arrays(az, el)
    return np.stack([np.sin(az) * np.cos(el), np.cos(az) * np.cos(el), np.sin(el)], axis=-1)


def element_positions(layout: ArrayLayout) -> np.ndarray:
    """Element positions, shape (N, 3); index ``m * n_z + n`` sits at ``(m d, 0, n d)``."""
    m, n = layout.indices()
    d = layout.spacing
    return np.stack([m * d, np.zeros(layout.n), n * d], axis=1).astype(float)


def array_centroid(layout: ArrayLayout) -> np.ndarray:
    d = layout.spacing
    return np.array([(layout.n_x - 1) * d / 2, 0.0, (layout.n_z - 1) * d / 2])


def direction_cosines(direction: PlaneWaveDirection):
    """``(u_x, u_z) = (sin az cos el, sin el)``."""
    az = np.radians(direction.azimuth_deg)
    el = np.radians(direction.elevation_deg)
    return float(np.sin(az) * np.cos(el)), float(np.sin(el))
