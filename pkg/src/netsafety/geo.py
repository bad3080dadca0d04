"""Local tangent-plane conversion between GPS degrees and planar meters.

An equirectangular approximation anchored at a reference latitude/longitude.
Adequate for the sub-kilometer road segments this toolkit works on; expect
centimeter-level distortion at 1 km from the anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6371008.8  # mean Earth radius


@dataclass(frozen=True)
class TangentPlane:
    """Planar frame anchored at (lat0, lon0); x east, y north, meters."""

    lat0: float
    lon0: float

    def to_xy(self, lat: float, lon: float) -> tuple[float, float]:
        x = math.radians(lon - self.lon0) * EARTH_RADIUS_M * math.cos(math.radians(self.lat0))
        y = math.radians(lat - self.lat0) * EARTH_RADIUS_M
        return x, y

    def to_latlon(self, x: float, y: float) -> tuple[float, float]:
        lat = self.lat0 + math.degrees(y / EARTH_RADIUS_M)
        lon = self.lon0 + math.degrees(x / (EARTH_RADIUS_M * math.cos(math.radians(self.lat0))))
        return lat, lon
