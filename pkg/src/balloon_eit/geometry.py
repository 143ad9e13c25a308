"""Parametric catheter and lumen cross-section geometry.

All lengths are millimetres and all angles are degrees at the API surface;
internal evaluation uses radians.  Every lumen profile is star-shaped with
respect to the catheter axis, so the wall is fully described by a radius
function r_wall(theta, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, ParameterError

TWO_PI = 2.0 * math.pi


def wrap_angle(theta):
    """Wrap angle(s) in radians onto [0, 2*pi)."""
    return np.mod(theta, TWO_PI)


def _wrap_signed(theta):
    """Wrap angle(s) in radians onto [-pi, pi)."""
    return np.mod(np.asarray(theta) + math.pi, TWO_PI) - math.pi


@dataclass(frozen=True)
class CatheterSpec:
    """Catheter shaft with two rings of rectangular electrode patches.

    Ring 1 holds electrodes 1..electrodes_per_ring at the lower axial
    position, ring 2 the axially aligned partners (k and k + 8 share an
    azimuth).  Electrode 1 is centred at azimuth 0 deg and indices increase
    counter-clockwise.
    """

    shaft_diameter: float = 5.3
    ring_count: int = 2
    electrodes_per_ring: int = 8
    ring_spacing: float = 10.0
    electrode_width: float = 1.0
    electrode_height: float = 2.0
    shaft_length: float | None = None

    def __post_init__(self):
        if self.shaft_diameter <= 0:
            raise ParameterError("shaft_diameter must be positive")
        if self.ring_count != 2:
            raise ParameterError("only two electrode rings are supported")
        if self.electrodes_per_ring < 2:
            raise ParameterError("need at least two electrodes per ring")
        if self.electrode_width <= 0 or self.electrode_height <= 0:
            raise ParameterError("electrode dimensions must be positive")
        if self.ring_spacing <= self.electrode_height:
            raise ParameterError(
                "ring_spacing must exceed electrode_height so ring patches do not overlap axially"
            )
        if self.electrodes_per_ring * self.electrode_width >= math.pi * self.shaft_diameter:
            raise ParameterError("electrode patches overlap circumferentially")
        if self.shaft_length is not None and self.shaft_length < self.min_length():
            raise ParameterError(
                f"shaft_length must be at least {self.min_length():.1f} mm for this electrode layout"
            )

    @property
    def shaft_radius(self) -> float:
        return 0.5 * self.shaft_diameter

    @property
    def electrode_count(self) -> int:
        return self.ring_count * self.electrodes_per_ring

    def min_length(self, margin: float = 5.0) -> float:
        return self.ring_spacing + 2.0 * self.electrode_height + 2.0 * margin

    def domain_length(self) -> float:
        """Axial extent of the simulated saline column.

        Defaults to ring spacing plus a 15 mm margin beyond each ring, which
        leaves boundary effects on the inter-ring measurements below mesh
        tolerance.
        """
        if self.shaft_length is not None:
            return self.shaft_length
        return self.ring_spacing + 30.0

    def ring_z(self) -> tuple[float, float]:
        """Axial centres of ring 1 and ring 2."""
        mid = 0.5 * self.domain_length()
        return (mid - 0.5 * self.ring_spacing, mid + 0.5 * self.ring_spacing)

    def electrode_azimuth(self, index: int) -> float:
        """Centre azimuth (radians) of electrode `index` (1-based, 1..16)."""
        if not 1 <= index <= self.electrode_count:
            raise ParameterError(f"electrode index {index} out of range")
        pos = (index - 1) % self.electrodes_per_ring
        return pos * TWO_PI / self.electrodes_per_ring

    def electrode_half_arc(self) -> float:
        """Half angular width (radians) of one patch on the shaft surface."""
        return 0.5 * self.electrode_width / self.shaft_radius

    def electrode_band(self, index: int) -> tuple[float, float]:
        """Axial interval [z_lo, z_hi] of electrode `index`'s patch."""
        ring = (index - 1) // self.electrodes_per_ring
        zc = self.ring_z()[ring]
        h = 0.5 * self.electrode_height
        return (zc - h, zc + h)


PROFILE_KINDS = ("circle", "ellipse", "crescent", "indented")


@dataclass(frozen=True)
class LumenProfile:
    """Parametric lumen cross-section seen by the inflated balloon.

    kind selects the wall shape:
      circle    -- radius D/2
      ellipse   -- semi-axes D/2 and f*D/2, major axis at `rotation`
      crescent  -- circle with a circular-arc bite of depth `crescent_depth`
                   over `crescent_angular_extent` centred at `crescent_azimuth`
      indented  -- circle with a smooth cosine bump pressed radially inward,
                   depth `indent_depth`, centred axially on the electrode
                   array (axial half-width `indent_axial_halfwidth`)

    `rotation` rotates the whole profile; feature azimuths are given in the
    unrotated frame.
    """

    kind: str = "circle"
    major_diameter: float = 25.0
    aspect_ratio: float = 1.0
    rotation: float = 0.0
    crescent_depth: float = 6.0
    crescent_angular_extent: float = 120.0
    crescent_azimuth: float = 90.0
    indent_depth: float = 4.0
    indent_azimuth: float = 90.0
    indent_angular_extent: float = 90.0
    indent_axial_halfwidth: float = 6.0
    indent_axial_center: float | None = None

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ParameterError(f"unknown profile kind {self.kind!r}")
        if self.major_diameter <= 0:
            raise ParameterError("major_diameter must be positive")
        if not 0.0 < self.aspect_ratio <= 1.0:
            raise ParameterError("aspect_ratio must lie in (0, 1]")
        if self.kind == "circle" and self.aspect_ratio != 1.0:
            raise ParameterError("a circle has aspect_ratio 1")
        if self.kind == "crescent":
            if not 0.0 < self.crescent_depth < 0.5 * self.major_diameter:
                raise ParameterError("crescent_depth must lie in (0, D/2)")
            if not 0.0 < self.crescent_angular_extent < 180.0:
                raise ParameterError("crescent_angular_extent must lie in (0, 180) degrees")
        if self.kind == "indented":
            if self.indent_depth < 0 or self.indent_depth >= 0.5 * self.major_diameter:
                raise ParameterError("indent_depth must lie in [0, D/2)")
            if not 0.0 < self.indent_angular_extent <= 180.0:
                raise ParameterError("indent_angular_extent must lie in (0, 180] degrees")
            if self.indent_axial_halfwidth <= 0:
                raise ParameterError("indent_axial_halfwidth must be positive")

    # -- radius evaluation ---------------------------------------------------

    @property
    def wall_radius_nominal(self) -> float:
        return 0.5 * self.major_diameter

    def max_radius(self) -> float:
        return self.wall_radius_nominal

    def min_radius(self) -> float:
        r = self.wall_radius_nominal
        if self.kind == "ellipse":
            return self.aspect_ratio * r
        if self.kind == "crescent":
            return r - self.crescent_depth
        if self.kind == "indented":
            return r - self.indent_depth
        return r

    def wall_radius(self, theta, z: float = 0.0) -> np.ndarray:
        """Wall radius (mm) at azimuth(s) `theta` (radians) and height z (mm)."""
        theta = np.asarray(theta, dtype=float)
        rel = theta - math.radians(self.rotation)
        r = self.wall_radius_nominal
        if self.kind == "circle":
            return np.full(theta.shape, r)
        if self.kind == "ellipse":
            a = r
            b = self.aspect_ratio * r
            return a * b / np.sqrt((b * np.cos(rel)) ** 2 + (a * np.sin(rel)) ** 2)
        if self.kind == "crescent":
            return self._crescent_radius(rel)
        return self._indent_radius(rel, z)

    def _crescent_radius(self, rel) -> np.ndarray:
        R = self.wall_radius_nominal
        d = self.crescent_depth
        alpha = 0.5 * math.radians(self.crescent_angular_extent)
        phi = _wrap_signed(rel - math.radians(self.crescent_azimuth))
        out = np.full(np.shape(phi), R)
        inside = np.abs(phi) < alpha
        if not np.any(inside):
            return out
        p = phi[inside]
        denom = 2.0 * (R * math.cos(alpha) - (R - d))
        if abs(denom) < 1e-9 * R:
            # Bite degenerates to the straight chord through the two rim points.
            out[inside] = R * math.cos(alpha) / np.cos(p)
            return out
        # Circle through the two rim points and the deepest point; the bite is
        # the near-side arc seen from the catheter axis.
        h = (R * R - (R - d) ** 2) / denom
        rho2 = (R - d - h) ** 2
        disc = np.sqrt(np.maximum(rho2 - (h * np.sin(p)) ** 2, 0.0))
        if h < 0:
            out[inside] = h * np.cos(p) + disc
        else:
            out[inside] = h * np.cos(p) - disc
        return out

    def _indent_radius(self, rel, z: float) -> np.ndarray:
        R = self.wall_radius_nominal
        phi = _wrap_signed(rel - math.radians(self.indent_azimuth))
        alpha = 0.5 * math.radians(self.indent_angular_extent)
        out = np.full(np.shape(phi), R)
        if self.indent_depth == 0.0 or self.indent_axial_center is None:
            return out
        w = (z - self.indent_axial_center) / self.indent_axial_halfwidth
        if abs(w) >= 1.0:
            return out
        axial = math.cos(0.5 * math.pi * w) ** 2
        inside = np.abs(phi) < alpha
        bump = np.cos(0.5 * math.pi * phi[inside] / alpha) ** 2
        out[inside] = R - self.indent_depth * axial * bump
        return out

    def feature_angles(self) -> list[float]:
        """Azimuths (radians, rotated frame) where the wall curve has kinks."""
        if self.kind == "crescent":
            c = math.radians(self.crescent_azimuth + self.rotation)
            a = 0.5 * math.radians(self.crescent_angular_extent)
            return [wrap_angle(c - a), wrap_angle(c), wrap_angle(c + a)]
        if self.kind == "indented":
            c = math.radians(self.indent_azimuth + self.rotation)
            a = 0.5 * math.radians(self.indent_angular_extent)
            return [wrap_angle(c - a), wrap_angle(c), wrap_angle(c + a)]
        return []

    def feature_heights(self) -> list[float]:
        """Axial positions (mm) where the wall varies along z."""
        if self.kind == "indented" and self.indent_axial_center is not None and self.indent_depth > 0:
            zc, hw = self.indent_axial_center, self.indent_axial_halfwidth
            return [zc - hw, zc, zc + hw]
        return []

    def depends_on_z(self) -> bool:
        return self.kind == "indented" and self.indent_depth > 0

    def validate_against(self, catheter: CatheterSpec, clearance: float = 0.25) -> None:
        """Raise GeometryError unless the wall clears the shaft everywhere."""
        gap = self.min_radius() - catheter.shaft_radius
        if gap <= clearance:
            raise GeometryError(
                f"annulus is degenerate: wall-to-shaft gap {gap:.3f} mm "
                f"(minimum {clearance} mm required)"
            )


@dataclass(frozen=True)
class BalloonBoundary:
    """Balloon wall of an inflating balloon clamped by a lumen.

    The free balloon is a circle of radius `free_radius`; wherever the lumen
    wall is closer, the balloon conforms to it.  This is the contact model
    used for synthetic inflation series: no membrane mechanics, the boundary
    is simply min(free_radius, lumen wall radius).
    """

    lumen: LumenProfile
    free_radius: float
    _transitions: tuple[float, ...] = field(init=False, default=())

    def __post_init__(self):
        if self.free_radius <= 0:
            raise ParameterError("free_radius must be positive")
        object.__setattr__(self, "_transitions", tuple(self._find_transitions()))

    @property
    def wall_radius_nominal(self) -> float:
        return min(self.free_radius, self.lumen.wall_radius_nominal)

    def max_radius(self) -> float:
        return min(self.free_radius, self.lumen.max_radius())

    def min_radius(self) -> float:
        return min(self.free_radius, self.lumen.min_radius())

    def depends_on_z(self) -> bool:
        return self.lumen.depends_on_z()

    def wall_radius(self, theta, z: float = 0.0) -> np.ndarray:
        return np.minimum(self.lumen.wall_radius(theta, z), self.free_radius)

    def _find_transitions(self, samples: int = 2048) -> list[float]:
        """Azimuths where the balloon detaches from / contacts the wall."""
        if self.lumen.depends_on_z():
            # Contact angles vary with z; mesh stations refine enough anyway.
            return []
        theta = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        gap = self.lumen.wall_radius(theta) - self.free_radius
        sign = np.sign(gap)
        out = []
        for i in range(samples):
            j = (i + 1) % samples
            if sign[i] == 0.0:
                out.append(theta[i])
            elif sign[i] * sign[j] < 0:
                lo, hi = theta[i], theta[i] + (TWO_PI / samples)
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if gap[i] * (self.lumen.wall_radius(mid) - self.free_radius) > 0:
                        lo = mid
                    else:
                        hi = mid
                out.append(wrap_angle(0.5 * (lo + hi)))
        return sorted(out)

    def feature_angles(self) -> list[float]:
        angles = list(self.lumen.feature_angles()) + list(self._transitions)
        return sorted(wrap_angle(a) for a in angles)

    def feature_heights(self) -> list[float]:
        return self.lumen.feature_heights()

    def validate_against(self, catheter: CatheterSpec, clearance: float = 0.25) -> None:
        gap = self.min_radius() - catheter.shaft_radius
        if gap <= clearance:
            raise GeometryError(
                f"balloon boundary is degenerate: gap {gap:.3f} mm to the shaft"
            )


def circle(diameter: float, rotation: float = 0.0) -> LumenProfile:
    return LumenProfile(kind="circle", major_diameter=diameter, rotation=rotation)


def ellipse(major_diameter: float, aspect_ratio: float, rotation: float = 0.0) -> LumenProfile:
    if aspect_ratio == 1.0:
        return circle(major_diameter, rotation)
    return LumenProfile(
        kind="ellipse",
        major_diameter=major_diameter,
        aspect_ratio=aspect_ratio,
        rotation=rotation,
    )
