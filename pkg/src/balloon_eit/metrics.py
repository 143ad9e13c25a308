"""Mid-slice current-spread and wall-sensitivity metrics.

The analysis slice is the axial band equidistant from the two electrode
rings (2 mm thick by default).  Current spread CD_theta is the smallest
contiguous azimuthal window containing 99% of the slice elements whose
current density exceeds half the slice maximum.  J_wall is, per
measurement, the largest sensitivity magnitude among the outer (wall
adjacent) slice elements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError
from .geometry import TWO_PI
from .meshing import Mesh


@dataclass
class SliceMetrics:
    cd_theta: float          # degrees
    j_wall: np.ndarray       # V*m/S, one per sensitivity row
    slice_thickness: float   # mm
    n_slice_elements: int
    n_qualifying: int


def mid_slice_elements(mesh: Mesh, slice_thickness: float = 2.0) -> np.ndarray:
    """Element ids whose centroid lies in the inter-ring mid band."""
    if mesh.catheter is not None:
        z1, z2 = mesh.catheter.ring_z()
        z_mid = 0.5 * (z1 + z2)
    else:
        lo, hi = mesh.z_extent()
        z_mid = 0.5 * (lo + hi)
    zc = mesh.element_centroids()[:, 2]
    return np.where(np.abs(zc - z_mid) <= 0.5 * slice_thickness + 1e-9)[0]


def minimal_angular_window(azimuths: np.ndarray, coverage: float = 0.99) -> float:
    """Smallest contiguous window (radians) holding `coverage` of the angles.

    Sweeps the window start over the sorted azimuths.
    """
    n = len(azimuths)
    if n == 0:
        return 0.0
    need = max(1, int(math.ceil(coverage * n - 1e-12)))
    if need == 1:
        return 0.0
    srt = np.sort(np.mod(azimuths, TWO_PI))
    ext = np.concatenate([srt, srt + TWO_PI])
    widths = ext[np.arange(n) + need - 1] - srt
    return float(widths.min())


def outer_slice_elements(mesh: Mesh, slice_ids: np.ndarray,
                         outer_fraction: float = 0.9) -> np.ndarray:
    """Slice elements whose centroid radius exceeds a fraction of the local wall."""
    cen = mesh.element_centroids()[slice_ids]
    radius = np.hypot(cen[:, 0], cen[:, 1])
    theta = np.arctan2(cen[:, 1], cen[:, 0])
    z_mid = float(np.mean(cen[:, 2]))
    wall = mesh.wall_radius_at(theta, z_mid)
    return slice_ids[radius >= outer_fraction * wall]


def slice_metrics(cd: np.ndarray, j_rows: np.ndarray, mesh: Mesh,
                  slice_thickness: float = 2.0,
                  cd_fraction: float = 0.5,
                  coverage: float = 0.99,
                  outer_fraction: float = 0.9,
                  threshold_scope: str = "slice",
                  qualifying_measure: str = "element-current") -> SliceMetrics:
    """Current-spread angle and per-measurement wall sensitivity.

    `qualifying_measure` sets the per-element quantity thresholded at half
    its slice maximum: "element-current" (density times volume, the default;
    insensitive to local grading on this mesh family) or "current-density".
    `threshold_scope` switches the reference maximum from the slice to the
    whole mesh.

    J_wall values are standardised to the mean outer-element volume so the
    four sector values compare sensitivity, not local element size.
    """
    cd = np.asarray(cd, dtype=float)
    j_rows = np.atleast_2d(np.asarray(j_rows, dtype=float))
    slice_ids = mid_slice_elements(mesh, slice_thickness)
    if len(slice_ids) == 0:
        raise GeometryError("mid-slice band contains no elements")

    if qualifying_measure == "element-current":
        measure = cd * np.abs(mesh.element_volumes())
    elif qualifying_measure == "current-density":
        measure = cd
    else:
        raise GeometryError(f"unknown qualifying_measure {qualifying_measure!r}")
    ref = measure[slice_ids].max() if threshold_scope == "slice" else measure.max()
    qualifying = slice_ids[measure[slice_ids] >= cd_fraction * ref]
    cen = mesh.element_centroids()[qualifying]
    azimuths = np.arctan2(cen[:, 1], cen[:, 0])
    cd_theta = math.degrees(minimal_angular_window(azimuths, coverage))

    outer_ids = outer_slice_elements(mesh, slice_ids, outer_fraction)
    if len(outer_ids) == 0:
        raise GeometryError("no outer elements in the mid slice")
    vol = np.abs(mesh.element_volumes()[outer_ids])
    j_wall = (np.abs(j_rows[:, outer_ids]) / vol).max(axis=1) * vol.mean()
    return SliceMetrics(
        cd_theta=cd_theta,
        j_wall=j_wall,
        slice_thickness=slice_thickness,
        n_slice_elements=len(slice_ids),
        n_qualifying=len(qualifying),
    )
