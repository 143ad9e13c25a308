"""Structured tetrahedral meshing of the catheter-in-lumen annulus.

The cross-section is meshed on shared azimuth stations and radial levels
(every lumen profile is star-shaped, so each station carries one wall
radius), then extruded into axial prisms that are split into three
tetrahedra each.  Quad diagonals follow the grid direction field
(increasing level / station step), which keeps the split conforming across
neighbouring prisms and makes circular meshes exactly symmetric under
rotation by one electrode pitch.

Element sizes are graded: finer by 3x near the electrode patches (radially
toward the shaft and axially inside the patch bands), coarser out in the
axial margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, MeshingError, ParameterError
from .geometry import TWO_PI, CatheterSpec, LumenProfile, wrap_angle

_ANGLE_TOL = 1e-9
_Z_TOL = 1e-9


# ---------------------------------------------------------------------------
# Grid construction
# ---------------------------------------------------------------------------

def _merge_sorted(values, tol):
    """Sort and merge near-duplicate scalars."""
    vals = sorted(values)
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    return out


def azimuth_stations(profile, catheter: CatheterSpec, target_size: float) -> np.ndarray:
    """Azimuth stations (radians, sorted in [0, 2pi)) for the cross-section.

    Stations land exactly on every electrode patch edge and on profile
    feature angles; the gaps are filled so arc length at the outermost wall
    stays below target_size.
    """
    delta = catheter.electrode_half_arc()
    mandatory = []
    for p in range(catheter.electrodes_per_ring):
        c = p * TWO_PI / catheter.electrodes_per_ring
        mandatory.extend([wrap_angle(c - delta), wrap_angle(c + delta)])
    mandatory.extend(profile.feature_angles())
    mandatory = _merge_sorted([wrap_angle(a) for a in mandatory], _ANGLE_TOL)
    if len(mandatory) > 1 and (TWO_PI - mandatory[-1]) + mandatory[0] < _ANGLE_TOL:
        mandatory = mandatory[:-1]  # first and last coincide modulo 2*pi

    # Azimuthal discretisation drives the voltage error on these annuli, so
    # the wall arc target runs somewhat finer than the nominal element size.
    dtheta_wall = 0.75 * target_size / profile.max_radius()
    dtheta_elec = min(dtheta_wall, (target_size / 3.0) / catheter.shaft_radius)

    def _inside_electrode(mid):
        for p in range(catheter.electrodes_per_ring):
            c = p * TWO_PI / catheter.electrodes_per_ring
            d = abs(math.remainder(mid - c, TWO_PI))
            if d < delta - _ANGLE_TOL:
                return True
        return False

    stations = []
    m = len(mandatory)
    for i in range(m):
        a = mandatory[i]
        b = mandatory[i + 1] if i + 1 < m else mandatory[0] + TWO_PI
        gap = b - a
        local = dtheta_elec if _inside_electrode(a + 0.5 * gap) else dtheta_wall
        n = max(1, int(math.ceil(gap / local - 1e-9)))
        for q in range(n):
            stations.append(a + gap * q / n)
    return np.sort(wrap_angle(np.array(stations)))


def radial_fractions(profile, catheter: CatheterSpec, target_size: float) -> np.ndarray:
    """Radial level fractions t in [0, 1], graded 3x finer at the shaft."""
    width = profile.max_radius() - catheter.shaft_radius
    if width <= 0:
        raise GeometryError("lumen wall lies inside the catheter shaft")
    s0, s1, grow = target_size / 3.0, target_size, 1.5
    sizes = []
    total = 0.0
    while total < width - 1e-12:
        s = min(s0 * grow ** len(sizes), s1)
        sizes.append(s)
        total += s
    cum = np.concatenate([[0.0], np.cumsum(sizes)])
    return cum / cum[-1]


def axial_planes(
    profile,
    catheter: CatheterSpec,
    target_size: float,
    axial_layers: int | None = None,
    slice_halfwidth: float = 1.0,
) -> np.ndarray:
    """Axial plane positions (mm) including every mandatory plane.

    Mandatory planes: domain ends, electrode band edges and mid-planes, the
    mid-slice band edges, and any profile feature heights.  With
    axial_layers given the fill is uniform; otherwise it is graded from
    target_size/3 at the electrode bands up to 2x target_size in the outer
    margins.
    """
    L = catheter.domain_length()
    z1, z2 = catheter.ring_z()
    h = 0.5 * catheter.electrode_height
    mid = 0.5 * L
    mandatory = [0.0, L, z1 - h, z1, z1 + h, z2 - h, z2, z2 + h,
                 mid - slice_halfwidth, mid + slice_halfwidth]
    mandatory.extend(z for z in profile.feature_heights() if 0.0 < z < L)
    mandatory = _merge_sorted([z for z in mandatory if -_Z_TOL <= z <= L + _Z_TOL], 1e-6)

    if axial_layers is not None:
        step = L / axial_layers
        if step > catheter.electrode_height + 1e-9:
            raise MeshingError(
                f"{axial_layers} axial layers cannot resolve the "
                f"{catheter.electrode_height} mm electrode height over {L} mm"
            )
        planes = list(mandatory)
        for z in np.linspace(0.0, L, axial_layers + 1):
            if min(abs(z - p) for p in planes) > 0.3 * step:
                planes.append(z)
        return np.array(sorted(planes))

    bands = [(z1 - h, z1 + h), (z2 - h, z2 + h)]
    feat = profile.feature_heights()

    def size_at(z):
        dist = min(max(lo - z, z - hi, 0.0) for lo, hi in bands)
        cap = 2.0 * target_size if (z < z1 - h or z > z2 + h) else target_size
        s = min(cap, target_size / 3.0 + 0.5 * dist)
        if feat and feat[0] - 1.0 <= z <= feat[-1] + 1.0:
            s = min(s, 0.5 * target_size)
        return s

    planes = [mandatory[0]]
    for a, b in zip(mandatory[:-1], mandatory[1:]):
        gap = b - a
        # March with the local size, then rescale the steps to land on b.
        steps = []
        pos = a
        while pos < b - 1e-12:
            s = size_at(pos + min(size_at(pos), gap) / 2.0)
            steps.append(s)
            pos += s
        scale = gap / sum(steps)
        pos = a
        for s in steps[:-1]:
            pos += s * scale
            planes.append(pos)
        planes.append(b)
    return np.array(planes)


@dataclass(frozen=True)
class MeshPlan:
    """Frozen grid arrays letting a parameter sweep reuse one mesh topology."""

    theta: np.ndarray
    fractions: np.ndarray
    z_planes: np.ndarray


def plan_mesh(profile, catheter: CatheterSpec, target_size: float,
              axial_layers: int | None = None) -> MeshPlan:
    """Build the grid arrays for `profile` (usually the largest sweep case)."""
    return MeshPlan(
        theta=azimuth_stations(profile, catheter, target_size),
        fractions=radial_fractions(profile, catheter, target_size),
        z_planes=axial_planes(profile, catheter, target_size, axial_layers),
    )


# ---------------------------------------------------------------------------
# Cross-section triangulation
# ---------------------------------------------------------------------------

@dataclass
class CrossSection:
    """Planar triangulation of the annulus between shaft and lumen wall.

    Triangles are stored source-vertex-first (see `_split_quads`), with
    `tri_case` recording which prism decomposition applies during extrusion.
    """

    profile: LumenProfile
    catheter: CatheterSpec
    target_size: float
    theta: np.ndarray
    fractions: np.ndarray
    points: np.ndarray
    triangles: np.ndarray
    tri_case: np.ndarray
    inner_edge_tri: np.ndarray  # station j -> triangle adjacent to inner edge (j, j+1)

    @property
    def n_stations(self) -> int:
        return len(self.theta)

    @property
    def n_levels(self) -> int:
        return len(self.fractions)

    def node_id(self, level, station):
        return level * self.n_stations + np.mod(station, self.n_stations)

    def radii_at(self, z: float) -> np.ndarray:
        """Node radii (n_levels, n_stations) at height z."""
        wall = self.profile.wall_radius(self.theta, z)
        shaft = self.catheter.shaft_radius
        return shaft + np.outer(self.fractions, wall - shaft)


def _split_quads(section_points, nt, nr, node_id):
    """Triangulate the level/station quads with grid-direction diagonals.

    Every quad (a, b, c, d) = ((i,j), (i,j+1), (i+1,j+1), (i+1,j)) takes
    diagonal a-c; if that degenerates geometrically the quad flips to b-d.
    Each triangle is stored with its direction-field source vertex first and
    tagged with the matching prism-splitting case.
    """
    tris = []
    cases = []
    inner_edge_tri = np.full(nt, -1, dtype=np.int64)
    pts = section_points
    for i in range(nr):
        for j in range(nt):
            a = node_id(i, j)       # (i, j)
            b = node_id(i, j + 1)   # (i, j+1)
            c = node_id(i + 1, j + 1)
            d = node_id(i + 1, j)
            # CCW boundary of the quad in the plane is a -> d -> c -> b.

            def area(p, q, r):
                return 0.5 * ((pts[q, 0] - pts[p, 0]) * (pts[r, 1] - pts[p, 1])
                              - (pts[r, 0] - pts[p, 0]) * (pts[q, 1] - pts[p, 1]))

            if min(area(a, d, c), area(a, c, b)) > 1e-12:
                tris.append((a, d, c)); cases.append(1)
                inner_tri = len(tris)
                tris.append((a, c, b)); cases.append(2)
            elif min(area(a, d, b), area(d, c, b)) > 1e-12:
                inner_tri = len(tris)
                tris.append((a, d, b)); cases.append(1)
                tris.append((d, c, b)); cases.append(2)
            else:
                raise MeshingError(f"degenerate quad at level {i}, station {j}")
            if i == 0:
                inner_edge_tri[j] = inner_tri
    return (np.array(tris, dtype=np.int64), np.array(cases, dtype=np.int8), inner_edge_tri)


def build_cross_section(profile, catheter: CatheterSpec, target_size: float,
                        plan: MeshPlan | None = None) -> CrossSection:
    """Triangulate the annular cross-section at the domain mid-height."""
    profile.validate_against(catheter)
    limit = (2.0 * profile.max_radius() - catheter.shaft_diameter) / 4.0
    if target_size >= limit:
        raise ParameterError(
            f"target_size {target_size} mm too coarse for this annulus; need below {limit:.2f} mm"
        )
    if plan is not None:
        theta, fractions = plan.theta, plan.fractions
    else:
        theta = azimuth_stations(profile, catheter, target_size)
        fractions = radial_fractions(profile, catheter, target_size)

    z_ref = 0.5 * catheter.domain_length()
    wall = profile.wall_radius(theta, z_ref)
    shaft = catheter.shaft_radius
    radii = shaft + np.outer(fractions, wall - shaft)
    nt, nr = len(theta), len(fractions) - 1
    x = radii * np.cos(theta)[None, :]
    y = radii * np.sin(theta)[None, :]
    points = np.column_stack([x.ravel(), y.ravel()])

    def node_id(level, station):
        return level * nt + (station % nt)

    tris, cases, inner = _split_quads(points, nt, nr, node_id)
    return CrossSection(profile, catheter, target_size, theta, fractions,
                        points, tris, cases, inner)


# ---------------------------------------------------------------------------
# Extrusion into tetrahedra
# ---------------------------------------------------------------------------

@dataclass
class Mesh:
    """Tetrahedral mesh with electrode boundary patches.

    nodes are mm; elements index into nodes; electrode k (1-based index
    k = position + 8*(ring-1) + 1) owns `electrodes[k-1]`, an (F, 3) array
    of boundary triangle node ids, with `electrode_owners[k-1]` holding the
    owning element of each face.
    """

    nodes: np.ndarray
    elements: np.ndarray
    element_region: np.ndarray
    electrodes: list
    electrode_owners: list
    characteristic_size: float
    profile: object = None
    catheter: CatheterSpec | None = None
    theta: np.ndarray | None = None
    fractions: np.ndarray | None = None
    z_planes: np.ndarray | None = None
    wall_radii: np.ndarray | None = None  # (n_planes, n_stations)
    electrodes_on_shaft: bool = True
    _volumes: np.ndarray | None = field(default=None, repr=False)
    _centroids: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_electrodes(self) -> int:
        return len(self.electrodes)

    def element_volumes(self) -> np.ndarray:
        """Signed tet volumes, mm^3 (positive for a valid mesh)."""
        if self._volumes is None:
            p = self.nodes[self.elements]
            e1 = p[:, 1] - p[:, 0]
            e2 = p[:, 2] - p[:, 0]
            e3 = p[:, 3] - p[:, 0]
            self._volumes = np.einsum("ij,ij->i", np.cross(e1, e2), e3) / 6.0
        return self._volumes

    def element_centroids(self) -> np.ndarray:
        if self._centroids is None:
            self._centroids = self.nodes[self.elements].mean(axis=1)
        return self._centroids

    def z_extent(self) -> tuple[float, float]:
        return float(self.nodes[:, 2].min()), float(self.nodes[:, 2].max())

    def wall_radius_at(self, theta_q, z: float) -> np.ndarray:
        """Interpolated wall radius at azimuth(s) theta_q and height z."""
        if self.profile is not None:
            return self.profile.wall_radius(theta_q, z)
        if self.wall_radii is None or self.theta is None:
            raise MeshingError("mesh carries no wall geometry information")
        k = int(np.clip(np.searchsorted(self.z_planes, z), 0, len(self.z_planes) - 1))
        wall = self.wall_radii[k]
        theta_q = wrap_angle(np.asarray(theta_q, dtype=float))
        idx = np.searchsorted(self.theta, theta_q) % len(self.theta)
        return wall[idx]

    def validate(self) -> None:
        """Raise MeshingError on violated mesh invariants."""
        vol = self.element_volumes()
        if len(vol) and vol.min() <= 0:
            raise MeshingError(f"{int((vol <= 0).sum())} elements have non-positive volume")
        if len(self.element_region) != self.n_elements:
            raise MeshingError("element_region length mismatch")
        seen = set()
        for k, faces in enumerate(self.electrodes):
            if len(faces) == 0:
                raise MeshingError(f"electrode {k + 1} owns no boundary faces")
            for f in faces:
                key = tuple(sorted(int(v) for v in f))
                if key in seen:
                    raise MeshingError("electrode face sets are not disjoint")
                seen.add(key)
        if self.electrodes_on_shaft and self.catheter is not None:
            r = self.catheter.shaft_radius
            for faces in self.electrodes:
                nd = self.nodes[np.unique(np.concatenate(list(faces)))]
                rad = np.hypot(nd[:, 0], nd[:, 1])
                if np.max(np.abs(rad - r)) > 1e-6:
                    raise MeshingError("electrode face off the catheter shaft surface")


_CASE1 = ((0, 1, 2, 5), (0, 1, 5, 4), (0, 4, 5, 3))
_CASE2 = ((0, 1, 2, 4), (0, 4, 2, 5), (0, 4, 5, 3))


def extrude_mesh(section: CrossSection, catheter: CatheterSpec,
                 axial_layers: int | None = None,
                 plan: MeshPlan | None = None) -> Mesh:
    """Extrude a cross-section into a tetrahedral mesh with electrode patches."""
    profile = section.profile
    if plan is not None:
        z = plan.z_planes
    else:
        z = axial_planes(profile, catheter, section.target_size, axial_layers)
    nt, nlev = section.n_stations, section.n_levels
    nz = len(z) - 1
    per_plane = nlev * nt

    # Node coordinates; wall radii may vary along z for indented profiles.
    shaft = catheter.shaft_radius
    if profile.depends_on_z():
        wall_rows = np.stack([profile.wall_radius(section.theta, zk) for zk in z])
    else:
        wall_rows = np.tile(profile.wall_radius(section.theta, z[0]), (nz + 1, 1))
    cos_t, sin_t = np.cos(section.theta), np.sin(section.theta)
    nodes = np.empty(((nz + 1) * per_plane, 3))
    for k in range(nz + 1):
        radii = shaft + np.outer(section.fractions, wall_rows[k] - shaft)
        blk = slice(k * per_plane, (k + 1) * per_plane)
        nodes[blk, 0] = (radii * cos_t[None, :]).ravel()
        nodes[blk, 1] = (radii * sin_t[None, :]).ravel()
        nodes[blk, 2] = z[k]

    # Prism -> 3 tets, vectorised over all prisms of one layer at a time.
    tris = section.triangles
    ntri = len(tris)
    case1 = section.tri_case == 1
    elements = np.empty((nz * ntri * 3, 4), dtype=np.int64)
    base = np.empty((ntri, 3, 4), dtype=np.int64)   # 2D node id per tet slot
    on_top = np.empty((ntri, 3, 4), dtype=bool)     # slot lives on plane k+1
    for case, table in ((case1, _CASE1), (~case1, _CASE2)):
        idx = np.where(case)[0]
        cols = np.asarray(table)
        base[idx] = tris[idx][:, (cols % 3).ravel()].reshape(len(idx), 3, 4)
        on_top[idx] = (cols >= 3)[None, :, :]
    offset = np.where(on_top, per_plane, 0)
    for k in range(nz):
        block = base + k * per_plane + offset
        elements[k * ntri * 3:(k + 1) * ntri * 3] = block.reshape(-1, 4)

    # Enforce positive orientation (a swap changes no face set).
    p = nodes[elements]
    vol6 = np.einsum("ij,ij->i", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]),
                     p[:, 3] - p[:, 0])
    flip = vol6 < 0
    if np.any(flip):
        elements[flip, 2], elements[flip, 3] = (elements[flip, 3].copy(),
                                                elements[flip, 2].copy())

    mesh = Mesh(
        nodes=nodes,
        elements=elements,
        element_region=np.ones(len(elements), dtype=np.int32),
        electrodes=[],
        electrode_owners=[],
        characteristic_size=section.target_size,
        profile=profile,
        catheter=catheter,
        theta=section.theta,
        fractions=section.fractions,
        z_planes=z,
        wall_radii=wall_rows,
    )
    _attach_electrodes(mesh, section, catheter, z, ntri)
    mesh.validate()
    return mesh


def _attach_electrodes(mesh: Mesh, section: CrossSection, catheter: CatheterSpec,
                       z: np.ndarray, ntri: int) -> None:
    """Collect inner-surface faces into the 16 electrode patches."""
    nt = section.n_stations
    per_plane = section.n_levels * nt
    theta = section.theta
    delta = catheter.electrode_half_arc()
    area_target = catheter.electrode_width * catheter.electrode_height

    for index in range(1, catheter.electrode_count + 1):
        c = catheter.electrode_azimuth(index)
        z_lo, z_hi = catheter.electrode_band(index)
        in_arc = np.abs(np.remainder(theta - c + math.pi, TWO_PI) - math.pi) <= delta + _ANGLE_TOL
        k_planes = np.where((z >= z_lo - _Z_TOL) & (z <= z_hi + _Z_TOL))[0]
        faces = []
        owners = []
        for j in np.where(in_arc)[0]:
            jn = (j + 1) % nt
            if not in_arc[jn]:
                continue
            a2d, b2d = j, jn  # level-0 station ids == 2D node ids
            tri_id = section.inner_edge_tri[j]
            for k in k_planes[:-1]:
                a, b = a2d + k * per_plane, b2d + k * per_plane
                wa, wb = a + per_plane, b + per_plane
                quad_faces = ((a, b, wb), (a, wb, wa))  # diagonal a@k -> b@k+1
                prism_first = (k * ntri + tri_id) * 3
                for f in quad_faces:
                    fs = set(f)
                    owner = -1
                    for e in range(prism_first, prism_first + 3):
                        if fs.issubset(set(mesh.elements[e])):
                            owner = e
                            break
                    if owner < 0:
                        raise MeshingError("electrode face does not match the prism split")
                    faces.append(f)
                    owners.append(owner)
        if not faces:
            raise MeshingError(f"electrode {index} received no faces")
        f_arr = np.array(faces, dtype=np.int64)
        area = _face_areas(mesh.nodes, f_arr).sum()
        if abs(area - area_target) > 0.1 * area_target:
            raise MeshingError(
                f"electrode {index} patch area {area:.3f} mm^2 deviates more than 10% "
                f"from {area_target:.3f} mm^2"
            )
        mesh.electrodes.append(f_arr)
        mesh.electrode_owners.append(np.array(owners, dtype=np.int64))


def _face_areas(nodes: np.ndarray, faces: np.ndarray) -> np.ndarray:
    p = nodes[faces]
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def build_mesh(profile, catheter: CatheterSpec, target_size: float,
               axial_layers: int | None = None,
               plan: MeshPlan | None = None) -> Mesh:
    """Convenience wrapper: cross-section plus extrusion."""
    section = build_cross_section(profile, catheter, target_size, plan=plan)
    return extrude_mesh(section, catheter, axial_layers=axial_layers, plan=plan)


# ---------------------------------------------------------------------------
# Quality reporting
# ---------------------------------------------------------------------------

@dataclass
class QualityReport:
    n_elements: int
    volume_total: float           # mm^3
    min_signed_volume: float      # mm^3
    inverted_count: int
    min_dihedral_deg: float
    max_dihedral_deg: float
    aspect_bin_edges: np.ndarray
    aspect_counts: np.ndarray
    flagged: np.ndarray           # element ids with aspect ratio above bound
    aspect_bound: float

    @property
    def ok(self) -> bool:
        return self.inverted_count == 0 and len(self.flagged) == 0


_TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))  # face i opposite node i


def mesh_quality(mesh: Mesh, aspect_bound: float = 8.0) -> QualityReport:
    """Report dihedral angles, aspect ratios and the volume sum.

    Aspect ratio is circumradius over three inradii (1 for a regular tet).
    Never mutates the mesh.
    """
    m = mesh.n_elements
    edges = np.linspace(1.0, aspect_bound, 9)
    if m == 0:
        return QualityReport(0, 0.0, 0.0, 0, 0.0, 0.0, edges,
                             np.zeros(8, dtype=int), np.array([], dtype=int), aspect_bound)

    p = mesh.nodes[mesh.elements]
    vol = mesh.element_volumes()
    inverted = int((vol <= 0).sum())
    avol = np.abs(vol)

    # Face areas and outward normals.
    areas = np.empty((m, 4))
    normals = np.empty((m, 4, 3))
    for f, (i, j, k) in enumerate(_TET_FACES):
        nvec = np.cross(p[:, j] - p[:, i], p[:, k] - p[:, i])
        nrm = np.linalg.norm(nvec, axis=1)
        areas[:, f] = 0.5 * nrm
        normals[:, f] = nvec / nrm[:, None]

    # Dihedral angle along each edge from the two faces not containing it.
    min_dih = np.full(m, np.pi)
    max_dih = np.zeros(m)
    for a, b in _TET_EDGES:
        fa, fb = [f for f in range(4) if f not in (a, b)]
        cosang = np.einsum("ij,ij->i", normals[:, fa], normals[:, fb])
        ang = math.pi - np.arccos(np.clip(cosang, -1.0, 1.0))
        min_dih = np.minimum(min_dih, ang)
        max_dih = np.maximum(max_dih, ang)

    r_in = 3.0 * avol / areas.sum(axis=1)
    # Circumcenter from |x - c| equalities, solved per element.
    rhs = np.einsum("mij,mij->mi", p[:, 1:] - p[:, :1], p[:, 1:] + p[:, :1]) * 0.5
    mat = p[:, 1:] - p[:, :1]
    center = np.linalg.solve(mat, rhs[..., None])[..., 0]
    r_circ = np.linalg.norm(center - p[:, 0], axis=1)
    aspect = r_circ / (3.0 * r_in)

    counts, _ = np.histogram(np.clip(aspect, edges[0], edges[-1]), bins=edges)
    flagged = np.where((aspect > aspect_bound) | (vol <= 0))[0]
    return QualityReport(
        n_elements=m,
        volume_total=float(vol.sum()),
        min_signed_volume=float(vol.min()),
        inverted_count=inverted,
        min_dihedral_deg=float(np.degrees(min_dih.min())),
        max_dihedral_deg=float(np.degrees(max_dih.max())),
        aspect_bin_edges=edges,
        aspect_counts=counts,
        flagged=flagged,
        aspect_bound=aspect_bound,
    )


# ---------------------------------------------------------------------------
# Solid cylinder fixture (forward-solver validation)
# ---------------------------------------------------------------------------

def solid_cylinder_mesh(radius: float, length: float, size: float) -> Mesh:
    """Solid cylinder with full end-cap electrodes (1 at z=0, 2 at z=length).

    Validation fixture for analytic transfer-resistance and current-density
    checks; its electrodes do not sit on a catheter shaft.
    """
    n_rings = max(2, round(radius / size))
    nt = max(12, round(TWO_PI * radius / size))
    theta = np.arange(nt) * TWO_PI / nt
    pts = [(0.0, 0.0)]
    ring_start = [None]
    for i in range(1, n_rings + 1):
        r = radius * i / n_rings
        ring_start.append(len(pts))
        pts.extend(zip(r * np.cos(theta), r * np.sin(theta)))
    pts = np.array(pts)

    tris = []
    for j in range(nt):
        tris.append((0, ring_start[1] + j, ring_start[1] + (j + 1) % nt))
    for i in range(1, n_rings):
        s0, s1 = ring_start[i], ring_start[i + 1]
        for j in range(nt):
            a, b = s0 + j, s0 + (j + 1) % nt
            c, d = s1 + (j + 1) % nt, s1 + j
            tris.append((a, b, c))
            tris.append((a, c, d))
    tris = np.array(tris, dtype=np.int64)

    nz = max(2, round(length / size))
    z = np.linspace(0.0, length, nz + 1)
    npts = len(pts)
    nodes = np.empty(((nz + 1) * npts, 3))
    for k in range(nz + 1):
        nodes[k * npts:(k + 1) * npts, :2] = pts
        nodes[k * npts:(k + 1) * npts, 2] = z[k]

    # Split prisms with the same two case tables, choosing the case from the
    # smallest global id so neighbouring prisms agree.
    elements = []
    for k in range(nz):
        lo, hi = k * npts, (k + 1) * npts
        for t in tris:
            vb = [lo + t[0], lo + t[1], lo + t[2]]
            vt = [hi + t[0], hi + t[1], hi + t[2]]
            order = int(np.argmin(vb + vt)) % 3
            vb = vb[order:] + vb[:order]
            vt = vt[order:] + vt[:order]
            prism = vb + vt
            if min(prism[1], prism[5]) < min(prism[2], prism[4]):
                table = _CASE1
            else:
                table = _CASE2
            for tet in table:
                elements.append([prism[q] for q in tet])
    elements = np.array(elements, dtype=np.int64)

    p = nodes[elements]
    vol6 = np.einsum("ij,ij->i", np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]),
                     p[:, 3] - p[:, 0])
    flip = vol6 < 0
    elements[flip, 2], elements[flip, 3] = elements[flip, 3].copy(), elements[flip, 2].copy()

    # End-cap electrode faces and their owner elements.
    def cap_faces(plane_k, offset):
        faces, owners = [], []
        for t_idx, t in enumerate(tris):
            f = tuple(int(v) + plane_k * npts for v in t)
            prism_first = (offset + t_idx) * 3
            fs = set(f)
            owner = -1
            for e in range(prism_first, prism_first + 3):
                if fs.issubset(set(elements[e])):
                    owner = e
                    break
            if owner < 0:
                raise MeshingError("end-cap face missing from prism split")
            faces.append(f)
            owners.append(owner)
        return np.array(faces, dtype=np.int64), np.array(owners, dtype=np.int64)

    f0, o0 = cap_faces(0, 0)
    f1, o1 = cap_faces(nz, (nz - 1) * len(tris))

    mesh = Mesh(
        nodes=nodes,
        elements=elements,
        element_region=np.ones(len(elements), dtype=np.int32),
        electrodes=[f0, f1],
        electrode_owners=[o0, o1],
        characteristic_size=size,
        electrodes_on_shaft=False,
    )
    mesh.validate()
    return mesh
