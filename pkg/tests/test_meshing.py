import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from balloon_eit.errors import GeometryError, MeshingError, ParameterError
from balloon_eit.geometry import LumenProfile, circle, ellipse
from balloon_eit.meshing import (Mesh, _face_areas, azimuth_stations,
                                 build_cross_section, build_mesh, mesh_quality,
                                 plan_mesh, radial_fractions,
                                 solid_cylinder_mesh)


def annulus_volume(diameter, catheter):
    L = catheter.domain_length()
    return math.pi * ((diameter / 2) ** 2 - catheter.shaft_radius ** 2) * L


class TestGrids:
    def test_stations_contain_electrode_edges(self, default_catheter):
        theta = azimuth_stations(circle(25.0), default_catheter, 1.5)
        delta = default_catheter.electrode_half_arc()
        for p in range(8):
            c = p * math.pi / 4
            for edge in (c - delta, c + delta):
                d = np.abs(np.mod(theta - edge + math.pi, 2 * math.pi) - math.pi)
                assert d.min() < 1e-9
        assert len(theta) % 8 == 0
        assert np.all(np.diff(theta) > 0)

    def test_feature_angles_become_stations(self, default_catheter):
        prof = LumenProfile(kind="crescent", major_diameter=26.0)
        theta = azimuth_stations(prof, default_catheter, 1.5)
        for a in prof.feature_angles():
            d = np.abs(np.mod(theta - a + math.pi, 2 * math.pi) - math.pi)
            assert d.min() < 1e-9

    def test_radial_fractions_graded(self, default_catheter):
        fr = radial_fractions(circle(25.0), default_catheter, 1.5)
        assert fr[0] == 0.0 and fr[-1] == 1.0
        steps = np.diff(fr)
        assert np.all(steps > 0)
        assert steps[0] < steps[-1]  # finer at the shaft


class TestCrossSection:
    def test_boundary_vertices_exactly_on_curves(self, default_catheter):
        prof = ellipse(26.0, 0.75)
        sec = build_cross_section(prof, default_catheter, 1.5)
        nt = sec.n_stations
        radii = np.hypot(sec.points[:, 0], sec.points[:, 1])
        inner = radii[:nt]
        outer = radii[-nt:]
        assert np.allclose(inner, default_catheter.shaft_radius, atol=1e-12)
        wall = prof.wall_radius(sec.theta, 0.5 * default_catheter.domain_length())
        assert np.allclose(outer, wall, atol=1e-12)

    def test_positive_triangle_areas(self, default_catheter):
        sec = build_cross_section(circle(25.0), default_catheter, 1.5)
        p = sec.points[sec.triangles]
        area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        assert area.min() > 0

    def test_target_size_precondition(self, default_catheter):
        with pytest.raises(ParameterError):
            build_cross_section(circle(12.0), default_catheter, 2.0)

    def test_degenerate_annulus_is_geometry_error(self, default_catheter):
        with pytest.raises(GeometryError):
            build_cross_section(circle(5.4), default_catheter, 0.02)


class TestExtrusion:
    def test_all_volumes_positive(self, circ25_mesh):
        assert circ25_mesh.element_volumes().min() > 0

    def test_total_volume_close_to_analytic(self, circ25_mesh, default_catheter):
        expected = annulus_volume(25.0, default_catheter)
        vol = circ25_mesh.element_volumes().sum()
        assert abs(vol - expected) / expected < 0.005

    @pytest.mark.parametrize("layers", [20, 40, 80])
    def test_layer_refinement_volume_converges(self, default_catheter, layers):
        mesh = build_mesh(circle(25.0), default_catheter, 1.5, axial_layers=layers)
        expected = annulus_volume(25.0, default_catheter)
        assert abs(mesh.element_volumes().sum() - expected) / expected < 0.005

    def test_sixteen_electrodes_with_patch_areas(self, default_catheter):
        mesh = build_mesh(circle(25.0), default_catheter, 1.5, axial_layers=40)
        assert mesh.n_electrodes == 16
        target = default_catheter.electrode_width * default_catheter.electrode_height
        for faces in mesh.electrodes:
            area = _face_areas(mesh.nodes, np.asarray(faces)).sum()
            assert abs(area - target) / target < 0.10

    def test_electrode_owner_elements_contain_faces(self, tiny_mesh):
        for faces, owners in zip(tiny_mesh.electrodes, tiny_mesh.electrode_owners):
            for f, o in zip(faces, owners):
                assert set(f) <= set(tiny_mesh.elements[o])

    def test_too_few_layers_rejected(self, default_catheter):
        with pytest.raises(MeshingError):
            build_mesh(circle(25.0), default_catheter, 1.5, axial_layers=10)

    def test_interior_faces_shared_by_exactly_two(self, tiny_mesh):
        faces = Counter()
        for el in tiny_mesh.elements:
            a, b, c, d = sorted(int(x) for x in el)
            for f in ((a, b, c), (a, b, d), (a, c, d), (b, c, d)):
                faces[f] += 1
        assert set(faces.values()) <= {1, 2}

    def test_rotation_invariance_of_circular_mesh(self, tiny_mesh):
        rot = 2 * np.pi / 8
        c, s = np.cos(rot), np.sin(rot)
        rotated = tiny_mesh.nodes.copy()
        rotated[:, 0] = c * tiny_mesh.nodes[:, 0] - s * tiny_mesh.nodes[:, 1]
        rotated[:, 1] = s * tiny_mesh.nodes[:, 0] + c * tiny_mesh.nodes[:, 1]
        key = lambda pts: np.lexsort((pts[:, 2].round(9), pts[:, 1].round(9),
                                      pts[:, 0].round(9)))
        a = tiny_mesh.nodes[key(tiny_mesh.nodes)]
        b = rotated[key(rotated)]
        assert np.allclose(a, b, atol=1e-9)

    def test_indented_profile_varies_with_height(self, default_catheter):
        prof = LumenProfile(kind="indented", major_diameter=24.0, indent_depth=4.0,
                            indent_axial_center=0.5 * default_catheter.domain_length())
        mesh = build_mesh(prof, default_catheter, 1.5)
        assert mesh.element_volumes().min() > 0
        r = np.hypot(mesh.nodes[:, 0], mesh.nodes[:, 1])
        az = np.arctan2(mesh.nodes[:, 1], mesh.nodes[:, 0])
        at_indent = np.abs(az - np.pi / 2) < 0.05
        mid = np.isclose(mesh.nodes[:, 2], 0.5 * default_catheter.domain_length())
        ends = np.isclose(mesh.nodes[:, 2], 0.0)
        assert r[at_indent & mid].max() == pytest.approx(8.0)
        assert r[at_indent & ends].max() == pytest.approx(12.0)

    def test_crescent_mesh_conforms(self, default_catheter):
        prof = LumenProfile(kind="crescent", major_diameter=26.0)
        mesh = build_mesh(prof, default_catheter, 1.5)
        nt = len(mesh.theta)
        outer = mesh.nodes[(len(mesh.fractions) - 1) * nt:(len(mesh.fractions)) * nt]
        wall = prof.wall_radius(mesh.theta, 0.0)
        assert np.allclose(np.hypot(outer[:, 0], outer[:, 1]), wall, atol=1e-9)

    def test_plan_reuse_keeps_topology(self, default_catheter):
        plan = plan_mesh(circle(30.0), default_catheter, 2.0)
        m1 = build_mesh(circle(30.0), default_catheter, 2.0, plan=plan)
        m2 = build_mesh(ellipse(20.0, 0.7), default_catheter, 1.5, plan=plan)
        assert m1.n_elements == m2.n_elements
        assert np.array_equal(m1.elements, m2.elements)


class TestQuality:
    def test_empty_mesh_report(self):
        mesh = Mesh(nodes=np.zeros((0, 3)), elements=np.zeros((0, 4), dtype=int),
                    element_region=np.zeros(0, dtype=np.int32), electrodes=[],
                    electrode_owners=[], characteristic_size=1.0)
        report = mesh_quality(mesh)
        assert report.n_elements == 0
        assert report.volume_total == 0.0

    def test_uniform_extrusion_dihedral_above_ten_degrees(self, default_catheter):
        mesh = build_mesh(circle(20.0), default_catheter, 1.5, axial_layers=60)
        report = mesh_quality(mesh)
        assert report.min_dihedral_deg > 10.0
        assert report.inverted_count == 0

    def test_inverted_element_flagged(self, tiny_mesh):
        elements = tiny_mesh.elements.copy()
        elements[5, [2, 3]] = elements[5, [3, 2]]
        bad = replace(tiny_mesh, elements=elements, _volumes=None, _centroids=None)
        report = mesh_quality(bad)
        assert report.inverted_count == 1
        assert 5 in report.flagged
        assert report.min_signed_volume < 0
        good_total = mesh_quality(tiny_mesh).volume_total
        assert report.volume_total < good_total - 1e-9

    def test_validate_catches_tampering(self, tiny_mesh):
        elements = tiny_mesh.elements.copy()
        elements[0, [2, 3]] = elements[0, [3, 2]]
        bad = replace(tiny_mesh, elements=elements, _volumes=None, _centroids=None)
        with pytest.raises(MeshingError):
            bad.validate()
        shared = replace(tiny_mesh, electrodes=[tiny_mesh.electrodes[0]] * 2,
                         electrode_owners=[tiny_mesh.electrode_owners[0]] * 2)
        with pytest.raises(MeshingError):
            shared.validate()


class TestSolidCylinder:
    def test_volume_and_validity(self):
        mesh = solid_cylinder_mesh(10.0, 30.0, 1.2)
        expected = math.pi * 100.0 * 30.0
        assert abs(mesh.element_volumes().sum() - expected) / expected < 0.01
        assert mesh.n_electrodes == 2
        assert mesh.element_volumes().min() > 0

    def test_cap_faces_sit_on_the_caps(self):
        mesh = solid_cylinder_mesh(8.0, 20.0, 1.5)
        for k, z_cap in ((0, 0.0), (1, 20.0)):
            nodes = np.unique(np.concatenate(list(mesh.electrodes[k])))
            assert np.allclose(mesh.nodes[nodes, 2], z_cap)
