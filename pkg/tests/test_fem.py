import math

import numpy as np
import pytest

from balloon_eit.errors import ParameterError
from balloon_eit.fem import (ConductivityField, FemSystem, assemble_system,
                             compute_sensitivity, current_density, solve_forward)
from balloon_eit.geometry import CatheterSpec, circle, ellipse
from balloon_eit.meshing import build_mesh, solid_cylinder_mesh
from balloon_eit.protocols import Protocol, full_protocol, radial_protocol

SIGMA = 1.6
AMP = 141e-6


@pytest.fixture(scope="module")
def cylinder():
    return solid_cylinder_mesh(10.0, 30.0, 1.2)


@pytest.fixture(scope="module")
def tiny_system(tiny_mesh):
    return FemSystem(tiny_mesh, SIGMA)


class TestAnalyticCylinder:
    def test_transfer_resistance(self, cylinder):
        system = FemSystem(cylinder, SIGMA, contact_impedance=1e-6)
        x = system.solve_pair((1, 2))
        r_fem = x[cylinder.n_nodes] - x[cylinder.n_nodes + 1]
        r_true = 0.030 / (SIGMA * math.pi * 0.010 ** 2)
        assert abs(r_fem - r_true) / r_true < 0.01

    def test_uniform_current_density(self, cylinder):
        system = FemSystem(cylinder, SIGMA, contact_impedance=1e-6)
        cd = system.current_density((1, 2), AMP)
        cd_true = AMP / (math.pi * 0.010 ** 2)
        assert np.abs(cd - cd_true).max() / cd_true < 0.02

    def test_doubling_sigma_leaves_cd_unchanged(self, cylinder):
        a = FemSystem(cylinder, SIGMA, 1e-6).current_density((1, 2), AMP)
        b = FemSystem(cylinder, 2 * SIGMA, 1e-6).current_density((1, 2), AMP)
        assert np.allclose(a, b, rtol=1e-9)


class TestSystemMatrix:
    def test_symmetric_and_sized(self, tiny_mesh):
        A = assemble_system(tiny_mesh, SIGMA)
        n = tiny_mesh.n_nodes + tiny_mesh.n_electrodes
        assert A.shape == (n, n)
        assert abs(A - A.T).max() < 1e-12

    def test_singular_on_constants(self, tiny_mesh):
        A = assemble_system(tiny_mesh, SIGMA)
        ones = np.ones(A.shape[0])
        assert np.abs(A @ ones).max() < 1e-12 * np.abs(A.diagonal()).max()

    def test_node_coupling_follows_element_adjacency(self, tiny_mesh):
        A = assemble_system(tiny_mesh, SIGMA).tocsr()
        neighbours = {}
        for el in tiny_mesh.elements:
            for a in el:
                neighbours.setdefault(int(a), set()).update(int(b) for b in el)
        boundary_nodes = set()
        for faces in tiny_mesh.electrodes:
            boundary_nodes.update(int(v) for v in np.asarray(faces).ravel())
        rng = np.random.default_rng(0)
        for node in rng.choice(tiny_mesh.n_nodes, size=20, replace=False):
            row = A.getrow(int(node))
            cols = set(int(c) for c in row.indices if c < tiny_mesh.n_nodes)
            allowed = neighbours[int(node)]
            if int(node) in boundary_nodes:
                for faces in tiny_mesh.electrodes:
                    arr = np.asarray(faces)
                    hit = arr[np.any(arr == node, axis=1)]
                    allowed = allowed | set(int(v) for v in hit.ravel())
            assert cols <= allowed

    def test_invalid_parameters_rejected(self, tiny_mesh):
        with pytest.raises(ParameterError):
            FemSystem(tiny_mesh, -1.0)
        with pytest.raises(ParameterError):
            FemSystem(tiny_mesh, SIGMA, contact_impedance=0.0)
        with pytest.raises(ParameterError):
            ConductivityField(np.array([1.0, -2.0]))
        field = ConductivityField(np.ones(3))
        with pytest.raises(ParameterError):
            field.check_mesh(tiny_mesh)


class TestForward:
    def test_rotational_symmetry(self, circ25_mesh):
        frame = solve_forward(circ25_mesh, SIGMA, radial_protocol(), AMP)
        spread = np.ptp(frame.voltages) / abs(frame.voltages.mean())
        assert spread < 1e-9

    def test_minor_axis_reads_higher(self, default_catheter):
        mesh = build_mesh(ellipse(25.0, 0.6), default_catheter, 1.5)
        frame = solve_forward(mesh, SIGMA, radial_protocol(), AMP)
        v = frame.voltages
        minor = 0.5 * (v[2] + v[6])
        major = 0.5 * (v[0] + v[4])
        assert minor > major

    def test_conductivity_scaling_with_negligible_contact(self, tiny_mesh):
        # Exact 1/c scaling holds for the Laplace problem; the contact layer
        # adds an O(z) correction, so the check runs at vanishing impedance.
        base = FemSystem(tiny_mesh, SIGMA, contact_impedance=1e-12)
        double = FemSystem(tiny_mesh, 2 * SIGMA, contact_impedance=1e-12)
        va = base.frame(radial_protocol(), AMP).voltages
        vb = double.frame(radial_protocol(), AMP).voltages
        assert np.allclose(2 * vb, va, rtol=1e-6)

    def test_reciprocity(self, tiny_system):
        proto = full_protocol()
        v = tiny_system.frame(proto, AMP).voltages
        v_swapped = tiny_system.frame(proto.swapped(), AMP).voltages
        assert np.all(np.abs(v - v_swapped) <= 1e-3 * np.abs(v))

    def test_charge_conservation(self, tiny_system):
        x = tiny_system.solve_pair((3, 11))
        currents = tiny_system.electrode_currents(x, AMP)
        assert abs(currents.sum()) < 1e-9 * AMP
        assert currents[2] == pytest.approx(AMP, rel=1e-9)
        assert currents[10] == pytest.approx(-AMP, rel=1e-9)

    def test_deterministic(self, tiny_mesh):
        a = solve_forward(tiny_mesh, SIGMA, radial_protocol(), AMP).voltages
        b = solve_forward(tiny_mesh, SIGMA, radial_protocol(), AMP).voltages
        assert np.array_equal(a, b)

    def test_forward_solution_grounding(self, tiny_system):
        sol = tiny_system.forward_solution(radial_protocol(), AMP)
        assert sol.node_potentials.shape == (8, tiny_system.n_nodes)
        assert sol.electrode_potentials.shape == (8, 16)
        # zero-mean electrode potentials per injection (grounding convention)
        assert np.abs(sol.electrode_potentials.mean(axis=1)).max() < 1e-15

    def test_unknown_electrode_rejected(self, tiny_system):
        bad = Protocol("bad", ((1, 99, 2, 10),))
        with pytest.raises(ParameterError):
            tiny_system.frame(bad, AMP)

    def test_bad_amplitude_rejected(self, tiny_system):
        with pytest.raises(ParameterError):
            tiny_system.frame(radial_protocol(), 0.0)

    def test_cg_path_matches_direct(self, tiny_mesh):
        direct = FemSystem(tiny_mesh, SIGMA)
        iterative = FemSystem(tiny_mesh, SIGMA, direct_limit=0)
        va = direct.frame(radial_protocol(), AMP).voltages
        vb = iterative.frame(radial_protocol(), AMP).voltages
        assert np.allclose(va, vb, rtol=1e-7)

    @pytest.mark.slow
    def test_refinement_changes_voltages_below_one_percent(self, default_catheter):
        coarse = build_mesh(circle(20.0), default_catheter, 1.5)
        fine = build_mesh(circle(20.0), default_catheter, 0.75)
        va = solve_forward(coarse, SIGMA, radial_protocol(), AMP).voltages
        vb = solve_forward(fine, SIGMA, radial_protocol(), AMP).voltages
        assert np.abs(va - vb).max() / np.abs(vb).max() < 0.01


class TestSensitivity:
    def test_matches_finite_differences(self, tiny_mesh):
        proto = radial_protocol()
        J = compute_sensitivity(tiny_mesh, SIGMA, proto, AMP)
        rng = np.random.default_rng(42)
        sigma = np.full(tiny_mesh.n_elements, SIGMA)
        for _ in range(6):
            m = int(rng.integers(0, len(proto)))
            e = int(rng.integers(0, tiny_mesh.n_elements))
            d = SIGMA * 1e-3
            up, down = sigma.copy(), sigma.copy()
            up[e] += d
            down[e] -= d
            vp = solve_forward(tiny_mesh, up, proto, AMP).voltages[m]
            vm = solve_forward(tiny_mesh, down, proto, AMP).voltages[m]
            fd = (vp - vm) / (2 * d)
            assert abs(J[m, e] - fd) <= 1e-3 * max(abs(fd), 1e-18)

    def test_rotational_row_symmetry(self, circ25_mesh):
        proto = radial_protocol()
        sub = Protocol("pair", (proto[0], proto[1]))
        J = compute_sensitivity(circ25_mesh, SIGMA, sub, AMP)
        nt = len(circ25_mesh.theta)
        shift = nt // 8
        nlev = len(circ25_mesh.fractions)
        ntri = 2 * nt * (nlev - 1)
        nz = len(circ25_mesh.z_planes) - 1
        perm = np.empty(circ25_mesh.n_elements, dtype=int)
        tri = np.arange(ntri)
        quad = tri // 2
        t = tri % 2
        level = quad // nt
        station = quad % nt
        tri2 = (level * nt + (station + shift) % nt) * 2 + t
        for k in range(nz):
            base = k * ntri * 3
            for s in range(3):
                perm[base + tri * 3 + s] = base + tri2 * 3 + s
        # row 0 maps onto row 1 after rotating elements one electrode pitch
        assert np.allclose(J[0], J[1][perm], rtol=1e-6, atol=1e-12 * np.abs(J).max())

    def test_far_elements_nearly_invisible(self, default_catheter):
        cath = CatheterSpec(ring_spacing=10.0, shaft_length=60.0)
        mesh = build_mesh(circle(20.0), cath, 1.8)
        sub = Protocol("one", (radial_protocol()[0],))
        J = compute_sensitivity(mesh, SIGMA, sub, AMP)[0]
        z = mesh.element_centroids()[:, 2]
        z1, z2 = cath.ring_z()
        far = np.abs(z - 0.5 * (z1 + z2)) > 0.5 * (z2 - z1) + 15.0
        assert far.any()
        assert np.abs(J[far]).max() < 0.01 * np.abs(J).max()


class TestCurrentDensity:
    def test_concentrates_near_injection_azimuth(self, circ25_mesh):
        cd = current_density(circ25_mesh, SIGMA, (1, 9), AMP)
        centroid = circ25_mesh.element_centroids()[int(np.argmax(cd))]
        azimuth = math.degrees(math.atan2(centroid[1], centroid[0]))
        assert abs(azimuth) < 30.0
