import numpy as np
import pytest

from balloon_eit.geometry import CatheterSpec, circle
from balloon_eit.meshing import MeshPlan, axial_planes, build_mesh


@pytest.fixture(scope="session")
def small_catheter():
    """Short catheter keeping unit-test meshes a few thousand elements."""
    return CatheterSpec(ring_spacing=6.0, shaft_length=20.0)


@pytest.fixture(scope="session")
def tiny_plan(small_catheter):
    """Coarse frozen grid: electrode-edge stations only, one radial split."""
    delta = small_catheter.electrode_half_arc()
    theta = []
    for p in range(8):
        c = p * np.pi / 4
        theta.extend([c - delta, c + delta])
    theta = np.sort(np.mod(np.array(theta), 2 * np.pi))
    fractions = np.array([0.0, 0.45, 1.0])
    z = axial_planes(circle(14.0), small_catheter, 2.5)
    return MeshPlan(theta=theta, fractions=fractions, z_planes=z)


@pytest.fixture(scope="session")
def tiny_mesh(small_catheter, tiny_plan):
    mesh = build_mesh(circle(14.0), small_catheter, 1.5, plan=tiny_plan)
    assert mesh.n_elements <= 5000
    return mesh


@pytest.fixture(scope="session")
def default_catheter():
    return CatheterSpec()


@pytest.fixture(scope="session")
def circ25_mesh(default_catheter):
    return build_mesh(circle(25.0), default_catheter, 1.5)
