import math

import numpy as np
import pytest

from balloon_eit.errors import GeometryError
from balloon_eit.fem import FemSystem
from balloon_eit.metrics import (mid_slice_elements, minimal_angular_window,
                                 outer_slice_elements, slice_metrics)
from balloon_eit.protocols import Protocol, radial_protocol


class TestMinimalWindow:
    def test_tight_cluster(self):
        az = np.radians([10, 12, 14, 15])
        assert math.degrees(minimal_angular_window(az, 0.99)) == pytest.approx(5.0)

    def test_cluster_across_wraparound(self):
        az = np.radians([355, 358, 2, 5])
        assert math.degrees(minimal_angular_window(az, 0.99)) == pytest.approx(10.0)

    def test_coverage_drops_outliers(self):
        az = np.radians(np.concatenate([np.linspace(0, 10, 99), [180.0]]))
        w = math.degrees(minimal_angular_window(az, 0.99))
        assert w == pytest.approx(10.0)

    def test_uniform_spread_spans_circle(self):
        az = np.linspace(0, 2 * np.pi, 100, endpoint=False)
        w = math.degrees(minimal_angular_window(az, 0.99))
        assert w > 350.0

    def test_empty_and_single(self):
        assert minimal_angular_window(np.array([]), 0.99) == 0.0
        assert minimal_angular_window(np.array([1.0]), 0.99) == 0.0


class TestSliceSelection:
    def test_mid_slice_band(self, tiny_mesh, small_catheter):
        ids = mid_slice_elements(tiny_mesh, 2.0)
        assert len(ids) > 0
        z = tiny_mesh.element_centroids()[ids, 2]
        z_mid = 0.5 * sum(small_catheter.ring_z())
        assert np.all(np.abs(z - z_mid) <= 1.0 + 1e-9)

    def test_outer_elements_hug_the_wall(self, tiny_mesh, small_catheter):
        ids = mid_slice_elements(tiny_mesh, 2.0)
        outer = outer_slice_elements(tiny_mesh, ids, 0.9)
        cen = tiny_mesh.element_centroids()[outer]
        r = np.hypot(cen[:, 0], cen[:, 1])
        assert np.all(r >= 0.9 * 7.0 - 1e-9)

    def test_empty_slice_raises(self, tiny_mesh):
        cd = np.ones(tiny_mesh.n_elements)
        with pytest.raises(GeometryError):
            slice_metrics(cd, cd[None, :], tiny_mesh, slice_thickness=1e-9)


class TestSliceMetrics:
    def test_synthetic_concentrated_current(self, tiny_mesh):
        # Current confined to a 30 degree wedge must give a small CD_theta.
        cen = tiny_mesh.element_centroids()
        az = np.degrees(np.arctan2(cen[:, 1], cen[:, 0]))
        cd = np.where(np.abs(az) < 15.0, 1.0, 1e-6)
        j = np.ones((1, tiny_mesh.n_elements))
        m = slice_metrics(cd, j, tiny_mesh)
        assert m.cd_theta <= 31.0

    def test_uniform_current_spans_circle(self, tiny_mesh):
        cd = np.ones(tiny_mesh.n_elements)
        j = np.ones((1, tiny_mesh.n_elements))
        m = slice_metrics(cd, j, tiny_mesh)
        assert m.cd_theta > 300.0

    def test_jwall_volume_standardisation(self, tiny_mesh):
        # Rows proportional to element volume have unit sensitivity density,
        # so every row's J_wall equals the mean outer-element volume.
        vol = tiny_mesh.element_volumes()
        j = np.vstack([vol, 2 * vol])
        cd = np.ones(tiny_mesh.n_elements)
        m = slice_metrics(cd, j, tiny_mesh)
        ids = mid_slice_elements(tiny_mesh, 2.0)
        outer = outer_slice_elements(tiny_mesh, ids, 0.9)
        vbar = vol[outer].mean()
        assert m.j_wall[0] == pytest.approx(vbar)
        assert m.j_wall[1] == pytest.approx(2 * vbar)

    def test_real_injection_localised(self, tiny_mesh):
        system = FemSystem(tiny_mesh, 1.6)
        cd = system.current_density((1, 9), 141e-6)
        sub = Protocol("one", (radial_protocol()[0],))
        j = system.jacobian(sub, 141e-6)
        m = slice_metrics(cd, j, tiny_mesh)
        assert 0 < m.cd_theta < 360
        assert m.j_wall[0] > 0
        assert m.n_qualifying <= m.n_slice_elements
