import os

import numpy as np
import pytest

from balloon_eit.errors import ConfigError, ParameterError, ProtocolMismatchError
from balloon_eit.experiments import (CalibrationSet, calibrate,
                                     coefficient_of_variation, cv_versus_expected,
                                     parse_config, radial_row_indices,
                                     run_experiment)
from balloon_eit.fem import Frame
from balloon_eit.protocols import full_protocol, radial_protocol


def frame_of(values, protocol=None):
    protocol = protocol or radial_protocol()
    return Frame(protocol, np.asarray(values, dtype=float), 141e-6)


class TestConfigParsing:
    def write(self, tmp_path, text):
        p = tmp_path / "exp.cfg"
        p.write_text(text)
        return p

    def test_minimal_valid(self, tmp_path):
        cfg = parse_config(self.write(tmp_path, """
            config_version = 1
            scenario = ellipticity
            out_dir = results
        """))
        assert cfg.scenario == "ellipticity"
        assert cfg["lumen_diameter_mm"] == 25.0
        assert cfg["balloon_end_diameter_mm"] == 27.0
        assert cfg.floats("aspect_ratios") == [0.75, 0.5]
        assert len(cfg.config_hash()) == 64

    def test_comments_and_overrides(self, tmp_path):
        cfg = parse_config(self.write(tmp_path, """
            # comment line
            config_version = 1
            scenario = lesion   # inline comment
            lumen_diameter_mm = 26
            out_dir = somewhere
            seed = 7
        """), out_dir_override="elsewhere")
        assert cfg.out_dir == "elsewhere"
        assert cfg.seed == 7

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(self.write(tmp_path, """
                config_version = 1
                scenario = lesion
                out_dir = x
                bogus_key = 3
            """))

    def test_wrong_version_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(self.write(tmp_path, "config_version = 2\nscenario = lesion\nout_dir = x\n"))

    def test_unknown_scenario_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(self.write(tmp_path, "config_version = 1\nscenario = nope\nout_dir = x\n"))

    def test_missing_out_dir_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(self.write(tmp_path, "config_version = 1\nscenario = lesion\n"))

    def test_bad_value_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            parse_config(self.write(tmp_path, """
                config_version = 1
                scenario = lesion
                out_dir = x
                snr_db = sixty
            """))


class TestCalibration:
    def test_identical_frames_give_zero(self):
        frames = [frame_of([1e-3] * 8), frame_of([2e-3] * 8)]
        cal = calibrate(CalibrationSet(baseline=frames, measured=list(frames)))
        for c in cal:
            assert np.all(c.voltages == 0.0)

    def test_recovers_injected_difference_exactly(self):
        rng = np.random.default_rng(0)
        base = [frame_of(rng.normal(5e-3, 1e-4, 8)) for _ in range(3)]
        d = [rng.normal(0, 1e-4, 8) for _ in range(3)]
        measured = [frame_of(b.voltages + di) for b, di in zip(base, d)]
        cal = calibrate(CalibrationSet(baseline=base, measured=measured))
        for c, di in zip(cal, d):
            # exact up to the rounding of (b + d) - b itself
            assert np.abs(c.voltages - di).max() < 1e-17

    def test_step_count_mismatch_rejected(self):
        with pytest.raises(ProtocolMismatchError):
            CalibrationSet(baseline=[frame_of([1] * 8)], measured=[])

    def test_protocol_mismatch_rejected(self):
        a = frame_of([1e-3] * 8)
        b = frame_of(np.ones(136), protocol=full_protocol())
        with pytest.raises(ProtocolMismatchError):
            CalibrationSet(baseline=[a], measured=[b])


class TestCoefficientOfVariation:
    def test_identical_values_give_zero(self):
        assert coefficient_of_variation([frame_of([2e-3] * 8)])[0] == 0.0

    def test_zero_mean_is_nan_sentinel(self):
        cv = coefficient_of_variation([frame_of([1e-3, -1e-3] * 4)])
        assert np.isnan(cv[0])

    def test_basic_value(self):
        v = np.array([1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0])
        cv = coefficient_of_variation([frame_of(v)])[0]
        assert cv == pytest.approx(np.std(v) / np.mean(v))

    def test_short_frame_rejected(self):
        with pytest.raises(ParameterError):
            coefficient_of_variation([frame_of([1.0])])

    def test_versus_expected_variant(self):
        e = np.full(8, 5e-3)
        m = e * (1 + np.array([0.01, -0.01, 0.02, -0.02, 0.01, -0.01, 0.02, -0.02]))
        out = cv_versus_expected([frame_of(m)], [frame_of(e)])
        assert out[0] == pytest.approx(np.std((m - e) / e))


class TestRadialRows:
    def test_full_protocol_embeds_radial(self):
        idx = radial_row_indices(full_protocol())
        rows = [full_protocol()[i] for i in idx]
        assert tuple(rows) == radial_protocol().rows

    def test_partial_protocol_rejected(self):
        with pytest.raises(ProtocolMismatchError):
            radial_row_indices(radial_protocol().swapped())


@pytest.mark.slow
class TestCalibrationSignatures:
    def test_matching_circular_trajectory_stays_below_limit(self, tmp_path):
        # Free balloon ends exactly at the lumen wall: the circular series
        # calibrates to noise, its CV-vs-expected trace sits flat at the
        # noise floor, and the strong ellipse rises far above both.
        cfg_path = tmp_path / "e.cfg"
        cfg_path.write_text("""
            config_version = 1
            scenario = ellipticity
            seed = 2
            resolution_mm = 2.2
            protocol = radial
            lumen_diameter_mm = 25
            balloon_end_diameter_mm = 25
            aspect_ratios = 0.5
            rotations_deg = 0
            inflation_steps = 3
        """)
        out = tmp_path / "out"
        run_experiment(parse_config(cfg_path, out_dir_override=str(out)))

        rows = {}
        with open(out / "calibrated.csv") as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                rec = dict(zip(header, line.strip().split(",")))
                key = (rec["label"], int(rec["step"]))
                rows.setdefault(key, []).append(
                    (float(rec["calibrated_v"]), float(rec["dv_limit_v"])))
        for step in range(3):
            cal, lim = zip(*rows[("circular", step)])
            assert max(abs(c) for c in cal) < lim[0]
        cal, lim = zip(*rows[("f0.5_rot0", 2)])
        assert max(abs(c) for c in cal) > 5 * lim[0]
        # minor-axis rows (3 and 7) carry the voltage increase
        minor = [abs(cal[2]), abs(cal[6])]
        assert min(minor) > lim[0]

        cv = {}
        with open(out / "cv.csv") as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                rec = dict(zip(header, line.strip().split(",")))
                cv[(rec["label"], int(rec["step"]))] = float(rec["cv_vs_expected"])
        noise_floor = 1e-3
        for step in range(3):
            assert cv[("circular", step)] < 5 * noise_floor
        assert cv[("f0.5_rot0", 2)] > 3 * cv[("circular", 2)]

    def test_lesion_single_peak_vs_ellipse_double_peak(self, default_catheter):
        from balloon_eit.fem import FemSystem
        from balloon_eit.geometry import BalloonBoundary, LumenProfile, circle, ellipse
        from balloon_eit.meshing import build_mesh, plan_mesh

        proto = full_protocol()
        ridx = radial_row_indices(proto)

        class Donor:
            def __init__(self, profile, radius):
                self.profile, self.radius = profile, radius

            def max_radius(self):
                return self.radius

            def feature_angles(self):
                return self.profile.feature_angles()

            def feature_heights(self):
                return []

            def depends_on_z(self):
                return False

        def calibrated(profile, end_diameter):
            plan = plan_mesh(Donor(profile, end_diameter / 2), default_catheter, 1.8)
            meas = FemSystem(build_mesh(BalloonBoundary(profile, end_diameter / 2),
                                        default_catheter, 1.8, plan=plan)).frame(proto)
            base = FemSystem(build_mesh(circle(end_diameter),
                                        default_catheter, 1.8, plan=plan)).frame(proto)
            return (meas.voltages - base.voltages)[ridx]

        def positive_clusters(values):
            dev = values - np.median(values)
            strong = dev > 0.5 * dev.max()
            groups = 0
            for i in range(8):
                if strong[i] and not strong[i - 1]:
                    groups += 1
            return strong, groups

        lesion = calibrated(LumenProfile(kind="crescent", major_diameter=26.0), 28.0)
        strong_l, groups_l = positive_clusters(lesion)
        assert groups_l == 1          # one peak ...
        assert strong_l.sum() >= 3    # ... spread across several measurements

        ell = calibrated(ellipse(25.0, 0.5), 27.0)
        strong_e, groups_e = positive_clusters(ell)
        assert groups_e == 2          # narrower double peak
        assert strong_e.sum() < strong_l.sum() + 2
        # the two ellipse peak groups sit antipodally (minor axis has two ends)
        rows = np.where(strong_e)[0]
        assert all(strong_e[(r + 4) % 8] for r in rows)


@pytest.mark.slow
class TestDilationEndToEnd:
    def test_runs_and_is_deterministic(self, tmp_path):
        text = """
            config_version = 1
            scenario = dilation
            seed = 0
            resolution_mm = 2.2
            lumen_diameter_mm = 24
            indent_depth_mm = 2.0
            indent_speed_mm_s = 2.0
            frame_rate_hz = 1.0
        """
        cfg_path = tmp_path / "dilation.cfg"
        cfg_path.write_text(text)

        outputs = {}
        for run in ("a", "b"):
            out_dir = tmp_path / run
            cfg = parse_config(cfg_path, out_dir_override=str(out_dir))
            paths = run_experiment(cfg)
            assert os.path.exists(os.path.join(out_dir, "manifest.txt"))
            for p in paths:
                assert os.path.exists(p)
            csa = (out_dir / "csa.csv").read_bytes()
            volts = (out_dir / "voltages.csv").read_bytes()
            outputs[run] = (csa, volts)
        assert outputs["a"] == outputs["b"]

    def test_ellipticity_scenario_small(self, tmp_path):
        cfg_path = tmp_path / "e.cfg"
        cfg_path.write_text("""
            config_version = 1
            scenario = ellipticity
            seed = 1
            resolution_mm = 2.2
            lumen_diameter_mm = 25
            aspect_ratios = 0.75
            rotations_deg = 0
            inflation_steps = 2
        """)
        out = tmp_path / "out"
        cfg = parse_config(cfg_path, out_dir_override=str(out))
        run_experiment(cfg)
        cal = (out / "calibrated.csv").read_text().splitlines()
        assert cal[0].startswith("label,step,radial_row")
        # circular + one ellipse, 2 steps, 8 radial rows each
        assert len(cal) == 1 + 2 * 2 * 8
        cv = (out / "cv.csv").read_text().splitlines()
        assert len(cv) == 1 + 2 * 2
        for stem in ("recon_circular_abs", "recon_circular_ptd",
                     "recon_f0.75_rot0_abs", "recon_f0.75_rot0_ptd"):
            assert (out / f"{stem}.vtk").exists()
            assert (out / f"{stem}.csv").exists()
        assert (out / "lambda_cv.csv").exists()

    def test_spacing_scenario_wraps_the_sweep(self, tmp_path):
        cfg_path = tmp_path / "s.cfg"
        cfg_path.write_text("""
            config_version = 1
            scenario = spacing_sweep
            resolution_mm = 2.0
            l_values_mm = 8, 20
            jobs = 2
        """)
        cfg = parse_config(cfg_path, out_dir_override=str(tmp_path / "out"))
        run_experiment(cfg)
        lines = (tmp_path / "out" / "spacing.csv").read_text().splitlines()
        assert len(lines) == 3
        assert all(ln.endswith("ok") for ln in lines[1:])

    def test_manifest_lists_existing_files(self, tmp_path):
        cfg_path = tmp_path / "d.cfg"
        cfg_path.write_text("""
            config_version = 1
            scenario = dilation
            resolution_mm = 2.2
            indent_depth_mm = 1.0
            indent_speed_mm_s = 2.0
            frame_rate_hz = 1.0
        """)
        cfg = parse_config(cfg_path, out_dir_override=str(tmp_path / "out"))
        run_experiment(cfg)
        manifest = (tmp_path / "out" / "manifest.txt").read_text().splitlines()
        assert manifest[0].startswith("# experiment manifest")
        assert any(line.startswith("config_hash ") for line in manifest)
        files = [ln.split(" ", 1)[1] for ln in manifest if ln.startswith("file ")]
        assert files
        for rel in files:
            assert os.path.exists(tmp_path / "out" / rel)
