"""Configuration-driven replay of the synthetic experiments.

Scenarios
---------
ellipticity : balloon inflated in ten steps inside a circular lumen and in
    elliptical variants at two rotations; frames are calibrated against the
    free-space inflation and summarised as CV curves; absolute and PTD
    images are reconstructed at full inflation.
lesion      : the same inflation series in an empty tube and in one carrying
    a crescent occlusion.
dilation    : an indenter pressed 4 mm into a compliant lumen retracts at
    constant speed while full-protocol frames stream at the configured frame
    rate; TD/PTD images and thresholded cross-section estimates are emitted
    per frame.
spacing_sweep / detectability_sweep : thin wrappers over the sweep module.

Config files are flat `key = value` text with a mandatory version key::

    config_version = 1
    scenario = ellipticity
    lumen_diameter_mm = 25
    aspect_ratios = 0.75, 0.5

Unknown keys are rejected.  Every artifact lands in `out_dir` and is listed
in manifest.txt together with the sha256 of the config file.
"""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, ExperimentError, ParameterError,
                     ProtocolMismatchError)
from .fem import FemSystem, Frame
from .geometry import BalloonBoundary, CatheterSpec, LumenProfile, circle, ellipse
from .inverse import (ReconMesh, approximate_csa, build_recon_mesh,
                      reconstruct_absolute, reconstruct_difference,
                      sector_area_deficit)
from .meshing import build_mesh, plan_mesh
from .noise import NoiseModel, add_noise, detection_threshold
from .protocols import Protocol, full_protocol, radial_protocol
from .sweeps import (save_detectability_csv, save_spacing_csv,
                     sweep_detectability, sweep_spacing)
from .vtk_io import write_mesh, write_vtk

SCENARIOS = ("ellipticity", "lesion", "dilation", "spacing_sweep", "detectability_sweep")

CONFIG_VERSION = 1

# key -> (type, default); None default means scenario decides or required.
_SCHEMA = {
    "config_version": (int, None),
    "scenario": (str, None),
    "seed": (int, 0),
    "out_dir": (str, None),
    "resolution_mm": (float, 1.5),
    "snr_db": (float, 60.0),
    "noise_reference": (str, "per-measurement"),
    "current_a": (float, 141e-6),
    "contact_impedance": (float, 1e-3),
    "protocol": (str, "full"),
    "lumen_diameter_mm": (float, None),
    "aspect_ratios": (str, "0.75, 0.5"),
    "rotations_deg": (str, "0, 90"),
    "inflation_steps": (int, 10),
    "balloon_start_diameter_mm": (float, 8.0),
    "balloon_end_diameter_mm": (float, None),
    "crescent_depth_mm": (float, 6.0),
    "crescent_extent_deg": (float, 120.0),
    "crescent_azimuth_deg": (float, 90.0),
    "indent_depth_mm": (float, 4.0),
    "indent_azimuth_deg": (float, 90.0),
    "indent_extent_deg": (float, 90.0),
    "indent_halfwidth_mm": (float, 6.0),
    "indent_speed_mm_s": (float, 1.0),
    "frame_rate_hz": (float, 1.5),
    "l_values_mm": (str, "5, 10, 15, 20, 25, 30, 35, 40"),
    "d_min_mm": (float, 12.0),
    "d_max_mm": (float, 30.0),
    "d_step_mm": (float, 1.0),
    "f_min": (float, 0.5),
    "f_max": (float, 1.0),
    "f_step": (float, 0.05),
    "jobs": (int, 0),
}

_DEFAULT_LUMEN = {"ellipticity": 25.0, "lesion": 26.0, "dilation": 24.0}


@dataclass
class ExperimentConfig:
    scenario: str
    out_dir: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    source_text: str = ""

    def __getitem__(self, key):
        return self.params[key]

    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def floats(self, key) -> list:
        return [float(v) for v in str(self.params[key]).split(",") if v.strip()]


def parse_config(path, out_dir_override: str | None = None,
                 seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate a flat key=value experiment config file."""
    with open(path) as fh:
        text = fh.read()
    values = {}
    for ln_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln_no}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {ln_no}: unknown key {key!r}")
        typ, _ = _SCHEMA[key]
        try:
            values[key] = typ(val) if typ is not str else val
        except ValueError as exc:
            raise ConfigError(f"line {ln_no}: bad value for {key}: {exc}") from exc

    if values.get("config_version") != CONFIG_VERSION:
        raise ConfigError(f"config_version must be {CONFIG_VERSION}")
    scenario = values.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")

    params = {k: d for k, (_, d) in _SCHEMA.items() if d is not None}
    params.update(values)
    if scenario in _DEFAULT_LUMEN:
        params.setdefault("lumen_diameter_mm", _DEFAULT_LUMEN[scenario])
        params.setdefault("balloon_end_diameter_mm", params["lumen_diameter_mm"] + 2.0)
    out_dir = out_dir_override or values.get("out_dir")
    if not out_dir:
        raise ConfigError("out_dir must be set in the config or on the command line")
    seed = seed_override if seed_override is not None else params.get("seed", 0)
    return ExperimentConfig(scenario=scenario, out_dir=out_dir, seed=int(seed),
                            params=params, source_text=text)


# ---------------------------------------------------------------------------
# Calibration and coefficient of variation
# ---------------------------------------------------------------------------

@dataclass
class CalibrationSet:
    """Paired free-space and in-lumen inflation frames, index-aligned."""

    baseline: list
    measured: list

    def __post_init__(self):
        if len(self.baseline) != len(self.measured):
            raise ProtocolMismatchError("baseline and measured step counts differ")
        for b, m in zip(self.baseline, self.measured):
            if tuple(b.protocol.rows) != tuple(m.protocol.rows):
                raise ProtocolMismatchError("baseline and measured protocols differ")


def calibrate(cal: CalibrationSet) -> list:
    """Per step, per measurement: measured minus free-space baseline."""
    out = []
    for b, m in zip(cal.baseline, cal.measured):
        out.append(m.copy_with(m.voltages - b.voltages, calibrated=True))
    return out


def coefficient_of_variation(frames, eps: float = 1e-300) -> np.ndarray:
    """std/|mean| of each frame's measurement vector; nan when mean is zero."""
    out = np.empty(len(frames))
    for i, fr in enumerate(frames):
        v = fr.voltages if isinstance(fr, Frame) else np.asarray(fr, dtype=float)
        if len(v) < 2:
            raise ParameterError("coefficient of variation needs at least 2 measurements")
        mean = abs(float(np.mean(v)))
        out[i] = float(np.std(v)) / mean if mean > eps else float("nan")
    return out


def cv_versus_expected(measured, expected) -> np.ndarray:
    """std of (measured - expected)/expected per step (deviation variant)."""
    out = np.empty(len(measured))
    for i, (m, e) in enumerate(zip(measured, expected)):
        vm = m.voltages if isinstance(m, Frame) else np.asarray(m, dtype=float)
        ve = e.voltages if isinstance(e, Frame) else np.asarray(e, dtype=float)
        out[i] = float(np.std((vm - ve) / ve))
    return out


# ---------------------------------------------------------------------------
# Scenario machinery
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{x:.12e}"


def radial_row_indices(protocol: Protocol) -> list:
    """Indices of the rows of `protocol` matching the radial protocol."""
    lookup = {row: i for i, row in enumerate(protocol.rows)}
    try:
        return [lookup[row] for row in radial_protocol().rows]
    except KeyError as exc:
        raise ProtocolMismatchError("protocol does not embed the radial rows") from exc


def radial_view(frame: Frame, indices) -> Frame:
    """The radial-protocol slice of a full-protocol frame."""
    return Frame(radial_protocol(), frame.voltages[indices], frame.current_a,
                 dict(frame.meta))


class _Runner:
    """Shared simulate/write helpers for one experiment run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.catheter = CatheterSpec()
        self.resolution = float(cfg["resolution_mm"])
        self.noise = NoiseModel(snr_db=float(cfg["snr_db"]), seed=cfg.seed,
                                reference=str(cfg["noise_reference"]))
        if cfg["protocol"] not in ("full", "radial"):
            raise ConfigError("protocol must be 'full' or 'radial'")
        self.protocol = full_protocol() if cfg["protocol"] == "full" else radial_protocol()
        self.amplitude = float(cfg["current_a"])
        self.z_contact = float(cfg["contact_impedance"])
        self.paths: list[str] = []
        os.makedirs(cfg.out_dir, exist_ok=True)
        self._recon_mesh: ReconMesh | None = None
        self._mesh_plan = None

    # -- simulation ---------------------------------------------------------

    def mesh_for(self, boundary):
        # Small early-inflation balloons need a finer size than the default.
        limit = (2.0 * boundary.max_radius() - self.catheter.shaft_diameter) / 4.0
        res = min(self.resolution, 0.9 * limit)
        return build_mesh(boundary, self.catheter, res, plan=self._mesh_plan)

    def simulate(self, boundary, stream: int, noisy: bool = True, **meta) -> Frame:
        mesh = self.mesh_for(boundary)
        system = FemSystem(mesh, contact_impedance=self.z_contact)
        frame = system.frame(self.protocol, self.amplitude, **meta)
        if noisy:
            frame = add_noise(frame, self.noise, stream=stream)
        return frame

    def recon_mesh(self) -> ReconMesh:
        if self._recon_mesh is None:
            self._recon_mesh = build_recon_mesh(
                self.catheter, protocol=self.protocol,
                amplitude=self.amplitude, contact_impedance=self.z_contact)
            write_mesh(self.path("recon_mesh.vtk"),
                       self.path("recon_mesh.electrodes.txt"),
                       self._recon_mesh.mesh)
        return self._recon_mesh

    # -- artifact writing ----------------------------------------------------

    def path(self, name: str) -> str:
        p = os.path.join(self.cfg.out_dir, name)
        self.paths.append(p)
        return p

    def write_frames_csv(self, name: str, rows) -> None:
        """rows: iterable of (label, step, frame)."""
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "step", "row", "inject_pos", "inject_neg",
                        "meas_pos", "meas_neg", "voltage_v"])
            for label, step, frame in rows:
                for r, (ip, im, mp, mm) in enumerate(frame.protocol):
                    w.writerow([label, step, r, ip, im, mp, mm, _fmt(frame.voltages[r])])

    def write_calibrated_csv(self, name: str, entries) -> None:
        """entries: (label, step, measured, baseline, calibrated) radial vectors."""
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "step", "radial_row", "measured_v", "baseline_v",
                        "calibrated_v", "dv_limit_v"])
            for label, step, vm, vb, vc, lim in entries:
                for r in range(len(vm)):
                    w.writerow([label, step, r + 1, _fmt(vm[r]), _fmt(vb[r]),
                                _fmt(vc[r]), _fmt(lim)])

    def write_cv_csv(self, name: str, entries) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "step", "cv_calibrated", "cv_vs_expected"])
            for label, step, cv_plain, cv_exp in entries:
                w.writerow([label, step, _fmt(cv_plain), _fmt(cv_exp)])

    def write_recon(self, stem: str, recon, rm: ReconMesh) -> None:
        vtk = self.path(stem + ".vtk")
        write_vtk(vtk, rm.mesh, cell_fields={"value": recon.values},
                  title=f"{recon.mode} reconstruction")
        with open(self.path(stem + ".csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["element", "value", "mode", "lambda"])
            for e, v in enumerate(recon.values):
                w.writerow([e, _fmt(v), recon.mode, _fmt(recon.lam)])

    def write_lambda_csv(self, name: str, entries) -> None:
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label", "lambda", "cv_score"])
            for label, lam, curve in entries:
                if curve is None:
                    w.writerow([label, _fmt(lam), ""])
                else:
                    grid, scores = curve
                    for g, s in zip(grid, scores):
                        w.writerow([label, _fmt(g), _fmt(s)])
                    w.writerow([label + "_selected", _fmt(lam), ""])

    def write_manifest(self) -> str:
        manifest = os.path.join(self.cfg.out_dir, "manifest.txt")
        with open(manifest, "w") as fh:
            fh.write("# experiment manifest v1\n")
            fh.write(f"scenario {self.cfg.scenario}\n")
            fh.write(f"config_hash {self.cfg.config_hash()}\n")
            for p in self.paths:
                fh.write(f"file {os.path.relpath(p, self.cfg.out_dir)}\n")
        return manifest


def _inflation_radii(cfg: ExperimentConfig) -> np.ndarray:
    start = 0.5 * float(cfg["balloon_start_diameter_mm"])
    end = 0.5 * float(cfg["balloon_end_diameter_mm"])
    steps = int(cfg["inflation_steps"])
    if steps < 1:
        raise ConfigError("inflation_steps must be at least 1")
    return start + (end - start) * np.arange(1, steps + 1) / steps


class _PlanDonor:
    """Stand-in profile carrying the union of feature angles of a scenario.

    Calibration subtracts frames simulated on different boundaries, so every
    boundary in a scenario is meshed on one topology; otherwise per-row
    discretisation differences leak into the calibrated microvolts.
    """

    def __init__(self, profiles, radius: float):
        self._profiles = list(profiles)
        self._radius = radius

    def max_radius(self) -> float:
        return self._radius

    def min_radius(self) -> float:
        return min(p.min_radius() for p in self._profiles)

    def depends_on_z(self) -> bool:
        return False

    def feature_angles(self) -> list:
        out = []
        for p in self._profiles:
            out.extend(p.feature_angles())
        return sorted(out)

    def feature_heights(self) -> list:
        return []


def _run_inflation_scenario(runner: _Runner, profiles: dict) -> dict:
    """Simulate measured/baseline series per profile; returns frames per label.

    The free-space baseline series is shared by every profile (one balloon,
    one trajectory), and all boundaries share one mesh topology.
    """
    cfg = runner.cfg
    radii = _inflation_radii(cfg)
    donor = _PlanDonor(profiles.values(), max(float(radii.max()),
                                              *(p.max_radius() for p in profiles.values())))
    runner._mesh_plan = plan_mesh(donor, runner.catheter, runner.resolution)
    baselines = []
    for s, r in enumerate(radii):
        baselines.append(runner.simulate(circle(2 * r), stream=900000 + s,
                                         label="free-space", step=s))
    series = {}
    for p_idx, (label, profile) in enumerate(sorted(profiles.items())):
        frames = []
        for s, r in enumerate(radii):
            boundary = BalloonBoundary(profile, r)
            frames.append(runner.simulate(boundary, stream=p_idx * 1000 + s,
                                          label=label, step=s))
        series[label] = frames
    return {"radii": radii, "baselines": baselines, "series": series}


def _emit_inflation_outputs(runner: _Runner, data: dict, cases: dict) -> None:
    baselines = data["baselines"]
    ridx = radial_row_indices(runner.protocol)
    frame_rows = [("free-space", s, f) for s, f in enumerate(baselines)]
    cal_rows, cv_rows = [], []
    lambda_entries = []

    for label, frames in sorted(data["series"].items()):
        frame_rows.extend((label, s, f) for s, f in enumerate(frames))
        cal = calibrate(CalibrationSet(baseline=baselines, measured=frames))
        cal_radial = [c.voltages[ridx] for c in cal]
        meas_radial = [f.voltages[ridx] for f in frames]
        base_radial = [b.voltages[ridx] for b in baselines]
        cv_plain = coefficient_of_variation(cal_radial)
        cv_exp = cv_versus_expected(meas_radial, base_radial)
        for s in range(len(frames)):
            # Threshold against the amplitudes actually analysed (radial rows).
            lim = detection_threshold(radial_view(frames[s], ridx), runner.noise)
            cal_rows.append((label, s, meas_radial[s], base_radial[s],
                             cal_radial[s], lim))
            cv_rows.append((label, s, cv_plain[s], cv_exp[s]))

        if runner.protocol.name == "full":
            rm = runner.recon_mesh()
            last = frames[-1]
            recon_abs = reconstruct_absolute(last, rm)
            runner.write_recon(f"recon_{label}_abs", recon_abs, rm)
            ref = runner.simulate(cases[label].reference_boundary, stream=0,
                                  noisy=False, simulated_reference=True)
            recon_ptd = reconstruct_difference(last, ref, rm, mode="PTD")
            runner.write_recon(f"recon_{label}_ptd", recon_ptd, rm)
            lambda_entries.append((label, recon_ptd.lam,
                                   (recon_ptd.diagnostics.get("cv_lambdas"),
                                    recon_ptd.diagnostics.get("cv_scores"))
                                   if "cv_lambdas" in recon_ptd.diagnostics else None))

    runner.write_frames_csv("voltages.csv", frame_rows)
    runner.write_calibrated_csv("calibrated.csv", cal_rows)
    runner.write_cv_csv("cv.csv", cv_rows)
    if lambda_entries:
        runner.write_lambda_csv("lambda_cv.csv", lambda_entries)


@dataclass
class _ProfileCase:
    profile: LumenProfile
    reference_boundary: LumenProfile  # unobstructed lumen for PTD


def _run_ellipticity(runner: _Runner) -> None:
    cfg = runner.cfg
    D = float(cfg["lumen_diameter_mm"])
    unobstructed = circle(D)
    cases = {"circular": _ProfileCase(unobstructed, unobstructed)}
    for f in cfg.floats("aspect_ratios"):
        for rot in cfg.floats("rotations_deg"):
            label = f"f{f:g}_rot{rot:g}"
            cases[label] = _ProfileCase(ellipse(D, f, rotation=rot), unobstructed)
    profiles = {k: v.profile for k, v in cases.items()}
    data = _run_inflation_scenario(runner, profiles)
    _emit_inflation_outputs(runner, data, cases)


def _run_lesion(runner: _Runner) -> None:
    cfg = runner.cfg
    D = float(cfg["lumen_diameter_mm"])
    unobstructed = circle(D)
    crescent = LumenProfile(
        kind="crescent", major_diameter=D,
        crescent_depth=float(cfg["crescent_depth_mm"]),
        crescent_angular_extent=float(cfg["crescent_extent_deg"]),
        crescent_azimuth=float(cfg["crescent_azimuth_deg"]),
    )
    cases = {"empty": _ProfileCase(unobstructed, unobstructed),
             "lesion": _ProfileCase(crescent, unobstructed)}
    profiles = {k: v.profile for k, v in cases.items()}
    data = _run_inflation_scenario(runner, profiles)
    _emit_inflation_outputs(runner, data, cases)


def _run_dilation(runner: _Runner) -> None:
    cfg = runner.cfg
    if runner.protocol.name != "full":
        raise ConfigError("dilation imaging needs the full protocol")
    D = float(cfg["lumen_diameter_mm"])
    depth0 = float(cfg["indent_depth_mm"])
    speed = float(cfg["indent_speed_mm_s"])
    rate = float(cfg["frame_rate_hz"])
    if speed <= 0 or rate <= 0:
        raise ConfigError("indent_speed_mm_s and frame_rate_hz must be positive")
    zc = 0.5 * runner.catheter.domain_length()

    def profile_at(depth: float) -> LumenProfile:
        return LumenProfile(
            kind="indented", major_diameter=D, indent_depth=depth,
            indent_azimuth=float(cfg["indent_azimuth_deg"]),
            indent_angular_extent=float(cfg["indent_extent_deg"]),
            indent_axial_halfwidth=float(cfg["indent_halfwidth_mm"]),
            indent_axial_center=zc,
        )

    # One topology for the whole series (depth never changes the grids).
    runner._mesh_plan = plan_mesh(profile_at(depth0), runner.catheter, runner.resolution)
    times = []
    t = 0.0
    while True:
        times.append(round(t, 9))
        if t * speed >= depth0:
            break
        t += 1.0 / rate
    depths = [max(0.0, depth0 - speed * tk) for tk in times]

    frames = [runner.simulate(profile_at(d), stream=2000 + k, step=k,
                              depth_mm=d, time_s=times[k])
              for k, d in enumerate(depths)]
    runner._mesh_plan = None
    reference_td = frames[0]  # maximum indentation is the reference state
    rm = runner.recon_mesh()
    ref_ptd = runner.simulate(circle(D), stream=0, noisy=False,
                              simulated_reference=True)

    runner.write_frames_csv("voltages.csv", [("dilation", k, f) for k, f in enumerate(frames)])
    csa_path = runner.path("csa.csv")
    lambda_entries = []
    with open(csa_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["frame", "time_s", "depth_mm", "csa_mm2", "retained_elements",
                    "deficit_sector_deg", "deficit_mm2"])
        for k, frame in enumerate(frames):
            td = reconstruct_difference(frame, reference_td, rm, mode="TD")
            ptd = reconstruct_difference(frame, ref_ptd, rm, mode="PTD")
            runner.write_recon(f"recon_frame{k:02d}_td", td, rm)
            runner.write_recon(f"recon_frame{k:02d}_ptd", ptd, rm)
            lambda_entries.append((f"frame{k:02d}", ptd.lam,
                                   (ptd.diagnostics["cv_lambdas"],
                                    ptd.diagnostics["cv_scores"])
                                   if "cv_lambdas" in ptd.diagnostics else None))
            csa = approximate_csa(ptd, rm)
            deficits = sector_area_deficit(csa, rm)
            worst = int(np.argmax(deficits))
            w.writerow([k, _fmt(times[k]), _fmt(depths[k]), _fmt(csa.area_mm2),
                        len(csa.retained), _fmt(worst * 360.0 / len(deficits)),
                        _fmt(deficits[worst])])
    runner.write_lambda_csv("lambda_cv.csv", lambda_entries)


def _run_spacing(runner: _Runner) -> None:
    cfg = runner.cfg
    jobs = int(cfg["jobs"]) or None
    cases = sweep_spacing(cfg.floats("l_values_mm"),
                          target_size=runner.resolution,
                          amplitude=runner.amplitude,
                          contact_impedance=runner.z_contact,
                          jobs=jobs)
    save_spacing_csv(cases, runner.path("spacing.csv"))


def _run_detectability(runner: _Runner) -> None:
    cfg = runner.cfg
    jobs = int(cfg["jobs"]) or None
    d_grid = np.arange(float(cfg["d_min_mm"]), float(cfg["d_max_mm"]) + 1e-9,
                       float(cfg["d_step_mm"]))
    f_grid = np.round(np.arange(float(cfg["f_min"]), float(cfg["f_max"]) + 1e-9,
                                float(cfg["f_step"])), 10)
    result = sweep_detectability(d_grid=d_grid, f_grid=f_grid, noise=runner.noise,
                                 target_size=runner.resolution,
                                 amplitude=runner.amplitude,
                                 contact_impedance=runner.z_contact, jobs=jobs)
    for p in save_detectability_csv(result, runner.cfg.out_dir):
        runner.paths.append(p)


_RUNNERS = {
    "ellipticity": _run_ellipticity,
    "lesion": _run_lesion,
    "dilation": _run_dilation,
    "spacing_sweep": _run_spacing,
    "detectability_sweep": _run_detectability,
}


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run a scenario and return the artifact manifest (list of paths).

    On failure the partially written artifacts are still listed in the
    manifest and attached to the raised ExperimentError.
    """
    runner = _Runner(cfg)
    try:
        _RUNNERS[cfg.scenario](runner)
    except Exception as exc:
        partial = runner.write_manifest()
        raise ExperimentError(cfg.scenario, str(exc),
                              runner.paths + [partial]) from exc
    manifest = runner.write_manifest()
    return runner.paths + [manifest]
