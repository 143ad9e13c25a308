"""Electrode-spacing and size/ellipticity detectability sweeps.

Both sweeps run the radial protocol on synthetic phantoms.  The
detectability sweep freezes one mesh topology (planned on its largest
case) across all cases so that voltage differences between neighbouring
cases carry no mesh-topology noise; every case gets its own RNG stream
derived from (seed, case index), so parallel execution order never
changes results.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import BalloonEitError
from .fem import DEFAULT_CONTACT_IMPEDANCE, DEFAULT_CURRENT, FemSystem
from .geometry import CatheterSpec, LumenProfile, circle, ellipse
from .meshing import build_mesh, plan_mesh
from .metrics import SliceMetrics, slice_metrics
from .noise import NoiseModel, add_noise
from .protocols import radial_protocol

DEFAULT_RESOLUTION = 1.5  # mm

# With the ellipse major axis on electrode 1 (rotation 0), rows injecting on
# electrodes 1/5 read the major axis and rows on electrodes 3/7 the minor
# axis, matching how the physical inserts were aligned.
DEFAULT_ELLIPSE_ROTATION = 0.0
MAJOR_ROWS = (0, 4)
MINOR_ROWS = (2, 6)


def _fmt(x) -> str:
    return f"{x:.12e}"


# ---------------------------------------------------------------------------
# Electrode spacing sweep
# ---------------------------------------------------------------------------

@dataclass
class SpacingCase:
    spacing: float
    metrics: SliceMetrics | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.metrics is not None


def sweep_spacing(l_values, phantom: LumenProfile | None = None,
                  catheter: CatheterSpec | None = None,
                  target_size: float = DEFAULT_RESOLUTION,
                  sector_rows=(0, 1, 2, 3), cd_row: int = 0,
                  amplitude: float = DEFAULT_CURRENT,
                  contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE,
                  jobs: int | None = None) -> list[SpacingCase]:
    """Current spread and wall sensitivity versus ring spacing.

    `sector_rows` are the radial-protocol rows treated as the four sector
    measurements; `cd_row` selects the injection used for the current
    density map.
    """
    phantom = phantom if phantom is not None else ellipse(26.0, 0.75)
    catheter = catheter if catheter is not None else CatheterSpec()
    proto = radial_protocol()

    def run(l):
        try:
            cath = replace(catheter, ring_spacing=float(l), shaft_length=None)
            mesh = build_mesh(phantom, cath, target_size)
            system = FemSystem(mesh, contact_impedance=contact_impedance)
            rows = [proto[r] for r in sector_rows]
            sub = type(proto)("sectors", tuple(rows))
            j_rows = system.jacobian(sub, amplitude)
            cd = system.current_density(proto[cd_row][:2], amplitude)
            return SpacingCase(float(l), slice_metrics(cd, j_rows, mesh))
        except BalloonEitError as exc:
            return SpacingCase(float(l), None, error=str(exc))

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, l_values))


def save_spacing_csv(cases: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["spacing_mm", "cd_theta_deg", "j_wall_1", "j_wall_2",
                    "j_wall_3", "j_wall_4", "status"])
        for c in cases:
            if c.ok:
                w.writerow([_fmt(c.spacing), _fmt(c.metrics.cd_theta),
                            *[_fmt(v) for v in c.metrics.j_wall], "ok"])
            else:
                w.writerow([_fmt(c.spacing), "", "", "", "", "", c.error])


# ---------------------------------------------------------------------------
# Detectability sweep
# ---------------------------------------------------------------------------

@dataclass
class DetectabilityResult:
    diameters: np.ndarray        # mm grid
    aspect_ratios: np.ndarray    # f grid (includes 1.0)
    voltages: np.ndarray         # (nD, nf, 8) noiseless radial voltages, V
    dv_diam: np.ndarray          # (nD-1,) change per +1 mm at diameters[:-1]
    dv_ellip: np.ndarray         # (nD, nf)
    dv_limit: np.ndarray         # (nD, nf)
    detectable: np.ndarray       # (nD, nf) bool
    f_max: np.ndarray            # (nD,) grid value or nan
    fit_coeffs: np.ndarray       # 2nd-order fit of f_max(D)
    size_limit: float            # largest D with dv_diam above threshold
    failures: list

    def f_max_at(self, diameter: float) -> float:
        i = int(np.argmin(np.abs(self.diameters - diameter)))
        return float(self.f_max[i])


def sweep_detectability(d_grid=None, f_grid=None,
                        noise: NoiseModel | None = None,
                        catheter: CatheterSpec | None = None,
                        target_size: float = DEFAULT_RESOLUTION,
                        rotation: float = DEFAULT_ELLIPSE_ROTATION,
                        amplitude: float = DEFAULT_CURRENT,
                        contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE,
                        jobs: int | None = None) -> DetectabilityResult:
    """Size and ellipticity detection limits over the (D, f) grid.

    Signals are evaluated noiselessly against the 10x-noise threshold; the
    noise model fixes the threshold level and the RNG seeds of the
    Monte-Carlo cross-check.
    """
    d_grid = np.asarray(d_grid if d_grid is not None else np.arange(12.0, 31.0, 1.0))
    f_grid = np.asarray(f_grid if f_grid is not None else np.round(np.arange(0.5, 1.001, 0.05), 10))
    noise = noise if noise is not None else NoiseModel()
    catheter = catheter if catheter is not None else CatheterSpec()
    proto = radial_protocol()

    ref_profile = circle(float(d_grid.max()))
    plan = plan_mesh(ref_profile, catheter, target_size)

    cases = [(i, j, float(D), float(f)) for i, D in enumerate(d_grid)
             for j, f in enumerate(f_grid)]

    def run(case):
        i, j, D, f = case
        try:
            prof = ellipse(D, f, rotation=rotation)
            mesh = build_mesh(prof, catheter, target_size, plan=plan)
            system = FemSystem(mesh, contact_impedance=contact_impedance)
            return i, j, system.frame(proto, amplitude).voltages, None
        except BalloonEitError as exc:
            return i, j, None, f"D={D} f={f}: {exc}"

    nd, nf = len(d_grid), len(f_grid)
    voltages = np.full((nd, nf, len(proto)), np.nan)
    failures = []
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        for i, j, v, err in pool.map(run, cases):
            if err is None:
                voltages[i, j] = v
            else:
                failures.append(err)

    dv_limit = np.full((nd, nf), np.nan)
    dv_ellip = np.full((nd, nf), np.nan)
    for i in range(nd):
        for j in range(nf):
            v = voltages[i, j]
            if np.any(np.isnan(v)):
                continue
            dv_limit[i, j] = 10.0 * noise.amplitude_factor * noise.reference_amplitude(v)
            dv_ellip[i, j] = abs(np.mean(v[list(MINOR_ROWS)]) - np.mean(v[list(MAJOR_ROWS)]))

    j_circ = int(np.argmin(np.abs(f_grid - 1.0)))
    dv_diam = np.full(nd - 1, np.nan)
    for i in range(nd - 1):
        va, vb = voltages[i, j_circ], voltages[i + 1, j_circ]
        if not (np.any(np.isnan(va)) or np.any(np.isnan(vb))):
            dv_diam[i] = np.mean(np.abs(vb - va))

    detectable = (dv_ellip > dv_limit) & ~np.isnan(dv_ellip)
    f_max = np.full(nd, np.nan)
    for i in range(nd):
        ok = [f_grid[j] for j in range(nf) if f_grid[j] < 1.0 and detectable[i, j]]
        if ok:
            f_max[i] = max(ok)

    # A diameter counts as sized when the step reaching it beats the noise
    # threshold evaluated at that diameter.
    size_limit = float("nan")
    for i in range(nd - 1):
        if not np.isnan(dv_diam[i]) and dv_diam[i] > dv_limit[i + 1, j_circ]:
            size_limit = float(d_grid[i + 1])

    valid = ~np.isnan(f_max)
    fit = (np.polyfit(d_grid[valid], f_max[valid], 2) if valid.sum() >= 3
           else np.full(3, np.nan))

    return DetectabilityResult(
        diameters=d_grid, aspect_ratios=f_grid, voltages=voltages,
        dv_diam=dv_diam, dv_ellip=dv_ellip, dv_limit=dv_limit,
        detectable=detectable, f_max=f_max, fit_coeffs=fit,
        size_limit=size_limit, failures=failures,
    )


def monte_carlo_detection_rate(voltages: np.ndarray, noise: NoiseModel,
                               dv_limit: float, trials: int = 200,
                               stream: int = 0) -> float:
    """Cross-check: fraction of noisy draws whose axis contrast exceeds dv_limit."""
    from .fem import Frame

    frame = Frame(radial_protocol(), np.asarray(voltages, dtype=float), DEFAULT_CURRENT)
    hits = 0
    for t in range(trials):
        noisy = add_noise(frame, noise, stream=stream * trials + t).voltages
        signal = abs(np.mean(noisy[list(MINOR_ROWS)]) - np.mean(noisy[list(MAJOR_ROWS)]))
        hits += signal > dv_limit
    return hits / trials


def save_detectability_csv(result: DetectabilityResult, out_dir) -> list:
    """Write per-case, size-step and f_max summary tables; returns the paths."""
    import os

    paths = []
    p = os.path.join(out_dir, "detectability_cases.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["diameter_mm", "aspect_ratio", "dv_ellip_v", "dv_limit_v", "detectable"])
        for i, D in enumerate(result.diameters):
            for j, f in enumerate(result.aspect_ratios):
                w.writerow([_fmt(D), _fmt(f), _fmt(result.dv_ellip[i, j]),
                            _fmt(result.dv_limit[i, j]), int(result.detectable[i, j])])
    paths.append(p)

    p = os.path.join(out_dir, "dv_diam.csv")
    j_circ = int(np.argmin(np.abs(result.aspect_ratios - 1.0)))
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["diameter_mm", "dv_diam_v", "dv_limit_v", "detectable"])
        for i in range(len(result.diameters) - 1):
            lim = result.dv_limit[i + 1, j_circ]
            w.writerow([_fmt(result.diameters[i + 1]), _fmt(result.dv_diam[i]),
                        _fmt(lim), int(result.dv_diam[i] > lim)])
    paths.append(p)

    p = os.path.join(out_dir, "f_max.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["diameter_mm", "f_max"])
        for D, fm in zip(result.diameters, result.f_max):
            w.writerow([_fmt(D), _fmt(fm) if not np.isnan(fm) else "nan"])
        w.writerow([])
        w.writerow(["fit_c2", "fit_c1", "fit_c0"])
        w.writerow([_fmt(c) for c in result.fit_coeffs])
        w.writerow(["size_limit_mm", _fmt(result.size_limit)])
    paths.append(p)
    return paths
