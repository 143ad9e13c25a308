"""Image reconstruction on the nominal 30 mm mesh.

Three solvers:

* absolute        -- iterative regularised Gauss-Newton from a homogeneous
                     start, NOSER prior (diag(J^T J)^p), backtracking line
                     search over a fixed step ladder.
* time difference -- one-shot zeroth-order Tikhonov solve of
                     delta_sigma = (J^T J + lambda^2 I)^-1 J^T (v - v_ref),
                     with lambda chosen by grouped k-fold cross validation
                     when not supplied.  TD references a measured initial
                     frame, PTD a simulated unobstructed-lumen frame.

All normal-equation solves run in the measurement-space dual, so nothing
bigger than (n_measurements)^2 is ever factorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (DegenerateImageError, ParameterError,
                     ProtocolMismatchError, SolverError)
from .fem import (DEFAULT_CONTACT_IMPEDANCE, DEFAULT_CURRENT, DEFAULT_SIGMA,
                  FemSystem, Frame)
from .geometry import TWO_PI, CatheterSpec, circle
from .meshing import Mesh, MeshPlan, build_mesh
from .metrics import mid_slice_elements
from .protocols import Protocol, full_protocol

RECON_DIAMETER = 30.0  # largest expected lumen diameter, mm
LAMBDA_GRID = np.logspace(-6.0, 2.0, 25)


def _check_same_protocol(a: Protocol, b: Protocol) -> None:
    if tuple(a.rows) != tuple(b.rows):
        raise ProtocolMismatchError("frames use different protocols")


@dataclass
class ReconMesh:
    """Coarse nominal-geometry mesh with its frozen forward linearisation."""

    mesh: Mesh
    protocol: Protocol
    sigma0: float
    amplitude: float
    contact_impedance: float
    system: FemSystem
    jacobian: np.ndarray        # (n_rows, n_elements) at sigma0
    v0: np.ndarray              # voltages at sigma0
    _gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_elements(self) -> int:
        return self.mesh.n_elements

    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.jacobian @ self.jacobian.T
        return self._gram

    def electrode_adjacent_elements(self) -> np.ndarray:
        return np.unique(np.concatenate(self.mesh.electrode_owners))

    def simulate(self, sigma) -> np.ndarray:
        """Forward voltages on this mesh for a conductivity vector."""
        return FemSystem(self.mesh, sigma, self.contact_impedance).frame(
            self.protocol, self.amplitude).voltages


def _recon_plan(catheter: CatheterSpec) -> MeshPlan:
    """Hand-sized grid keeping the reconstruction mesh in the 8k-15k band."""
    delta = catheter.electrode_half_arc()
    theta = []
    n = catheter.electrodes_per_ring
    for p in range(n):
        c = p * TWO_PI / n
        gap = TWO_PI / n - 2 * delta
        theta.extend([c - delta, c, c + delta, c + delta + 0.5 * gap])
    theta = np.sort(np.mod(np.array(theta), TWO_PI))
    fractions = np.array([0.0, 0.16, 0.36, 0.65, 1.0])
    L = catheter.domain_length()
    z1, z2 = catheter.ring_z()
    h = 0.5 * catheter.electrode_height
    mid = 0.5 * L
    z = sorted({0.0, 0.45 * (z1 - h), 0.85 * (z1 - h),
                z1 - h, z1, z1 + h,
                0.5 * (z1 + h + mid - 1.0), mid - 1.0, mid + 1.0,
                0.5 * (z2 - h + mid + 1.0), z2 - h, z2, z2 + h,
                z2 + h + 0.15 * (L - z2 - h), z2 + h + 0.55 * (L - z2 - h), L})
    return MeshPlan(theta=theta, fractions=fractions, z_planes=np.array(z))


def build_recon_mesh(catheter: CatheterSpec | None = None,
                     diameter: float = RECON_DIAMETER,
                     protocol: Protocol | None = None,
                     sigma0: float = DEFAULT_SIGMA,
                     amplitude: float = DEFAULT_CURRENT,
                     contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE) -> ReconMesh:
    """Nominal circular-lumen mesh plus precomputed sensitivity operator."""
    catheter = catheter if catheter is not None else CatheterSpec()
    protocol = protocol if protocol is not None else full_protocol()
    plan = _recon_plan(catheter)
    mesh = build_mesh(circle(diameter), catheter, target_size=2.5, plan=plan)
    if not 8000 <= mesh.n_elements <= 15000:
        raise ParameterError(
            f"reconstruction mesh must hold 8k-15k elements, built {mesh.n_elements}"
        )
    system = FemSystem(mesh, sigma0, contact_impedance)
    jac = system.jacobian(protocol, amplitude)
    v0 = system.frame(protocol, amplitude).voltages
    return ReconMesh(mesh=mesh, protocol=protocol, sigma0=sigma0,
                     amplitude=amplitude, contact_impedance=contact_impedance,
                     system=system, jacobian=jac, v0=v0)


@dataclass
class Reconstruction:
    """Per-element image with solver diagnostics."""

    values: np.ndarray
    mode: str                   # absolute | TD | PTD
    lam: float
    iterations: int
    residual_history: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _regularised_step(J: np.ndarray, residual: np.ndarray, lam: float,
                      reg_diag: np.ndarray) -> np.ndarray:
    """Solve (J^T J + lam^2 diag(reg)) d = J^T r through the dual system."""
    w = np.sqrt(reg_diag)
    B = J / w[None, :]
    G = B @ B.T
    G[np.diag_indices_from(G)] += lam * lam
    try:
        cf = sla.cho_factor(G, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"regularised normal matrix is not SPD: {exc}") from exc
    alpha = sla.cho_solve(cf, residual)
    return (B.T @ alpha) / w


LINE_SEARCH_LADDER = tuple(0.5 ** k for k in range(11))


def reconstruct_absolute(frame: Frame, rm: ReconMesh, lam: float = 0.01,
                         max_iters: int = 4, noser_exponent: float = 0.5,
                         misfit_tol: float = 1e-4) -> Reconstruction:
    """Gauss-Newton absolute conductivity image with a NOSER prior.

    Each iteration recomputes the Jacobian at the current state and tries
    the step ladder {1, 1/2, ..., 1/2^10}, accepting the first candidate
    that decreases the data misfit; failure to find one flags stagnation
    and keeps the current state.
    """
    _check_same_protocol(frame.protocol, rm.protocol)
    sigma = np.full(rm.n_elements, rm.sigma0)
    v = rm.v0.copy()
    misfit = float(np.linalg.norm(frame.voltages - v))
    scale = float(np.linalg.norm(frame.voltages))
    history = [misfit]
    stagnated = False
    iterations = 0

    for _ in range(max_iters):
        if misfit <= 1e-12 * scale:
            break
        system = FemSystem(rm.mesh, sigma, rm.contact_impedance)
        J = system.jacobian(rm.protocol, rm.amplitude)
        reg = np.power((J * J).sum(axis=0), noser_exponent)
        reg = np.maximum(reg, 1e-300)
        delta = _regularised_step(J, frame.voltages - v, lam, reg)

        accepted = False
        for step in LINE_SEARCH_LADDER:
            trial = sigma + step * delta
            if trial.min() <= 0.0:
                continue
            v_try = rm.simulate(trial)
            m_try = float(np.linalg.norm(frame.voltages - v_try))
            if m_try < misfit:
                sigma, v, misfit = trial, v_try, m_try
                accepted = True
                break
        iterations += 1
        if not accepted:
            stagnated = True
            history.append(misfit)
            break
        history.append(misfit)
        if abs(history[-2] - history[-1]) < misfit_tol * max(history[-2], 1e-300):
            break

    return Reconstruction(
        values=sigma, mode="absolute", lam=lam, iterations=iterations,
        residual_history=np.array(history),
        diagnostics={"stagnated": stagnated, "misfit": misfit},
    )


def reconstruct_difference(frame: Frame, reference: Frame, rm: ReconMesh,
                           lam: float | None = None,
                           mode: str | None = None) -> Reconstruction:
    """Linear Tikhonov difference image of frame minus reference.

    Mode defaults to the reference frame's provenance: PTD when its meta
    marks it simulated, TD otherwise.
    """
    _check_same_protocol(frame.protocol, reference.protocol)
    _check_same_protocol(frame.protocol, rm.protocol)
    if mode is None:
        mode = "PTD" if reference.meta.get("simulated_reference") else "TD"
    if mode not in ("TD", "PTD"):
        raise ParameterError(f"difference mode must be TD or PTD, got {mode!r}")

    dv = frame.voltages - reference.voltages
    cv_curve = None
    if lam is None:
        lam, cv_curve = select_lambda_cv(rm, frame, reference, full=True)
    if lam < 0:
        raise ParameterError("lambda must be non-negative")
    J = rm.jacobian
    if lam == 0.0:
        delta, *_ = np.linalg.lstsq(J, dv, rcond=None)
    else:
        G = rm.gram().copy()
        G[np.diag_indices_from(G)] += lam * lam
        try:
            cf = sla.cho_factor(G, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"regularised normal matrix is not SPD: {exc}") from exc
        delta = J.T @ sla.cho_solve(cf, dv)

    resid = float(np.linalg.norm(dv - J @ delta))
    diags = {"misfit": resid}
    if cv_curve is not None:
        diags["cv_lambdas"], diags["cv_scores"] = cv_curve
    return Reconstruction(
        values=delta, mode=mode, lam=float(lam), iterations=1,
        residual_history=np.array([float(np.linalg.norm(dv)), resid]),
        diagnostics=diags,
    )


def _fold_assignment(protocol: Protocol, n_folds: int) -> np.ndarray:
    """Fold index per measurement row, grouping rows by injection pair."""
    pairs = protocol.injection_pairs()
    fold_of_pair = {p: i % n_folds for i, p in enumerate(pairs)}
    return np.array([fold_of_pair[(ip, im)] for ip, im, _, _ in protocol])


def select_lambda_cv(rm: ReconMesh, frame: Frame, reference: Frame,
                     n_folds: int = 8, grid: np.ndarray | None = None,
                     full: bool = False):
    """Pick lambda by k-fold cross validation over measurement rows.

    Folds group whole injection patterns so a drive's information never
    leaks across the train/test split.  The score of a fold is the squared
    error of the linear prediction J_holdout @ delta_train.
    """
    _check_same_protocol(frame.protocol, reference.protocol)
    grid = np.asarray(grid if grid is not None else LAMBDA_GRID, dtype=float)
    dv = frame.voltages - reference.voltages
    folds = _fold_assignment(rm.protocol, n_folds)
    fold_ids = [f for f in range(n_folds) if np.any(folds == f)]
    if len(fold_ids) < 2:
        raise ParameterError("need at least two non-empty folds for cross validation")

    G = rm.gram()
    scores = np.zeros(len(grid))
    for f in fold_ids:
        hold = folds == f
        train = ~hold
        g_tt = G[np.ix_(train, train)]
        g_ht = G[np.ix_(hold, train)]
        dv_t, dv_h = dv[train], dv[hold]
        for i, lam in enumerate(grid):
            m = g_tt.copy()
            m[np.diag_indices_from(m)] += lam * lam
            alpha = sla.solve(m, dv_t, assume_a="pos")
            pred = g_ht @ alpha
            scores[i] += float(np.sum((pred - dv_h) ** 2))
    scores /= len(fold_ids)
    lam = float(grid[int(np.argmin(scores))])
    if full:
        return lam, (grid, scores)
    return lam


# ---------------------------------------------------------------------------
# Cross-section approximation
# ---------------------------------------------------------------------------

@dataclass
class CsaEstimate:
    area_mm2: float
    retained: np.ndarray          # element ids in the mid slice kept
    excluded: np.ndarray          # element ids removed by the threshold
    threshold: float
    electrode_level: float
    boundary: np.ndarray          # (n, 2) azimuth (rad), radius (mm)


def approximate_csa(recon: Reconstruction, rm: ReconMesh,
                    slice_thickness: float = 2.0,
                    threshold_factor: float = 3.0) -> CsaEstimate:
    """Cross-section estimate by thresholding a difference image.

    Elements whose |delta_sigma| exceeds `threshold_factor` times the mean
    |delta_sigma| of the electrode-adjacent elements are removed; the
    footprint of the surviving mid-slice elements (plus the catheter shaft
    it encloses) approximates the balloon cross-section.
    """
    if recon.mode not in ("TD", "PTD"):
        raise ParameterError("cross-section estimation needs a difference image")
    values = np.abs(recon.values)
    adjacent = rm.electrode_adjacent_elements()
    level = float(values[adjacent].mean())
    threshold = threshold_factor * level
    excluded = np.where(values > threshold)[0]
    if len(excluded) == rm.n_elements:
        raise DegenerateImageError("threshold removed every element")

    slice_ids = mid_slice_elements(rm.mesh, slice_thickness)
    keep_mask = np.ones(rm.n_elements, dtype=bool)
    keep_mask[excluded] = False
    retained = slice_ids[keep_mask[slice_ids]]
    if len(retained) == 0:
        raise DegenerateImageError("threshold removed the whole mid slice")

    vol = rm.mesh.element_volumes()
    shaft_r = rm.mesh.catheter.shaft_radius if rm.mesh.catheter else 0.0
    area = math.pi * shaft_r ** 2 + float(vol[retained].sum()) / slice_thickness

    cen = rm.mesh.element_centroids()[retained]
    az = np.mod(np.arctan2(cen[:, 1], cen[:, 0]), TWO_PI)
    radius = np.hypot(cen[:, 0], cen[:, 1])
    n_bins = 36
    edges = np.linspace(0.0, TWO_PI, n_bins + 1)
    boundary = np.zeros((n_bins, 2))
    boundary[:, 0] = 0.5 * (edges[:-1] + edges[1:])
    for b in range(n_bins):
        hit = (az >= edges[b]) & (az < edges[b + 1])
        boundary[b, 1] = radius[hit].max() if np.any(hit) else 0.0

    return CsaEstimate(area_mm2=area, retained=retained, excluded=excluded,
                       threshold=threshold, electrode_level=level,
                       boundary=boundary)


def sector_area_deficit(csa: CsaEstimate, rm: ReconMesh,
                        slice_thickness: float = 2.0,
                        n_sectors: int = 8) -> np.ndarray:
    """Missing mid-slice footprint per azimuthal sector, mm^2."""
    slice_ids = mid_slice_elements(rm.mesh, slice_thickness)
    vol = rm.mesh.element_volumes()
    cen = rm.mesh.element_centroids()
    az = np.mod(np.arctan2(cen[:, 1], cen[:, 0]), TWO_PI)
    sector = np.floor(az * n_sectors / TWO_PI).astype(int) % n_sectors
    retained = np.zeros(rm.n_elements, dtype=bool)
    retained[csa.retained] = True
    out = np.zeros(n_sectors)
    for e in slice_ids:
        if not retained[e]:
            out[sector[e]] += vol[e] / slice_thickness
    return out


# ---------------------------------------------------------------------------
# Localisation helpers (used by experiments and acceptance checks)
# ---------------------------------------------------------------------------

def decrease_centroid_azimuth(recon: Reconstruction, rm: ReconMesh,
                              slice_thickness: float = 4.0,
                              fraction: float = 0.5) -> float:
    """Circular-mean azimuth (radians) of the dominant conductivity decrease."""
    base = rm.sigma0 if recon.mode == "absolute" else 0.0
    drop = base - recon.values
    ids = mid_slice_elements(rm.mesh, slice_thickness)
    drop = drop[ids]
    if drop.max() <= 0:
        raise DegenerateImageError("image contains no conductivity decrease")
    strong = drop >= fraction * drop.max()
    cen = rm.mesh.element_centroids()[ids][strong]
    w = drop[strong] * rm.mesh.element_volumes()[ids][strong]
    az = np.arctan2(cen[:, 1], cen[:, 0])
    return float(np.arctan2((w * np.sin(az)).sum(), (w * np.cos(az)).sum()))


def decrease_axis_azimuth(recon: Reconstruction, rm: ReconMesh,
                          slice_thickness: float = 4.0,
                          fraction: float = 0.5) -> float:
    """Axis (radians, mod pi) through antipodal conductivity-decrease lobes."""
    base = rm.sigma0 if recon.mode == "absolute" else 0.0
    drop = base - recon.values
    ids = mid_slice_elements(rm.mesh, slice_thickness)
    drop = drop[ids]
    if drop.max() <= 0:
        raise DegenerateImageError("image contains no conductivity decrease")
    strong = drop >= fraction * drop.max()
    cen = rm.mesh.element_centroids()[ids][strong]
    w = drop[strong] * rm.mesh.element_volumes()[ids][strong]
    az = np.arctan2(cen[:, 1], cen[:, 0])
    # Doubled-angle mean folds antipodal lobes onto one axis direction.
    ang = 0.5 * math.atan2(float((w * np.sin(2 * az)).sum()),
                           float((w * np.cos(2 * az)).sum()))
    return ang % math.pi
