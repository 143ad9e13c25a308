"""Complete-electrode-model forward solver on tetrahedral meshes.

First-order elements throughout.  The assembled system couples node
potentials with the electrode potentials through the contact impedance;
it is symmetric positive semidefinite with the constant vector as its only
null direction.  Grounding adds a zero-mean constraint on the electrode
potentials (a Lagrange row), so results do not depend on electrode
numbering.

Geometry enters in millimetres and is converted to SI internally; all
electrical quantities are SI (V, A, S/m, ohm*m^2).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError, SolverError
from .meshing import Mesh, _face_areas
from .protocols import Protocol

MM = 1e-3
DEFAULT_SIGMA = 1.6            # S/m, 0.9% saline
DEFAULT_CURRENT = 141e-6       # A, safety-limit drive amplitude
DEFAULT_CONTACT_IMPEDANCE = 1e-3  # ohm*m^2


@dataclass
class ConductivityField:
    """Per-element conductivity in S/m."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ParameterError("conductivity must be a flat per-element array")
        if np.any(self.values <= 0):
            raise ParameterError("conductivity values must be positive")

    @classmethod
    def uniform(cls, mesh: Mesh, sigma: float = DEFAULT_SIGMA) -> "ConductivityField":
        if sigma <= 0:
            raise ParameterError("conductivity must be positive")
        return cls(np.full(mesh.n_elements, float(sigma)))

    def check_mesh(self, mesh: Mesh) -> None:
        if len(self.values) != mesh.n_elements:
            raise ParameterError(
                f"conductivity length {len(self.values)} != element count {mesh.n_elements}"
            )


@dataclass
class Frame:
    """One vector of measured voltages for a protocol."""

    protocol: Protocol
    voltages: np.ndarray
    current_a: float
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.voltages)

    def copy_with(self, voltages: np.ndarray, **meta) -> "Frame":
        merged = dict(self.meta)
        merged.update(meta)
        return Frame(self.protocol, np.asarray(voltages, dtype=float),
                     self.current_a, merged)


@dataclass
class ForwardSolution:
    """Potentials for each injection of a protocol."""

    injections: list
    node_potentials: np.ndarray       # (n_inj, n_nodes), V
    electrode_potentials: np.ndarray  # (n_inj, n_electrodes), V
    injected_current: float


def _sigma_values(mesh: Mesh, sigma) -> np.ndarray:
    if isinstance(sigma, ConductivityField):
        sigma.check_mesh(mesh)
        return sigma.values
    if np.isscalar(sigma):
        return ConductivityField.uniform(mesh, float(sigma)).values
    f = ConductivityField(np.asarray(sigma))
    f.check_mesh(mesh)
    return f.values


class FemSystem:
    """Assembled CEM system for one mesh/conductivity/contact-impedance state.

    Solutions for unit-current injections are cached per electrode pair, so
    a protocol frame, its Jacobian and current densities reuse factorised
    work.  Direct sparse factorisation is used up to `direct_limit` unknowns,
    Jacobi-preconditioned conjugate gradients above.
    """

    def __init__(self, mesh: Mesh, sigma=DEFAULT_SIGMA,
                 contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE,
                 direct_limit: int = 400_000, cg_tol: float = 1e-10):
        if contact_impedance <= 0:
            raise ParameterError("contact impedance must be positive")
        self.mesh = mesh
        self.sigma = _sigma_values(mesh, sigma)
        self.contact_impedance = float(contact_impedance)
        self.n_nodes = mesh.n_nodes
        self.n_electrodes = mesh.n_electrodes
        self.direct_limit = direct_limit
        self.cg_tol = cg_tol
        self._grads = None          # (M, 4, 3) barycentric gradients, 1/m
        self._vol_m3 = None
        self._lu = None
        self._pair_cache: dict = {}
        self._grad_cache: dict = {}
        self.matrix = self._assemble()

    # -- assembly ----------------------------------------------------------

    def _assemble(self) -> sp.csr_matrix:
        mesh = self.mesh
        n, L = self.n_nodes, self.n_electrodes
        pts = mesh.nodes[mesh.elements] * MM
        edge = pts[:, 1:] - pts[:, :1]                      # (M, 3, 3)
        vol = np.einsum("ij,ij->i", np.cross(edge[:, 0], edge[:, 1]), edge[:, 2]) / 6.0
        if np.any(vol <= 0):
            raise ParameterError("mesh contains non-positive element volumes")
        inv = np.linalg.inv(edge)                           # rows ~ levels of lambda
        grads = np.empty((mesh.n_elements, 4, 3))
        grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        self._grads = grads
        self._vol_m3 = vol

        ke = np.einsum("m,mik,mjk->mij", self.sigma * vol, grads, grads)
        elems = mesh.elements
        rows = np.repeat(elems, 4, axis=1).ravel()
        cols = np.tile(elems, (1, 4)).ravel()
        data = [ke.ravel()]
        rix = [rows]
        cix = [cols]

        z = self.contact_impedance
        for ell, faces in enumerate(mesh.electrodes):
            faces = np.asarray(faces)
            area = _face_areas(mesh.nodes, faces) * MM * MM
            # Surface mass matrix (u - U)(v - V)/z expanded in blocks.
            mass = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
            r = np.repeat(faces, 3, axis=1).ravel()
            c = np.tile(faces, (1, 3)).ravel()
            data.append(mass.ravel() / z)
            rix.append(r)
            cix.append(c)
            w = np.repeat(area / 3.0, 3) / z
            fn = faces.ravel()
            col = np.full(fn.shape, n + ell)
            data.extend([-w, -w, np.array([area.sum() / z])])
            rix.extend([fn, col, np.array([n + ell])])
            cix.extend([col, fn, np.array([n + ell])])

        A = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rix), np.concatenate(cix))),
            shape=(n + L, n + L),
        )
        return A.tocsr()

    # -- linear solves -----------------------------------------------------

    def _solve(self, b: np.ndarray) -> np.ndarray:
        n, L = self.n_nodes, self.n_electrodes
        if n + L <= self.direct_limit:
            if self._lu is None:
                g = np.zeros(n + L)
                g[n:] = 1.0
                aug = sp.bmat([[self.matrix, g[:, None]], [g[None, :], None]],
                              format="csc")
                self._lu = spla.splu(aug, permc_spec="MMD_AT_PLUS_A")
            x = self._lu.solve(np.concatenate([b, [0.0]]))[:-1]
            return x
        diag = self.matrix.diagonal()
        m_inv = sp.diags(1.0 / diag)
        x, info = spla.cg(self.matrix, b, M=m_inv, rtol=self.cg_tol, atol=0.0,
                          maxiter=20 * (n + L))
        if info != 0:
            resid = float(np.linalg.norm(self.matrix @ x - b) / np.linalg.norm(b))
            raise SolverError(f"conjugate gradients did not converge (info={info})",
                              residual=resid)
        x = x - x[n:].mean()  # ground on zero-mean electrode potentials
        return x

    def solve_pair(self, pair) -> np.ndarray:
        """Potentials (nodes then electrodes) for a unit current injection."""
        key = (int(pair[0]), int(pair[1]))
        if key not in self._pair_cache:
            pos, neg = key
            for e in key:
                if not 1 <= e <= self.n_electrodes:
                    raise ParameterError(f"electrode {e} not present in mesh")
            if pos == neg:
                raise ParameterError("injection electrodes must differ")
            b = np.zeros(self.n_nodes + self.n_electrodes)
            b[self.n_nodes + pos - 1] = 1.0
            b[self.n_nodes + neg - 1] = -1.0
            self._pair_cache[key] = self._solve(b)
        return self._pair_cache[key]

    def element_gradients(self, pair) -> np.ndarray:
        """Per-element potential gradient (V/m) of the unit-current solution."""
        key = (int(pair[0]), int(pair[1]))
        if key not in self._grad_cache:
            x = self.solve_pair(key)
            u = x[: self.n_nodes][self.mesh.elements]
            self._grad_cache[key] = np.einsum("mi,mij->mj", u, self._grads)
        return self._grad_cache[key]

    # -- physics outputs ----------------------------------------------------

    def forward_solution(self, protocol: Protocol,
                         amplitude: float = DEFAULT_CURRENT) -> ForwardSolution:
        if amplitude <= 0:
            raise ParameterError("current amplitude must be positive")
        pairs = protocol.injection_pairs()
        xs = np.stack([self.solve_pair(p) for p in pairs]) * amplitude
        return ForwardSolution(
            injections=pairs,
            node_potentials=xs[:, : self.n_nodes],
            electrode_potentials=xs[:, self.n_nodes:],
            injected_current=amplitude,
        )

    def frame(self, protocol: Protocol, amplitude: float = DEFAULT_CURRENT,
              **meta) -> Frame:
        if amplitude <= 0:
            raise ParameterError("current amplitude must be positive")
        n = self.n_nodes
        voltages = np.empty(len(protocol))
        for r, (ip, im, mp, mm) in enumerate(protocol):
            x = self.solve_pair((ip, im))
            voltages[r] = amplitude * (x[n + mp - 1] - x[n + mm - 1])
        return Frame(protocol, voltages, amplitude, dict(meta))

    def jacobian(self, protocol: Protocol,
                 amplitude: float = DEFAULT_CURRENT) -> np.ndarray:
        """Sensitivity of each measured voltage to per-element conductivity.

        Adjoint form: row m is -integral over each element of
        grad(u_drive) . grad(u_measure) dV, the drive field at the protocol
        amplitude and the measurement field at unit current.  Units V*m/S.
        """
        rows = np.empty((len(protocol), self.mesh.n_elements))
        for r, (ip, im, mp, mm) in enumerate(protocol):
            gd = self.element_gradients((ip, im))
            gm = self.element_gradients((mp, mm))
            rows[r] = -amplitude * self._vol_m3 * np.einsum("mj,mj->m", gd, gm)
        return rows

    def current_density(self, pair, amplitude: float = DEFAULT_CURRENT) -> np.ndarray:
        """Per-element current density magnitude |sigma grad(u)|, A/m^2."""
        if amplitude <= 0:
            raise ParameterError("current amplitude must be positive")
        g = self.element_gradients(pair)
        return self.sigma * amplitude * np.linalg.norm(g, axis=1)

    def electrode_currents(self, x: np.ndarray, amplitude: float = 1.0) -> np.ndarray:
        """Currents through each electrode for a solution vector x."""
        n = self.n_nodes
        z = self.contact_impedance
        out = np.empty(self.n_electrodes)
        for ell, faces in enumerate(self.mesh.electrodes):
            faces = np.asarray(faces)
            area = _face_areas(self.mesh.nodes, faces) * MM * MM
            u_mean = x[: n][faces].mean(axis=1)
            out[ell] = ((x[n + ell] * area.sum()) - (area * u_mean).sum()) / z
        return out * amplitude


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------

def assemble_system(mesh: Mesh, sigma, contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE):
    """Assemble the (nodes + electrodes) CEM matrix without grounding.

    The matrix is symmetric positive semidefinite and singular exactly on
    the constant vector.
    """
    return FemSystem(mesh, sigma, contact_impedance).matrix


def solve_forward(mesh: Mesh, sigma, protocol: Protocol,
                  current_amplitude: float = DEFAULT_CURRENT,
                  contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE,
                  **meta) -> Frame:
    """Measured voltages for every protocol row."""
    return FemSystem(mesh, sigma, contact_impedance).frame(
        protocol, current_amplitude, **meta)


def compute_sensitivity(mesh: Mesh, sigma, protocol: Protocol,
                        current_amplitude: float = DEFAULT_CURRENT,
                        contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE) -> np.ndarray:
    """Measurement-by-element sensitivity matrix (V*m/S)."""
    return FemSystem(mesh, sigma, contact_impedance).jacobian(
        protocol, current_amplitude)


def current_density(mesh: Mesh, sigma, injection_pair,
                    amplitude: float = DEFAULT_CURRENT,
                    contact_impedance: float = DEFAULT_CONTACT_IMPEDANCE) -> np.ndarray:
    """Current density magnitude per element for one injection pair."""
    return FemSystem(mesh, sigma, contact_impedance).current_density(
        injection_pair, amplitude)
