"""Discrete Green systems built from a manifold graph.

State space H: functions on interior vertices with volume weights.
Boundary space G: functions on boundary vertices with boundary weights.
For a full field ``u`` (interior values plus trace):

* ``A u = -(Laplacian u)`` on interior vertices,
* ``Gamma0 u`` = trace,
* ``Gamma1 u`` = outward flux per unit boundary measure,
  ``(1/omega_b) sum_j c_bj (u_b - u_j)``.

With these choices the Green formula
``(Au, v) - (u, Av) = (Gamma0 u, Gamma1 v) - (Gamma1 u, Gamma0 v)`` is an
algebraic identity, and harmonic continuation comes out as
``Pi = -(Gamma1 L^{-1})^*``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from wavespec.geometry import DiscreteManifold
from wavespec.numlin import EPS_RANK, Subspace, SymOp, lattice_ops, orthonormalize

# Gamma1 = FLUX_SIGN * (Laplacian at boundary vertices) * (vertex volume / boundary weight)
FLUX_SIGN = -1
# Pi = PI_SIGN * (Gamma1 L^{-1})^*
PI_SIGN = -1


@dataclass
class FullField:
    interior: np.ndarray
    trace: np.ndarray


@dataclass
class HarmonicSubspace:
    D: Subspace
    Pi: np.ndarray


@dataclass
class SpectralData:
    """Dirichlet eigenvalues and boundary fluxes of the normalized eigenvectors."""

    lam: np.ndarray
    beta: np.ndarray  # shape (count, |B|)
    boundary_weights: np.ndarray | None = None

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float).reshape(self.lam.size, -1)
        if np.any(self.lam <= 0):
            raise ValueError("eigenvalues must be positive")
        if np.any(np.diff(self.lam) < 0):
            raise ValueError("eigenvalues must be ascending")
        if self.boundary_weights is None:
            self.boundary_weights = np.ones(self.beta.shape[1])
        else:
            self.boundary_weights = np.asarray(self.boundary_weights, dtype=float)

    def __len__(self) -> int:
        return int(self.lam.size)

    def to_json(self) -> str:
        doc = {"lambda": [float(x) for x in self.lam],
               "beta": [[float(x) for x in row] for row in self.beta]}
        if not np.all(self.boundary_weights == 1.0):
            doc["boundary_weights"] = [float(x) for x in self.boundary_weights]
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SpectralData":
        doc = json.loads(text)
        if "lambda" not in doc or "beta" not in doc:
            raise ValueError("spectral data JSON needs 'lambda' and 'beta'")
        return cls(np.array(doc["lambda"], dtype=float), np.array(doc["beta"], dtype=float),
                   doc.get("boundary_weights"))


class GreenSystem:
    """Partitioned graph Laplacian with boundary operators."""

    def __init__(self, m: DiscreteManifold):
        self.manifold = m
        I, B = m.interior_idx, m.boundary_idx
        self.I, self.B = I, B
        n = m.n
        C = np.zeros((n, n))
        a, b = m.edges[:, 0], m.edges[:, 1]
        np.add.at(C, (a, b), m.conductance)
        np.add.at(C, (b, a), m.conductance)
        self.C = C
        self.deg = C.sum(axis=1)
        self.w = m.weights[I].copy()
        self.omega = m.boundary_weights.copy()
        self.K_II = np.diag(self.deg[I]) - C[np.ix_(I, I)]
        self.C_IB = C[np.ix_(I, B)]
        self.C_BB = C[np.ix_(B, B)]
        self.sign_flux = FLUX_SIGN
        self.pi_sign = PI_SIGN
        self.L = SymOp(self.K_II / self.w[:, None], self.w)

    @property
    def nI(self) -> int:
        return self.I.size

    @property
    def nB(self) -> int:
        return self.B.size

    # partitioned Laplacian blocks, (Delta u)_i = (1/w_i) sum_j c_ij (u_j - u_i)
    @cached_property
    def laplacian(self) -> np.ndarray:
        m = self.manifold
        return (self.C - np.diag(self.deg)) / m.weights[:, None]

    def blocks(self):
        D = self.laplacian
        I, B = self.I, self.B
        return D[np.ix_(I, I)], D[np.ix_(I, B)], D[np.ix_(B, I)], D[np.ix_(B, B)]

    @cached_property
    def eig(self):
        lam, phi = self.L.eig()
        return lam, phi

    def A(self, u: FullField) -> np.ndarray:
        return (self.K_II @ u.interior - self.C_IB @ u.trace) / self.w

    def gamma0(self, u: FullField) -> np.ndarray:
        return np.asarray(u.trace, dtype=float)

    def gamma1(self, u: FullField) -> np.ndarray:
        B = self.B
        flux = self.deg[B] * u.trace - self.C_IB.T @ u.interior - self.C_BB @ u.trace
        return flux / self.omega

    def inner_H(self, y, z) -> float:
        return float(np.sum(self.w * y * z))

    def inner_G(self, y, z) -> float:
        return float(np.sum(self.omega * y * z))

    @cached_property
    def Pi(self) -> np.ndarray:
        """Harmonic continuation: boundary data to interior values."""
        return np.linalg.solve(self.K_II, self.C_IB)

    @cached_property
    def K_data(self) -> np.ndarray:
        """``L Pi``: the interior forcing produced by boundary data."""
        return self.C_IB / self.w[:, None]

    @cached_property
    def M_loc(self) -> np.ndarray:
        B = self.B
        return (np.diag(self.deg[B]) - self.C_BB) / self.omega[:, None]

    def __repr__(self) -> str:
        return f"GreenSystem(|I|={self.nI}, |B|={self.nB})"


def assemble(m: DiscreteManifold) -> GreenSystem:
    from scipy.sparse.csgraph import connected_components
    I = m.interior_idx
    sub = np.zeros((I.size, I.size))
    pos = {v: k for k, v in enumerate(I)}
    for a, b in m.edges:
        if a in pos and b in pos:
            sub[pos[a], pos[b]] = sub[pos[b], pos[a]] = 1
    if connected_components(sub, directed=False)[0] != 1:
        raise ValueError("interior of the manifold is disconnected")
    return GreenSystem(m)


def green_residual(gs: GreenSystem, u: FullField, v: FullField) -> float:
    """Relative defect of the Green formula on a pair of full fields."""
    Au, Av = gs.A(u), gs.A(v)
    g0u, g0v, g1u, g1v = gs.gamma0(u), gs.gamma0(v), gs.gamma1(u), gs.gamma1(v)
    lhs = gs.inner_H(Au, v.interior) - gs.inner_H(u.interior, Av)
    rhs = gs.inner_G(g0u, g1v) - gs.inner_G(g1u, g0v)
    nH = lambda y: np.sqrt(gs.inner_H(y, y))
    nG = lambda y: np.sqrt(gs.inner_G(y, y))
    scale = (nH(Au) * nH(v.interior) + nH(u.interior) * nH(Av)
             + nG(g0u) * nG(g1v) + nG(g1u) * nG(g0v))
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def gamma1_Linv(gs: GreenSystem) -> np.ndarray:
    """Matrix of ``y -> Gamma1 (L^{-1} y, trace 0)``."""
    X = np.linalg.solve(gs.L.entries, np.eye(gs.nI))
    return -(gs.C_IB.T @ X) / gs.omega[:, None]


def weighted_adjoint(M: np.ndarray, w_in: np.ndarray, w_out: np.ndarray) -> np.ndarray:
    """Adjoint of ``M: (R^n, w_in) -> (R^m, w_out)``."""
    return (M.T * w_out[None, :]) / w_in[:, None]


def harmonic_extension(gs: GreenSystem, phi) -> np.ndarray:
    return gs.Pi @ np.asarray(phi, dtype=float)


def harmonic_subspace(gs: GreenSystem, tol: float = EPS_RANK) -> HarmonicSubspace:
    return HarmonicSubspace(orthonormalize(gs.Pi, gs.w, tol), gs.Pi)


@dataclass
class PiAdjointReport:
    residual: float
    opposite: float
    sign: int


def pi_adjoint_residual(gs: GreenSystem) -> PiAdjointReport:
    """Compare ``Pi`` with ``(Gamma1 L^{-1})^*`` under both signs; keep the better one."""
    adj = weighted_adjoint(gamma1_Linv(gs), gs.w, gs.omega)
    wsq = np.sqrt(gs.w)[:, None]
    osq = np.sqrt(gs.omega)[None, :]
    nrm = lambda M: np.linalg.norm(wsq * M / osq, 2)
    scale = nrm(gs.Pi)
    plus, minus = nrm(gs.Pi - adj) / scale, nrm(gs.Pi + adj) / scale
    sign = 1 if plus <= minus else -1
    return PiAdjointReport(min(plus, minus), max(plus, minus), sign)


def characterize_A(gs: GreenSystem, u: FullField, tol: float = 1e-10) -> bool:
    """Membership of a full field in the harmonic class ``{y : Pi Gamma0 y = y}`` with ``A y = 0``."""
    nrm = np.sqrt(gs.inner_H(u.interior, u.interior) + gs.inner_G(u.trace, u.trace))
    if nrm == 0:
        return True
    d = gs.Pi @ u.trace - u.interior
    Au = gs.A(u)
    scaleA = np.abs(gs.L.entries).max() * nrm
    return bool(np.sqrt(gs.inner_H(d, d)) <= tol * nrm and np.sqrt(gs.inner_H(Au, Au)) <= tol * scaleA)


def dom_L0(gs: GreenSystem, tol: float = EPS_RANK) -> Subspace:
    """``L^{-1}`` applied to the orthogonal complement of the harmonic subspace."""
    D = harmonic_subspace(gs, tol).D
    Dc = lattice_ops(D, kind="complement")
    return orthonormalize(np.linalg.solve(gs.L.entries, Dc.frame), gs.w, tol)


def L0_matrix(gs: GreenSystem, tol: float = EPS_RANK):
    """Compression of ``L`` to its minimal domain in an orthonormal frame.

    ``L`` maps ``Dom L0`` into ``H ⊖ D``, so the natural finite emulation of the
    symmetric operator is the map between those two frames.  Returns the
    frames and the matrix ``F_out^* W L F_dom``.
    """
    dom = dom_L0(gs, tol)
    D = harmonic_subspace(gs, tol).D
    out = lattice_ops(D, kind="complement")
    M = out.frame.T @ (gs.w[:, None] * (gs.L.entries @ dom.frame))
    return dom, out, M


def spectral_data(gs: GreenSystem) -> SpectralData:
    lam, phi = gs.eig
    beta = np.column_stack([gs.gamma1(FullField(phi[:, k], np.zeros(gs.nB)))
                            for k in range(lam.size)]).T
    return SpectralData(lam, beta, gs.omega.copy())


def fourier_of_harmonic(sd: SpectralData, phi) -> np.ndarray:
    """Eigen-coefficients ``(a, phi_k)`` of the harmonic continuation of ``phi``."""
    phi = np.asarray(phi, dtype=float)
    return -(sd.beta @ (sd.boundary_weights * phi)) / sd.lam


def weyl(gs: GreenSystem, z, method: str = "direct", pole_tol: float = 1e-8) -> np.ndarray:
    """Weyl function ``M(z)``: Dirichlet data to the flux of the solution of ``(A - z) u = 0``.

    ``method="spectral"`` uses the eigen-expansion of the resolvent instead of a
    direct solve.  Raises ``ValueError`` when ``z`` is within ``pole_tol`` of an
    eigenvalue.
    """
    lam, phi = gs.eig
    z = complex(z)
    gap = np.min(np.abs(lam - z))
    if gap <= pole_tol:
        raise ValueError(f"z = {z} is within {pole_tol:g} of the Dirichlet spectrum")
    if method == "direct":
        mat = gs.K_II.astype(complex) - z * np.diag(gs.w)
        U = np.linalg.solve(mat, gs.C_IB.astype(complex))
        M = gs.M_loc - (gs.C_IB.T @ U) / gs.omega[:, None]
    elif method == "spectral":
        sd = spectral_data(gs)
        M = gs.M_loc - (sd.beta.T / (lam - z)[None, :]) @ (sd.beta * gs.omega[None, :])
    else:
        raise ValueError("method must be 'direct' or 'spectral'")
    if z.imag == 0:
        return M.real
    return M
