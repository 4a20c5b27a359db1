"""Functional model over the wave spectrum: measure, image map and the gauge-transformed operator.

Each spectrum point carries the atom of the eikonal algebra it came from.
For a vector ``g`` the point mass is ``(P g, g)`` with ``P`` the atom's
projection, and the image map divides by it.  Balls of radius below the
smallest positive metric entry isolate points, so the small-radius limits
are evaluated exactly at such a radius.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from wavespec.geometry import DiscreteManifold
from wavespec.numlin import EPS_RANK, Subspace, orthonormalize
from wavespec.spectrum import WaveSpectrum


def point_atoms(ws: WaveSpectrum, atoms: list) -> list:
    """Atoms behind the spectrum points, looked up through the point labels."""
    out = []
    for lab in ws.provenance:
        if not isinstance(lab, (int, np.integer)):
            raise ValueError(f"spectrum point label {lab!r} does not index an atom")
        out.append(atoms[int(lab)])
    return out


def _isolating_radius(ws: WaveSpectrum) -> float:
    D = ws.metric
    pos = D[D > 0]
    return 0.5 * float(pos.min()) if pos.size else 1.0


def ball_projection(ws: WaveSpectrum, patoms: list, i: int, r: float) -> np.ndarray:
    """Projector onto the join of the atoms of all points within ``r`` of point ``i``."""
    idx = np.flatnonzero(ws.metric[i] < r)
    w = patoms[0].weights
    frames = [patoms[k].frame for k in idx]
    S = orthonormalize(np.hstack(frames), w)
    return S.projector()


def cyclic_check(g, patoms: list, quotient: bool = False, tol: float = EPS_RANK) -> bool:
    """Does ``g`` generate the state space under the atom projections?

    With ``quotient=True`` the target is the span of one vector per atom,
    which is what a ring-constant vector can reach on a symmetric domain.
    """
    g = np.asarray(g, dtype=float)
    w = patoms[0].weights
    cols = np.column_stack([a.project(g) for a in patoms])
    sw = np.sqrt(w)[:, None]
    s = np.linalg.svd(sw * cols, compute_uv=False)
    scale = float(np.sqrt(np.sum(w * g ** 2)))
    if scale == 0:
        return False
    norms = np.sqrt(np.sum(w[:, None] * cols ** 2, axis=0))
    if np.any(norms <= tol * scale):
        return False
    rank = int(np.sum(s > tol * scale))
    target = len(patoms) if quotient else w.size
    return rank == target


@dataclass
class SpectralMeasure:
    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def of(self, index) -> float:
        """Mass of a subset of spectrum points (additive by construction)."""
        return float(self.masses[np.asarray(index)].sum())


@dataclass
class ModelSpace:
    ws: WaveSpectrum
    atoms: list                 # one atom per spectrum point
    g: np.ndarray
    measure: SpectralMeasure
    quotient: bool

    @property
    def weights(self) -> np.ndarray:
        return self.atoms[0].weights

    def image_matrix(self) -> np.ndarray:
        """Matrix of ``I``: row ``k`` gives ``(P_k y, g) / (P_k g, g)``."""
        w = self.weights
        rows = [w * a.project(self.g) / m for a, m in zip(self.atoms, self.measure.masses)]
        return np.vstack(rows)

    def adjoint_matrix(self) -> np.ndarray:
        """Matrix of ``I*``: column ``k`` is ``P_k g``."""
        return np.column_stack([a.project(self.g) for a in self.atoms])

    def inner(self, u, v) -> float:
        return float(np.sum(self.measure.masses * np.asarray(u) * np.asarray(v)))

    def to_json(self) -> str:
        I = self.image_matrix()
        return json.dumps({
            "points": [_plain(p) for p in self.ws.provenance],
            "masses": self.measure.masses.tolist(),
            "image_of_basis": I.T.tolist(),
            "quotient_model": bool(self.quotient),
        }, sort_keys=True, indent=1)


def _plain(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (tuple, list, np.ndarray)):
        return [_plain(y) for y in x]
    return x


def measure(ws: WaveSpectrum, atoms: list, g=None, quotient: bool | None = None) -> SpectralMeasure:
    """Point masses ``(P g, g)`` for the isolating ball around each point."""
    patoms = point_atoms(ws, atoms)
    w = patoms[0].weights
    g = np.ones(w.size) if g is None else np.asarray(g, dtype=float)
    q = any(a.rank > 1 for a in patoms) if quotient is None else quotient
    if not cyclic_check(g, patoms, q):
        raise ValueError("g is not cyclic for the eikonal algebra")
    r = _isolating_radius(ws)
    masses = np.array([g @ (w * (ball_projection(ws, patoms, i, r) @ g)) for i in range(len(ws))])
    return SpectralMeasure(masses)


def model_space(ws: WaveSpectrum, atoms: list, g=None) -> ModelSpace:
    patoms = point_atoms(ws, atoms)
    w = patoms[0].weights
    g = np.ones(w.size) if g is None else np.asarray(g, dtype=float)
    q = any(a.rank > 1 for a in patoms)
    mu = measure(ws, atoms, g, q)
    return ModelSpace(ws, patoms, g, mu, q)


def image(y, ms: ModelSpace) -> np.ndarray:
    """``(I y)(tau) = (P_tau y, g) / (P_tau g, g)`` at every spectrum point."""
    return ms.image_matrix() @ np.asarray(y, dtype=float)


def unitarity_residual(ms: ModelSpace, Y=None, seed: int = 0) -> float:
    """``max |(I y_i, I y_j)_mu - (y_i, y_j)_H|`` over a frame (random orthonormal by default)."""
    w = ms.weights
    if Y is None:
        rng = np.random.default_rng(seed)
        Y = orthonormalize(rng.standard_normal((w.size, w.size)), w).frame
    IY = ms.image_matrix() @ Y
    G_mod = IY.T @ (ms.measure.masses[:, None] * IY)
    G_H = Y.T @ (w[:, None] * Y)
    return float(np.abs(G_mod - G_H).max())


@dataclass
class ModelOperator:
    L_mod: np.ndarray           # matrix of I L I* on model coordinates
    dom_mod: Subspace | None    # image of the minimal domain (plain coordinates)
    off_stencil: float | None   # relative mass outside the vertex adjacency stencil
    spectrum_error: float       # eigenvalue mismatch between L and L_mod
    restricted_error: float | None


def _stencil(m: DiscreteManifold, patoms: list) -> np.ndarray | None:
    """Adjacency (plus diagonal) between spectrum points carried by single vertices."""
    if any(a.mask is None or a.mask.sum() != 1 for a in patoms):
        return None
    I = m.interior_idx
    verts = [int(I[np.flatnonzero(a.mask)[0]]) for a in patoms]
    adj = np.eye(len(verts), dtype=bool)
    nb = m.neighbors
    for i, u in enumerate(verts):
        for j, v in enumerate(verts):
            if v in nb[u]:
                adj[i, j] = True
    return adj


def model_operator(L: np.ndarray, ms: ModelSpace, dom: Subspace | None = None,
                   manifold: DiscreteManifold | None = None) -> ModelOperator:
    """Conjugate the operator by the image map: ``L_mod = I L I*``.

    ``L`` acts on state coefficients.  For singleton atoms this is
    ``diag(g)^-1 L diag(g)`` up to the ordering of the points.  ``dom``,
    when given, is carried over and the compressions to the two domains are
    compared spectrally.
    """
    I, Is = ms.image_matrix(), ms.adjoint_matrix()
    L = np.asarray(L, dtype=float)
    Lm = I @ L @ Is
    ev = np.sort(np.linalg.eigvals(L).real)
    evm = np.sort(np.linalg.eigvals(Lm).real)
    spec_err = float(np.abs(ev - evm).max() / max(np.abs(ev).max(), 1.0)) if ev.size == evm.size \
        else float("inf")
    dom_mod, r_err = None, None
    if dom is not None and dom.rank:
        w, mu = ms.weights, ms.measure.masses
        F = dom.frame
        C = F.T @ (w[:, None] * (L @ F))                    # compression on the domain
        Fm = I @ F                                           # orthonormal in L2(mu)
        Cm = Fm.T @ (mu[:, None] * (Lm @ Fm))
        dom_mod = Subspace(Fm, mu, check=False)
        e1 = np.sort(np.linalg.eigvals(C).real)
        e2 = np.sort(np.linalg.eigvals(Cm).real)
        r_err = float(np.abs(e1 - e2).max() / max(np.abs(e1).max(), 1.0))
    off = None
    if manifold is not None:
        st = _stencil(manifold, ms.atoms)
        if st is not None:
            tot = np.abs(Lm).sum()
            off = float(np.abs(Lm[~st]).sum() / tot) if tot else 0.0
    return ModelOperator(Lm, dom_mod, off, spec_err, r_err)


def gauge_residual(ms: ModelSpace, tau: np.ndarray) -> float:
    """``I tau I*`` against multiplication by ``tau`` read off at the spectrum points.

    ``tau`` is the matrix of a diagonal eikonal on state coordinates.
    """
    Lm = ms.image_matrix() @ tau @ ms.adjoint_matrix()
    vals = np.array([float(np.diag(tau)[a.mask].mean()) if a.mask is not None else np.nan
                     for a in ms.atoms])
    return float(np.abs(Lm - np.diag(vals)).max())
