"""Space extensions, the subspace-side procedure, eikonals and the wave spectrum.

Two backends implement a space extension on the state space:

* ``geometric``: ``E^t`` maps a subspace to the coordinate subspace of the
  ``t``-neighborhood of its support.
* ``dynamical``: ``E^t A`` is the closed span of the states reached at time
  ``t`` by waves forced along ``A``.  It runs on a physical Green system or
  on the Fourier picture reconstructed from spectral data.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from wavespec import dynamics as dy
from wavespec.geometry import Caps, DiscreteManifold, VertexSet, distance_to_set, procedure1
from wavespec.green import GreenSystem
from wavespec.numlin import (EPS_RANK, ProjectionFamily, Subspace, SymOp, containment_angle,
                             op_norm, orthonormalize, principal_angles, psd_order)


# ----------------------------------------------------------- extensions

class SpaceExtension:
    """A monotone family of maps on the subspace lattice of the state space."""

    def __init__(self, backend: str, manifold: DiscreteManifold | None = None,
                 system: dy.WaveSystem | None = None, dt: float | None = None,
                 t_max: float | None = None, tol: float = EPS_RANK, eps_mass: float = 1e-6,
                 half_width: int = 1, patches=None):
        if backend not in ("geometric", "dynamical"):
            raise ValueError("backend must be 'geometric' or 'dynamical'")
        self.backend = backend
        self.tol = float(tol)
        self.eps_mass = float(eps_mass)
        self.last_leak = 0.0
        if backend == "geometric":
            if manifold is None:
                raise ValueError("geometric backend needs a manifold")
            self.manifold = manifold
            self.interior = manifold.interior_idx
            self.weights = manifold.weights[self.interior].copy()
            self.patches = list(manifold.patches) if patches is None else list(patches)
        else:
            if system is None or dt is None or t_max is None:
                raise ValueError("dynamical backend needs a system, dt and t_max")
            self.system = dy.as_system(system)
            self.dt = float(dt)
            self.M = int(round(t_max / dt))
            if self.M < 2:
                raise ValueError("t_max must span at least two time steps")
            self.half_width = int(half_width)
            self.weights = self.system.w.copy()
            self._forced, self._bound = dy.hat_kernels(self.system, self.dt, self.M, half_width)
            nb = self.system.n_boundary
            self.patches = [np.arange(nb)] if patches is None else [np.asarray(p) for p in patches]

    @classmethod
    def geometric(cls, m: DiscreteManifold, eps_mass: float = 1e-6, patches=None):
        return cls("geometric", manifold=m, eps_mass=eps_mass, patches=patches)

    @classmethod
    def dynamical(cls, system, dt: float, t_max: float, tol: float = EPS_RANK,
                  half_width: int = 1, patches=None):
        if isinstance(system, dy.FourierModel):
            system = system.system
        if isinstance(system, GreenSystem):
            system = dy.WaveSystem.from_green(system)
        return cls("dynamical", system=system, dt=dt, t_max=t_max, tol=tol,
                   half_width=half_width, patches=patches)

    @property
    def dim(self) -> int:
        return self.weights.size

    def tgrid(self) -> np.ndarray:
        """Natural breakpoints: attained distances or the simulation grid."""
        if self.backend == "geometric":
            return self.manifold.levels
        return self.dt * np.arange(self.M + 1)

    # -- geometric helpers
    def _full_mask(self, interior_mask) -> np.ndarray:
        full = np.zeros(self.manifold.n, dtype=bool)
        full[self.interior] = interior_mask
        return full

    def support(self, A: Subspace):
        """Coordinates carrying at least ``eps_mass`` (relative) of the frame and the leaked mass."""
        if A.mask is not None:
            return A.mask.copy(), 0.0
        mass = np.sum(A.whitened_frame() ** 2, axis=1)
        if mass.max(initial=0.0) == 0:
            return np.zeros(self.dim, dtype=bool), 0.0
        supp = mass >= self.eps_mass * mass.max()
        leak = float(mass[~supp].sum() / mass.sum())
        return supp, leak

    def _coord(self, mask) -> Subspace:
        return Subspace.coordinate(mask, self.weights)

    def _ball(self, A_full: np.ndarray, t: float, closed: bool) -> np.ndarray:
        m = self.manifold
        if not A_full.any():
            return np.zeros(self.dim, dtype=bool)
        d = distance_to_set(m, VertexSet(A_full))
        inside = d <= t + m.dist_tol if closed else (d < t - m.dist_tol) | A_full
        return inside[self.interior]

    # -- dynamical helpers
    def _step(self, t: float) -> int:
        return dy.grid_index(self.dt, t, self.M)

    def _span(self, modal_states: np.ndarray, extra: Subspace | None = None) -> Subspace:
        sys = self.system
        X = sys.to_state(modal_states)
        if extra is not None and extra.rank:
            X = np.hstack([X, extra.frame * _col_scale(X)])
        if X.shape[1] == 0 or not np.any(X):
            return Subspace.zero(self.dim, self.weights)
        return orthonormalize(X, self.weights, self.tol)

    # -- the extension
    def extend(self, A: Subspace, t: float, closed: bool = False) -> Subspace:
        """``E^t A``.  ``closed=True`` uses closed balls (geometric breakpoints)."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        if A.rank == 0:
            return Subspace.zero(self.dim, self.weights)
        if t == 0 and not closed:
            return A
        if self.backend == "geometric":
            supp, leak = self.support(A)
            self.last_leak = leak
            return self._coord(self._ball(self._full_mask(supp), t, closed))
        m = self._step(t)
        if m == 0:
            return A
        dirs = self.system.to_modal(A.frame)
        return self._span(dy.pulse_span_states(self._forced, dirs, m), A)

    def boundary_reach(self, t: float, patch=None, closed: bool = False) -> Subspace:
        """``clos U^t`` for the given boundary patch (whole boundary by default)."""
        if self.backend == "geometric":
            m = self.manifold
            P = m.whole_boundary.mask if patch is None else m.vertex_set(patch).mask
            if t == 0 and not closed:
                return Subspace.zero(self.dim, self.weights)
            return self._coord(self._ball(P, t, closed))
        k = self._step(t)
        if k == 0:
            return Subspace.zero(self.dim, self.weights)
        cols = np.arange(self.system.n_boundary) if patch is None else np.asarray(patch)
        dirs = self.system.pi_modal[:, cols]
        return self._span(dy.pulse_span_states(self._bound, dirs, k))

    def chain(self, A: Subspace | None, tgrid=None, boundary_patch=None) -> ProjectionFamily:
        """Monotone chain ``t -> E^t A`` (or the boundary reach when ``A`` is None)."""
        tg = self.tgrid() if tgrid is None else np.asarray(tgrid, dtype=float)
        stages, prev = [], None
        for t in tg:
            S = self.boundary_reach(t, boundary_patch, closed=True) if A is None else \
                self.extend(A, t, closed=True)
            if self.backend == "dynamical" and prev is not None:
                S = _grow(prev, S, self.tol)
            stages.append(S)
            prev = S
        return ProjectionFamily(tg, stages, check_tol=1e-6 if self.backend == "dynamical" else 1e-8)


def _grow(prev: Subspace, S: Subspace, tol: float) -> Subspace:
    """``prev`` joined with the part of ``S`` outside it; ``prev`` is kept exactly."""
    if S.rank == 0:
        return prev
    R = S.frame - prev.project(S.frame) if prev.rank else S.frame
    new = orthonormalize(R, prev.weights, tol) if np.any(R) else None
    if new is None or new.rank == 0 or np.linalg.norm(np.sqrt(prev.weights)[:, None] * R, 2) <= tol:
        return prev
    # re-orthogonalize once against prev for accuracy
    F = new.frame - prev.project(new.frame) if prev.rank else new.frame
    F = orthonormalize(F, prev.weights, 1e-12).frame
    return Subspace(np.hstack([prev.frame, F]), prev.weights, check=False)


def _col_scale(X: np.ndarray) -> float:
    n = np.linalg.norm(X, axis=0)
    return float(n.max()) if n.size and n.max() > 0 else 1.0


def extend(ext: SpaceExtension, A: Subspace, t: float) -> Subspace:
    return ext.extend(A, t)


# ------------------------------------------------------- procedure 1-hat

class AtomDecomposition:
    """Orthogonal decomposition of the state space refined by projections.

    Refining an atom by a projection splits it along the eigenvectors of the
    compressed projection, at eigenvalue 1/2.  For commuting projections
    this is exactly the atom structure of the generated algebra.
    """

    def __init__(self, dim: int, weights):
        self.weights = np.asarray(weights, dtype=float)
        self.atoms = [Subspace.full(dim, self.weights)]
        self.atoms[0].mask = np.ones(dim, dtype=bool)

    def __len__(self) -> int:
        return len(self.atoms)

    def refine(self, S: Subspace) -> bool:
        if S.rank == 0 or S.rank == S.dim:
            return False
        changed = False
        out = []
        for a in self.atoms:
            if a.mask is not None and S.mask is not None:
                hi, lo = a.mask & S.mask, a.mask & ~S.mask
                if hi.any() and lo.any():
                    out += [Subspace.coordinate(hi, self.weights), Subspace.coordinate(lo, self.weights)]
                    changed = True
                else:
                    out.append(a)
                continue
            G = S.whitened_frame().T @ a.whitened_frame()
            C = G.T @ G
            ev, V = np.linalg.eigh(0.5 * (C + C.T))
            hi = ev > 0.5
            if hi.any() and (~hi).any():
                out += [Subspace(a.frame @ V[:, hi], self.weights, check=False),
                        Subspace(a.frame @ V[:, ~hi], self.weights, check=False)]
                changed = True
            else:
                out.append(a)
        self.atoms = out
        return changed


@dataclass
class Procedure1HatResult:
    atoms: list
    family: list
    stabilized: bool
    depth: int
    tgrid: np.ndarray
    truncated: bool = False

    def atom_masks(self):
        """Coordinate masks of the atoms (geometric backend) or None."""
        if all(a.mask is not None for a in self.atoms):
            return [a.mask for a in self.atoms]
        return None


def _add_unique(family: list, S: Subspace, cap: int, tol: float) -> bool:
    if S.rank == 0:
        return False
    for F in family:
        if F.rank != S.rank:
            continue
        if S.mask is not None and F.mask is not None:
            if np.array_equal(S.mask, F.mask):
                return False
        elif principal_angles(F, S).max(initial=0.0) <= tol:
            return False
    if len(family) >= cap:
        return None
    family.append(S)
    return True


def procedure1_hat(ext: SpaceExtension, tgrid=None, caps: Caps = Caps(),
                   patches=None) -> Procedure1HatResult:
    """Subspace-side procedure seeded by the boundary reachable subspaces.

    Each round extends every atom by every time in ``tgrid`` and refines the
    atoms by the results.  Extensions distribute over joins, so extending
    atoms generates the same algebra as extending every member.
    """
    tg = ext.tgrid() if tgrid is None else np.asarray(tgrid, dtype=float)
    tg = tg[tg > 0]
    patches = ext.patches if patches is None else patches
    dec = AtomDecomposition(ext.dim, ext.weights)
    family: list = []
    truncated = False
    for p in patches:
        for t in tg:
            S = ext.boundary_reach(t, p)
            if _add_unique(family, S, caps.max_sets, ext.tol) is None:
                truncated = True
            dec.refine(S)
    stabilized, depth = False, 0
    while depth < caps.max_depth:
        depth += 1
        before = len(dec)
        for a in list(dec.atoms):
            for t in tg:
                S = ext.extend(a, t)
                if _add_unique(family, S, caps.max_sets, ext.tol) is None:
                    truncated = True
                dec.refine(S)
        if len(dec) == before:
            stabilized = True
            break
    return Procedure1HatResult(dec.atoms, family, stabilized, depth, tg, truncated)


# -------------------------------------------------------------- eikonals

@dataclass
class Eikonal:
    family: ProjectionFamily
    op: SymOp
    is_boundary_eikonal: bool = False
    is_maximal: bool | None = None
    regularized_alpha: float | None = None
    complete: bool = True
    label: object = None

    def norm(self) -> float:
        return op_norm(self.op)


def eikonal_from_chain(chain: ProjectionFamily, regularize_alpha: float | None = None,
                       label=None, boundary: bool = False) -> Eikonal:
    """Finite Stieltjes sum ``sum_k t_k (P_k - P_{k-1})`` over the chain breakpoints.

    A chain that does not reach the whole space has the remainder assigned to
    its last breakpoint and is flagged incomplete.
    """
    t = chain.breakpoints
    if regularize_alpha is not None:
        if regularize_alpha <= 0:
            raise ValueError("alpha must be positive")
        t = t / (1 + regularize_alpha * t)
    n = chain.dim
    w = chain.weights
    complete = chain.is_complete()
    if all(s.mask is not None for s in chain.stages):
        d = np.full(n, np.nan)
        for tk, s in zip(t, chain.stages):
            d[np.isnan(d) & s.mask] = tk
        d[np.isnan(d)] = t[-1]
        op = SymOp.diag(d, w)
    else:
        P = chain.projectors()
        acc = t[0] * P[0]
        for k in range(1, len(P)):
            acc = acc + t[k] * (P[k] - P[k - 1])
        if not complete:
            acc = acc + t[-1] * (np.eye(n) - P[-1])
        sw = np.sqrt(w)
        wh = sw[:, None] * acc / sw[None, :]
        wh = 0.5 * (wh + wh.T)
        op = SymOp(wh / sw[:, None] * sw[None, :], w, check=False)
    return Eikonal(chain, op, boundary, None, regularize_alpha, complete, label)


def boundary_eikonal(ext: SpaceExtension, tgrid=None, regularize_alpha=None) -> Eikonal:
    """Eikonal of the chain of boundary reachable subspaces (whole boundary)."""
    return eikonal_from_chain(ext.chain(None, tgrid), regularize_alpha, "boundary", True)


def atom_eikonals(ext: SpaceExtension, atoms, tgrid=None, regularize_alpha=None) -> list:
    return [eikonal_from_chain(ext.chain(a, tgrid), regularize_alpha, k)
            for k, a in enumerate(atoms)]


def set_eikonal(ext: SpaceExtension, A: VertexSet, regularize_alpha=None) -> Eikonal:
    """Geometric eikonal of an arbitrary vertex set, boundary vertices allowed.

    Equals multiplication by the distance to ``A`` on the interior vertices.
    """
    if ext.backend != "geometric":
        raise ValueError("set eikonals need the geometric backend")
    chain_stages = []
    tg = ext.tgrid()
    for t in tg:
        chain_stages.append(ext._coord(ext._ball(A.mask, t, closed=True)))
    fam = ProjectionFamily(tg, chain_stages)
    return eikonal_from_chain(fam, regularize_alpha, tuple(A.indices.tolist()))


# --------------------------------------------------------- wave spectrum

@dataclass
class WaveSpectrum:
    points: list
    metric: np.ndarray
    boundary_mask: np.ndarray
    provenance: list
    defect: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dominates_boundary: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __len__(self) -> int:
        return len(self.points)

    def to_json(self) -> str:
        return json.dumps({
            "points": [_jsonable(p) for p in self.provenance],
            "metric": self.metric.tolist(),
            "boundary": [bool(b) for b in self.boundary_mask],
            "defect": self.defect.tolist(),
        }, sort_keys=True, indent=1)

    def metric_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        for row in self.metric:
            wr.writerow([repr(float(x)) for x in row])
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (tuple, list)):
        return [_jsonable(y) for y in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def read_metric_csv(text: str) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in csv.reader(io.StringIO(text)) if row])


def _defect(tau: SymOp, ref: SymOp) -> float:
    """How far ``tau >= ref`` is from holding: ``max(0, -min eig(tau - ref))``."""
    diff = tau - ref
    if diff.is_diagonal():
        lo = float(np.diag(diff.entries).min())
    else:
        lo = float(diff.eigvals()[0])
    return max(0.0, -lo)


def maximal_eikonals(eiks: list, tol: float = 1e-8, boundary: Eikonal | None = None,
                     boundary_tol: float | None = None) -> WaveSpectrum:
    """Keep the eikonals that dominate every comparable member; build the metric and boundary.

    A point is flagged as boundary when its defect against the boundary
    eikonal is within ``boundary_tol`` of the smallest defect.  When some
    point dominates the boundary eikonal outright the smallest defect is 0
    and this is the exact order test; otherwise the flagged points are the
    ones adjacent to the boundary at the resolution of the model.
    """
    eiks = list(eiks)
    if not eiks:
        raise ValueError("no eikonals given")
    n = len(eiks)
    keep = []
    for i in range(n):
        ok = True
        for j in range(n):
            if i == j:
                continue
            rel = psd_order(eiks[i].op, eiks[j].op, tol)
            if rel == "a_below" or (rel == "equal" and j < i):
                ok = False
                break
        eiks[i].is_maximal = ok
        if ok:
            keep.append(i)
    pts = [eiks[i] for i in keep]
    k = len(pts)
    metric = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            metric[i, j] = metric[j, i] = op_norm(pts[i].op - pts[j].op)
    if boundary is not None:
        defect = np.array([_defect(p.op, boundary.op) for p in pts])
        exact = defect <= tol
        bt = tol if boundary_tol is None else boundary_tol
        mask = defect <= defect.min() + bt
    else:
        defect = np.zeros(k)
        exact = np.zeros(k, dtype=bool)
        mask = np.zeros(k, dtype=bool)
    return WaveSpectrum(pts, metric, mask, [p.label for p in pts], defect, exact)


def metric_check(ws: WaveSpectrum, tol: float = 1e-10) -> dict:
    D = ws.metric
    sym = float(np.abs(D - D.T).max(initial=0.0))
    diag = float(np.abs(np.diag(D)).max(initial=0.0))
    tri = 0.0
    for k in range(D.shape[0]):
        tri = max(tri, float((D - D[:, [k]] - D[[k], :]).max(initial=0.0)))
    return {"symmetric": sym <= tol, "zero_diagonal": diag <= tol, "triangle": tri <= tol,
            "triangle_excess": tri}


# ------------------------------------------------------------- isometry

@dataclass
class IsometryReport:
    discrepancy: float
    matched_fraction: float
    assignment: list
    boundary_ok: bool
    n_points: int
    n_targets: int
    cardinality_match: bool
    targets: list


def orbit_targets(m: DiscreteManifold, caps: Caps = Caps()) -> list:
    """Interior parts of the set-side atoms: orbit representatives of the symmetry quotient."""
    res = procedure1(m, caps=caps)
    inside = np.zeros(m.n, dtype=bool)
    inside[m.interior_idx] = True
    out = []
    for a in res.atoms:
        msk = a.mask & inside
        if msk.any():
            out.append(np.flatnonzero(msk))
    return out


def quotient_metric(m: DiscreteManifold, targets: list) -> np.ndarray:
    """Smallest vertex distance between target sets (the orbit quotient metric)."""
    D = m.distances
    k = len(targets)
    out = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = D[np.ix_(targets[i], targets[j])].min()
    return out


def _assign(A: np.ndarray, B: np.ndarray, mask_a=None, mask_b=None):
    """Match points of metric ``A`` to points of metric ``B`` minimizing the max discrepancy.

    Sorted distance profiles give an initial linear assignment, refined by
    pairwise swaps.  Ties in the discrepancy (up to 1e-9 of the scale) are
    broken by the number of boundary-flag mismatches, which resolves
    reflections of the metric that a distance-only match cannot see.
    """
    na, nb = A.shape[0], B.shape[0]
    k = min(na, nb)
    ma = np.zeros(na, dtype=bool) if mask_a is None else np.asarray(mask_a, dtype=bool)
    mb = np.zeros(nb, dtype=bool) if mask_b is None else np.asarray(mask_b, dtype=bool)
    pa, pb = np.sort(A, axis=1), np.sort(B, axis=1)
    L = max(na, nb)
    pad = lambda P: np.hstack([P, np.full((P.shape[0], L - P.shape[1]), P.max(initial=0.0))])
    pa, pb = pad(pa), pad(pb)
    scale = max(float(A.max(initial=0.0)), float(B.max(initial=0.0)), 1e-300)
    cost = np.abs(pa[:, None, :] - pb[None, :, :]).max(axis=2)
    if ma.any() and mb.any():
        # distance to the boundary-flagged points is invariant under a boundary-respecting isometry
        fa, fb = A[:, ma].min(axis=1), B[:, mb].min(axis=1)
        cost = np.maximum(cost, np.abs(fa[:, None] - fb[None, :]))
    cost = cost + 1e-6 * scale * (ma[:, None] != mb[None, :])
    rows, cols = linear_sum_assignment(cost)
    order = np.argsort(rows)
    rows, cols = rows[order], cols[order]
    quantum = 1e-9 * scale

    def score(c):
        d = float(np.abs(A[np.ix_(rows, rows)] - B[np.ix_(c, c)]).max(initial=0.0))
        return (round(d / quantum), int(np.sum(ma[rows] != mb[c]))), d

    best, bd = score(cols)
    # steepest descent over swaps and reassignments to unused targets
    while best != (0, 0):
        cand = None
        unused = np.setdiff1d(np.arange(nb), cols)
        for i in range(k):
            for j in range(i + 1, k):
                c2 = cols.copy()
                c2[i], c2[j] = c2[j], c2[i]
                s2, d2 = score(c2)
                if s2 < best and (cand is None or s2 < cand[0]):
                    cand = (s2, d2, c2)
            for u in unused:
                c2 = cols.copy()
                c2[i] = u
                s2, d2 = score(c2)
                if s2 < best and (cand is None or s2 < cand[0]):
                    cand = (s2, d2, c2)
        if cand is None:
            break
        best, bd, cols = cand
    return rows, cols, bd


def isometry_report(ws: WaveSpectrum, m: DiscreteManifold, targets: list | None = None,
                    caps: Caps = Caps()) -> IsometryReport:
    """Best matching between spectrum points and vertices (or orbit sets) under the metric."""
    targets = orbit_targets(m, caps) if targets is None else [np.atleast_1d(t) for t in targets]
    B = quotient_metric(m, targets)
    # targets meeting the Gamma-adjacent layer
    dG = distance_to_set(m, m.whole_boundary)
    layer = dG[m.interior_idx].min()
    adj = np.array([np.isclose(dG[t].min(), layer) for t in targets])
    bmask = np.asarray(ws.boundary_mask, dtype=bool)
    rows, cols, best = _assign(ws.metric, B, bmask, adj)
    bok = bool(np.all(bmask[rows] == adj[cols])) and len(ws) == len(targets)
    frac = len(rows) / max(len(ws), len(targets))
    return IsometryReport(best, frac, list(zip(rows.tolist(), cols.tolist())), bok, len(ws),
                          len(targets), len(ws) == len(targets), targets)


@dataclass
class BoundednessReport:
    bounded: bool
    sup: float
    diameter: float | None


def boundedness_check(eiks, m: DiscreteManifold | None = None) -> BoundednessReport:
    """Largest eikonal norm, compared with the diameter of the interior vertex set."""
    sup = max((e.norm() for e in eiks), default=0.0)
    diam = None
    if m is not None:
        I = m.interior_idx
        diam = float(m.distances[np.ix_(I, I)].max())
    return BoundednessReport(bool(np.isfinite(sup)), float(sup), diam)


# ------------------------------------------------------------ pipeline

def wave_spectrum(ext: SpaceExtension, tgrid=None, eik_tgrid=None, caps: Caps = Caps(),
                  psd_tol: float = 1e-8, boundary_tol: float | None = None):
    """Procedure 1-hat, atom eikonals, maximal selection and boundary: one call."""
    res = procedure1_hat(ext, tgrid, caps)
    eiks = atom_eikonals(ext, res.atoms, eik_tgrid)
    tb = boundary_eikonal(ext, eik_tgrid)
    ws = maximal_eikonals(eiks, psd_tol, tb, boundary_tol)
    return ws, res, tb


def cross_backend_angle(a: Subspace, b: Subspace) -> float:
    """Symmetric containment angle between two subspaces."""
    return max(containment_angle(a, b), containment_angle(b, a))
