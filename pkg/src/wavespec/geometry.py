"""Discrete model manifolds, geodesic distances and the set-side construction.

A manifold here is a connected weighted graph with a boundary subset.  Edge
lengths define geodesic distances; edge conductances and vertex volumes
define the Laplacian used by :mod:`wavespec.green`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path


@dataclass(frozen=True)
class Caps:
    max_sets: int = 4096
    max_depth: int = 6

    def __post_init__(self):
        if self.max_sets <= 0 or self.max_depth <= 0:
            raise ValueError("caps must be positive")


class VertexSet:
    """Subset of the vertex set of a manifold, stored as a boolean mask."""

    __slots__ = ("mask", "_key")

    def __init__(self, mask):
        m = np.asarray(mask, dtype=bool).copy()
        m.setflags(write=False)
        self.mask = m
        self._key = np.packbits(m).tobytes() + m.size.to_bytes(8, "little")

    @classmethod
    def from_indices(cls, n: int, idx) -> "VertexSet":
        m = np.zeros(n, dtype=bool)
        m[np.asarray(list(idx), dtype=int)] = True
        return cls(m)

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __bool__(self) -> bool:
        return bool(self.mask.any())

    def __eq__(self, other) -> bool:
        return isinstance(other, VertexSet) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __and__(self, other):
        return VertexSet(self.mask & other.mask)

    def __or__(self, other):
        return VertexSet(self.mask | other.mask)

    def __sub__(self, other):
        return VertexSet(self.mask & ~other.mask)

    def __invert__(self):
        return VertexSet(~self.mask)

    def issubset(self, other) -> bool:
        return not np.any(self.mask & ~other.mask)

    def __repr__(self) -> str:
        return f"VertexSet({self.indices.tolist()})"


@dataclass
class SetFamily:
    """Deduplicated list of vertex sets with the step that produced each."""

    members: list = field(default_factory=list)
    log: list = field(default_factory=list)
    truncated: bool = False
    fixpoint: bool = False
    _seen: set = field(default_factory=set, repr=False)

    def add(self, s: VertexSet, step: int = 0, cap: int | None = None) -> bool:
        if s in self._seen:
            return False
        if cap is not None and len(self.members) >= cap:
            self.truncated = True
            return False
        self._seen.add(s)
        self.members.append(s)
        self.log.append(step)
        return True

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, s) -> bool:
        return s in self._seen


@dataclass
class DiscreteManifold:
    """Weighted graph with boundary.

    ``weights`` are vertex volumes (used on interior vertices), and
    ``boundary_weights`` are the boundary measure of each boundary vertex in
    the order of ``boundary_idx``.  ``patches`` lists groups of boundary
    vertices used as independent control sources; by default the whole
    boundary is one patch.
    """

    n: int
    boundary: np.ndarray
    edges: np.ndarray
    lengths: np.ndarray
    conductance: np.ndarray
    weights: np.ndarray
    boundary_weights: np.ndarray
    coords: np.ndarray | None = None
    patches: list | None = None
    kind: str = "graph"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.boundary = np.asarray(self.boundary, dtype=bool)
        self.edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        self.lengths = np.asarray(self.lengths, dtype=float)
        self.conductance = np.asarray(self.conductance, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.boundary_weights = np.asarray(self.boundary_weights, dtype=float)
        if self.boundary.shape != (self.n,) or self.weights.shape != (self.n,):
            raise ValueError("boundary mask and weights must have one entry per vertex")
        if not self.boundary.any():
            raise ValueError("boundary is empty")
        if self.boundary.all():
            raise ValueError("no interior vertices")
        if np.any(self.lengths <= 0) or np.any(self.conductance <= 0):
            raise ValueError("edge lengths and conductances must be positive")
        if self.boundary_weights.shape != (int(self.boundary.sum()),):
            raise ValueError("one boundary weight per boundary vertex")
        g = self._graph(self.lengths)
        if connected_components(g, directed=False)[0] != 1:
            raise ValueError("manifold graph is disconnected")
        inner = ~self.boundary
        for b in self.boundary_idx:
            if not inner[self.neighbors[b]].any():
                raise ValueError(f"boundary vertex {b} has no interior neighbor")
        if self.patches is None:
            self.patches = [self.boundary_idx.copy()]
        else:
            self.patches = [np.sort(np.asarray(p, dtype=int)) for p in self.patches]
            for p in self.patches:
                if p.size == 0 or not self.boundary[p].all():
                    raise ValueError("patches must be nonempty sets of boundary vertices")

    def _graph(self, vals):
        i, j = self.edges[:, 0], self.edges[:, 1]
        return coo_matrix((np.r_[vals, vals], (np.r_[i, j], np.r_[j, i])),
                          shape=(self.n, self.n)).tocsr()

    @cached_property
    def neighbors(self) -> list:
        nb = [[] for _ in range(self.n)]
        for a, b in self.edges:
            nb[a].append(b)
            nb[b].append(a)
        return [np.array(sorted(set(x)), dtype=int) for x in nb]

    @cached_property
    def interior_idx(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def boundary_idx(self) -> np.ndarray:
        return np.flatnonzero(self.boundary)

    @cached_property
    def distances(self) -> np.ndarray:
        return geodesic_distances(self)

    @cached_property
    def diameter(self) -> float:
        return float(self.distances.max())

    @cached_property
    def levels(self) -> np.ndarray:
        """Sorted distinct attained distances, 0 included."""
        return _distinct(self.distances.ravel(), self.dist_tol)

    @property
    def dist_tol(self) -> float:
        return 1e-9 * max(float(self.lengths.min()), 1e-300)

    @cached_property
    def whole_boundary(self) -> "VertexSet":
        return VertexSet(self.boundary)

    def vertex_set(self, idx) -> VertexSet:
        return VertexSet.from_indices(self.n, idx)

    def with_patches(self, patches) -> "DiscreteManifold":
        return DiscreteManifold(self.n, self.boundary, self.edges, self.lengths, self.conductance,
                                self.weights, self.boundary_weights, self.coords,
                                [np.asarray(p) for p in patches], self.kind, dict(self.params))


def _distinct(values, tol) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        return v
    keep = np.r_[True, np.diff(v) > tol]
    return v[keep]


def geodesic_distances(m: DiscreteManifold) -> np.ndarray:
    """All-pairs shortest-path lengths along the weighted edges."""
    d = shortest_path(m._graph(m.lengths), method="D", directed=False)
    if not np.all(np.isfinite(d)):
        raise ValueError("manifold graph is disconnected")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


# ---------------------------------------------------------------- fixtures

def build_model(kind: str, **params) -> DiscreteManifold:
    builders = {"interval": interval, "metric_graph": metric_graph, "star": star,
                "polar_disk": polar_disk, "grid_domain": grid_domain}
    if kind not in builders:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(builders)}")
    return builders[kind](**params)


def interval(length: float = 1.0, n_interior: int | None = None, h: float | None = None,
             patches: str = "ends") -> DiscreteManifold:
    """Path graph on [0, length] with boundary {0, length}.

    ``patches="ends"`` makes each endpoint its own control patch (the
    reflection x -> length - x is then broken); ``"whole"`` uses the full
    boundary as one patch.
    """
    if length <= 0:
        raise ValueError("length must be positive")
    if n_interior is None:
        if h is None or h <= 0:
            raise ValueError("give n_interior or a positive h")
        n_interior = int(round(length / h)) - 1
    if n_interior < 1:
        raise ValueError("need at least one interior vertex")
    step = length / (n_interior + 1)
    n = n_interior + 2
    x = step * np.arange(n)
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    boundary = np.zeros(n, dtype=bool)
    boundary[[0, n - 1]] = True
    w = np.full(n, step)
    w[[0, n - 1]] = step / 2
    if patches == "ends":
        pt = [[0], [n - 1]]
    elif patches == "whole":
        pt = None
    else:
        raise ValueError("patches must be 'ends' or 'whole'")
    return DiscreteManifold(n, boundary, edges, np.full(n - 1, step), np.full(n - 1, 1.0 / step),
                            w, np.ones(2), x[:, None], pt, "interval",
                            {"length": length, "n_interior": n_interior, "patches": patches})


def metric_graph(n_nodes: int, edges, h: float, patches: str = "whole") -> DiscreteManifold:
    """Metric graph whose edges are subdivided into segments of length about ``h``.

    ``edges`` is a list of ``(u, v, length)`` between ``n_nodes`` nodes; the
    boundary is the set of degree-one nodes.  Vertex volumes are half the
    total length of incident segments.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    edges = [(int(u), int(v), float(L)) for u, v, L in edges]
    if not edges or any(L <= 0 for _, _, L in edges):
        raise ValueError("edges must be nonempty with positive lengths")
    deg = np.zeros(n_nodes, dtype=int)
    for u, v, _ in edges:
        deg[u] += 1
        deg[v] += 1
    n = n_nodes
    seg_edges, seg_len = [], []
    for u, v, L in edges:
        k = max(1, int(round(L / h)))
        chain = [u] + list(range(n, n + k - 1)) + [v]
        n += k - 1
        for a, b in zip(chain[:-1], chain[1:]):
            seg_edges.append((a, b))
            seg_len.append(L / k)
    seg_len = np.array(seg_len)
    w = np.zeros(n)
    for (a, b), L in zip(seg_edges, seg_len):
        w[a] += L / 2
        w[b] += L / 2
    boundary = np.zeros(n, dtype=bool)
    boundary[:n_nodes] = deg == 1
    nb = int(boundary.sum())
    pt = None if patches == "whole" else [[b] for b in np.flatnonzero(boundary)]
    return DiscreteManifold(n, boundary, np.array(seg_edges), seg_len, 1.0 / seg_len, w,
                            np.ones(nb), None, pt, "metric_graph",
                            {"n_nodes": n_nodes, "edges": edges, "h": h, "patches": patches})


def star(legs=(0.3, 0.5, 0.7), h: float = 0.1, patches: str = "whole") -> DiscreteManifold:
    """Star graph: one center node joined to a tip by each leg."""
    edges = [(0, k + 1, L) for k, L in enumerate(legs)]
    m = metric_graph(len(legs) + 1, edges, h, patches)
    m.kind = "star"
    m.params = {"legs": list(legs), "h": h, "patches": patches}
    return m


def polar_disk(n_rings: int = 4, n_sectors: int = 8, radius: float = 1.0,
               center: bool = True) -> DiscreteManifold:
    """Polar grid on the disk with exact cyclic symmetry.

    Interior rings sit at radii ``i * dr`` for ``i = 1..n_rings`` and the
    boundary ring at ``radius = (n_rings + 1) * dr``.  Volumes and
    conductances follow the finite-volume (dual cell) construction, so the
    Laplacian commutes with rotation by one sector.
    """
    if n_rings < 1 or n_sectors < 3 or radius <= 0:
        raise ValueError("need n_rings >= 1, n_sectors >= 3 and positive radius")
    dr = radius / (n_rings + 1)
    dth = 2 * np.pi / n_sectors
    idx = {}
    coords = []
    if center:
        idx[(0, 0)] = 0
        coords.append((0.0, 0.0))
    for i in range(1, n_rings + 2):
        for s in range(n_sectors):
            idx[(i, s)] = len(coords)
            coords.append((i * dr, s * dth))
    n = len(coords)
    edges, lens, cond = [], [], []

    def add(a, b, L, c):
        edges.append((a, b))
        lens.append(L)
        cond.append(c)

    for i in range(1, n_rings + 2):
        r = i * dr
        dual_radial = dr if i <= n_rings else dr / 2
        for s in range(n_sectors):
            add(idx[(i, s)], idx[(i, (s + 1) % n_sectors)], r * dth, dual_radial / (r * dth))
            if i <= n_rings:
                add(idx[(i, s)], idx[(i + 1, s)], dr, (r + dr / 2) * dth / dr)
    if center:
        for s in range(n_sectors):
            add(0, idx[(1, s)], dr, (dr / 2) * dth / dr)
    w = np.zeros(n)
    boundary = np.zeros(n, dtype=bool)
    for (i, s), v in idx.items():
        if i == 0:
            w[v] = np.pi * (dr / 2) ** 2
        elif i <= n_rings:
            w[v] = i * dr * dr * dth
        else:
            w[v] = (radius - dr / 4) * (dr / 2) * dth
            boundary[v] = True
    nb = int(boundary.sum())
    return DiscreteManifold(n, boundary, np.array(edges), np.array(lens), np.array(cond), w,
                            np.full(nb, radius * dth), np.array(coords), None, "polar_disk",
                            {"n_rings": n_rings, "n_sectors": n_sectors, "radius": radius,
                             "center": center})


def _grid_mask(shape: str, n: int) -> np.ndarray:
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    c = (n - 1) / 2
    if shape == "square":
        return np.ones((n, n), dtype=bool)
    if shape == "disk":
        return (i - c) ** 2 + (j - c) ** 2 <= (c + 0.5) ** 2
    if shape == "L":
        return ~((i < n // 2) & (j >= n // 2))
    raise ValueError("shape must be 'square', 'disk' or 'L'")


def grid_domain(shape: str = "disk", n: int = 17, spacing: float | None = None,
                mask=None) -> DiscreteManifold:
    """Square-grid domain cut out by a mask; the boundary is the mask rim.

    Rim vertices without an interior neighbor (corner cells) are dropped.
    """
    if mask is None:
        if n < 3:
            raise ValueError("grid needs n >= 3")
        mk = _grid_mask(shape, n)
    else:
        mk = np.asarray(mask, dtype=bool)
    h = spacing if spacing is not None else 1.0 / (mk.shape[0] - 1)
    if h <= 0:
        raise ValueError("spacing must be positive")
    pad = np.pad(mk, 1)
    rim = np.zeros_like(mk)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        rim |= mk & ~pad[1 + di:1 + di + mk.shape[0], 1 + dj:1 + dj + mk.shape[1]]
    inner = mk & ~rim
    keep = inner.copy()
    pin = np.pad(inner, 1)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        keep |= rim & pin[1 + di:1 + di + mk.shape[0], 1 + dj:1 + dj + mk.shape[1]]
    cells = np.argwhere(keep)
    idx = {tuple(c): k for k, c in enumerate(cells)}
    edges = []
    for (a, b), k in idx.items():
        for da, db in ((1, 0), (0, 1)):
            q = idx.get((a + da, b + db))
            if q is not None and (inner[a, b] or inner[a + da, b + db]):
                edges.append((k, q))
    n_v = len(cells)
    boundary = np.array([rim[tuple(c)] for c in cells])
    w = np.full(n_v, h * h)
    return DiscreteManifold(n_v, boundary, np.array(edges), np.full(len(edges), h),
                            np.ones(len(edges)), w, np.full(int(boundary.sum()), h),
                            cells * h, None, "grid_domain",
                            {"shape": shape, "n": int(mk.shape[0]), "spacing": h})


# ------------------------------------------------------ metric neighborhoods

def distance_to_set(m: DiscreteManifold, A: VertexSet) -> np.ndarray:
    if not A:
        return np.full(m.n, np.inf)
    return m.distances[A.mask].min(axis=0)


def neighborhood(m: DiscreteManifold, A: VertexSet, r: float) -> VertexSet:
    """Vertices at distance strictly less than ``r`` from ``A``; ``r = 0`` gives ``A``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return A
    if not A:
        return VertexSet(np.zeros(m.n, dtype=bool))
    return VertexSet(distance_to_set(m, A) < r - m.dist_tol)


def interior_points(m: DiscreteManifold, A: VertexSet) -> VertexSet:
    """Vertices of ``A`` whose whole one-ring lies in ``A``."""
    out = A.mask.copy()
    for v in A.indices:
        if not A.mask[m.neighbors[v]].all():
            out[v] = False
    return VertexSet(out)


def _partition_from_keys(keys: np.ndarray) -> np.ndarray:
    """Relabel rows of ``keys`` as consecutive integers in order of first appearance."""
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inv.reshape(-1)]


def atoms_of(n: int, fam) -> list:
    """Atoms (nonempty minimal members) of the algebra generated by ``fam``."""
    fam = list(fam)
    if not fam:
        return [VertexSet(np.ones(n, dtype=bool))]
    keys = np.column_stack([s.mask for s in fam]).astype(np.int8)
    lab = _partition_from_keys(keys)
    return [VertexSet(lab == k) for k in range(lab.max() + 1)]


def set_algebra_closure(m: DiscreteManifold, fam, caps: Caps = Caps()) -> SetFamily:
    """All members of the Boolean algebra generated by ``fam``.

    Members are the unions of atoms.  When there are more than
    ``caps.max_sets`` of them the output holds the first ``max_sets`` in
    binary order and is flagged truncated.
    """
    atoms = atoms_of(m.n, fam)
    out = SetFamily()
    k = len(atoms)
    total = 2 ** k if k < 63 else None
    limit = caps.max_sets if total is None else min(total, caps.max_sets)
    am = np.array([a.mask for a in atoms])
    for code in range(limit):
        bits = np.array([(code >> i) & 1 for i in range(k)], dtype=bool)
        out.add(VertexSet(am[bits].any(axis=0) if bits.any() else np.zeros(m.n, dtype=bool)))
    out.truncated = total is None or total > caps.max_sets
    out.fixpoint = not out.truncated
    return out


def sigma_step(m: DiscreteManifold, fam, tgrid, caps: Caps = Caps(), step: int = 1) -> SetFamily:
    """One explicit step: algebra closure, interiors (empties dropped), then neighborhoods."""
    if any(t < 0 for t in tgrid):
        raise ValueError("radii must be nonnegative")
    alg = set_algebra_closure(m, fam, caps)
    out = SetFamily(truncated=alg.truncated)
    for s in alg:
        core = interior_points(m, s)
        if not core:
            continue
        for t in tgrid:
            nb = neighborhood(m, core, t)
            if nb:
                out.add(nb, step, caps.max_sets)
    return out


@dataclass
class Procedure1Result:
    """Output of the set-side procedure.

    ``family`` holds generating sets of the final algebra (boundary
    neighborhoods and the neighborhoods of the interiors produced at each
    step), ``labels`` the atom index of every vertex.
    """

    family: SetFamily
    labels: np.ndarray
    stabilized: bool
    depth: int
    tgrid: np.ndarray

    @property
    def atoms(self) -> list:
        return [VertexSet(self.labels == k) for k in range(self.labels.max() + 1)]

    def atom_family(self) -> SetFamily:
        fam = SetFamily(fixpoint=self.stabilized)
        for a in self.atoms:
            fam.add(a)
        return fam


def _level_keys(m: DiscreteManifold, F: VertexSet, radii: np.ndarray) -> np.ndarray:
    """Membership of every vertex in the neighborhoods of ``F`` over all radii."""
    d = distance_to_set(m, F)
    cols = [F.mask]
    for r in radii:
        if r > 0:
            cols.append(d < r - m.dist_tol)
    return np.column_stack(cols)


def _radius_grid(m: DiscreteManifold, tgrid) -> np.ndarray:
    if tgrid is None:
        return m.levels
    t = np.asarray(tgrid, dtype=float)
    if np.any(t < 0):
        raise ValueError("radii must be nonnegative")
    return np.unique(np.r_[0.0, t])


def procedure1(m: DiscreteManifold, tgrid=None, caps: Caps = Caps(), patches=None) -> Procedure1Result:
    """Iterate the sigma step from the boundary neighborhoods until the atoms stop changing.

    The generated algebra is tracked through its atom partition.  One sigma
    step applied to an algebra with atoms ``a_k`` produces neighborhoods of
    interiors of unions of atoms.  A vertex ``v`` is interior to a union
    ``U`` iff every atom meeting its one-ring is in ``U``, so these interiors
    are unions of the sets ``F_S = {u : S(u) within S}`` over the one-ring
    signatures ``S(v)``.  Neighborhoods distribute over unions, hence the
    algebra generated by the step is the one generated by the neighborhoods
    of the ``F_S``.  That keeps every step polynomial and exact.
    """
    radii = _radius_grid(m, tgrid)
    patches = m.patches if patches is None else patches
    fam = SetFamily()
    keys = []
    for p in patches:
        F = m.vertex_set(p)
        k = _level_keys(m, F, radii)
        keys.append(k)
        for c in k.T:
            if c.any():
                fam.add(VertexSet(c), 0, caps.max_sets)
    labels = _partition_from_keys(np.column_stack(keys).astype(np.int8))
    stabilized = False
    depth = 0
    while depth < caps.max_depth:
        depth += 1
        nat = labels.max() + 1
        sig = np.zeros((m.n, nat), dtype=bool)
        for v in range(m.n):
            sig[v, labels[v]] = True
            sig[v, labels[m.neighbors[v]]] = True
        uniq = np.unique(sig, axis=0)
        new_keys = [labels[:, None]]
        for S in uniq:
            inside = ~np.any(sig & ~S[None, :], axis=1)
            F = VertexSet(inside)
            if not F:
                continue
            k = _level_keys(m, F, radii)
            new_keys.append(k)
            for c in k.T:
                if c.any():
                    fam.add(VertexSet(c), depth, caps.max_sets)
        new_labels = _partition_from_keys(np.column_stack(new_keys).astype(np.int64))
        if new_labels.max() == labels.max():
            stabilized = True
            labels = new_labels
            break
        labels = new_labels
    fam.fixpoint = stabilized
    return Procedure1Result(fam, labels, stabilized, depth, radii)


def is_net(m: DiscreteManifold, result: Procedure1Result):
    """True iff every atom is a single vertex; ``None`` when the procedure did not stabilize."""
    if not result.stabilized:
        return None
    return bool(result.labels.max() + 1 == m.n)


def is_simple(m: DiscreteManifold, caps: Caps = Caps()):
    return is_net(m, procedure1(m, caps=caps))


def separation_check(m: DiscreteManifold, fam) -> bool:
    """Every ordered vertex pair is separated by some member of ``fam``.

    On a graph every set is closed, so separation means ``x in w`` and
    ``x' not in w``.
    """
    fam = list(fam)
    if not fam:
        return m.n <= 1
    mem = np.column_stack([s.mask for s in fam])
    # sep[x, y]: some member contains x but not y
    sep = (mem.astype(np.int32) @ (~mem).T.astype(np.int32)) > 0
    np.fill_diagonal(sep, True)
    return bool(sep.all())
