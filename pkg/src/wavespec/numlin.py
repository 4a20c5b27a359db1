"""Weighted finite-dimensional subspace and self-adjoint operator arithmetic.

Every object carries per-coordinate volume weights ``w`` that define the
inner product ``(y, z) = sum_i w_i y_i z_i``.  Internally most computations
happen in whitened coordinates ``sqrt(w) * y`` where the weighted product is
the Euclidean one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EPS_RANK = 1e-8


def _weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise ValueError(f"weights have length {w.shape[0]}, expected {n}")
    if np.any(~np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("weights must be positive and finite")
    return w


def _same_weights(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or not np.array_equal(a, b):
        raise ValueError("operands live in different weighted spaces")


def inner(y, z, weights=None) -> float:
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    w = _weights(weights, y.shape[0])
    return float(np.sum(w * y * z))


def norm(y, weights=None) -> float:
    y = np.asarray(y, dtype=float)
    w = _weights(weights, y.shape[0])
    return float(np.sqrt(np.sum(w * y * y)))


class SymOp:
    """Operator self-adjoint with respect to a weighted inner product.

    ``entries`` is the matrix acting on coordinate vectors.  Self-adjointness
    means ``diag(w) @ entries`` is symmetric; for unit weights this is plain
    symmetry.
    """

    def __init__(self, entries, weights=None, check: bool = True, tol: float = 1e-10):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("SymOp needs a square matrix")
        self.entries = a
        self.dim = a.shape[0]
        self.weights = _weights(weights, self.dim)
        self._eig = None
        if check:
            scale = max(float(np.abs(a).max(initial=0.0)), 1.0)
            wa = self.weights[:, None] * a
            if np.abs(wa - wa.T).max(initial=0.0) > tol * scale * self.weights.max():
                raise ValueError("matrix is not self-adjoint in the weighted inner product")

    @classmethod
    def diag(cls, values, weights=None) -> "SymOp":
        v = np.asarray(values, dtype=float)
        return cls(np.diag(v), weights, check=False)

    @classmethod
    def identity(cls, n: int, weights=None) -> "SymOp":
        return cls(np.eye(n), weights, check=False)

    def whitened(self) -> np.ndarray:
        s = np.sqrt(self.weights)
        m = s[:, None] * self.entries / s[None, :]
        return 0.5 * (m + m.T)

    def is_diagonal(self) -> bool:
        return not np.any(self.entries - np.diag(np.diag(self.entries)))

    def eig(self):
        """Ascending eigenvalues and weighted-orthonormal eigenvectors (columns)."""
        if self._eig is None:
            lam, v = np.linalg.eigh(self.whitened())
            self._eig = (lam, v / np.sqrt(self.weights)[:, None])
        return self._eig

    def eigvals(self) -> np.ndarray:
        if self.is_diagonal():
            return np.sort(np.diag(self.entries))
        return np.linalg.eigvalsh(self.whitened())

    def apply(self, y):
        return self.entries @ np.asarray(y, dtype=float)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, SymOp):
            _same_weights(self.weights, other.weights)
            return other.entries
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return SymOp(self.entries + self._coerce(other), self.weights, check=False)

    def __sub__(self, other):
        return SymOp(self.entries - self._coerce(other), self.weights, check=False)

    def __mul__(self, c: float):
        return SymOp(float(c) * self.entries, self.weights, check=False)

    __rmul__ = __mul__

    def __neg__(self):
        return SymOp(-self.entries, self.weights, check=False)

    def __repr__(self) -> str:
        return f"SymOp(dim={self.dim})"


class Subspace:
    """Span of a weighted-orthonormal frame."""

    def __init__(self, frame, weights=None, tol: float = EPS_RANK, check: bool = True):
        f = np.array(frame, dtype=float)
        if f.ndim == 1:
            f = f[:, None]
        self.frame = f
        self.dim = f.shape[0]
        self.rank = f.shape[1]
        self.weights = _weights(weights, self.dim)
        self.tol = float(tol)
        self.mask = None  # set for coordinate subspaces
        if check and self.rank:
            g = f.T @ (self.weights[:, None] * f)
            if np.abs(g - np.eye(self.rank)).max() > 1e-10:
                raise ValueError("frame is not weighted-orthonormal")

    @classmethod
    def zero(cls, n: int, weights=None) -> "Subspace":
        return cls(np.zeros((n, 0)), weights, check=False)

    @classmethod
    def full(cls, n: int, weights=None) -> "Subspace":
        w = _weights(weights, n)
        return cls(np.diag(1.0 / np.sqrt(w)), w, check=False)

    @classmethod
    def coordinate(cls, mask, weights=None) -> "Subspace":
        """Subspace of vectors supported on the coordinates where ``mask`` is true."""
        m = np.asarray(mask, dtype=bool)
        w = _weights(weights, m.shape[0])
        idx = np.flatnonzero(m)
        f = np.zeros((m.shape[0], idx.size))
        f[idx, np.arange(idx.size)] = 1.0 / np.sqrt(w[idx])
        out = cls(f, w, check=False)
        out.mask = m.copy()
        return out

    def whitened_frame(self) -> np.ndarray:
        return np.sqrt(self.weights)[:, None] * self.frame

    def projector(self) -> np.ndarray:
        """Matrix of the weighted-orthogonal projection onto the span."""
        return self.frame @ (self.frame.T * self.weights[None, :])

    def project(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.frame @ (self.frame.T @ (self.weights * y) if y.ndim == 1
                             else self.frame.T @ (self.weights[:, None] * y))

    def coverage(self, y) -> float:
        """Squared length fraction of ``y`` captured by the subspace."""
        ny = norm(y, self.weights)
        if ny == 0.0:
            return 0.0
        return norm(self.project(y), self.weights) ** 2 / ny ** 2

    def __repr__(self) -> str:
        return f"Subspace(rank={self.rank}, dim={self.dim})"


def orthonormalize(vectors, weights=None, tol: float = EPS_RANK) -> Subspace:
    """Span of ``vectors`` with relative singular values below ``tol`` discarded.

    ``vectors`` is either a 2-d array whose columns are the vectors or a
    sequence of 1-d arrays.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        v = np.asarray(vectors, dtype=float)
    else:
        vs = [np.asarray(x, dtype=float).reshape(-1) for x in vectors]
        if not vs:
            raise ValueError("no vectors given")
        n = vs[0].shape[0]
        if any(x.shape[0] != n for x in vs):
            raise ValueError("vectors have different dimensions")
        v = np.column_stack(vs)
    n = v.shape[0]
    w = _weights(weights, n)
    s = np.sqrt(w)
    if v.shape[1] == 0 or not np.any(v):
        return Subspace(np.zeros((n, 0)), w, tol=tol, check=False)
    u, sv, _ = np.linalg.svd(s[:, None] * v, full_matrices=False)
    r = int(np.sum(sv > tol * sv[0]))
    return Subspace(u[:, :r] / s[:, None], w, tol=tol, check=False)


def complement(a: Subspace) -> Subspace:
    n = a.dim
    if a.rank == 0:
        return Subspace.full(n, a.weights)
    if a.rank == n:
        return Subspace.zero(n, a.weights)
    u, _, _ = np.linalg.svd(a.whitened_frame(), full_matrices=True)
    return Subspace(u[:, a.rank:] / np.sqrt(a.weights)[:, None], a.weights, tol=a.tol, check=False)


def principal_angles(a: Subspace, b: Subspace) -> np.ndarray:
    """Principal angles between two subspaces, largest first.

    Small angles come from sines and large ones from cosines so neither end
    loses accuracy.
    """
    _same_weights(a.weights, b.weights)
    k = min(a.rank, b.rank)
    if k == 0:
        return np.zeros(0)
    if a.rank > b.rank:
        a, b = b, a
    fa, fb = a.whitened_frame(), b.whitened_frame()
    cos = np.clip(np.linalg.svd(fa.T @ fb, compute_uv=False), 0.0, 1.0)
    resid = fa - fb @ (fb.T @ fa)
    sin = np.clip(np.linalg.svd(resid, compute_uv=False), 0.0, 1.0)
    # cos descending pairs with sin ascending
    cos = np.sort(cos)[::-1][:k]
    sin = np.sort(sin)[:k]
    ang = np.where(sin < np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))
    return np.sort(ang)[::-1]


def containment_angle(a: Subspace, b: Subspace) -> float:
    """Largest angle between a vector of ``a`` and the subspace ``b``; 0 iff a ⊆ b."""
    _same_weights(a.weights, b.weights)
    if a.rank == 0:
        return 0.0
    fa = a.whitened_frame()
    fb = b.whitened_frame()
    resid = fa - fb @ (fb.T @ fa) if b.rank else fa
    s = min(float(np.linalg.norm(resid, 2)), 1.0)
    if s < np.sqrt(0.5):
        return float(np.arcsin(s))
    if b.rank < a.rank:
        return float(np.pi / 2)
    c = np.linalg.svd(fa.T @ fb, compute_uv=False)
    return float(np.arccos(np.clip(c.min(), 0.0, 1.0)))


def lattice_ops(a: Subspace, b: Subspace | None = None, kind: str = "join",
                tol: float = EPS_RANK) -> Subspace:
    """Join, meet or orthogonal complement in the subspace lattice."""
    if kind == "complement":
        return complement(a)
    if b is None:
        raise ValueError(f"{kind} needs two operands")
    _same_weights(a.weights, b.weights)
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if kind == "join":
        if a.rank + b.rank == 0:
            return Subspace.zero(a.dim, a.weights)
        return orthonormalize(np.hstack([a.frame, b.frame]), a.weights, tol)
    if kind == "meet":
        ang = principal_angles(a, b)
        k = int(np.sum(ang <= tol))
        n = a.dim
        if k == 0:
            return Subspace.zero(n, a.weights)
        ca, cb = complement(a), complement(b)
        stack = np.hstack([ca.whitened_frame(), cb.whitened_frame()])
        if stack.shape[1] == 0:
            u = np.eye(n)
        else:
            u, _, _ = np.linalg.svd(stack, full_matrices=True)
        return Subspace(u[:, n - k:] / np.sqrt(a.weights)[:, None], a.weights, tol=tol, check=False)
    raise ValueError(f"unknown lattice operation {kind!r}")


def join_all(subspaces: Sequence[Subspace], tol: float = EPS_RANK) -> Subspace:
    subspaces = list(subspaces)
    if not subspaces:
        raise ValueError("nothing to join")
    frames = [s.frame for s in subspaces]
    return orthonormalize(np.hstack(frames), subspaces[0].weights, tol) if any(
        f.shape[1] for f in frames) else Subspace.zero(subspaces[0].dim, subspaces[0].weights)


def psd_order(a: SymOp, b: SymOp, tol: float = 1e-8) -> str:
    """Compare two self-adjoint operators in the Loewner order.

    Returns one of ``"equal"``, ``"a_below"``, ``"a_above"``, ``"incomparable"``.
    """
    diff = b - a
    if op_norm(diff) <= tol:
        return "equal"
    ev = diff.eigvals()
    lo, hi = ev[0], ev[-1]
    if lo >= -tol and hi > tol:
        return "a_below"
    if hi <= tol and lo < -tol:
        return "a_above"
    return "incomparable"


def op_norm(a, weights=None) -> float:
    """Operator norm with respect to the weighted norm."""
    if isinstance(a, SymOp):
        if a.is_diagonal():
            return float(np.abs(np.diag(a.entries)).max(initial=0.0))
        ev = np.linalg.eigvalsh(a.whitened())
        return float(np.abs(ev).max(initial=0.0))
    m = np.asarray(a, dtype=float)
    if m.size == 0:
        return 0.0
    if weights is None:
        return float(np.linalg.norm(m, 2))
    w = np.asarray(weights, dtype=float)
    s = np.sqrt(w)
    return float(np.linalg.norm(s[:, None] * m / s[None, :], 2))


@dataclass
class LinearFit:
    """Least-squares operator ``op`` defined on ``domain`` with its relative residual."""

    op: np.ndarray
    domain: Subspace
    residual: float


def fit_linear_map(inputs, outputs, weights=None, tol: float = EPS_RANK) -> LinearFit:
    """Least-squares linear map sending the columns of ``inputs`` to those of ``outputs``.

    The map is defined on the span of the inputs and vanishes on its weighted
    orthogonal complement.  Rank-deficient inputs go through a thresholded
    pseudo-inverse.
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(outputs, dtype=float)
    if x.ndim == 1:
        x, y = x[:, None], y[:, None]
    if x.shape[1] == 0 or x.shape[1] != y.shape[1]:
        raise ValueError("need at least one (input, output) pair with matching counts")
    n = x.shape[0]
    w = _weights(weights, n)
    s = np.sqrt(w)
    xw, yw = s[:, None] * x, s[:, None] * y
    u, sv, vt = np.linalg.svd(xw, full_matrices=False)
    r = int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0
    if r == 0:
        raise ValueError("inputs are numerically zero")
    u, sv, vt = u[:, :r], sv[:r], vt[:r]
    aw = yw @ vt.T @ np.diag(1.0 / sv) @ u.T
    op = (aw / s[:, None]) * s[None, :]
    denom = np.linalg.norm(yw)
    res = np.linalg.norm(aw @ xw - yw) / denom if denom > 0 else 0.0
    dom = Subspace(u / s[:, None], w, tol=tol, check=False)
    return LinearFit(op=op, domain=dom, residual=float(res))


@dataclass
class ProjectionFamily:
    """Monotone chain of subspaces indexed by increasing times."""

    breakpoints: np.ndarray
    stages: list
    check_tol: float = 1e-8
    _projectors: list = field(default=None, repr=False)

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=float)
        if len(self.stages) != self.breakpoints.size or self.breakpoints.size == 0:
            raise ValueError("need one stage per breakpoint")
        if np.any(self.breakpoints < 0) or np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be nonnegative and strictly increasing")
        for s0, s1 in zip(self.stages[:-1], self.stages[1:]):
            if containment_angle(s0, s1) > self.check_tol:
                raise ValueError("projection family is not monotone")

    @property
    def dim(self) -> int:
        return self.stages[0].dim

    @property
    def weights(self) -> np.ndarray:
        return self.stages[0].weights

    def is_complete(self) -> bool:
        return self.stages[-1].rank == self.dim

    def projectors(self) -> list:
        if self._projectors is None:
            self._projectors = [s.projector() for s in self.stages]
        return self._projectors
