"""Wave propagation with interior and boundary controls.

All propagation happens in the eigenbasis of ``L``.  Controls are
piecewise-linear in time on a uniform grid, optionally with point impulses at
grid nodes, and every Duhamel integral is evaluated in closed form per
segment.  The same code serves the physical picture (states on interior
vertices) and the Fourier picture built from spectral data alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from wavespec.green import GreenSystem, SpectralData, dom_L0
from wavespec.numlin import (EPS_RANK, Subspace, SymOp, fit_linear_map, lattice_ops, op_norm,
                             orthonormalize)


# ------------------------------------------------------------------ systems

@dataclass
class WaveSystem:
    """Modal description of ``v_tt + L v = h`` together with its boundary data.

    ``phi`` maps modal coefficients to state coordinates and ``w`` weights
    the state space.  ``pi_modal[:, b]`` holds the modal coefficients of the
    harmonic continuation of the ``b``-th boundary unit vector.  ``beta`` and
    ``M_loc`` are only needed for boundary outputs.
    """

    lam: np.ndarray
    phi: np.ndarray
    w: np.ndarray
    pi_modal: np.ndarray
    boundary_weights: np.ndarray
    beta: np.ndarray | None = None
    M_loc: np.ndarray | None = None
    picture: str = "physical"

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        if np.any(self.lam <= 0):
            raise ValueError("wave system needs a positive definite operator")
        self.omega = np.sqrt(self.lam)

    @classmethod
    def from_green(cls, gs: GreenSystem) -> "WaveSystem":
        lam, phi = gs.eig
        pim = phi.T @ (gs.w[:, None] * gs.Pi)
        beta = -(gs.C_IB.T @ phi).T / gs.omega[None, :]
        return cls(lam, phi, gs.w.copy(), pim, gs.omega.copy(), beta, gs.M_loc.copy(), "physical")

    @classmethod
    def from_spectral(cls, sd: SpectralData, K: int | None = None) -> "WaveSystem":
        K = len(sd) if K is None else int(K)
        if not 1 <= K <= len(sd):
            raise ValueError("mode count out of range")
        lam, beta = sd.lam[:K], sd.beta[:K]
        pim = -(beta * sd.boundary_weights[None, :]) / lam[:, None]
        return cls(lam, np.eye(K), np.ones(K), pim, sd.boundary_weights.copy(), beta, None,
                   "fourier")

    @property
    def n_modes(self) -> int:
        return self.lam.size

    @property
    def n_state(self) -> int:
        return self.phi.shape[0]

    @property
    def n_boundary(self) -> int:
        return self.pi_modal.shape[1]

    def to_state(self, c):
        return self.phi @ c

    def to_modal(self, y):
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            return self.phi.T @ (self.w * y)
        return self.phi.T @ (self.w[:, None] * y)

    @property
    def L(self) -> SymOp:
        return SymOp(self.phi @ np.diag(self.lam) @ self.phi.T * self.w[None, :], self.w,
                     check=False)

    def harmonic_subspace(self, tol: float = EPS_RANK) -> Subspace:
        return orthonormalize(self.to_state(self.pi_modal), self.w, tol)

    def A_modal(self, c, trace):
        """Modal coefficients of ``A`` applied to the full field with modal state ``c``."""
        return self.lam[:, None] * (c - self.pi_modal @ trace) if np.ndim(c) == 2 else \
            self.lam * (c - self.pi_modal @ trace)


def as_system(x) -> WaveSystem:
    if isinstance(x, WaveSystem):
        return x
    if isinstance(x, GreenSystem):
        return WaveSystem.from_green(x)
    raise TypeError("expected a GreenSystem or WaveSystem")


# ------------------------------------------------------------------ signals

@dataclass
class ControlSignal:
    """Piecewise-linear signal on the grid ``s_k = k dt``, ``k = 0..M``.

    ``values[k]`` is the value at ``s_k``; ``impulses[k]`` (optional) is the
    mass of a point impulse at ``s_k``.  With ``causal=True`` the first two
    samples must vanish, so the signal and its slope vanish near ``s = 0``.
    """

    dt: float
    values: np.ndarray
    impulses: np.ndarray | None = None
    causal: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.values.shape[0] < 3:
            raise ValueError("time grid too coarse: need at least 3 samples")
        if self.impulses is not None:
            self.impulses = np.asarray(self.impulses, dtype=float).reshape(self.values.shape)
        if self.causal and (np.any(self.values[:2]) or
                            (self.impulses is not None and np.any(self.impulses[:2]))):
            raise ValueError("causal control must vanish at the first two samples")

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def T(self) -> float:
        return self.M * self.dt

    def delayed(self, k: int) -> "ControlSignal":
        """Right shift by ``k`` grid steps, truncated to the same grid."""
        if k < 0:
            raise ValueError("delay must be nonnegative")
        v = np.zeros_like(self.values)
        v[k:] = self.values[:self.values.shape[0] - k]
        imp = None
        if self.impulses is not None:
            imp = np.zeros_like(self.impulses)
            imp[k:] = self.impulses[:self.impulses.shape[0] - k]
        return ControlSignal(self.dt, v, imp, self.causal)

    def second_masses(self) -> np.ndarray:
        """Impulse masses of the second derivative of the piecewise-linear interpolant."""
        g = np.vstack([self.values, np.zeros((1, self.width))])
        prev = np.vstack([np.zeros((1, self.width)), self.values])
        return (g[1:] - 2 * self.values + prev[:-1]) / self.dt

    def second_difference(self) -> "ControlSignal":
        """Piecewise-linear surrogate of the second derivative (nodal divided differences)."""
        return ControlSignal(self.dt, self.second_masses() / self.dt, None, self.causal)


def grid_index(dt: float, t: float, M: int) -> int:
    k = int(round(t / dt))
    if abs(k * dt - t) > 1e-9 * max(dt, abs(t)) or k < 0 or k > M:
        raise ValueError(f"time {t} is not on the control grid")
    return k


# ----------------------------------------------------------------- kernels

def _x_minus_sin(x):
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = np.abs(x) < 1e-2
    xs = x[small]
    x2 = xs * xs
    out[small] = xs * x2 / 6 * (1 - x2 / 20 * (1 - x2 / 42 * (1 - x2 / 72)))
    return out


class _Kernels:
    """Closed-form per-lag Duhamel weights for one modal frequency vector.

    For a piecewise-linear signal with nodal values ``g_i`` the modal
    position at node ``m`` is ``sum_i g_i P[m - i]`` plus a correction for
    ``i = 0``; velocities use ``V``.  Lags are integers, which makes the
    delay relation hold exactly.
    """

    def __init__(self, omega: np.ndarray, dt: float, nmax: int):
        om = omega[:, None]
        n = np.arange(nmax + 2)[None, :].astype(float)
        x = om * dt
        a = om * (n - 1) * dt  # omega (T - dt) with T = n dt
        xms = _x_minus_sin(x)
        omc = 2 * np.sin(x / 2) ** 2
        # segment integrals of sin(omega u)/omega and of the rising-ramp weight
        I0 = 2 * np.sin(om * (n - 0.5) * dt) * np.sin(x / 2) / om ** 2
        I1 = (np.cos(a) * xms + np.sin(a) * omc) / (om ** 3 * dt)
        J0 = 2 * np.cos(om * (n - 0.5) * dt) * np.sin(x / 2) / om
        J1 = (np.cos(a) * omc - np.sin(a) * xms) / (om ** 2 * dt)
        I0[:, 0] = I1[:, 0] = J0[:, 0] = J1[:, 0] = 0.0
        # node i contributes as the left end of segment i (lag m - i) and
        # the right end of segment i-1 (lag m - i + 1)
        self.P = (I0 - I1)[:, :-1] + I1[:, 1:]
        self.V = (J0 - J1)[:, :-1] + J1[:, 1:]
        self.P_first = (I0 - I1)[:, :-1]
        self.V_first = (J0 - J1)[:, :-1]
        self.S = np.sin(om * n[:, :-1] * dt) / om
        self.C = np.cos(om * n[:, :-1] * dt)
        self.C[:, 0] = 0.0  # impulse at the evaluation instant adds no velocity


_KCACHE: dict = {}


def _kernels(omega: np.ndarray, dt: float, nmax: int) -> _Kernels:
    key = (omega.tobytes(), float(dt))
    k = _KCACHE.get(key)
    if k is None or k.P.shape[1] < nmax + 1:
        if len(_KCACHE) > 32:
            _KCACHE.clear()
        k = _Kernels(omega, dt, max(nmax, 8))
        _KCACHE[key] = k
    return k


def _duhamel(omega, dt, modal_values, modal_impulses, m: int, velocity: bool = False):
    """Modal solution at node ``m`` for forcing with the given modal nodal data.

    ``modal_values`` has shape ``(..., N, M+1)``.
    """
    ker = _kernels(omega, dt, m)
    if m == 0:
        return np.zeros(modal_values.shape[:-1])
    g = modal_values[..., :m + 1]
    if velocity:
        main, first, imp = ker.V, ker.V_first, ker.C
    else:
        main, first, imp = ker.P, ker.P_first, ker.S
    rev = main[:, m::-1]
    out = np.sum(g * rev, axis=-1)
    out = out - g[..., 0] * (main[:, m] - first[:, m])
    if modal_impulses is not None:
        out = out + np.sum(modal_impulses[..., :m + 1] * imp[:, m::-1], axis=-1)
    return out


# ---------------------------------------------------------------- solvers

def solve_forced_modal(sys: WaveSystem, h: ControlSignal, m: int, directions=None,
                       velocity: bool = False):
    """Modal ``v^h`` at node ``m``; ``h`` is expressed on ``directions`` (modal columns)."""
    D = np.eye(sys.n_modes) if directions is None else directions
    gv = D @ h.values.T
    gi = None if h.impulses is None else D @ h.impulses.T
    return _duhamel(sys.omega, h.dt, gv, gi, m, velocity)


def solve_forced(sys, h: ControlSignal, t: float, velocity: bool = False) -> np.ndarray:
    """State ``v^h(t)`` of ``v_tt + L v = h``, zero Cauchy data; ``h`` is state-valued.

    Exact for piecewise-linear ``h`` (and nodal impulses).
    """
    sys = as_system(sys)
    m = grid_index(h.dt, t, h.M)
    if h.width != sys.n_state:
        raise ValueError("forcing must be valued in the state space")
    hv = ControlSignal(h.dt, sys.to_modal(h.values.T).T,
                       None if h.impulses is None else sys.to_modal(h.impulses.T).T, False)
    return sys.to_state(solve_forced_modal(sys, hv, m, velocity=velocity))


def boundary_modal(sys: WaveSystem, f: ControlSignal, m: int, directions=None,
                   velocity: bool = False):
    """Modal ``u^f`` at node ``m`` via ``u = h(t) - int S(t-s) h''(s) ds``, ``h = Pi f``.

    ``h''`` of the piecewise-linear ``h`` is a train of nodal impulses, so the
    integral is exact.
    """
    D = sys.pi_modal if directions is None else directions
    if f.width != D.shape[1]:
        raise ValueError("control width does not match the number of directions")
    masses = D @ f.second_masses().T
    if velocity:
        # d/dt of h(t) at a node is one-sided; use the left slope
        g = f.values
        hdot = (g[m] - g[m - 1]) / f.dt if m >= 1 else np.zeros(f.width)
        return D @ hdot - _duhamel(sys.omega, f.dt, np.zeros_like(masses), masses, m, True)
    ker = _kernels(sys.omega, f.dt, m)
    h_now = D @ f.values[m]
    conv = np.sum(masses[..., :m + 1] * ker.S[:, m::-1], axis=-1)
    return h_now - conv


def solve_boundary(sys, f: ControlSignal, t: float) -> np.ndarray:
    """State ``u^f(t)`` for Dirichlet boundary control ``f`` (zero Cauchy data)."""
    sys = as_system(sys)
    if not f.causal:
        raise ValueError("boundary control must be causal")
    m = grid_index(f.dt, t, f.M)
    return sys.to_state(boundary_modal(sys, f, m))


def trajectory(sys, f: ControlSignal, source: str = "boundary", directions=None):
    """States at every grid node, shape ``(M+1, n_state)``."""
    sys = as_system(sys)
    out = np.zeros((f.M + 1, sys.n_state))
    for m in range(1, f.M + 1):
        if source == "boundary":
            c = boundary_modal(sys, f, m, directions)
        else:
            c = solve_forced_modal(sys, f, m, directions)
        out[m] = sys.to_state(c)
    return out


def energy(sys, h: ControlSignal, m: int, directions=None) -> float:
    """``0.5 (|v_t|^2 + (L v, v))`` of the forced solution at node ``m``."""
    sys = as_system(sys)
    c = solve_forced_modal(sys, h, m, directions)
    cd = solve_forced_modal(sys, h, m, directions, velocity=True)
    return float(0.5 * np.sum(cd ** 2 + sys.lam * c ** 2))


# -------------------------------------------------------------- dictionaries

@dataclass
class ControlDictionary:
    """Finite family of controls on a common grid with provenance tags."""

    controls: list
    tags: list = field(default_factory=list)

    def __post_init__(self):
        if not self.controls:
            raise ValueError("dictionary is empty")
        dt, M = self.controls[0].dt, self.controls[0].M
        if any(c.dt != dt or c.M != M for c in self.controls):
            raise ValueError("dictionary controls must share one grid")
        if not self.tags:
            self.tags = [("control", k) for k in range(len(self.controls))]

    def __len__(self) -> int:
        return len(self.controls)

    @property
    def dt(self) -> float:
        return self.controls[0].dt

    @property
    def M(self) -> int:
        return self.controls[0].M

    def values(self) -> np.ndarray:
        """Stacked nodal values, shape ``(n_controls, M+1, width)``."""
        return np.stack([c.values for c in self.controls])


def hat(M: int, center: int, half_width: int = 1) -> np.ndarray:
    j = np.arange(M + 1)
    return np.maximum(0.0, 1.0 - np.abs(j - center) / half_width)


def pulse_dictionary(dt: float, T: float, n_sources: int, half_width: int = 1,
                     first: int | None = None, last: int | None = None,
                     sources=None) -> ControlDictionary:
    """Delayed triangular pulses, one per delay and per source direction.

    Pulse centers run from ``first`` to ``last`` (defaults: the earliest
    causal center and the last center inside the grid).
    """
    M = int(round(T / dt))
    if abs(M * dt - T) > 1e-9 * T:
        raise ValueError("T must be a multiple of dt")
    first = half_width + 1 if first is None else first
    last = M if last is None else last
    if first - half_width < 1:
        raise ValueError("pulses must vanish on the first two samples")
    src = range(n_sources) if sources is None else sources
    controls, tags = [], []
    for b in src:
        for p in range(first, last + 1):
            v = np.zeros((M + 1, n_sources))
            v[:, b] = hat(M, p, half_width)
            controls.append(ControlSignal(dt, v))
            tags.append((int(b), int(p)))
    return ControlDictionary(controls, tags)


def _dictionary_modal(sys: WaveSystem, d: ControlDictionary, m: int, directions=None,
                      source: str = "boundary") -> np.ndarray:
    """Modal states of all dictionary controls at node ``m``, as columns."""
    D = sys.pi_modal if directions is None else directions
    vals = d.values()  # (nc, M+1, p)
    if source == "boundary":
        nxt = np.concatenate([vals, np.zeros_like(vals[:, :1])], axis=1)
        prv = np.concatenate([np.zeros_like(vals[:, :1]), vals], axis=1)
        masses = (nxt[:, 1:] - 2 * vals + prv[:, :-1]) / d.dt  # (nc, M+1, p)
        mm = np.einsum("np,ckp->cnk", D, masses[:, :m + 1])
        ker = _kernels(sys.omega, d.dt, m)
        conv = np.sum(mm * ker.S[None, :, m::-1], axis=-1)
        return (vals[:, m] @ D.T - conv).T
    gv = np.einsum("np,ckp->cnk", D, vals)
    return _duhamel(sys.omega, d.dt, gv, None, m).T


def dictionary_states(sys, d: ControlDictionary, t: float, source: str = "boundary",
                      directions=None) -> np.ndarray:
    """State-space columns ``u^{f_j}(t)`` (or ``v^{h_j}(t)`` for ``source="forced"``)."""
    sys = as_system(sys)
    m = grid_index(d.dt, t, d.M)
    return sys.to_state(_dictionary_modal(sys, d, m, directions, source))


def reachable(sys, t: float, d: ControlDictionary, source: str = "boundary",
              tol: float = EPS_RANK, directions=None) -> Subspace:
    """Span of the states reached at time ``t`` by the dictionary controls.

    ``source="boundary"`` drives through boundary data; ``"D_valued"`` drives
    along an orthonormal basis of the harmonic subspace (same formula, other
    directions); ``"forced"`` treats the controls as interior forcing along
    ``directions``.
    """
    sys = as_system(sys)
    if source == "D_valued" and directions is None:
        D = sys.harmonic_subspace()
        directions = sys.to_modal(D.frame)
    src = "forced" if source == "forced" else "boundary"
    X = dictionary_states(sys, d, t, src, directions)
    if t == 0 or not np.any(X):
        return Subspace.zero(sys.n_state, sys.w)
    return orthonormalize(X, sys.w, tol)


# ------------------------------------------------------------ control maps

@dataclass
class ControlOperator:
    W: np.ndarray           # states (columns) of the dictionary controls
    gram: np.ndarray        # W^* W in dictionary coordinates
    modulus: np.ndarray     # |W| = gram^(1/2)
    U: np.ndarray           # partial isometry, W = U |W|
    rank: int
    singular_values: np.ndarray
    weights: np.ndarray

    @property
    def range(self) -> Subspace:
        r = self.rank
        return Subspace(self.U @ self._Vr[:, :r], self.weights, check=False) if r else \
            Subspace.zero(self.W.shape[0], self.weights)


def control_operator(sys, T: float, d: ControlDictionary, tol: float = EPS_RANK) -> ControlOperator:
    """Input-to-state map on the dictionary coefficient space and its polar parts."""
    sys = as_system(sys)
    W = dictionary_states(sys, d, T)
    sw = np.sqrt(sys.w)[:, None]
    gram = W.T @ (sys.w[:, None] * W)
    gram = 0.5 * (gram + gram.T)
    # SVD of the whitened states: eigenvalues of the Gram would square the noise floor
    _, sv, vt = np.linalg.svd(sw * W, full_matrices=True)
    V = vt.T
    full = np.zeros(V.shape[0])
    full[:sv.size] = sv
    modulus = (V * full[None, :]) @ V.T
    smax = sv.max(initial=0.0)
    r = int(np.sum(sv > tol * smax)) if smax > 0 else 0
    Vk = V[:, :r]
    U = (W @ Vk / sv[:r][None, :]) @ Vk.T
    op = ControlOperator(W, gram, modulus, U, r, sv, sys.w.copy())
    op._Vr = Vk
    return op


def connecting(sys, T: float, d: ControlDictionary) -> np.ndarray:
    """Connecting operator ``C^T = (W^T)^* W^T`` in dictionary coordinates."""
    return control_operator(sys, T, d).gram


def response(sys, f: ControlSignal) -> np.ndarray:
    """Boundary output ``(R f)(s_m) = Gamma1 u^f(s_m)`` at every node, shape ``(M+1, |B|)``."""
    sys = as_system(sys)
    if sys.beta is None or sys.M_loc is None:
        raise ValueError("response needs the boundary flux operators")
    out = np.zeros((f.M + 1, sys.n_boundary))
    for m in range(f.M + 1):
        c = boundary_modal(sys, f, m) if m else np.zeros(sys.n_modes)
        out[m] = sys.M_loc @ f.values[m] + sys.beta.T @ c
    return out


def reciprocity_pairing(sys, f: ControlSignal, g: ControlSignal) -> float:
    """``sum_m dt ((R f)(s_m), g(s_{M-m}))_G`` on the common grid."""
    sys = as_system(sys)
    Rf = response(sys, f)
    return float(f.dt * np.sum(Rf * g.values[::-1] * sys.boundary_weights[None, :]))


@dataclass
class GeneratorFit:
    fitted: np.ndarray      # operator on the reachable span, orthonormal coordinates
    reference: np.ndarray   # U^* A U from the direct action
    residual: float
    fit_residual: float
    rank: int
    eigenvalues: np.ndarray


def reconstruct_generator(sys, T: float, d: ControlDictionary, tol: float = EPS_RANK) -> GeneratorFit:
    """Fit the generator from pairs ``(u^f(T), u^{-f''}(T))`` in the control picture.

    ``f''`` is the nodal second divided difference of each pulse.  The fit is
    compared with the compression of the directly applied ``A`` to the range
    of the control operator.
    """
    sys = as_system(sys)
    op = control_operator(sys, T, d, tol)
    if op.rank == 0:
        raise ValueError("control operator has numerical rank 0; enrich the dictionary")
    m = grid_index(d.dt, T, d.M)
    Xs = op.W
    neg2 = ControlDictionary([ControlSignal(c.dt, -c.second_difference().values)
                              for c in d.controls], d.tags)
    if np.any(d.values()[:, m, :]) or any(np.any(c.values[m]) for c in neg2.controls):
        raise ValueError("pulses and their second differences must vanish at the final time")
    Ys = dictionary_states(sys, neg2, T)
    Uc = op.range.frame  # weighted-orthonormal basis of the reachable span
    proj = lambda Z: Uc.T @ (sys.w[:, None] * Z)
    fit = fit_linear_map(proj(Xs), proj(Ys), None, tol)
    # with zero trace at T the direct action of A on the span is L itself
    LU = sys.to_state(sys.lam[:, None] * sys.to_modal(Uc))
    ref = Uc.T @ (sys.w[:, None] * LU)
    A_hat = fit.op
    res = np.linalg.norm(A_hat - ref, 2) / np.linalg.norm(A_hat, 2)
    ev = np.sort(np.linalg.eigvals(A_hat).real)
    return GeneratorFit(A_hat, ref, float(res), fit.residual, op.rank, ev)


# ---------------------------------------------------------------- smoothing probe

def psi(lam, eps):
    x = np.sqrt(np.asarray(lam, dtype=float)) * eps
    return 4 * np.cos(x) * np.sin(x / 2) ** 2 / x ** 2


@dataclass
class SmoothingProbe:
    eps: np.ndarray
    residuals: np.ndarray
    bounds: np.ndarray
    y_norm: float


def _piecewise_constant_response(omega, r, segments):
    """Modal ``int S(r-s) c(s) ds`` for constant values ``c`` on ``[a, b)`` segments."""
    out = np.zeros_like(omega)
    for a, b, c in segments:
        # cos(omega (r-b)) - cos(omega (r-a)) in product form
        out += c * 2 * np.sin(omega * (2 * r - a - b) / 2) * np.sin(omega * (b - a) / 2) / omega ** 2
    return out


def lemma2_probe(sys, y, r: float, eps_list) -> SmoothingProbe:
    """Drive with ``phi_eps(t) y`` (+1/eps^2 then -1/eps^2 just before ``r``) and measure ``|y - v(r)|``."""
    sys = as_system(sys)
    if r <= 0:
        raise ValueError("r must be positive")
    eps = np.asarray(list(eps_list), dtype=float)
    if np.any(r - 2 * eps <= 0) or np.any(eps <= 0):
        raise ValueError("need 0 < 2 eps < r")
    y = np.asarray(y, dtype=float)
    yc = sys.to_modal(y)
    ny = float(np.sqrt(np.sum(sys.w * y * y)))
    res, bnd = [], []
    for e in eps:
        seg = [(r - 2 * e, r - e, 1 / e ** 2), (r - e, r, -1 / e ** 2)]
        v = sys.to_state(yc * _piecewise_constant_response(sys.omega, r, seg))
        d = y - v
        res.append(float(np.sqrt(np.sum(sys.w * d * d))))
        bnd.append(ny * float(np.max(np.abs(1 - psi(sys.lam, e)))))
    return SmoothingProbe(eps, np.array(res), np.array(bnd), ny)


# ------------------------------------------------------ spectral inversion

@dataclass
class FourierModel:
    L: SymOp
    D: Subspace
    dom: Subspace
    system: WaveSystem
    degenerate: bool


def reconstruct_from_spectral(sd: SpectralData, K: int | None = None,
                              tol: float = EPS_RANK) -> FourierModel:
    """Unitary copy of ``(L, D)`` in the eigen-coordinates, computed from spectral data only."""
    sys = WaveSystem.from_spectral(sd, K)
    Lt = SymOp.diag(sys.lam)
    cols = sys.pi_modal
    D = orthonormalize(cols, None, tol) if np.any(cols) else Subspace.zero(sys.n_modes)
    degenerate = D.rank < sys.n_boundary
    Dc = lattice_ops(D, kind="complement")
    dom = orthonormalize(Dc.frame / sys.lam[:, None], None, tol) if Dc.rank else \
        Subspace.zero(sys.n_modes)
    return FourierModel(Lt, D, dom, sys, bool(degenerate))


def fourier_map(gs: GreenSystem) -> np.ndarray:
    """The unitary ``U = Phi^* W`` taking states to eigen-coefficients."""
    lam, phi = gs.eig
    return phi.T * gs.w[None, :]


def conjugation_residual(gs: GreenSystem, fm: FourierModel, tol: float = EPS_RANK) -> float:
    """``|L~ U y - U L y| / |L y|`` over a frame of the minimal domain."""
    U = fourier_map(gs)
    F = dom_L0(gs, tol).frame
    lhs = fm.L.entries @ (U @ F)
    rhs = U @ (gs.L.entries @ F)
    return float(np.linalg.norm(lhs - rhs, 2) / op_norm(gs.L.entries @ F))


# ------------------------------------------------------- pulse kernels

def hat_kernels(sys, dt: float, nmax: int, half_width: int = 1):
    """Modal responses to one unit hat, indexed by steps since the hat started.

    Returns ``(forced, boundary)``, each of shape ``(N, nmax + 1)``: column
    ``q`` is the scalar factor multiplying the modal direction when the
    hat began ``q`` steps before the evaluation time.  A hat of half-width
    ``k`` nodes rises from zero over ``k`` steps and falls back over ``k``.
    """
    sys = as_system(sys)
    n = nmax + 1
    j = np.arange(n)
    g = np.maximum(0.0, 1.0 - np.abs(j - half_width) / half_width)
    nxt = np.r_[g[1:], 0.0]
    prv = np.r_[0.0, g[:-1]]
    masses = (nxt - 2 * g + prv) / dt
    ker = _kernels(sys.omega, dt, nmax)
    forced = np.zeros((sys.n_modes, n))
    bound = np.zeros((sys.n_modes, n))
    for q in range(1, n):
        forced[:, q] = np.sum(g[:q + 1][None, :] * ker.P[:, q::-1], axis=1) \
            - g[0] * (ker.P[:, q] - ker.P_first[:, q])
        bound[:, q] = g[q] - np.sum(masses[:q + 1][None, :] * ker.S[:, q::-1], axis=1)
    return forced, bound


def pulse_span_states(kernel: np.ndarray, directions: np.ndarray, m: int,
                      first_start: int = 1) -> np.ndarray:
    """Modal states at node ``m`` of hats starting at nodes ``first_start..m-1`` along each direction."""
    starts = np.arange(first_start, m)
    if starts.size == 0:
        return np.zeros((directions.shape[0], 0))
    q = m - starts
    K = kernel[:, q]  # (N, n_starts)
    return (K[:, :, None] * directions[:, None, :]).reshape(directions.shape[0], -1)
