import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import null_space

from wavespec.numlin import (ProjectionFamily, Subspace, SymOp, fit_linear_map, lattice_ops,
                             op_norm, orthonormalize, principal_angles, psd_order)


def e(i, n=4):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def span(*vs, w=None):
    return orthonormalize(list(vs), w)


weights_st = st.lists(st.floats(0.1, 3.0), min_size=3, max_size=6).map(np.array)
seeds = st.integers(0, 2 ** 31 - 1)


# ---------------------------------------------------------------- orthonormalize

def test_colinear_pair_has_rank_one():
    S = orthonormalize([e(0) * 1, e(0) * 2], tol=1e-8)
    assert S.rank == 1
    assert np.allclose(np.abs(S.frame[:, 0]), e(0))


def test_orthogonal_pair_spans_first_two_coordinates():
    S = orthonormalize([[1, 1, 0, 0], [1, -1, 0, 0]])
    assert S.rank == 2
    P = S.projector()
    assert np.allclose(P, np.diag([1, 1, 0, 0]))


def test_near_dependent_triple_has_rank_two(rng):
    a, b = rng.standard_normal(4), rng.standard_normal(4)
    c = a + b + 1e-12 * rng.standard_normal(4)
    assert orthonormalize([a, b, c], tol=1e-8).rank == 2


def test_zero_input_is_rank_zero_and_mismatch_raises():
    assert orthonormalize([np.zeros(3), np.zeros(3)]).rank == 0
    with pytest.raises(ValueError):
        orthonormalize([np.zeros(3), np.zeros(4)])
    with pytest.raises(ValueError):
        orthonormalize([np.ones(3)], tol=0)


@given(weights_st, seeds)
def test_frame_is_weighted_orthonormal_and_projector_idempotent(w, seed):
    r = np.random.default_rng(seed)
    n = w.size
    S = orthonormalize(r.standard_normal((n, n - 1)), w)
    G = S.frame.T @ (w[:, None] * S.frame)
    assert np.abs(G - np.eye(S.rank)).max() <= 1e-10
    P = S.projector()
    assert np.abs(P @ P - P).max() <= 1e-10
    # self-adjoint in the weighted inner product: W P = (W P)^T
    assert np.abs(w[:, None] * P - (w[:, None] * P).T).max() <= 1e-10


@given(weights_st, seeds)
def test_orthonormalize_is_idempotent(w, seed):
    r = np.random.default_rng(seed)
    S = orthonormalize(r.standard_normal((w.size, 2)), w)
    T = orthonormalize(S.frame, w)
    assert T.rank == S.rank
    assert principal_angles(S, T).max() <= 1e-10


# ---------------------------------------------------------------- lattice

def test_meet_of_overlapping_coordinate_planes():
    a, b = span(e(0, 3), e(1, 3)), span(e(1, 3), e(2, 3))
    m = lattice_ops(a, b, "meet")
    assert m.rank == 1
    assert np.allclose(np.abs(m.frame[:, 0]), e(1, 3))


def test_complement_of_a_line():
    c = lattice_ops(span(e(0, 3)), kind="complement")
    assert np.allclose(c.projector(), np.diag([0, 1, 1]))


def test_meet_matches_nullspace_oracle(rng):
    a = orthonormalize(rng.standard_normal((4, 3)))
    b = orthonormalize(rng.standard_normal((4, 3)))
    m = lattice_ops(a, b, "meet")
    assert m.rank == 2
    oracle = orthonormalize(null_space(np.vstack([a.projector() - np.eye(4), b.projector() - np.eye(4)])))
    assert principal_angles(m, oracle).max() <= 1e-10


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_modular_rank_law(seed, ra, rb):
    r = np.random.default_rng(seed)
    n = 6
    # share a random common part to make the meet nontrivial
    common = r.standard_normal((n, 1))
    a = orthonormalize(np.hstack([common, r.standard_normal((n, ra))]))
    b = orthonormalize(np.hstack([common, r.standard_normal((n, rb))]))
    j, m = lattice_ops(a, b, "join"), lattice_ops(a, b, "meet")
    assert j.rank + m.rank == a.rank + b.rank


# ---------------------------------------------------------------- angles

def test_principal_angles_basic():
    a = span(e(0))
    assert np.allclose(principal_angles(a, a), 0)
    assert np.allclose(principal_angles(a, span(e(1))), [np.pi / 2])
    assert np.allclose(principal_angles(a, span((e(0) + e(1)) / np.sqrt(2))), [np.pi / 4])
    assert principal_angles(Subspace.zero(4), a).size == 0


# ---------------------------------------------------------------- order and norm

def test_psd_order_examples():
    z, d12 = SymOp.diag([0.0, 0.0]), SymOp.diag([1.0, 2.0])
    assert psd_order(z, d12) == "a_below"
    assert psd_order(d12, z) == "a_above"
    assert psd_order(d12, d12) == "equal"
    assert psd_order(SymOp.diag([1.0, 0.0]), SymOp.diag([0.0, 1.0])) == "incomparable"


@given(st.lists(st.lists(st.floats(0, 5), min_size=4, max_size=4), min_size=3, max_size=3))
def test_psd_order_transitive_on_multiplications(rows):
    ops = [SymOp.diag(r) for r in rows]
    for a in ops:
        for b in ops:
            for c in ops:
                if psd_order(a, b) == "a_below" and psd_order(b, c) == "a_below":
                    assert psd_order(a, c) == "a_below"
            ab, ba = psd_order(a, b), psd_order(b, a)
            assert {ab, ba} in ({"equal"}, {"a_below", "a_above"}, {"incomparable"})


def test_op_norm_examples():
    assert op_norm(SymOp.identity(5)) == 1.0
    assert op_norm(SymOp.diag([0.2, 0, 0.2, 0.4])) == pytest.approx(0.4)
    # d_{0.2} - d_{0.8} on the 4-node interval: max node gap 0.6
    x = np.array([0.2, 0.4, 0.6, 0.8])
    assert op_norm(SymOp.diag(np.abs(x - 0.2)) - SymOp.diag(np.abs(x - 0.8))) == pytest.approx(0.6)


@given(weights_st, seeds)
def test_projection_norm_and_triangle(w, seed):
    r = np.random.default_rng(seed)
    n = w.size
    P = orthonormalize(r.standard_normal((n, 2)), w).projector()
    assert op_norm(P, w) == pytest.approx(1.0, abs=1e-10)
    A, B = r.standard_normal((2, n, n))
    assert op_norm(A + B, w) <= op_norm(A, w) + op_norm(B, w) + 1e-10


@given(weights_st, seeds)
def test_symop_self_adjoint_and_eig(w, seed):
    r = np.random.default_rng(seed)
    n = w.size
    X = r.standard_normal((n, n))
    X = X + X.T
    A = SymOp(X / w[:, None], w)  # W-self-adjoint entries
    y, z = r.standard_normal((2, n))
    lhs = np.sum(w * A.apply(y) * z) - np.sum(w * y * A.apply(z))
    assert abs(lhs) <= 1e-10 * op_norm(A) * np.sqrt(np.sum(w * y * y) * np.sum(w * z * z))
    lam, Q = A.eig()
    rec = Q @ np.diag(lam) @ (Q.T * w[None, :])
    assert np.abs(rec - A.entries).max() <= 1e-10 * max(op_norm(A), 1)


# ---------------------------------------------------------------- fits

def test_fit_scalar_and_known_matrix(rng):
    f = fit_linear_map(e(0)[:, None], 2 * e(0)[:, None])
    assert np.allclose(f.op @ e(0), 2 * e(0)) and f.residual == 0
    A = rng.standard_normal((5, 5))
    A = A + A.T
    X = rng.standard_normal((5, 3))
    f = fit_linear_map(X, A @ X)
    assert f.residual <= 1e-10
    assert np.abs(f.op @ X - A @ X).max() <= 1e-10


# ---------------------------------------------------------------- families

def test_projection_family_rules():
    n = 3
    chain = [Subspace.coordinate([True, False, False]), Subspace.coordinate([True, True, False]),
             Subspace.full(n)]
    fam = ProjectionFamily([0.0, 1.0, 2.0], chain)
    assert fam.is_complete()
    with pytest.raises(ValueError):
        ProjectionFamily([0.0, 0.0, 1.0], chain)
    with pytest.raises(ValueError):
        ProjectionFamily([0.0, 1.0], [chain[1], chain[0]])
