import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavespec import spectrum as sp
from wavespec.geometry import VertexSet, build_model, distance_to_set, procedure1
from wavespec.green import assemble
from wavespec.numlin import (ProjectionFamily, Subspace, SymOp, containment_angle, op_norm,
                             orthonormalize, psd_order)


def coord(ext, idx):
    mask = np.zeros(ext.dim, dtype=bool)
    mask[list(idx)] = True
    return Subspace.coordinate(mask, ext.weights)


def interior_of(m, x):
    """Interior coordinate index of the interval vertex at x."""
    return int(np.argmin(np.abs(m.coords[m.interior_idx, 0] - x)))


@pytest.fixture(scope="module")
def geo4(int4):
    return sp.SpaceExtension.geometric(int4)


@pytest.fixture(scope="module")
def dyn41(int41):
    return sp.SpaceExtension.dynamical(assemble(int41), 1 / 42, 0.6, tol=1e-3)


# ---------------------------------------------------------------- extensions

def test_extension_examples(int4, geo4):
    A = coord(geo4, [interior_of(int4, 0.4)])
    assert geo4.extend(A, 0) is A
    out = geo4.extend(A, 0.25)
    assert np.array_equal(out.mask, [True, True, True, False])
    assert geo4.extend(Subspace.zero(4, geo4.weights), 0.5).rank == 0


@given(st.integers(0, 2 ** 31 - 1), st.floats(0, 0.8), st.floats(0, 0.8))
def test_geometric_extension_axioms(seed, t1, t2):
    m = build_model("star", legs=(0.3, 0.5, 0.7), h=0.1)
    ext = sp.SpaceExtension.geometric(m)
    r = np.random.default_rng(seed)
    a = r.random(ext.dim) < 0.3
    a2 = a | (r.random(ext.dim) < 0.3)
    lo, hi = sorted([t1, t2])
    A, A2 = Subspace.coordinate(a, ext.weights), Subspace.coordinate(a2, ext.weights)
    assert containment_angle(ext.extend(A, lo), ext.extend(A2, hi)) == 0
    assert ext.extend(Subspace.zero(ext.dim, ext.weights), hi).rank == 0


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 10), st.integers(1, 10))
def test_dynamical_extension_axioms(seed, m1, m2):
    gs = assemble(build_model("interval", n_interior=9))
    ext = sp.SpaceExtension.dynamical(gs, 0.05, 0.5, tol=1e-10)
    r = np.random.default_rng(seed)
    A = orthonormalize(r.standard_normal((9, 1)), ext.weights)
    A2 = orthonormalize(np.hstack([A.frame, r.standard_normal((9, 1))]), ext.weights)
    lo, hi = sorted([m1, m2])
    assert ext.extend(A, 0.0) is A
    assert ext.extend(Subspace.zero(9, ext.weights), hi * 0.05).rank == 0
    small, big = ext.extend(A, lo * 0.05), ext.extend(A2, hi * 0.05)
    assert containment_angle(small, big) <= 1e-5


def test_dynamical_reach_matches_collar_within_calibration(int41, dyn41):
    geo = sp.SpaceExtension.geometric(int41)
    h = 1 / 42
    for k in (8, 17):
        R, C = dyn41.boundary_reach(k * h, closed=True), geo.boundary_reach(k * h, closed=True)
        # dispersion leaks a few directions; the reached span sits inside the collar
        assert containment_angle(R, C) <= 0.1
        assert R.rank <= C.rank


def test_geometric_support_leak_is_reported(geo4):
    v = np.array([1.0, 1e-9, 0.0, 0.0])
    S = orthonormalize(v[:, None], geo4.weights)
    geo4.extend(S, 0.1)
    assert 0 < geo4.last_leak < 1e-12


# ---------------------------------------------------------------- procedure 1-hat

@pytest.mark.parametrize("name", ["int4", "star_unequal", "star_equal"])
def test_procedure1_hat_matches_set_procedure(name, request):
    m = request.getfixturevalue(name)
    ext = sp.SpaceExtension.geometric(m)
    res = sp.procedure1_hat(ext)
    assert res.stabilized
    set_atoms = {tuple(a.mask[m.interior_idx]) for a in procedure1(m).atoms if a.mask[m.interior_idx].any()}
    assert {tuple(a.mask) for a in res.atoms} == set_atoms


def test_procedure1_hat_interval_atoms_are_coordinate_lines(geo4):
    res = sp.procedure1_hat(geo4)
    assert sorted(int(a.mask.sum()) for a in res.atoms) == [1, 1, 1, 1]
    # every coordinate projection appears among the generated members or atoms
    masks = {tuple(S.mask) for S in res.family} | {tuple(a.mask) for a in res.atoms}
    for i in range(4):
        assert tuple(np.eye(4, dtype=bool)[i]) in masks


def test_procedure1_hat_polar_atoms_are_rings():
    m = build_model("polar_disk", n_rings=4, n_sectors=8)
    res = sp.procedure1_hat(sp.SpaceExtension.geometric(m))
    radii = np.round(m.coords[m.interior_idx, 0], 9)
    assert len(res.atoms) == np.unique(radii).size
    for a in res.atoms:
        assert np.unique(radii[a.mask]).size == 1


def test_atom_decomposition_splits_generic_subspaces():
    dec = sp.AtomDecomposition(3, np.ones(3))
    dec.refine(orthonormalize(np.array([[1.0, 1.0, 0.0]]).T))
    assert len(dec) == 2
    ranks = sorted(a.rank for a in dec.atoms)
    assert ranks == [1, 2]


# ---------------------------------------------------------------- eikonals

def test_single_jump_eikonal_is_zero():
    fam = ProjectionFamily([0.0], [Subspace.full(3)])
    e = sp.eikonal_from_chain(fam)
    assert np.all(e.op.entries == 0) and e.complete


def test_point_eikonal_is_distance_multiplication(int4, geo4):
    for x in (0.2, 0.4):
        i = interior_of(int4, x)
        e = sp.atom_eikonals(geo4, [coord(geo4, [i])])[0]
        d = distance_to_set(int4, VertexSet.from_indices(int4.n, [int4.interior_idx[i]]))
        assert np.array_equal(np.diag(e.op.entries), d[int4.interior_idx])
        assert e.op.is_diagonal()
        r = sp.atom_eikonals(geo4, [coord(geo4, [i])], regularize_alpha=1.0)[0]
        dd = d[int4.interior_idx]
        assert np.array_equal(np.diag(r.op.entries), dd / (1 + dd))
    with pytest.raises(ValueError):
        sp.atom_eikonals(geo4, [coord(geo4, [0])], regularize_alpha=-1.0)


def test_eikonal_commutes_with_stages(int41, dyn41):
    geo = sp.SpaceExtension.geometric(int41)
    for ext in (geo, dyn41):
        A = coord(ext, [20])
        tg = None if ext is geo else (1 / 42) * np.arange(0, 15)
        e = sp.eikonal_from_chain(ext.chain(A, tg))
        assert psd_order(e.op, SymOp.diag(np.zeros(ext.dim), ext.weights), 1e-10) in ("a_above", "equal")
        assert e.norm() <= e.family.breakpoints[-1] + 1e-10
        for P in e.family.projectors():
            C = e.op.entries @ P - P @ e.op.entries
            assert np.abs(C).max() <= 1e-10 * max(1, np.abs(e.op.entries).max())


def test_boundary_eikonal(int4, geo4):
    tb = sp.boundary_eikonal(geo4)
    assert np.allclose(np.diag(tb.op.entries), [0.2, 0.4, 0.4, 0.2], atol=1e-15)
    assert tb.norm() == pytest.approx(0.4)
    assert tb.is_boundary_eikonal


def test_dynamical_boundary_eikonal_within_calibration(int41, dyn41):
    geo = sp.SpaceExtension.geometric(int41)
    tb_dyn = sp.boundary_eikonal(dyn41, (1 / 42) * np.arange(0, 22))
    tb_geo = sp.boundary_eikonal(geo)
    # four grid steps of dispersion out of a diameter of 40/42
    assert op_norm(tb_dyn.op - tb_geo.op) <= 0.1


@given(st.integers(0, 2 ** 31 - 1))
def test_domination_law(seed):
    m = build_model("star", legs=(0.3, 0.5, 0.7), h=0.1)
    ext = sp.SpaceExtension.geometric(m)
    r = np.random.default_rng(seed)
    a = r.random(m.n) < 0.2
    a[m.interior_idx[0]] = True
    a2 = a | (r.random(m.n) < 0.2)
    ea, ea2 = sp.set_eikonal(ext, VertexSet(a)), sp.set_eikonal(ext, VertexSet(a2))
    assert np.all(np.diag(ea2.op.entries) <= np.diag(ea.op.entries))
    assert psd_order(ea2.op, ea.op) in ("a_below", "equal")


# ---------------------------------------------------------------- maximal eikonals

def test_maximal_eikonals_interval(int4, geo4):
    res = sp.procedure1_hat(geo4)
    eiks = sp.atom_eikonals(geo4, res.atoms)
    pair = VertexSet.from_indices(int4.n, [int4.interior_idx[interior_of(int4, x)] for x in (0.4, 0.6)])
    eiks.append(sp.set_eikonal(geo4, pair))
    ws = sp.maximal_eikonals(eiks, boundary=sp.boundary_eikonal(geo4))
    assert len(ws) == 4
    assert eiks[-1].is_maximal is False
    i2, i8 = ws.provenance.index(interior_of(int4, 0.2)), ws.provenance.index(interior_of(int4, 0.8))
    assert ws.metric[i2, i8] == pytest.approx(0.6, abs=1e-15)
    # no interior point dominates the boundary eikonal; the rule flags the Gamma-adjacent ones
    assert not ws.dominates_boundary.any()
    flagged = sorted(ws.provenance[k] for k in np.flatnonzero(ws.boundary_mask))
    assert flagged == [interior_of(int4, 0.2), interior_of(int4, 0.8)]
    with pytest.raises(ValueError):
        sp.maximal_eikonals([])


def test_boundary_singletons_dominate_exactly(int4, geo4):
    eiks = [sp.set_eikonal(geo4, VertexSet.from_indices(int4.n, [v])) for v in range(int4.n)]
    ws = sp.maximal_eikonals(eiks, boundary=sp.boundary_eikonal(geo4))
    dom = {ws.provenance[k] for k in np.flatnonzero(ws.dominates_boundary)}
    assert dom == {(int(b),) for b in int4.boundary_idx}


@pytest.mark.parametrize("name", ["int4", "int41", "star_unequal", "polar", "grid"])
def test_point_eikonal_distances_are_exact(name, request):
    m = request.getfixturevalue(name)
    ext = sp.SpaceExtension.geometric(m)
    I = m.interior_idx
    d = np.array([np.diag(sp.set_eikonal(ext, VertexSet.from_indices(m.n, [v])).op.entries)
                  for v in I])
    # sup-norm of a difference of diagonals, against the vertex distance
    gap = np.abs(d[:, None, :] - d[None, :, :]).max(axis=2)
    assert np.abs(gap - m.distances[np.ix_(I, I)]).max() <= 1e-12


def test_metric_check_and_exports(geo4):
    ws, _, _ = sp.wave_spectrum(geo4)
    chk = sp.metric_check(ws)
    assert chk["symmetric"] and chk["zero_diagonal"] and chk["triangle"]
    assert np.array_equal(sp.read_metric_csv(ws.metric_csv()), ws.metric)
    import json
    doc = json.loads(ws.to_json())
    assert set(doc) >= {"points", "metric", "boundary"}


# ---------------------------------------------------------------- isometry

@pytest.mark.parametrize("name", ["int4", "int41", "star_unequal"])
def test_simple_manifolds_are_reproduced(name, request):
    m = request.getfixturevalue(name)
    ws, res, _ = sp.wave_spectrum(sp.SpaceExtension.geometric(m))
    rep = sp.isometry_report(ws, m)
    assert res.stabilized and rep.cardinality_match
    # "exact" up to floating-point rounding of path sums
    assert rep.discrepancy <= 1e-12 and rep.boundary_ok
    assert all(a.rank == 1 for a in res.atoms)


def test_polar_disk_spectrum_is_a_radius_segment():
    # three interior rings plus the center; the boundary ring sits at radius 1
    m = build_model("polar_disk", n_rings=3, n_sectors=8)
    ws, _, _ = sp.wave_spectrum(sp.SpaceExtension.geometric(m))
    radii = np.unique(np.round(m.coords[m.interior_idx, 0], 12))
    assert np.allclose(radii, [0.0, 0.25, 0.5, 0.75])
    assert len(ws) == radii.size
    rep = sp.isometry_report(ws, m)
    step = 0.75 * 2 * np.pi / 8  # arc length of one sector on the outer interior ring
    seg = np.abs(radii[:, None] - radii[None, :])
    r, c = np.array(rep.assignment).T
    rad = np.array([np.round(m.coords[rep.targets[j][0], 0], 12) for j in c])
    assert np.abs(ws.metric[np.ix_(r, r)] - np.abs(rad[:, None] - rad[None, :])).max() <= step
    assert seg.max() == pytest.approx(0.75)
    # the boundary flag sits on the outermost interior ring only
    flagged = rad[ws.boundary_mask[r]]
    assert np.allclose(flagged, [0.75])


def test_equal_star_is_one_leg(star_equal):
    ws, _, _ = sp.wave_spectrum(sp.SpaceExtension.geometric(star_equal))
    d = star_equal.distances[0]  # vertex 0 is the center
    levels = np.unique(np.round(d[star_equal.interior_idx], 12))
    assert len(ws) == levels.size
    rep = sp.isometry_report(ws, star_equal)
    assert rep.discrepancy <= 1e-12 and rep.cardinality_match and rep.boundary_ok
    # the orbit sets sit at fixed distance from the center and the quotient is a segment
    tl = np.array([np.round(d[t], 12)[0] for t in rep.targets])
    seg = np.abs(tl[:, None] - tl[None, :])
    assert np.abs(sp.quotient_metric(star_equal, rep.targets) - seg).max() <= 1e-12


def test_boundedness(int4, geo4):
    ws, _, _ = sp.wave_spectrum(geo4)
    b = sp.boundedness_check(ws.points, int4)
    assert b.bounded and b.sup == pytest.approx(b.diameter) == pytest.approx(0.6)
    all_singletons = [sp.set_eikonal(geo4, VertexSet.from_indices(int4.n, [v])) for v in range(int4.n)]
    assert sp.boundedness_check(all_singletons).sup == pytest.approx(0.8)
    for alpha in (0.5, 2.0, 10.0):
        reg = [sp.set_eikonal(geo4, VertexSet.from_indices(int4.n, [v]), alpha) for v in range(int4.n)]
        assert sp.boundedness_check(reg).sup <= 1 / alpha
