import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavespec.geometry import (Caps, SetFamily, VertexSet, build_model, distance_to_set,
                               geodesic_distances, interior_points, is_net, is_simple,
                               neighborhood, procedure1, separation_check, set_algebra_closure,
                               sigma_step)


def vs(m, idx):
    return VertexSet.from_indices(m.n, idx)


def at(m, x):
    """Vertex of the interval model at coordinate x."""
    return int(np.argmin(np.abs(m.coords[:, 0] - x)))


# ---------------------------------------------------------------- models

def test_interval_fixture_layout(int4):
    I = int4.interior_idx
    assert np.allclose(int4.coords[I, 0], [0.2, 0.4, 0.6, 0.8])
    assert np.allclose(int4.coords[int4.boundary_idx, 0], [0.0, 1.0])
    assert np.allclose(int4.weights[I], 0.2)


def test_bad_params_are_rejected():
    with pytest.raises(ValueError):
        build_model("interval", h=-1)
    with pytest.raises(ValueError):
        build_model("sphere")
    with pytest.raises(ValueError):
        build_model("metric_graph", n_nodes=2, edges=[(0, 1, 0.0)], h=0.1)


def test_polar_disk_rotation_is_a_symmetry():
    m = build_model("polar_disk", n_rings=4, n_sectors=8)
    # polar coordinates (radius, angle); rotate one sector and wrap
    rad, ang = m.coords[:, 0], m.coords[:, 1]
    step = 2 * np.pi / 8
    rot = np.where(rad > 0, np.mod(ang + step, 2 * np.pi), 0.0)
    key = {(round(r, 9), round(a, 9)): k for k, (r, a) in enumerate(zip(rad, np.mod(ang, 2 * np.pi)))}
    perm = np.array([key[(round(r, 9), round(a, 9))] for r, a in zip(rad, rot)])
    assert sorted(perm) == list(range(m.n))
    # rotation preserves boundary, weights and all distances
    assert np.array_equal(m.boundary[perm], m.boundary)
    assert np.allclose(m.weights[perm], m.weights)
    D = m.distances
    assert np.abs(D[np.ix_(perm, perm)] - D).max() <= 1e-12


# ---------------------------------------------------------------- distances

def _nx_distances(m):
    G = nx.Graph()
    G.add_nodes_from(range(m.n))
    for (a, b), L in zip(m.edges, m.lengths):
        G.add_edge(int(a), int(b), weight=float(L))
    D = np.zeros((m.n, m.n))
    for a, row in nx.all_pairs_dijkstra_path_length(G):
        for b, d in row.items():
            D[a, b] = d
    return D


@pytest.mark.parametrize("name", ["int4", "star_unequal", "polar", "grid"])
def test_distances_match_independent_shortest_paths(name, request):
    m = request.getfixturevalue(name)
    D = geodesic_distances(m)
    assert np.abs(D - _nx_distances(m)).max() <= 1e-12
    assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)
    # D[i, j] <= D[i, k] + D[k, j]
    assert (D[:, None, :] - D[:, :, None] - D[None, :, :]).max() <= 1e-12


def test_interval_and_star_distances(int4, star_unequal):
    D = int4.distances
    assert D[at(int4, 0.2), at(int4, 0.8)] == pytest.approx(0.6)
    tips = star_unequal.boundary_idx
    Ds = star_unequal.distances
    assert Ds[tips[0], tips[1]] == pytest.approx(0.8)
    assert Ds[tips[1], tips[2]] == pytest.approx(1.2)


# ---------------------------------------------------------------- neighborhoods

def test_neighborhood_examples(int4):
    A = vs(int4, [at(int4, 0.4)])
    nb = neighborhood(int4, A, 0.25)
    assert nb == vs(int4, [at(int4, x) for x in (0.2, 0.4, 0.6)])
    assert neighborhood(int4, A, 0) == A
    G = int4.whole_boundary
    nbG = neighborhood(int4, G, 0.3) - G
    assert nbG == vs(int4, [at(int4, 0.2), at(int4, 0.8)])
    assert not neighborhood(int4, VertexSet(np.zeros(int4.n, bool)), 0.5)


def test_neighborhood_is_strict(int4):
    A = vs(int4, [at(int4, 0.4)])
    assert neighborhood(int4, A, 0.2) == A


@given(st.integers(0, 2 ** 31 - 1), st.floats(0, 1), st.floats(0, 1))
def test_neighborhoods_monotone(seed, t1, t2):
    m = build_model("star", legs=(0.3, 0.5, 0.7), h=0.1)
    r = np.random.default_rng(seed)
    A = VertexSet(r.random(m.n) < 0.2)
    A2 = A | VertexSet(r.random(m.n) < 0.2)
    lo, hi = sorted([t1, t2])
    assert neighborhood(m, A, lo).issubset(neighborhood(m, A2, hi))


@given(st.integers(0, 2 ** 31 - 1))
def test_distance_functions_are_1_lipschitz(seed):
    m = build_model("star", legs=(0.3, 0.5, 0.7), h=0.1)
    r = np.random.default_rng(seed)
    A = VertexSet(r.random(m.n) < 0.3)
    if not A:
        return
    d = distance_to_set(m, A)
    assert np.all((d == 0) == A.mask)
    assert (np.abs(d[:, None] - d[None, :]) <= m.distances + 1e-12).all()


def test_interior_points(int4):
    allv = VertexSet(np.ones(int4.n, bool))
    assert interior_points(int4, allv) == allv
    A = vs(int4, [at(int4, 0.2), at(int4, 0.4)])
    assert not interior_points(int4, A)
    A0 = A | vs(int4, [at(int4, 0.0)])
    assert interior_points(int4, A0) == vs(int4, [at(int4, 0.0), at(int4, 0.2)])
    assert not interior_points(int4, vs(int4, [at(int4, 0.6)]))


# ---------------------------------------------------------------- algebras

def _brute_algebra(n, sets):
    fam = {tuple(np.zeros(n, bool))}
    fam |= {tuple(s.mask) for s in sets}
    changed = True
    while changed:
        changed = False
        cur = list(fam)
        for a in cur:
            c = tuple(~np.array(a))
            if c not in fam:
                fam.add(c)
                changed = True
        for a, b in itertools.combinations(cur, 2):
            c = tuple(np.array(a) & np.array(b))
            if c not in fam:
                fam.add(c)
                changed = True
    return fam


def test_algebra_of_one_set(int4):
    A = vs(int4, [1, 2])
    alg = set_algebra_closure(int4, [A])
    assert {tuple(s.mask) for s in alg} == _brute_algebra(int4.n, [A])
    assert len(alg) == 4 and alg.fixpoint


def test_algebra_of_two_sets_matches_brute_force(int4):
    A, B = vs(int4, [1, 2, 3]), vs(int4, [2, 3, 4])
    alg = set_algebra_closure(int4, [A, B])
    assert {tuple(s.mask) for s in alg} == _brute_algebra(int4.n, [A, B])
    assert len(alg) <= 16


def test_algebra_is_a_fixpoint(int4):
    alg = set_algebra_closure(int4, [vs(int4, [1]), vs(int4, [2, 3])])
    again = set_algebra_closure(int4, list(alg))
    assert {tuple(s.mask) for s in alg} == {tuple(s.mask) for s in again}


def test_algebra_cap_truncates(int41):
    singles = [vs(int41, [v]) for v in range(12)]
    alg = set_algebra_closure(int41, singles, Caps(max_sets=50))
    assert alg.truncated and len(alg) == 50


def test_sigma_step_examples(int4):
    G = int4.whole_boundary
    omega = VertexSet(np.ones(int4.n, bool))
    collars = [neighborhood(int4, G, t) for t in int4.levels]
    out = sigma_step(int4, collars, int4.levels)
    # the complement of the 0.3-collar is {0.4, 0.6}; its interior is empty, but the
    # complement of the boundary has the interior {0.4, 0.6} whose neighborhoods appear
    mid = vs(int4, [at(int4, 0.4), at(int4, 0.6)])
    assert mid in set(out)
    assert neighborhood(int4, mid, 0.25) in set(out)
    assert all(len(s) > 0 for s in out)
    only = sigma_step(int4, [omega], int4.levels)
    assert set(only) == {omega}


# ---------------------------------------------------------------- procedure 1

def test_procedure1_interval_atoms_are_singletons(int4):
    res = procedure1(int4)
    assert res.stabilized
    assert sorted(len(a) for a in res.atoms) == [1] * int4.n
    assert is_net(int4, res) and is_simple(int4)


def test_procedure1_polar_atoms_are_rings():
    m = build_model("polar_disk", n_rings=4, n_sectors=8)
    res = procedure1(m)
    radii = np.round(m.coords[:, 0], 9)
    for a in res.atoms:
        assert np.unique(radii[a.mask]).size == 1
    assert len(res.atoms) == np.unique(radii).size
    assert is_simple(m) is False


def test_procedure1_equal_star_atoms_are_orbits(star_equal):
    res = procedure1(star_equal)
    center = 0
    d = star_equal.distances[center]
    for a in res.atoms:
        assert np.unique(np.round(d[a.mask], 9)).size == 1
    assert not is_simple(star_equal)
    assert is_simple(build_model("star", legs=(0.3, 0.5, 0.7), h=0.1))


def test_procedure1_is_closed_under_sigma(int4):
    res = procedure1(int4)
    atoms = res.atoms
    assert np.all(np.sum([a.mask for a in atoms], axis=0) == 1)
    nxt = sigma_step(int4, atoms, res.tgrid)
    for s in nxt:
        # every produced set is a union of atoms
        assert all(a.issubset(s) or not (a & s) for a in atoms)


def test_truncated_procedure_gives_indeterminate_net():
    m = build_model("interval", n_interior=41)
    res = procedure1(m, caps=Caps(max_depth=1))
    assert is_net(m, res) in (None, True)
    if not res.stabilized:
        assert is_net(m, res) is None


def test_separation(int4):
    res = procedure1(int4)
    assert separation_check(int4, res.atoms)
    m = build_model("polar_disk", n_rings=4, n_sectors=8)
    assert not separation_check(m, procedure1(m).atoms)
    singles = SetFamily()
    for v in range(m.n):
        singles.add(vs(m, [v]))
    assert separation_check(m, singles)
