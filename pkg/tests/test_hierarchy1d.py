import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgcdg.basis1d import eval_hier_basis
from sgcdg.hierarchy1d import (
    Space1D,
    boundary_values,
    coupling_matrix,
    dual_cells,
    level_cells,
)

import oracle

MODES = [("primal", "periodic"), ("dual", "periodic"), ("primal", "nonperiodic"),
         ("dual", "nonperiodic")]


def leftmost_type1(space):
    """Dual nonperiodic functions that the truncation at x = 0 touches."""
    return np.array([j == 0 for (l, j, p) in space.indices])


@pytest.mark.parametrize("role,boundary", MODES)
@pytest.mark.parametrize("N,k", [(0, 0), (3, 1), (4, 2)])
def test_layout_counts(role, boundary, N, k):
    sp = Space1D(role, boundary, N, k)
    extra = k + 1 if (role, boundary) == ("dual", "nonperiodic") else 0
    assert sp.dim == (k + 1) * 2 ** N + extra
    assert sp.layout[0] == k + 1 + extra
    assert all(sp.layout[l] == 2 ** (l - 1) * (k + 1) for l in range(1, N + 1))
    assert len(sp.indices) == sp.dim
    assert [sp.position(*ix) for ix in sp.indices] == list(range(sp.dim))


def test_space_validation():
    with pytest.raises(ValueError, match="role"):
        Space1D("middle", "periodic", 2, 1)
    with pytest.raises(ValueError, match="boundary"):
        Space1D("primal", "open", 2, 1)
    with pytest.raises(ValueError, match="N"):
        Space1D("primal", "periodic", -1, 1)
    with pytest.raises(ValueError, match="k"):
        Space1D("primal", "periodic", 2, 9)


@pytest.mark.parametrize("N", [0, 1, 3])
def test_dual_cells_tile_unit_interval(N):
    for l in range(N + 1):
        cells = dual_cells(N, l)
        assert cells[0][0] == 0 and cells[-1][1] == 1
        assert all(a < b for a, b in cells)
        assert all(cells[i][1] == cells[i + 1][0] for i in range(len(cells) - 1))
    assert level_cells(Space1D("primal", "periodic", N, 1), N) == [
        (j / 2 ** N, (j + 1) / 2 ** N) for j in range(2 ** N)]


@settings(max_examples=40, deadline=None)
@given(mode=st.sampled_from(MODES), k=st.integers(0, 3),
       x=st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=8))
def test_halfcell_values_match_pointwise_definition(mode, k, x):
    sp = Space1D(*mode, 3, k)
    x = np.array(x)
    ref = np.array([eval_hier_basis(sp, s, x) for s in sp.indices])
    assert np.allclose(sp.values(x), ref, atol=1e-10)


@pytest.mark.parametrize("role,boundary", MODES)
def test_one_sided_limits(role, boundary):
    sp = Space1D(role, boundary, 2, 2)
    xe = np.arange(1, 2 ** 3) / 2 ** 3
    e = 1e-9
    assert np.allclose(sp.one_sided(xe, "-"), sp.values(xe - e), atol=1e-6)
    assert np.allclose(sp.one_sided(xe, "+"), sp.values(xe + e), atol=1e-6)


@pytest.mark.parametrize("role,boundary", MODES[:3])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_orthonormal_modes_have_identity_mass(role, boundary, k):
    sp = Space1D(role, boundary, 4, k)
    M = coupling_matrix("mass", sp, sp).entries
    assert np.abs(M - np.eye(sp.dim)).max() < 1e-13


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("N", [1, 3, 5])
def test_dual_nonperiodic_gram_sparsity(N, k):
    sp = Space1D("dual", "nonperiodic", N, k)
    G = coupling_matrix("mass", sp, sp).entries
    left = leftmost_type1(sp)
    allowed = np.outer(left, left) | np.eye(sp.dim, dtype=bool)
    off = np.abs(G - np.eye(sp.dim))
    assert off[~allowed].max(initial=0) < 1e-13
    assert np.allclose(np.diag(G)[~left], 1.0, atol=1e-13)
    # left-most functions of different levels really do couple
    lev = np.array([l for (l, j, p) in sp.indices])
    for l1 in range(N + 1):
        for l2 in range(l1 + 1, N + 1):
            blk = off[np.ix_(left & (lev == l1), left & (lev == l2))]
            assert blk.max() > 1e-6


@pytest.mark.parametrize("te,tr", [(("primal", "periodic"), ("dual", "periodic")),
                                   (("dual", "periodic"), ("primal", "periodic")),
                                   (("primal", "nonperiodic"), ("dual", "nonperiodic")),
                                   (("dual", "nonperiodic"), ("primal", "nonperiodic"))])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_couplings_match_pointwise_quadrature(te, tr, k):
    N = 3
    test, trial = Space1D(*te, N, k), Space1D(*tr, N, k)
    T, R = oracle.Table1D(test), oracle.Table1D(trial)
    x, w = oracle.gauss_points(N, k)
    mass = (R.values(x) * w) @ T.values(x).T
    stiff = (R.values(x) * w) @ T.values(x, deriv=True).T
    e = oracle.faces(test)
    flux = R.values(e) @ (T.values(e, "-") - T.values(e, "+")).T
    assert np.allclose(coupling_matrix("mass", test, trial).entries, mass, atol=1e-12)
    assert np.allclose(coupling_matrix("stiffness", test, trial).entries, stiff, atol=1e-10)
    assert np.allclose(coupling_matrix("flux", test, trial).entries, flux, atol=1e-10)
    wfun = lambda x: np.cos(3 * x) + x ** 2  # noqa: E731
    wmass = (R.values(x) * w * wfun(x)) @ T.values(x).T
    got = coupling_matrix("weighted-mass", test, trial, weight=wfun).entries
    assert np.allclose(got, wmass, atol=1e-12)


def test_unit_weight_reproduces_unweighted():
    P, D = Space1D("primal", "periodic", 3, 2), Space1D("dual", "periodic", 3, 2)
    for kind in ("mass", "stiffness", "flux"):
        a = coupling_matrix(kind, P, D).entries
        b = coupling_matrix("weighted-" + kind, P, D, weight=lambda x: np.ones_like(x)).entries
        assert np.allclose(a, b, atol=1e-12)


def test_coupling_argument_errors():
    P = Space1D("primal", "periodic", 3, 1)
    with pytest.raises(ValueError, match="kind"):
        coupling_matrix("laplace", P, P)
    with pytest.raises(ValueError, match="weight"):
        coupling_matrix("mass", P, P, weight=np.sin)
    with pytest.raises(ValueError, match="share"):
        coupling_matrix("mass", P, Space1D("dual", "periodic", 2, 1))
    with pytest.raises(FloatingPointError):
        coupling_matrix("weighted-mass", P, P, weight=lambda x: np.full_like(x, np.nan))


@pytest.mark.parametrize("role,boundary", MODES)
def test_boundary_values(role, boundary):
    sp = Space1D(role, boundary, 3, 2)
    assert np.allclose(boundary_values(sp, "left"), sp.values(np.array([1e-12]))[:, 0], atol=1e-8)
    assert np.allclose(boundary_values(sp, "right"), sp.values(np.array([1 - 1e-12]))[:, 0], atol=1e-8)
    with pytest.raises(ValueError):
        boundary_values(sp, "top")


def test_interfaces():
    assert np.allclose(Space1D("primal", "periodic", 2, 0).interfaces(), [0, .25, .5, .75])
    assert np.allclose(Space1D("primal", "nonperiodic", 2, 0).interfaces(), [.25, .5, .75])
    assert np.allclose(Space1D("dual", "nonperiodic", 2, 0).interfaces(), [.125, .375, .625, .875])
