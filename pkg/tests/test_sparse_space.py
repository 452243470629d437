import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgcdg.hierarchy1d import Space1D
from sgcdg.sparse_space import (
    MultiIndex,
    dof_count,
    enumerate_space,
    layout_space,
    level_vectors,
)

MODES = [("primal", "periodic"), ("dual", "periodic"), ("primal", "nonperiodic"),
         ("dual", "nonperiodic")]


def brute_count(d, N, k, mode, rule):
    lay = Space1D(*mode, N, k).layout
    total = 0
    for l in itertools.product(range(N + 1), repeat=d):
        if rule == "sparse" and sum(l) > N:
            continue
        total += int(np.prod([lay[li] for li in l]))
    return total


@pytest.mark.parametrize("d,N", [(1, 4), (2, 5), (3, 4), (4, 3)])
def test_level_vector_counts_and_order(d, N):
    vecs = level_vectors(d, N)
    assert len(vecs) == comb(N + d, d)
    keys = [(sum(l), l) for l in vecs]
    assert keys == sorted(keys)
    assert len(level_vectors(d, N, "full")) == (N + 1) ** d
    with pytest.raises(ValueError):
        level_vectors(d, N, "hyperbolic")


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 4), N=st.integers(0, 5), k=st.integers(0, 3),
       mode=st.sampled_from(MODES), rule=st.sampled_from(["sparse", "full"]))
def test_dof_count_matches_brute_force(d, N, k, mode, rule):
    if rule == "full" and d == 4 and N > 3:
        N = 3
    assert dof_count(d, N, k, mode, rule) == brute_count(d, N, k, mode, rule)


def test_dof_count_known_values():
    # d = 2, k = 0, primal: 1D level sizes 1, 1, 2, 4; |l|_1 = 0, 1, 2, 3 give 1, 2, 5, 12
    assert dof_count(2, 3, 0) == 20
    assert dof_count(1, 4, 1) == 2 * 16
    assert dof_count(2, 4, 1, rule="full") == (2 * 16) ** 2


@pytest.mark.parametrize("mode", MODES)
@pytest.mark.parametrize("d,N,k", [(2, 3, 1), (3, 2, 2)])
def test_index_arrays_consistent(mode, d, N, k):
    S = enumerate_space(d, N, k, mode)
    assert len(S) == S.size == dof_count(d, N, k, mode)
    assert len(np.unique(S.index1d, axis=0)) == S.size
    assert np.all(S.levels.sum(axis=1) <= N)
    sums = S.levels.sum(axis=1)
    assert np.all(np.diff(sums) >= 0)  # blocks ordered by level sum
    s1 = S.spaces[0]
    for i in range(d):
        assert np.array_equal(S.levels[:, i], s1.levels[S.index1d[:, i]])


@settings(max_examples=30, deadline=None)
@given(mode=st.sampled_from(MODES), d=st.integers(1, 3), N=st.integers(0, 3),
       k=st.integers(0, 2), data=st.data())
def test_ordinal_roundtrip(mode, d, N, k, data):
    S = enumerate_space(d, N, k, mode)
    n = data.draw(st.integers(0, S.size - 1))
    s = S.multi_index(n)
    assert S.ordinal(s) == n
    assert s in S
    s1 = S.spaces[0]
    for i in range(d):
        assert s1.position(s.l[i], s.j[i], s.p[i]) == S.index1d[n, i]


def test_ordinal_errors_name_the_bound():
    S = enumerate_space(2, 3, 1)
    with pytest.raises(ValueError, match=r"\|l\|_1"):
        S.ordinal(MultiIndex((2, 2), (0, 0), (0, 0)))
    with pytest.raises(ValueError, match="translation"):
        S.ordinal(MultiIndex((2, 1), (2, 0), (0, 0)))
    with pytest.raises(ValueError, match="degree"):
        S.ordinal(MultiIndex((0, 0), (0, 0), (2, 0)))
    with pytest.raises(ValueError, match="level"):
        S.ordinal(MultiIndex((4, 0), (0, 0), (0, 0)))
    with pytest.raises(ValueError, match="dimension"):
        S.ordinal(MultiIndex((0,), (0,), (0,)))
    with pytest.raises(ValueError):
        S.multi_index(S.size)
    assert MultiIndex((2, 2), (0, 0), (0, 0)) not in S


@pytest.mark.parametrize("rule", ["sparse", "full"])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_lines_partition_dofs_into_level_prefixes(rule, d):
    S = enumerate_space(d, 3, 1, ("dual", "nonperiodic"), rule)
    off = S.spaces[0].offsets
    for axis in range(d):
        seen = []
        for B, gather in S.lines(axis):
            assert gather.shape[1] == off[B + 1]
            for row in gather:
                pos = S.index1d[row, axis]
                assert np.array_equal(pos, np.arange(off[B + 1]))
                others = np.delete(S.index1d[row], axis, axis=1)
                assert (others == others[0]).all()
            seen.append(gather.ravel())
        assert np.array_equal(np.sort(np.concatenate(seen)), np.arange(S.size))


def test_layout_space_is_cached_and_counts_any_layout():
    a = layout_space([(1, 3, 2), (2, 2, 2)], 2)
    assert a is layout_space(((1, 3, 2), (2, 2, 2)), 2)
    assert a.size == 1 * 2 + 1 * 2 + 3 * 2 + 1 * 2 + 3 * 2 + 2 * 2


def test_enumerate_space_validation():
    with pytest.raises(ValueError):
        enumerate_space(0, 3, 1)
    with pytest.raises(ValueError):
        enumerate_space(2, -1, 1)
