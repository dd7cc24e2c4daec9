from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from klab import linalg as la

entries = st.integers(-3, 3).map(Fraction)


def square(n):
    return st.lists(st.lists(entries, min_size=n, max_size=n), min_size=n, max_size=n).map(la.mat)


@given(st.integers(1, 4).flatmap(square))
def test_det_matches_numpy(m):
    assert abs(float(la.det(m)) - np.linalg.det(la.to_float(m))) < 1e-9


@given(st.integers(1, 4).flatmap(square))
def test_inverse_is_exact(m):
    if la.det(m) == 0:
        return
    assert la.matmul(m, la.inverse(m)) == la.identity(len(m))


@given(st.integers(1, 4).flatmap(square))
def test_rank_plus_nullity(m):
    n = len(m)
    assert la.rank(m) + len(la.nullspace(m, n)) == n
    for v in la.nullspace(m, n):
        assert la.matvec(m, v) == (0,) * n


@given(st.integers(1, 4).flatmap(square))
def test_left_kernel_annihilates(m):
    n = len(m)
    for v in la.left_kernel_basis(m, n):
        assert la.matvec(la.transpose(m), v) == (0,) * n


def test_signed_permutation_detection():
    assert la.is_signed_perm(la.mat([[0, -1], [1, 0]]))
    assert not la.is_signed_perm(la.mat([[1, 1], [0, 1]]))
