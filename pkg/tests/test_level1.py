from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fixtures import level1, reversed_chain_target, shrunk, sub_system
from klab import linalg as la
from klab.atlas import check_gcs
from klab.errors import NotConcerted
from klab.level1 import (build_level1_embedding, build_level1_gcs, check_all_compat, check_level1_embedding,
                         left_inverse, projection_matrix, stabilize_gcs, triples)
from klab.zeros import TOL_RANK

F = Fraction


@pytest.fixture(scope="module")
def chain():
    return level1("EX-CHAIN")


@pytest.fixture(scope="module")
def jump():
    return level1("EX-JUMP")


@pytest.mark.parametrize("which", ["chain", "jump"])
def test_certificates_have_no_leaks_and_transverse_quotients(which, request):
    l1g = request.getfixturevalue(which)
    assert l1g.table
    for key, l1 in l1g.table.items():
        cert = l1.certificate
        assert cert["leaks"] == [], key
        assert cert["quotient_off_image"] == [], key
        assert cert["sigma_min"] > TOL_RANK, key
        assert cert["samples"] > 0


def test_chain_compatibility_identities_hold(chain):
    assert triples(chain) == [("c1", "c2", "c3")]
    checks = check_all_compat(chain)
    assert checks and all(c.ok for c in checks)


def test_fiber_maps_are_exact_one_sided_inverses(chain):
    for l1 in chain.table.values():
        B = l1.cc.bundle_map
        assert la.matmul(l1.pi_tilde, B) == la.identity(len(B[0]))
        assert la.matmul(l1.pi_hat, l1.pi_hat) == l1.pi_hat


def test_projections_land_on_the_image(chain):
    l1 = chain.table[("c2", "c3")]
    for z in l1.tub.W.grid(F(1, 32))[:50]:
        u = l1.tub.pi(z)
        assert l1.cc.base_map.apply(u) == l1.tub.pi_point(z)
        assert l1.tub.pi_point(l1.tub.pi_point(z)) == l1.tub.pi_point(z)


def test_earlier_charts_are_frozen_by_the_induction(chain):
    g = chain.gcs
    for i in g.charts:
        assert chain.charts[i].base.subset_of(g.charts[i].base)
    assert chain.order == ("c1", "c2", "c3")


def test_smaller_fiber_scale_gives_nested_tubes():
    a = level1("EX-CHAIN")
    b = level1("EX-CHAIN", fiber_scale=F(1, 2))
    for k in a.table:
        assert b.table[k].tub.W.subset_of(a.table[k].tub.W)


@given(st.lists(st.lists(st.integers(-2, 2).map(F), min_size=2, max_size=2), min_size=3, max_size=3))
def test_left_inverse_and_projection(rows):
    B = la.mat(rows)
    if la.rank(B) < 2:
        return
    L = left_inverse(B)
    assert la.matmul(L, B) == la.identity(2)
    P = projection_matrix(la.columns(B), 3)
    assert la.matmul(P, P) == P
    for v in la.columns(B):
        assert la.matvec(P, v) == tuple(v)


def test_stabilization_embeds_the_level1_system(chain):
    big, kemb = stabilize_gcs(chain.gcs, 2)
    assert all(c.ok for c in check_gcs(big))
    emb = build_level1_embedding(kemb, chain, big)
    assert check_level1_embedding(emb).ok
    for i, c in chain.charts.items():
        assert big.charts[i].dim == c.dim + 2 and big.charts[i].rank == c.rank + 2


def test_reversed_order_is_not_concerted(chain):
    sub = sub_system(chain.gcs, ["c1", "c2"])
    l1g = build_level1_gcs(sub)
    target, kemb = reversed_chain_target(l1g.gcs)
    with pytest.raises(NotConcerted):
        build_level1_embedding(kemb, l1g, target)


def test_level1_shrinking_is_deterministic():
    a = build_level1_gcs(shrunk("EX-JUMP"))
    b = build_level1_gcs(shrunk("EX-JUMP"))
    assert {k: v.tub.W for k, v in a.table.items()} == {k: v.tub.W for k, v in b.table.items()}
