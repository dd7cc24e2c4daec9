from fractions import Fraction

import numpy as np
import pytest

from fixtures import level1
from klab import gallery
from klab.boxes import Box, BoxUnion
from klab.errors import SupportEscapesDomain
from klab.geometry import GroupAction
from klab.perturbation import (Bump, BumpBranch, Multisection, check_lift_identity, check_orientation,
                               genericity_perturb, global_perturb, lift_perturbation, orientation_data,
                               signed_count, symmetrize, zero_set)
from klab.pipeline import count_presentation

F = Fraction


def test_bump_profile_is_one_inside_and_zero_outside():
    b = Bump((F(0), F(0)), F(1), (1.0, 0.0))
    X = np.array([[0.0, 0.0], [0.4, -0.4], [1.0, 0.0], [0.0, 1.5]])
    val, _ = b.profile(X)
    assert np.allclose(val, [1, 1, 0, 0])


def test_bump_gradient_matches_finite_differences():
    b = Bump((F(0),), F(1), (1.0,))
    X = np.array([[0.7]])
    _, g = b.profile(X)
    h = 1e-6
    fd = (b.profile(X + h)[0] - b.profile(X - h)[0]) / (2 * h)
    assert abs(g[0, 0] - fd[0]) < 1e-5


def test_symmetrized_multisection_is_invariant():
    grp = GroupAction.generate(1, 1, [([[-1]], [[-1]])])
    br = BumpBranch((Bump((F(1, 2),), F(1, 4), (0.3,)),), 1, 1)
    branches = symmetrize(br, grp)
    assert [w for w, _ in branches] == [F(1, 2), F(1, 2)]
    X = np.linspace(-1, 1, 41)[:, None]
    total = sum(float(w) * b.eval_np(X) for w, b in branches)
    mirrored = sum(float(w) * b.eval_np(-X) for w, b in branches)
    assert np.allclose(total, -mirrored)


def test_degenerate_zero_gets_a_transverse_perturbation():
    sec = gallery.section("t", "t**2")
    U = BoxUnion.of(Box.make([-1], [1]))
    ms = genericity_perturb(sec, U, None, U, None, GroupAction.trivial(1, 1), seed=3, chart="q",
                            step=F(1, 20), exact_points=[(F(0),)])
    assert not ms.empty
    assert ms.branches[0][0] == 1


def test_transverse_sections_are_left_alone():
    sec = gallery.section("t", "t")
    U = BoxUnion.of(Box.make([-1], [1]))
    ms = genericity_perturb(sec, U, None, U, None, GroupAction.trivial(1, 1), seed=0, step=F(1, 20))
    assert ms.empty


def test_lift_matches_the_bundle_image_on_the_embedding():
    l1g = level1("EX-JUMP")
    l1 = l1g.table[("q", "p")]
    q = l1g.charts["q"]
    tau = genericity_perturb(q.section, q.base, None, q.base, None, q.group, seed=1, chart="q",
                             step=q.step(F(1, 20)), exact_points=q.zero_points(), must_fit=[l1.cc.domain])
    chk = check_lift_identity(l1, tau, q.section, l1g.charts["p"].section)
    assert chk.ok


def test_bump_straddling_the_domain_boundary_is_an_error():
    l1g = level1("EX-JUMP")
    l1 = l1g.table[("q", "p")]
    edge = l1.cc.domain.boxes[0].hi[0]
    tau = Multisection("q", 1, 1, ((F(1), BumpBranch((Bump((edge,), F(1, 16), (0.1,)),), 1, 1)),))
    with pytest.raises(SupportEscapesDomain):
        lift_perturbation(l1, tau)


def test_global_perturbation_is_seed_deterministic():
    l1g = level1("EX-JUMP")
    a = zero_set(l1g, global_perturb(l1g, 7)).to_csv()
    b = zero_set(l1g, global_perturb(l1g, 7)).to_csv()
    assert a == b
    assert "-0.0000000000" not in a


def test_jump_zero_count_varies_but_signed_count_vanishes():
    sizes = set()
    for seed in range(4):
        res = count_presentation(gallery.get("EX-JUMP"), seed=seed)
        assert res.count == 0
        sizes.add(len([e for e in res.zeros.entries if e.counted]))
        assert all(e.sigma_min > 1e-8 for e in res.zeros.entries if e.counted)
    assert min(sizes) >= 2


def test_orientation_is_consistent_on_chain():
    l1g = level1("EX-CHAIN")
    assert check_orientation(l1g, {i: (1, 1) for i in l1g.order}).ok
    assert orientation_data(l1g).consistent


def test_orientation_flip_is_detected():
    l1g = level1("EX-CHAIN")
    signs = {"c1": (1, 1), "c2": (-1, 1), "c3": (1, 1)}
    assert not check_orientation(l1g, signs).ok


@pytest.mark.parametrize("name,expected", [("EX-Z2", F(2)), ("EX-SYM", F(1, 2)), ("EX-CHAIN", F(1))])
def test_pipeline_counts(name, expected):
    res = count_presentation(gallery.get(name), seed=0)
    assert res.count == expected
    assert res.stages == ["extract", "shrink", "hausdorff", "level1", "perturb", "zeros", "count"]
    assert signed_count(res.zeros, res.orientation) == expected
