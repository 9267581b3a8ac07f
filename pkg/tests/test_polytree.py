"""The node-level engine on singly connected networks."""

import numpy as np
import pytest

from bordertree.errors import NotSinglyConnectedError
from bordertree.factor import multiply
from bordertree.network import EvidenceSet
from bordertree.oracle import oracle_event_prob, oracle_marginal, oracle_posterior
from bordertree.polytree import PolytreeEngine, node_priors, polytree_query
from bordertree.randgen import random_evidence, random_polytree
from bordertree import zoo


@pytest.fixture(scope="module")
def engine(poly_b=None):
    return PolytreeEngine(zoo.polytree_b())


def test_rejects_multiply_connected(bn_a):
    with pytest.raises(NotSinglyConnectedError):
        PolytreeEngine(bn_a)


def test_node_priors_match_oracle(poly_b):
    priors = node_priors(poly_b)
    for v in poly_b.ids:
        np.testing.assert_allclose(
            priors[v].values, oracle_marginal(poly_b, [v]), atol=1e-9
        )


class TestBoundaries:
    def test_outside_parent_supplies_prior(self, poly_b):
        # Evidence at B only: core is {B}; the messages into J's family are
        # all vacuous, e.g. the downward message P would send I is P's prior.
        eng = PolytreeEngine(poly_b)
        ev = EvidenceSet(poly_b, {poly_b.id_of("B"): {1}})
        s = eng.session(ev)
        p, i = poly_b.id_of("P"), poly_b.id_of("I")
        msg = s.get_pi_edge(p, i)
        np.testing.assert_allclose(msg.values, eng.priors[p].values)

    def test_outside_child_supplies_indicator(self, poly_b):
        eng = PolytreeEngine(poly_b)
        d = poly_b.id_of("D")
        ev = EvidenceSet(poly_b, {d: {0}})
        s = eng.session(ev)
        # N is an outside child of D; its message is D's own indicator.
        msg = s.get_lambda_edge(d, poly_b.id_of("N"))
        np.testing.assert_allclose(msg.values, [1.0, 0.0])

    def test_no_evidence_posterior_is_prior(self, poly_b):
        eng = PolytreeEngine(poly_b)
        posts, pe = eng.query(EvidenceSet(poly_b))
        assert pe == pytest.approx(1.0, abs=1e-9)
        for v in poly_b.ids:
            np.testing.assert_allclose(
                posts[v].values, eng.priors[v].values, atol=1e-9
            )


class TestMessages:
    def test_root_with_single_child_sends_prior_indicator(self, poly_b):
        # Evidence at roots K and P: both are core endpoints; K's message to
        # its only child M is its restricted prior.
        eng = PolytreeEngine(poly_b)
        k, m, p = poly_b.id_of("K"), poly_b.id_of("M"), poly_b.id_of("P")
        ev = EvidenceSet(poly_b, {k: {1}, p: {0}})
        s = eng.session(ev, pivot=p)  # collection flows K -> M -> I -> P
        msg = s.pi_edge[(k, m)]
        expect = eng.priors[k].values * np.array([0.0, 1.0])
        np.testing.assert_allclose(msg.values, expect, atol=1e-12)

    def test_collection_touches_exactly_the_core(self, rng):
        for _ in range(20):
            bn = random_polytree(rng, 5, 12, 3)
            ev = random_evidence(rng, bn)
            eng = PolytreeEngine(bn)
            s = eng.session(ev)
            from bordertree.messaging import evidential_core

            core = evidential_core(eng.tree, list(ev.vars))
            assert s.collected == len(core.edges)

    def test_sole_evidence_at_pivot_sends_nothing(self, poly_b):
        eng = PolytreeEngine(poly_b)
        d = poly_b.id_of("D")
        s = eng.session(EvidenceSet(poly_b, {d: {0}}), pivot=d)
        assert s.collected == 0
        _, post = s.posterior(d)
        np.testing.assert_allclose(post.values, [1.0, 0.0], atol=1e-12)


class TestPosteriors:
    def test_edge_product_identity(self, poly_b):
        # Pi_Y(Q) * Lambda_Y(Q) equals Pi(Q) * Lambda(Q) for every child Y.
        eng = PolytreeEngine(poly_b)
        ev = EvidenceSet(
            poly_b,
            {poly_b.id_of("B"): {1}, poly_b.id_of("L9"): {0}, poly_b.id_of("R8"): {2}},
        )
        s = eng.session(ev)
        for q in poly_b.ids:
            s.ensure_informed(q)
            node = multiply(s.pi_node(q), s.lambda_node(q))
            for y in poly_b.children(q):
                via_edge = multiply(
                    s.compute_pi_edge(q, y), s.compute_lambda_edge(q, y)
                )
                np.testing.assert_allclose(
                    via_edge.values, node.values, rtol=1e-12, atol=1e-300
                )

    def test_matches_oracle_on_random_polytrees(self, rng):
        for _ in range(30):
            bn = random_polytree(rng, 4, 11, 4)
            ev = random_evidence(rng, bn)
            posts, pe = polytree_query(bn, ev)
            assert pe == pytest.approx(oracle_event_prob(bn, ev), rel=1e-9)
            for q in bn.ids:
                np.testing.assert_allclose(
                    posts[q].values, oracle_posterior(bn, ev, q), atol=1e-9
                )

    def test_pivot_independence(self, poly_b):
        ev = EvidenceSet(
            poly_b, {poly_b.id_of("B"): {0}, poly_b.id_of("L4"): {1}}
        )
        eng = PolytreeEngine(poly_b)
        results = []
        from bordertree.messaging import evidential_core

        core = evidential_core(eng.tree, list(ev.vars))
        for pivot in sorted(core.nodes):
            posts, pe = eng.query(ev, pivot=pivot)
            results.append((posts, pe))
        base_posts, base_pe = results[0]
        for posts, pe in results[1:]:
            assert pe == pytest.approx(base_pe, rel=1e-9)
            for q in poly_b.ids:
                np.testing.assert_allclose(
                    posts[q].values, base_posts[q].values, atol=1e-9
                )

    def test_unnormalized_sum_is_event_prob(self, poly_b):
        ev = EvidenceSet(
            poly_b, {poly_b.id_of("L1"): {0}, poly_b.id_of("L10"): {1, 2}}
        )
        eng = PolytreeEngine(poly_b)
        s = eng.session(ev)
        pe = oracle_event_prob(poly_b, ev)
        for q in poly_b.ids:
            unnorm, _ = s.posterior(q)
            assert unnorm.total() == pytest.approx(pe, rel=1e-9)

    def test_parent_and_child_side_sets_disjoint(self, poly_b):
        # The sets above a node (through parents) and below it (through
        # children) share nothing; checked structurally on the fixture.
        eng = PolytreeEngine(poly_b)
        for v in poly_b.ids:
            above: set[int] = set()
            for p in poly_b.parents[v]:
                side = {
                    x
                    for x in eng.tree.component_of(p)
                    if v not in eng.tree.bfs_path(p, x)
                }
                above |= side
            below: set[int] = set()
            for c in poly_b.children(v):
                below |= {
                    x
                    for x in eng.tree.component_of(c)
                    if v not in eng.tree.bfs_path(c, x)
                }
            assert not (above & below)


def test_multi_component_polytree(rng):
    spec = [
        ("a", 2, []), ("b", 2, ["a"]),
        ("c", 2, []), ("d", 3, ["c"]), ("e", 2, ["c"]),
    ]
    bn = zoo.build_network(spec, rng)
    ev = EvidenceSet(bn, {bn.id_of("b"): {1}, bn.id_of("d"): {0}})
    posts, pe = polytree_query(bn, ev)
    assert pe == pytest.approx(oracle_event_prob(bn, ev), rel=1e-9)
    for q in bn.ids:
        np.testing.assert_allclose(
            posts[q].values, oracle_posterior(bn, ev, q), atol=1e-9
        )
