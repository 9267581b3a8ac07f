"""Inference on border polytrees: priors, sessions, traces, sweeps."""

import numpy as np
import pytest

from bordertree.border_chain import build_chain, downward_pass
from bordertree.bnformat import parse_evidence
from bordertree.bp_build import border_polytree_from_chain, build_border_polytree
from bordertree.bp_infer import (
    BorderSession,
    asynchronous_sweep,
    bp_query,
    preload_priors,
)
from bordertree.network import EvidenceSet
from bordertree.oracle import oracle_event_prob, oracle_marginal, oracle_posterior
from bordertree.randgen import random_dag, random_evidence
from bordertree import zoo


def border_id(bp, bn, names):
    members = frozenset(bn.id_of(n) for n in names)
    return next(b.id for b in bp.borders if b.members == members)


class TestPreload:
    def test_root_border_is_product_of_root_priors(self, bn_c, bp_c):
        root = next(b for b in bp_c.borders if not b.parents)
        prior = bp_c.priors[root.id]
        want = oracle_marginal(bn_c, root.members)
        np.testing.assert_allclose(prior.values, want, atol=1e-12)

    def test_all_border_priors_match_oracle(self, bn_c, bp_c):
        for b in bp_c.borders:
            np.testing.assert_allclose(
                bp_c.priors[b.id].values,
                oracle_marginal(bn_c, b.members),
                atol=1e-9,
                err_msg=str(b.id),
            )

    def test_chain_view_priors_equal_downward_pass(self, bn_a):
        chain = build_chain(bn_a)
        bp = border_polytree_from_chain(chain)
        priors = preload_priors(bp)
        pi = downward_pass(chain)
        for j in range(chain.gamma + 1):
            assert priors[j].scope == pi[j].scope
            np.testing.assert_allclose(priors[j].values, pi[j].values, atol=1e-12)


class TestCollectionTraces:
    """The two message traces toward either pivot of the BN C evidential
    core for evidence on B, O and Q, checked against direct numpy
    evaluations of the same quantities built from the raw tables."""

    def _tables(self, bn_c):
        # file-convention arrays for the needed tables
        def t(name):
            v = bn_c.id_of(name)
            f = bn_c.cpts[v]
            file_axes = (*bn_c.parents[v], v)
            return f.values.transpose(tuple(f.scope.index(u) for u in file_axes))

        return t

    def test_pivot_bcgop_pi(self, bn_c, bp_c, ev_boq):
        piv = border_id(bp_c, bn_c, "BCGOP")
        s = BorderSession(bp_c, ev_boq, pivot=piv)
        got = s.pi_border(piv)
        assert got.scope == tuple(sorted(bn_c.id_of(n) for n in "BCGOP"))

        # Independent evaluation: sum_N Pr{O|C,G,N} I_O Pr{B,C} I_B Pr{G}
        # sum_Q Pr{N,P,Q} I_Q, on axes (B, C, G, O, P).
        i_b = np.array([1.0, 0.0])  # B=b0
        i_o = np.array([0.0, 1.0])  # O=o1
        i_q = np.array([1.0, 0.0])  # Q=q0
        pr_bc = oracle_marginal(bn_c, [bn_c.id_of("B"), bn_c.id_of("C")])
        pr_g = oracle_marginal(bn_c, [bn_c.id_of("G")])
        pr_npq = oracle_marginal(
            bn_c, [bn_c.id_of(n) for n in "NPQ"]
        )  # axes sorted by id: N, P, Q
        o_cpt = self._tables(bn_c)("O")  # axes (C, G, N, O)

        npq = (pr_npq * i_q[None, None, :]).sum(axis=2)  # (N, P)
        # factor axes follow ascending ids: (B, C, G, P, O)
        want = np.einsum(
            "cgno,bc,g,np,o,b->bcgpo", o_cpt, pr_bc, pr_g, npq, i_o, i_b
        )
        np.testing.assert_allclose(got.values, want, atol=1e-12)

        # Corollary: summing the pivot belief over everything but P gives
        # the same evidential joint as the other pivot's trace.
        prod = s.border_product(piv)
        p_var = bn_c.id_of("P")
        un = prod.values.sum(
            axis=tuple(k for k, v in enumerate(prod.scope) if v != p_var)
        )
        np.testing.assert_allclose(
            un, oracle_marginal(bn_c, [p_var], ev_boq), atol=1e-12
        )

    def test_pivot_npq_lambda(self, bn_c, bp_c, ev_boq):
        piv = border_id(bp_c, bn_c, "NPQ")
        s = BorderSession(bp_c, ev_boq, pivot=piv)
        lam = s.lambda_border(piv)

        # Lambda(N,P) = sum_{B,C,G} Pr{B,C} I_B Pr{G} sum_O Pr{O|C,G,N} I_O,
        # constant over P and Q.
        i_b = np.array([1.0, 0.0])
        i_o = np.array([0.0, 1.0])
        pr_bc = oracle_marginal(bn_c, [bn_c.id_of("B"), bn_c.id_of("C")])
        pr_g = oracle_marginal(bn_c, [bn_c.id_of("G")])
        o_cpt = self._tables(bn_c)("O")
        want_n = np.einsum("cgno,bc,g,o,b->n", o_cpt, pr_bc, pr_g, i_o, i_b)

        n_var, q_var = bn_c.id_of("N"), bn_c.id_of("Q")
        assert n_var in lam.scope
        i_qv = np.array([1.0, 0.0])
        # reduce lam to (N,) by picking Q=q0 and any P value
        vals = lam.values
        for axis, v in reversed(list(enumerate(lam.scope))):
            if v == n_var:
                continue
            vals = vals.take(0 if v != q_var else 0, axis=axis)
        np.testing.assert_allclose(vals, want_n, atol=1e-12)

    def test_boundary_outside_evidential_parent(self, bn_c, bp_c, ev_boq):
        # {B,C} is outside the core yet evidential; its boundary message is
        # the restricted prior Pr{B,C} I_B.
        piv = border_id(bp_c, bn_c, "BCGOP")
        s = BorderSession(bp_c, ev_boq, pivot=piv)
        bc = border_id(bp_c, bn_c, "BC")
        junction = border_id(bp_c, bn_c, "BCGNP")
        msg = s.get_pi_edge(bc, junction)
        want = oracle_marginal(bn_c, [bn_c.id_of("B"), bn_c.id_of("C")]) * np.array(
            [1.0, 0.0]
        )[:, None]
        np.testing.assert_allclose(msg.values, want, atol=1e-12)

    def test_boundary_non_evidential_parent_is_plain_prior(self, bn_c, bp_c):
        ev = parse_evidence("O=o1", bn_c)
        s = BorderSession(bp_c, ev)
        g = border_id(bp_c, bn_c, "G")
        junction = border_id(bp_c, bn_c, "BCGNP")
        msg = s.get_pi_edge(g, junction)
        np.testing.assert_allclose(
            msg.values, oracle_marginal(bn_c, [bn_c.id_of("G")]), atol=1e-12
        )


class TestQueries:
    def test_pivot_independence_and_oracle(self, bn_c, bp_c, ev_boq):
        p = bn_c.id_of("P")
        piv1 = border_id(bp_c, bn_c, "BCGOP")
        piv2 = border_id(bp_c, bn_c, "NPQ")
        s1 = BorderSession(bp_c, ev_boq, pivot=piv1)
        s2 = BorderSession(bp_c, ev_boq, pivot=piv2)
        _, post1 = s1.posterior(p)
        _, post2 = s2.posterior(p)
        np.testing.assert_allclose(post1.values, post2.values, rtol=1e-12, atol=0)
        np.testing.assert_allclose(
            post1.values, oracle_posterior(bn_c, ev_boq, p), atol=1e-9
        )

    def test_collection_counts(self, bn_c, bp_c, ev_boq):
        piv1 = border_id(bp_c, bn_c, "BCGOP")
        piv2 = border_id(bp_c, bn_c, "NPQ")
        for piv in (piv1, piv2):
            s = BorderSession(bp_c, ev_boq, pivot=piv)
            assert len(s.core_nodes) == 4
            assert s.sent == s.collected == 3
        s = BorderSession(bp_c, parse_evidence("N=n1", bn_c), pivot=piv2)
        assert s.sent == s.collected == 0
        assert s.core_nodes == {piv2}

    def test_outside_queries_through_gates(self, bn_c, bp_c, ev_boq):
        for pivot_names in ("BCGOP", "NPQ"):
            s = BorderSession(bp_c, ev_boq, pivot=border_id(bp_c, bn_c, pivot_names))
            for name in ("M", "F"):
                q = bn_c.id_of(name)
                _, post = s.posterior(q)
                np.testing.assert_allclose(
                    post.values, oracle_posterior(bn_c, ev_boq, q), atol=1e-9
                )

    def test_distribution_counts_are_tree_distances(self, bn_c, bp_c, ev_boq):
        piv = border_id(bp_c, bn_c, "NPQ")
        s = BorderSession(bp_c, ev_boq, pivot=piv)
        tree = s.tree
        s.posterior(bn_c.id_of("M"))
        home = bp_c.home_border(bn_c.id_of("M"))
        baseline = len(tree.bfs_path(piv, home)) - 1
        assert s.sent == s.collected + baseline

    def test_evidence_prob_identical_at_informed_borders(self, bn_c, bp_c, ev_boq):
        s = BorderSession(bp_c, ev_boq)
        pe = oracle_event_prob(bn_c, ev_boq)
        for q in bn_c.ids:
            s.posterior(q)
        for bid in sorted(s.informed):
            assert s.border_product(bid).total() == pytest.approx(pe, rel=1e-9)

    def test_posterior_agrees_across_home_borders(self, bn_c, bp_c, ev_boq):
        s = BorderSession(bp_c, ev_boq)
        for v in bn_c.ids:
            homes = bp_c.variable_home[v]
            results = []
            for h in homes:
                _, post = s.posterior(v, home=h)
                results.append(post.values)
            for r in results[1:]:
                np.testing.assert_allclose(r, results[0], atol=1e-9)

    def test_no_evidence_queries_give_priors(self, bn_c, bp_c):
        posts, pe = bp_query(bp_c, EvidenceSet(bn_c))
        assert pe == pytest.approx(1.0)
        for q in bn_c.ids:
            np.testing.assert_allclose(
                posts[q].values, oracle_posterior(bn_c, EvidenceSet(bn_c), q), atol=1e-9
            )

    def test_chain_consistency(self, bn_a, ev_hk):
        # A BP whose polytree is one chain reproduces the chain engine.
        from bordertree.border_chain import chain_posterior, run_passes

        chain = build_chain(bn_a)
        bp = border_polytree_from_chain(chain)
        preload_priors(bp)
        passes = run_passes(chain, ev_hk)
        posts, pe = bp_query(bp, ev_hk)
        for q in bn_a.ids:
            _, want, want_pe = chain_posterior(chain, ev_hk, q, passes=passes)
            np.testing.assert_allclose(posts[q].values, want.values, atol=1e-12)
            assert pe == pytest.approx(want_pe, rel=1e-12)


class TestSweep:
    def test_equals_per_query(self, bn_c, bp_c, ev_boq):
        sweep, pe_sweep = asynchronous_sweep(bp_c, ev_boq)
        posts, pe = bp_query(bp_c, ev_boq)
        assert pe_sweep == pytest.approx(pe, rel=1e-12)
        for q in bn_c.ids:
            np.testing.assert_allclose(
                sweep[q].values, posts[q].values, atol=1e-12
            )

    def test_division_matches_fallback(self, bn_c, bp_c, ev_boq):
        with_div, _ = asynchronous_sweep(bp_c, ev_boq, use_division=None)
        without, _ = asynchronous_sweep(bp_c, ev_boq, use_division=False)
        for q in bn_c.ids:
            np.testing.assert_allclose(
                with_div[q].values, without[q].values, rtol=1e-12, atol=0
            )

    def test_no_evidence_sweep_gives_priors(self, bn_c, bp_c):
        sweep, pe = asynchronous_sweep(bp_c, EvidenceSet(bn_c))
        assert pe == pytest.approx(1.0)
        for q in bn_c.ids:
            np.testing.assert_allclose(
                sweep[q].values, oracle_marginal(bn_c, [q]), atol=1e-9
            )


class TestIncrementalStore:
    def test_shared_store_reuses_messages(self, bn_c, bp_c):
        store: dict = {}
        ev1 = parse_evidence("Q=q0", bn_c)
        s1 = BorderSession(bp_c, ev1, store=store)
        first = s1.sent
        # Same evidence again: all scheduled messages hit the cache.
        s2 = BorderSession(bp_c, ev1, store=store)
        assert s2.sent == 0
        # Adding evidence away from Q's side recomputes only new-side
        # messages.
        ev2 = parse_evidence("Q=q0,B=b0", bn_c)
        s3 = BorderSession(bp_c, ev2, store=store)
        assert 0 < s3.sent
        total = len(store)
        s4 = BorderSession(bp_c, ev2, store=store)
        assert s4.sent == 0 and len(store) == total

    def test_store_keys_cover_shared_variable_evidence(self, rng):
        # Upward messages restrict the cohort table over the receiving
        # border's variables; evidence there must be part of the cache key
        # (a chain v0 -> v1 -> v2 exposed this: evidence on v1 changed the
        # v2->v1 message even though v1 is not on the child side).
        bn = zoo.build_network(
            [("v0", 2, []), ("v1", 2, ["v0"]), ("v2", 3, ["v1"])], rng
        )
        bp = build_border_polytree(bn)
        preload_priors(bp)
        store: dict = {}
        sequences = [
            "v0=v00,v1=v10,v2=v22",
            "v0=v00,v2=v20|v22",
            "v0=v00,v1=v10",
            "v0=v00,v1=v11,v2=v22",
        ]
        for text in sequences:
            ev = parse_evidence(text, bn)
            posts, pe = bp_query(bp, ev, store=store)
            assert pe == pytest.approx(oracle_event_prob(bn, ev), rel=1e-9)
            for q in bn.ids:
                np.testing.assert_allclose(
                    posts[q].values, oracle_posterior(bn, ev, q), atol=1e-9
                )

    def test_shared_store_random_evidence_sequences(self, rng):
        for _ in range(8):
            bn = random_dag(rng, 3, 9, 3)
            bp = build_border_polytree(bn)
            preload_priors(bp)
            store: dict = {}
            for _ in range(5):
                ev = random_evidence(rng, bn, max_vars=4)
                posts, pe = bp_query(bp, ev, store=store)
                assert pe == pytest.approx(oracle_event_prob(bn, ev), rel=1e-9)
                for q in bn.ids:
                    np.testing.assert_allclose(
                        posts[q].values, oracle_posterior(bn, ev, q), atol=1e-9
                    )

    def test_impossible_evidence_detected(self):
        bn = zoo.build_network(
            [("A", 2, []), ("B", 2, ["A"])],
            cpts={"A": np.array([1.0, 0.0]), "B": np.array([[1.0, 0.0], [0.5, 0.5]])},
        )
        bp = build_border_polytree(bn)
        preload_priors(bp)
        ev = EvidenceSet(bn, {bn.id_of("B"): {1}})
        from bordertree.errors import ImpossibleEvidenceError

        with pytest.raises(ImpossibleEvidenceError):
            bp_query(bp, ev)


def test_random_dags_bp_vs_oracle(rng):
    for _ in range(25):
        bn = random_dag(rng, 3, 11, 3)
        bp = build_border_polytree(bn)
        preload_priors(bp)
        ev = random_evidence(rng, bn)
        posts, pe = bp_query(bp, ev)
        assert pe == pytest.approx(oracle_event_prob(bn, ev), rel=1e-9)
        for q in bn.ids:
            np.testing.assert_allclose(
                posts[q].values, oracle_posterior(bn, ev, q), atol=1e-9
            )


def test_disconnected_network(rng):
    spec = [
        ("a", 2, []), ("b", 2, ["a"]), ("c", 2, ["a", "b"]),
        ("x", 2, []), ("y", 3, ["x"]),
    ]
    bn = zoo.build_network(spec, rng)
    bp = build_border_polytree(bn)
    preload_priors(bp)
    ev = EvidenceSet(bn, {bn.id_of("c"): {1}, bn.id_of("y"): {0, 2}})
    posts, pe = bp_query(bp, ev)
    assert pe == pytest.approx(oracle_event_prob(bn, ev), rel=1e-9)
    for q in bn.ids:
        np.testing.assert_allclose(
            posts[q].values, oracle_posterior(bn, ev, q), atol=1e-9
        )
