"""Stage I (macro-node polytrees) and Stage II (border polytrees)."""

import numpy as np

from bordertree.bp_build import (
    Border,
    BorderPolytree,
    aggregation_closure,
    border_polytree_from_chain,
    build_border_polytree,
    stage1,
    stage2,
    verify_bp,
    verify_macro_polytree,
)
from bordertree.border_chain import build_chain
from bordertree.randgen import random_dag, random_polytree
from bordertree import zoo


def group_names(bn, mp):
    return {tuple(bn.names(g)) for g in mp.groups}


def errors(bp):
    return [d for d in verify_bp(bp) if d.severity == "error"]


class TestAggregationClosure:
    def test_absorbs_path_interiors(self, bn_a):
        seed = {bn_a.id_of("A"), bn_a.id_of("H")}
        got = aggregation_closure(bn_a, seed)
        assert set(bn_a.names(got)) == {"A", "C", "D", "H"}

    def test_closed_seed_unchanged(self, bn_a):
        seed = frozenset({bn_a.id_of("J"), bn_a.id_of("K")})
        assert aggregation_closure(bn_a, seed) == seed

    def test_quotient_stays_acyclic(self, rng):
        for _ in range(25):
            bn = random_dag(rng, 4, 10, 2)
            vs = sorted(
                int(v) for v in rng.choice(len(bn), size=min(3, len(bn)), replace=False)
            )
            closed = aggregation_closure(bn, vs)
            # contract `closed` to one node and look for a directed cycle
            rep = {v: (-1 if v in closed else v) for v in bn.ids}
            edges = {
                (rep[p], rep[v])
                for v in bn.ids
                for p in bn.parents[v]
                if rep[p] != rep[v]
            }
            nodes = set(rep.values())
            indeg = {n: 0 for n in nodes}
            for _, b in edges:
                indeg[b] += 1
            ready = [n for n in nodes if indeg[n] == 0]
            seen = 0
            while ready:
                n = ready.pop()
                seen += 1
                for a, b in edges:
                    if a == n:
                        indeg[b] -= 1
                        if indeg[b] == 0:
                            ready.append(b)
            assert seen == len(nodes)


class TestStage1:
    def test_bn_c_partition(self, bn_c):
        mp = stage1(bn_c)
        got = group_names(bn_c, mp)
        assert ("M", "N", "Q", "S", "U", "V") in got  # the big upstream macro
        assert ("P", "D", "F", "H", "O") in got  # the downstream macro
        assert ("B", "C") in got and ("X", "Y") in got
        singles = {g for g in got if len(g) == 1}
        assert singles == {("A",), ("G",), ("K",), ("L",), ("R",), ("T",), ("Z",), ("I",), ("J",)}
        assert verify_macro_polytree(mp) == []

    def test_polytree_input_gives_singletons(self, rng):
        for _ in range(10):
            bn = random_polytree(rng, 4, 10, 3)
            mp = stage1(bn)
            assert all(len(g) == 1 for g in mp.groups)
            assert verify_macro_polytree(mp) == []

    def test_bn_a_partition_is_sound(self, bn_a):
        mp = stage1(bn_a)
        assert verify_macro_polytree(mp) == []
        # contracting each macro leaves a forest
        assert len(mp.edges) == len(mp.groups) - 1  # BN A is connected

    def test_random_dags_invariants(self, rng):
        for _ in range(60):
            bn = random_dag(rng, 3, 12, 3)
            mp = stage1(bn)
            assert verify_macro_polytree(mp) == []


class TestStage2:
    def test_bn_c_critical_borders(self, bn_c, bp_c):
        borders = {frozenset(bn_c.names(b.members)) for b in bp_c.borders}
        for expect in [
            {"N", "P", "Q"},
            {"N", "P"},
            {"B", "C", "G", "N", "P"},
            {"B", "C", "G", "O", "P"},
            {"B", "C", "O", "P"},
            {"B", "F", "O", "P"},
            {"M", "N", "Q"},
            {"M", "N", "U", "V"},
        ]:
            assert frozenset(expect) in borders, expect

    def test_bn_c_junction_structure(self, bn_c, bp_c):
        # The junction border {B,C,G,N,P} carries {N,P} from its own chain
        # plus the interfaces {B,C} and {G}, then N is promoted with cohort O.
        junction = next(
            b
            for b in bp_c.borders
            if b.members == frozenset(bn_c.id_of(n) for n in "BCGNP")
        )
        assert junction.kind == "type2"
        carried = {frozenset(bn_c.names(s)) for s in junction.carried}
        assert carried == {
            frozenset({"N", "P"}),
            frozenset({"B", "C"}),
            frozenset({"G"}),
        }
        child = next(
            b for b in bp_c.borders if b.parents and b.parents[0] == junction.id
        )
        assert child.kind == "type1"
        assert bn_c.name_of(child.promoted) == "N"
        assert bn_c.names(child.cohort) == ("O",)
        assert child.cohort_table.scope == tuple(
            sorted(bn_c.id_of(n) for n in "CGNO")
        )

    def test_bn_c_chain_start_continues_from_interface(self, bn_c, bp_c):
        # The downstream macro starts from the recorded interface border
        # {M,N,Q} of the upstream macro: one cross-macro type-1 edge.
        first = next(
            b
            for b in bp_c.borders
            if b.members == frozenset(bn_c.id_of(n) for n in "NPQ")
        )
        assert first.kind == "type1"
        assert bn_c.name_of(first.promoted) == "M"
        parent = bp_c.borders[first.parents[0]]
        assert parent.members == frozenset(bn_c.id_of(n) for n in "MNQ")
        assert parent.owner != first.owner

    def test_single_variable_macro_single_border(self, rng):
        bn = zoo.build_network([("solo", 3, [])], rng)
        bp = build_border_polytree(bn)
        assert len(bp.borders) == 1
        assert bp.borders[0].members == {0}
        assert not errors(bp)

    def test_rule10_no_recruiting_into_child_macro(self, bn_c, bp_c):
        mp = bp_c.macro
        for b in bp_c.borders:
            if b.kind != "type1":
                continue
            for v in b.cohort:
                assert mp.membership[v] == b.owner or not bn_c.parents[v]


class TestVerifyBp:
    def test_bn_c_passes(self, bp_c):
        assert not errors(bp_c)

    def test_dyspnoea_shape(self):
        bn = zoo.dyspnoea_shaped()
        bp = build_border_polytree(bn)
        assert verify_macro_polytree(bp.macro) == []
        assert not errors(bp)
        bp.tree()  # singly connected (raises otherwise)

    def test_re_recruited_variable_flagged(self, bn_a):
        chain = build_chain(bn_a)
        bp = border_polytree_from_chain(chain)
        assert not errors(bp)
        # Re-recruit variable 0 into a fresh border after its promotion.
        members = frozenset({0}) | bp.borders[-1].members
        bad = bp.borders + [
            Border(
                id=len(bp.borders),
                members=members,
                kind="type1",
                owner=0,
                parents=(len(bp.borders) - 1,),
                promoted=None,
                cohort=frozenset({0}),
                cohort_table=bn_a.cpts[0],
            )
        ]
        broken = BorderPolytree(bad, bn_a, bp.macro)
        codes = {d.code for d in errors(broken)}
        assert "running-intersection" in codes

    def test_fuzz_stage1_stage2(self, rng):
        for _ in range(100):
            bn = random_dag(rng, 3, 12, 3)
            mp = stage1(bn)
            assert verify_macro_polytree(mp) == []
            bp = stage2(mp)
            assert not errors(bp)


def test_chain_view_is_valid_bp(bn_a):
    chain = build_chain(bn_a)
    bp = border_polytree_from_chain(chain)
    assert not errors(bp)
    assert len(bp.borders) == chain.gamma + 1
