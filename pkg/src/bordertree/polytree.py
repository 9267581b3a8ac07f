"""Message passing on networks that are already singly connected.

Directional messages live on edges: the downward message a parent sends its
child summarizes everything on the parent side of the edge, the upward
message a child sends its parent summarizes the child side.  Collection
pulls messages through the evidential core to a pivot; distribution walks
from the informed set out to each query.  Messages from outside the core
are never computed: an outside parent contributes its preloaded prior and
an outside child an indicator.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .errors import BordertreeError, NotSinglyConnectedError
from .factor import Factor, indicator, multiply, normalize, restrict, sum_out
from .messaging import (
    HubIndex,
    Tree,
    build_hub_index,
    collection_schedule,
    default_pivot,
    distribution_schedule,
    evidential_core,
    tree_path,
)
from .network import NO_EVIDENCE, BayesianNetwork


def node_priors(bn: BayesianNetwork) -> dict[int, Factor]:
    """Per-node prior marginals; in a polytree the parents of each node are
    mutually independent, so one topological sweep suffices."""
    priors: dict[int, Factor] = {}
    for v in bn.topological_order():
        f = bn.cpts[v]
        for p in bn.parents[v]:
            f = multiply(f, priors[p])
        priors[v] = sum_out(f, bn.parents[v]) if bn.parents[v] else f
    return priors


class PolytreeEngine:
    def __init__(self, bn: BayesianNetwork, hubs: Optional[Iterable[int]] = None):
        if not bn.is_singly_connected():
            raise NotSinglyConnectedError(
                "network has an undirected loop; use the border polytree engine"
            )
        self.bn = bn
        self.tree = Tree(
            bn.ids, [(p, v) for v in bn.ids for p in bn.parents[v]]
        )
        self.hub_index: HubIndex = build_hub_index(self.tree, hubs)
        self.priors = node_priors(bn)

    def path(self, x: int, y: int) -> list[int]:
        return tree_path(self.tree, self.hub_index, x, y)

    def session(self, ev=NO_EVIDENCE, pivot: Optional[int] = None) -> "PolytreeSession":
        return PolytreeSession(self, ev, pivot)

    def query(
        self, ev=NO_EVIDENCE, queries: Optional[Iterable[int]] = None, pivot=None
    ) -> tuple[dict[int, Factor], float]:
        session = self.session(ev, pivot)
        if queries is None:
            queries = list(self.bn.ids)
        posteriors = {q: session.posterior(q)[1] for q in queries}
        return posteriors, session.evidence_prob()


class PolytreeSession:
    def __init__(self, engine: PolytreeEngine, ev, pivot: Optional[int] = None):
        self.e = engine
        self.bn = engine.bn
        self.ev = ev
        self.pi_edge: dict[tuple[int, int], Factor] = {}
        self.lambda_edge: dict[tuple[int, int], Factor] = {}
        self.collected = 0
        self.distributed = 0
        self._side_memo: dict[tuple[int, int], bool] = {}
        self.cores: dict[int, "object"] = {}
        self.pivots: dict[int, int] = {}
        self.informed: set[int] = set()
        ev_vars = list(ev.vars)
        by_comp: dict[int, list[int]] = {}
        for v in ev_vars:
            comp = min(engine.tree.component_of(v))
            by_comp.setdefault(comp, []).append(v)
        for comp, marked in sorted(by_comp.items()):
            core = evidential_core(engine.tree, marked)
            if pivot is not None and pivot in core.nodes:
                pv = pivot
            else:
                pv = default_pivot(core, holding={marked[0]})
            self.cores[comp] = core
            self.pivots[comp] = pv
            for msg in collection_schedule(engine.tree, core, pv):
                self._send(msg.source, msg.target)
                self.collected += 1
            self.informed.add(pv)

    # -- evidence geometry -------------------------------------------------

    def _side_has_evidence(self, a: int, b: int) -> bool:
        """Does the component of ``a`` in tree-minus-edge(a,b) hold evidence?"""
        key = (a, b)
        if key not in self._side_memo:
            seen = {a}
            stack = [a]
            hit = self.ev.allowed(a) is not None
            while stack and not hit:
                v = stack.pop()
                for u in self.e.tree.neighbors(v):
                    if (v, u) in ((a, b), (b, a)) or u in seen:
                        continue
                    seen.add(u)
                    if self.ev.allowed(u) is not None:
                        hit = True
                        break
                    stack.append(u)
            self._side_memo[key] = hit
        return self._side_memo[key]

    # -- message access ------------------------------------------------------

    def _pr_r(self, v: int) -> Factor:
        return restrict(self.bn.cpts[v], self.ev)

    def get_pi_edge(self, x: int, y: int) -> Factor:
        """Downward message along edge x->y (scope {x})."""
        msg = self.pi_edge.get((x, y))
        if msg is not None:
            return msg
        if self._side_has_evidence(x, y):
            raise BordertreeError(
                f"missing prerequisite downward message {x}->{y}"
            )  # pragma: no cover - schedules provide prerequisites
        return self.e.priors[x]

    def get_lambda_edge(self, x: int, y: int) -> Factor:
        """Upward message along edge x->y, sent by child y (scope {x})."""
        msg = self.lambda_edge.get((x, y))
        if msg is not None:
            return msg
        if self._side_has_evidence(y, x):
            raise BordertreeError(
                f"missing prerequisite upward message {y}->{x}"
            )  # pragma: no cover
        return indicator([x], [self.bn.card(x)], self.ev)

    def pi_node(self, v: int) -> Factor:
        f = self._pr_r(v)
        for p in self.bn.parents[v]:
            f = multiply(f, self.get_pi_edge(p, v))
        return sum_out(f, self.bn.parents[v]) if self.bn.parents[v] else f

    def lambda_node(self, v: int) -> Factor:
        f = indicator([v], [self.bn.card(v)], self.ev)
        for c in self.bn.children(v):
            f = multiply(f, self.get_lambda_edge(v, c))
        return f

    def compute_pi_edge(self, x: int, y: int) -> Factor:
        f = self.pi_node(x)
        for w in self.bn.children(x):
            if w != y:
                f = multiply(f, self.get_lambda_edge(x, w))
        self.pi_edge[(x, y)] = f
        return f

    def compute_lambda_edge(self, x: int, y: int) -> Factor:
        """Message y sends up to its parent x."""
        f = self._pr_r(y)
        others = [p for p in self.bn.parents[y] if p != x]
        for p in others:
            f = multiply(f, self.get_pi_edge(p, y))
        if others:
            f = sum_out(f, others)
        f = multiply(f, self.lambda_node(y))
        f = sum_out(f, {y})
        self.lambda_edge[(x, y)] = f
        return f

    def _send(self, src: int, dst: int):
        if self.e.tree.has_edge(src, dst):
            self.compute_pi_edge(src, dst)
        else:
            self.compute_lambda_edge(dst, src)

    # -- queries ---------------------------------------------------------------

    def ensure_informed(self, q: int):
        comp = min(self.e.tree.component_of(q))
        if comp not in self.cores:
            return  # evidence-free component: every message is vacuous
        informed = self.informed & self.e.tree.component_of(q)
        if q in informed:
            return
        _gate, sched = distribution_schedule(self.e.tree, informed, q)
        for msg in sched:
            self._send(msg.source, msg.target)
            self.distributed += 1
            self.informed.add(msg.target)
        self.informed.add(q)

    def posterior(self, q: int) -> tuple[Factor, Factor]:
        """(unnormalized Pr{q, [evidence]}, normalized posterior)."""
        self.ensure_informed(q)
        unnorm = multiply(self.pi_node(q), self.lambda_node(q))
        post, _ = normalize(unnorm)
        return unnorm, post

    def node_product(self, q: int) -> Factor:
        return multiply(self.pi_node(q), self.lambda_node(q))

    def evidence_prob(self) -> float:
        out = 1.0
        for comp, pv in self.pivots.items():
            out *= self.node_product(pv).total()
        return out


def polytree_query(
    bn: BayesianNetwork,
    ev=NO_EVIDENCE,
    queries: Optional[Iterable[int]] = None,
    pivot: Optional[int] = None,
) -> tuple[dict[int, Factor], float]:
    """Posterior marginals and the evidence probability for a polytree."""
    return PolytreeEngine(bn).query(ev, queries, pivot)
