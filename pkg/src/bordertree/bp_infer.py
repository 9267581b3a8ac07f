"""Inference on a border polytree.

Prior marginals of every border are computed once, off line, in creation
order (parents always precede children).  A query session restricts those
priors and the stored cohort tables by the session's evidence, prunes the
polytree to its border evidential core, collects to a pivot border, and
answers each query by distributing from the informed set through a gate.
Messages are memoized by edge, direction and the evidence fingerprint of
the subtree behind them, so incremental evidence only recomputes the
messages whose side actually changed.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .bp_build import Border, BorderPolytree
from .errors import BordertreeError
from .factor import (
    Factor,
    divide,
    indicator,
    marginal_to,
    multiply,
    normalize,
    restrict,
    sum_out,
)
from .messaging import (
    Tree,
    collection_schedule,
    default_pivot,
    distribution_schedule,
    smallest_hitting_core,
)
from .network import NO_EVIDENCE


def preload_priors(bp: BorderPolytree) -> dict[int, Factor]:
    """Pr{border} for every border, by the evidence-free recursions."""
    priors: dict[int, Factor] = {}
    for b in bp.borders:
        if b.kind == "type1":
            if not b.parents:
                f = b.cohort_table
            else:
                f = multiply(b.cohort_table, priors[b.parents[0]])
                if b.promoted is not None:
                    f = sum_out(f, {b.promoted})
        else:
            f = Factor.scalar(1.0)
            for pid, kept in zip(b.parents, b.carried):
                f = multiply(f, marginal_to(priors[pid], kept))
        expected = tuple(sorted(b.members))
        if f.scope != expected:  # pragma: no cover - structural guarantee
            raise BordertreeError(f"prior scope {f.scope} != border {expected}")
        priors[b.id] = f
    bp.priors = priors
    return priors


class BorderSession:
    """One evidence set against a preloaded border polytree.

    ``store`` may be shared across sessions (the REPL does); it maps
    (parent, child, direction, fingerprint-of-the-side-behind-the-message)
    to factors, which realizes the incremental behavior: a message is
    recomputed only when the evidence on its side changed.
    """

    def __init__(
        self,
        bp: BorderPolytree,
        ev=NO_EVIDENCE,
        pivot: Optional[int] = None,
        store: Optional[dict] = None,
        use_division: Optional[bool] = False,
    ):
        if bp.priors is None:
            preload_priors(bp)
        self.bp = bp
        self.bn = bp.source
        self.ev = ev
        self.store = store if store is not None else {}
        self.use_division = use_division
        self.tree: Tree = bp.tree()
        self.sent = 0
        self.collected = 0
        self._side_vars_memo: dict[tuple[int, int], frozenset[int]] = {}
        self._side_core_memo: dict[tuple[int, int], bool] = {}
        self._pi_cache: dict[int, Factor] = {}
        self._lambda_cache: dict[int, Factor] = {}
        self._hfull_cache: dict[int, Factor] = {}

        self.core_nodes: set[int] = set()
        self.cores: dict[int, object] = {}
        self.pivots: dict[int, int] = {}
        self.informed: set[int] = set()

        groups_by_comp: dict[int, list[set[int]]] = {}
        first_var_homes: dict[int, set[int]] = {}
        for v in ev.vars:
            homes = set(bp.variable_home[v])
            comp = min(self.tree.component_of(next(iter(homes))))
            groups_by_comp.setdefault(comp, []).append(homes)
            first_var_homes.setdefault(comp, homes)
        for comp, groups in sorted(groups_by_comp.items()):
            if pivot is not None and pivot in self.tree.component_of(
                next(iter(groups[0]))
            ):
                groups = groups + [{pivot}]
            core = smallest_hitting_core(self.tree, groups)
            if pivot is not None and pivot in core.nodes:
                pv = pivot
            else:
                pv = default_pivot(core, holding=first_var_homes[comp] & core.nodes)
            self.cores[comp] = core
            self.core_nodes |= core.nodes
            self.pivots[comp] = pv
        for comp in sorted(self.cores):
            core = self.cores[comp]
            pv = self.pivots[comp]
            for msg in collection_schedule(self.tree, core, pv):
                self._send(msg.source, msg.target)
                self.collected += 1
            self.informed.add(pv)

    # -- geometry ------------------------------------------------------------

    def _side_vars(self, a: int, b: int) -> frozenset[int]:
        """Variables living on a's side of edge (a, b)."""
        key = (a, b)
        if key not in self._side_vars_memo:
            seen = {a}
            stack = [a]
            while stack:
                v = stack.pop()
                for u in self.tree.neighbors(v):
                    if (v, u) in ((a, b), (b, a)) or u in seen:
                        continue
                    seen.add(u)
                    stack.append(u)
            out: set[int] = set()
            for bid in seen:
                out |= self.bp.borders[bid].members
            self._side_vars_memo[key] = frozenset(out)
            self._side_core_memo[key] = bool(seen & self.core_nodes)
        return self._side_vars_memo[key]

    def _side_has_core(self, a: int, b: int) -> bool:
        self._side_vars(a, b)
        return self._side_core_memo[(a, b)]

    # -- restricted tables ------------------------------------------------------

    def _prior_r(self, bid: int) -> Factor:
        return restrict(self.bp.priors[bid], self.ev)

    def _phi_r(self, b: Border) -> Factor:
        return restrict(b.cohort_table, self.ev)

    def _indicator(self, bid: int) -> Factor:
        members = sorted(self.bp.borders[bid].members)
        return indicator(members, [self.bn.card(v) for v in members], self.ev)

    # -- border beliefs -----------------------------------------------------------

    def pi_border(self, bid: int) -> Factor:
        f = self._pi_cache.get(bid)
        if f is not None:
            return f
        b = self.bp.borders[bid]
        if b.kind == "type1":
            if not b.parents:
                f = self._prior_r(bid)
            else:
                f = multiply(self._phi_r(b), self.get_pi_edge(b.parents[0], bid))
                if b.promoted is not None:
                    f = sum_out(f, {b.promoted})
        else:
            f = Factor.scalar(1.0)
            for pid, kept in zip(b.parents, b.carried):
                f = multiply(f, marginal_to(self.get_pi_edge(pid, bid), kept))
        self._pi_cache[bid] = f
        return f

    def lambda_border(self, bid: int) -> Factor:
        f = self._lambda_cache.get(bid)
        if f is not None:
            return f
        f = self._indicator(bid)
        for c in self.tree.children[bid]:
            f = multiply(f, self.get_lambda_edge(bid, c))
        self._lambda_cache[bid] = f
        return f

    # -- edge messages ----------------------------------------------------------

    def _store_key(self, p: int, c: int, direction: str):
        if direction == "pi":
            # A downward message depends only on evidence over the parent
            # side (the parent border belongs to its own side).
            side = self._side_vars(p, c)
        else:
            # An upward message additionally restricts the reduced cohort
            # table over the receiving border's variables, so evidence on
            # them is part of the message even when they sit outside the
            # child side.
            side = self._side_vars(c, p) | self.bp.borders[p].members
        return (p, c, direction, self.ev.fingerprint(side))

    def get_pi_edge(self, p: int, c: int) -> Factor:
        key = self._store_key(p, c, "pi")
        msg = self.store.get(key)
        if msg is not None:
            return msg
        if self._side_has_core(p, c):
            raise BordertreeError(
                f"missing prerequisite downward message {p}->{c}"
            )  # pragma: no cover - schedules provide prerequisites
        # Boundary: an outside parent contributes its restricted prior; any
        # evidence on that side is confined to the shared variables.
        return self._prior_r(p)

    def _peek_pi_edge(self, p: int, c: int) -> Optional[Factor]:
        """Stored or boundary downward message, None if not yet available."""
        msg = self.store.get(self._store_key(p, c, "pi"))
        if msg is not None:
            return msg
        if self._side_has_core(p, c):
            return None
        return self._prior_r(p)

    def get_lambda_edge(self, p: int, c: int) -> Factor:
        key = self._store_key(p, c, "lambda")
        msg = self.store.get(key)
        if msg is not None:
            return msg
        if self._side_has_core(c, p):
            raise BordertreeError(
                f"missing prerequisite upward message {c}->{p}"
            )  # pragma: no cover
        return self._indicator(p)

    def compute_pi_edge(self, p: int, c: int, lam_hint: Optional[Factor] = None) -> Factor:
        f = self.pi_border(p)
        if lam_hint is not None:
            f = multiply(f, lam_hint)
        else:
            for w in self.tree.children[p]:
                if w != c:
                    f = multiply(f, self.get_lambda_edge(p, w))
        self.store[self._store_key(p, c, "pi")] = f
        return f

    def compute_lambda_edge(self, p: int, c: int) -> Factor:
        """Message the child border c sends up to its parent p."""
        b = self.bp.borders[c]
        lam = self.lambda_border(c)
        if b.kind == "type1":
            f = multiply(self._phi_r(b), lam)
            f = sum_out(f, b.cohort) if b.cohort else f
        else:
            f = self._junction_lambda(b, p, lam)
        self.store[self._store_key(p, c, "lambda")] = f
        return f

    def _junction_lambda(self, b: Border, p: int, lam: Factor) -> Factor:
        """Upward message of a junction border toward parent p.

        Default: nested single-parent sums (multiply one parent message,
        marginalize it away, repeat).  With division enabled, the product of
        all parent messages is built once per border and each parent's
        share is divided back out; entries equal the nested form wherever
        the divisor is strictly positive.
        """
        division = self.use_division
        if division is None or division:
            own = self._peek_pi_edge(p, b.id)
            if own is not None and own.values.size and float(own.values.min()) > 0.0:
                full = self._hfull_cache.get(b.id)
                if full is None:
                    full = lam
                    for pid in b.parents:
                        full = multiply(full, self.get_pi_edge(pid, b.id))
                    self._hfull_cache[b.id] = full
                f = divide(full, own)
                drop = set(f.scope) - self.bp.borders[p].members
                return sum_out(f, drop) if drop else f
            if division:
                raise ZeroDivisionError(
                    "division shortcut needs a strictly positive parent message"
                )
        f = lam
        for pid in b.parents:
            if pid == p:
                continue
            f = multiply(f, self.get_pi_edge(pid, b.id))
            f = sum_out(f, self.bp.borders[pid].members & set(f.scope))
        return f

    def _send(self, src: int, dst: int):
        key = (
            self._store_key(src, dst, "pi")
            if self.tree.has_edge(src, dst)
            else self._store_key(dst, src, "lambda")
        )
        if key in self.store:
            return
        if self.tree.has_edge(src, dst):
            self.compute_pi_edge(src, dst)
        else:
            self.compute_lambda_edge(dst, src)
        self.sent += 1

    # -- queries ---------------------------------------------------------------

    def ensure_informed(self, bid: int):
        comp_nodes = self.tree.component_of(bid)
        informed = self.informed & comp_nodes
        if bid in informed:
            return
        if not informed:
            return  # evidence-free component: all messages are vacuous
        _gate, sched = distribution_schedule(self.tree, informed, bid)
        for msg in sched:
            self._send(msg.source, msg.target)
            self.informed.add(msg.target)
        self.informed.add(bid)

    def border_product(self, bid: int) -> Factor:
        return multiply(self.pi_border(bid), self.lambda_border(bid))

    def posterior(self, var: int, home: Optional[int] = None) -> tuple[Factor, Factor]:
        if home is None:
            home = self.bp.home_border(var)
        elif var not in self.bp.borders[home].members:
            raise KeyError(f"variable {var} not in border {home}")
        self.ensure_informed(home)
        unnorm = marginal_to(self.border_product(home), {var})
        post, _ = normalize(unnorm)
        return unnorm, post

    def evidence_prob(self) -> float:
        out = 1.0
        for comp, pv in self.pivots.items():
            out *= self.border_product(pv).total()
        return out


def bp_query(
    bp: BorderPolytree,
    ev=NO_EVIDENCE,
    queries: Optional[Iterable[int]] = None,
    pivot: Optional[int] = None,
    store: Optional[dict] = None,
) -> tuple[dict[int, Factor], float]:
    """Posterior marginals (normalized factors) and the evidence probability."""
    session = BorderSession(bp, ev, pivot=pivot, store=store)
    if queries is None:
        queries = list(bp.source.ids)
    posteriors = {q: session.posterior(q)[1] for q in queries}
    return posteriors, session.evidence_prob()


def asynchronous_sweep(
    bp: BorderPolytree,
    ev=NO_EVIDENCE,
    pivot: Optional[int] = None,
    use_division: Optional[bool] = None,
) -> tuple[dict[int, Factor], float]:
    """Inform every border (messages fanned out without a goal), then read a
    posterior for every variable off its first home border.

    When a border has several children, the product of all their upward
    messages is reused per child by division when the divisor is strictly
    positive (``use_division``: None = auto, False = always re-multiply).
    """
    session = BorderSession(bp, ev, pivot=pivot, use_division=use_division)
    tree = session.tree

    def lam_for_child(bid: int, child: int, lam_full: Factor) -> Factor:
        division = session.use_division
        if division is None or division:
            child_msg = session.get_lambda_edge(bid, child)
            try:
                return divide(lam_full, child_msg)
            except ZeroDivisionError:
                if division:
                    raise
        f = session._indicator(bid)
        for w in tree.children[bid]:
            if w != child:
                f = multiply(f, session.get_lambda_edge(bid, w))
        return f

    for comp in sorted({min(tree.component_of(b.id)) for b in bp.borders}):
        start = session.pivots.get(comp, comp)
        seen = {start}
        queue = [start]
        while queue:
            v = queue.pop(0)
            session.informed.add(v)
            lam_full = session.lambda_border(v)
            for u in sorted(tree.neighbors(v)):
                if u in seen:
                    continue
                seen.add(u)
                if tree.has_edge(v, u):
                    key = session._store_key(v, u, "pi")
                    if key not in session.store:
                        session.compute_pi_edge(v, u, lam_hint=lam_for_child(v, u, lam_full))
                        session.sent += 1
                else:
                    session._send(v, u)
                queue.append(u)

    posteriors = {}
    for v in bp.source.ids:
        _, post = session.posterior(v)
        posteriors[v] = post
    return posteriors, session.evidence_prob()
