"""Border chains: grow a parentless set, then run two evidential passes.

A chain step promotes one border variable (or a fictitious placeholder)
and recruits its cohort of bottom variables; the cohort table is the
product of the recruited CPTs.  The downward pass pushes evidence-weighted
mass border by border toward the last border, the upward pass pulls
likelihoods back toward the first, and any border containing the query
yields the same posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

from .errors import BordertreeError
from .factor import Factor, indicator, marginal_to, multiply, normalize, product_all, restrict, sum_out
from .network import NO_EVIDENCE, BayesianNetwork


@dataclass(frozen=True)
class ChainStep:
    index: int
    promoted: Optional[int]  # None encodes the fictitious promotion
    cohort: frozenset[int]
    border: frozenset[int]
    cohort_table: Factor
    rule: Optional[int]  # None at step 0


@dataclass
class BorderChain:
    steps: list[ChainStep]
    source: BayesianNetwork

    @property
    def gamma(self) -> int:
        return len(self.steps) - 1

    def border(self, j: int) -> frozenset[int]:
        return self.steps[j].border

    def home_step(self, var: int) -> int:
        """Lowest j with var in border j."""
        for step in self.steps:
            if var in step.border:
                return step.index
        raise KeyError(var)


@dataclass
class PassResult:
    pi: list[Factor]
    lam: list[Factor]
    alpha: Optional[int]  # first step recruiting an evidence variable
    beta: Optional[int]  # last such step


# -- initial border -----------------------------------------------------


def _ancestral_roots(bn: BayesianNetwork, var: int) -> frozenset[int]:
    anc = bn.ancestors(var)
    return frozenset(v for v in anc if not bn.parents[v]) or frozenset({var})


def initial_border(bn: BayesianNetwork) -> frozenset[int]:
    """A set of roots to start the chain, co-parentless whenever one exists.

    Climbs from each root in turn: absorb root co-parents, jump to the
    ancestral roots of a non-root co-parent, stop when co-parentless.  If
    every climb cycles, small root sets are searched exhaustively; some DAGs
    have no co-parentless set of roots at all, and then the full root set is
    returned (any set of roots is parentless, so the chain still works, the
    early promotions just fall to the fictitious rules).
    """
    roots = frozenset(bn.roots())
    if not roots:
        bn.topological_order()  # raises CycleError with a useful message
    for start in sorted(roots):
        current = frozenset({start})
        seen: set[frozenset[int]] = set()
        while current not in seen:
            seen.add(current)
            cops = bn.set_co_parents(current)
            if not cops:
                return current
            root_cops = cops & roots
            if root_cops:
                current = current | root_cops
                continue
            current = _ancestral_roots(bn, min(cops))
    if len(roots) <= 16:
        for k in range(1, len(roots) + 1):
            for combo in combinations(sorted(roots), k):
                if not bn.set_co_parents(frozenset(combo)):
                    return frozenset(combo)
    return roots


# -- promotion rules -----------------------------------------------------


def _bottom_ancestors(bn: BayesianNetwork, seeds, bottom: frozenset[int]) -> frozenset[int]:
    out: set[int] = set()
    stack = [s for s in seeds]
    while stack:
        v = stack.pop()
        for p in bn.parents[v]:
            if p in bottom and p not in out:
                out.add(p)
                stack.append(p)
    return frozenset(out)


def _candidates_for_rule(bn, border, bottom, rule):
    """(promoted, cohort) candidates for one rule; empty list if inapplicable."""
    out = []
    if rule == 1:
        for v in border:
            if not (set(bn.children(v)) & bottom):
                out.append((v, frozenset()))
    elif rule == 2:
        for v in border:
            kids = set(bn.children(v)) & bottom
            if kids and not (bn.co_parents(v) & bottom):
                out.append((v, frozenset(kids)))
    elif rule == 3:
        for v in border:
            kids = set(bn.children(v)) & bottom
            cops = bn.co_parents(v) & bottom
            if kids and cops and all(not (set(bn.parents[k]) & bottom) for k in cops):
                out.append((v, frozenset(kids | cops)))
    elif rule == 4:
        for v in bottom:
            if bn.parents[v] and not (set(bn.parents[v]) & bottom):
                out.append((None, frozenset({v})))
    elif rule == 5:
        for v in bottom:
            if not bn.parents[v]:
                out.append((None, frozenset({v})))
    elif rule == 6:
        for v in border:
            kids = set(bn.children(v)) & bottom
            if kids:
                cohort = frozenset(kids) | _bottom_ancestors(bn, kids, bottom)
                out.append((v, cohort))
    elif rule == 7:
        for v in bottom:
            cohort = frozenset({v}) | _bottom_ancestors(bn, [v], bottom)
            out.append((None, cohort))
    elif rule == 8:
        # Degenerate merge: recruit a whole detached parentless component.
        comp = _detached_components(bn, border, bottom)
        out.extend((None, frozenset(c)) for c in comp)
    return out


def _detached_components(bn, border, bottom):
    unseen = set(bottom)
    comps = []
    while unseen:
        start = min(unseen)
        comp = {start}
        stack = [start]
        attached = False
        while stack:
            v = stack.pop()
            for u in (*bn.parents[v], *bn.children(v)):
                if u in bottom and u not in comp:
                    comp.add(u)
                    stack.append(u)
                elif u not in bottom:
                    attached = True
        unseen -= comp
        if not attached:
            comps.append(comp)
    return comps


def _border_size(bn: BayesianNetwork, border) -> int:
    return math.prod(bn.card(v) for v in border)


def choose_next(
    bn: BayesianNetwork, border: frozenset[int], bottom: frozenset[int]
) -> tuple[Optional[int], frozenset[int], int]:
    """First applicable rule in order 1..8; ties broken by the state-space
    size of the resulting border, then by lowest variable id."""
    if not bottom:
        raise ValueError("bottom part is empty; chain is complete")
    for rule in range(1, 9):
        cands = _candidates_for_rule(bn, border, bottom, rule)
        if not cands:
            continue

        def key(cand):
            promoted, cohort = cand
            result = (border - ({promoted} if promoted is not None else set())) | cohort
            tie = promoted if promoted is not None else min(cohort)
            return (_border_size(bn, result), tie)

        promoted, cohort = min(cands, key=key)
        return promoted, cohort, rule
    raise BordertreeError("no applicable promotion rule")  # pragma: no cover


def _rule_for_forced(bn, border, bottom, promoted):
    if promoted not in border:
        raise BordertreeError(
            f"illegal forced promotion: {bn.name_of(promoted)} not in the border"
        )
    for rule in (1, 2, 3, 6):
        for cand_promoted, cohort in _candidates_for_rule(bn, border, bottom, rule):
            if cand_promoted == promoted:
                return cohort, rule
    raise BordertreeError(
        f"illegal forced promotion: no rule admits {bn.name_of(promoted)}"
    )  # pragma: no cover


def _cohort_table(bn: BayesianNetwork, cohort: frozenset[int], border: frozenset[int]) -> Factor:
    if not cohort:
        return Factor.scalar(1.0)
    hc = bn.set_parents(cohort)
    if not hc <= border:
        raise BordertreeError(
            f"cohort parents {bn.names(hc - border)} escape the border"
        )
    return product_all(bn.cpts[v] for v in sorted(cohort))


def build_chain(
    bn: BayesianNetwork, forced_order: Optional[Sequence[Optional[int]]] = None
) -> BorderChain:
    """Run the promotion loop to completion.

    ``forced_order`` replays a specific promotion sequence: entry 0 must be
    None (the initial fictitious step) and later entries name the promoted
    variable of each step.
    """
    b0 = initial_border(bn)
    phi0 = product_all(bn.cpts[v] for v in sorted(b0))
    steps = [ChainStep(0, None, frozenset(b0), frozenset(b0), phi0, None)]
    border = frozenset(b0)
    bottom = frozenset(bn.ids) - border

    if forced_order is not None:
        if not forced_order or forced_order[0] is not None:
            raise BordertreeError("forced order must start with the fictitious step")

    j = 0
    while bottom:
        j += 1
        if forced_order is not None:
            if j >= len(forced_order):
                raise BordertreeError("forced order ended before the chain completed")
            promoted = forced_order[j]
            if promoted is None:
                raise BordertreeError("fictitious steps beyond step 0 are not replayable")
            cohort, rule = _rule_for_forced(bn, border, bottom, promoted)
        else:
            promoted, cohort, rule = choose_next(bn, border, bottom)
        table = _cohort_table(bn, cohort, border)
        border = (border - ({promoted} if promoted is not None else frozenset())) | cohort
        bottom = bottom - cohort
        steps.append(ChainStep(j, promoted, cohort, border, table, rule))
    if forced_order is not None and j + 1 != len(forced_order):
        raise BordertreeError("forced order longer than the completed chain")
    return BorderChain(steps, bn)


# -- evidential passes ----------------------------------------------------


def evidence_steps(chain: BorderChain, ev) -> tuple[Optional[int], Optional[int]]:
    hits = [s.index for s in chain.steps if s.cohort & set(ev.vars)]
    if not hits:
        return None, None
    return min(hits), max(hits)


def downward_pass(chain: BorderChain, ev=NO_EVIDENCE) -> list[Factor]:
    """pi[j] has scope border(j); with no evidence it is the prior Pr{border}."""
    steps = chain.steps
    pi = [restrict(steps[0].cohort_table, ev)]
    for step in steps[1:]:
        f = multiply(restrict(step.cohort_table, ev), pi[-1])
        if step.promoted is not None:
            f = sum_out(f, {step.promoted})
        pi.append(f)
    return pi


def upward_pass(chain: BorderChain, ev=NO_EVIDENCE) -> list[Factor]:
    """lam[j] has scope within border(j); all-ones tails are kept trimmed."""
    bn = chain.source
    steps = chain.steps
    gamma = chain.gamma
    lam: list[Factor] = [Factor.scalar(1.0)] * (gamma + 1)
    lam[gamma] = indicator(
        sorted(steps[gamma].border), {v: bn.card(v) for v in steps[gamma].border}, ev
    )
    for j in range(gamma, 0, -1):
        step = steps[j]
        if step.cohort:
            f = multiply(restrict(step.cohort_table, ev), lam[j])
            lam[j - 1] = sum_out(f, step.cohort)
        else:
            lam[j - 1] = lam[j]
    return lam


def run_passes(chain: BorderChain, ev=NO_EVIDENCE) -> PassResult:
    alpha, beta = evidence_steps(chain, ev)
    return PassResult(downward_pass(chain, ev), upward_pass(chain, ev), alpha, beta)


def chain_posterior(
    chain: BorderChain,
    ev,
    q: int,
    passes: Optional[PassResult] = None,
    j: Optional[int] = None,
) -> tuple[Factor, Factor, float]:
    """(unnormalized Pr{q,[evidence]}, posterior, evidence probability).

    Any border containing q gives the same answer; the lowest one is used
    unless ``j`` overrides it.
    """
    if passes is None:
        passes = run_passes(chain, ev)
    if j is None:
        j = chain.home_step(q)
    elif q not in chain.border(j):
        raise KeyError(f"variable {q} not in border {j}")
    m = multiply(passes.pi[j], passes.lam[j])
    unnorm = marginal_to(m, {q})
    posterior, evidence_prob = normalize(unnorm)
    return unnorm, posterior, evidence_prob


def chain_rows(chain: BorderChain) -> list[dict]:
    """Structured rows for the chain dump (one per step)."""
    bn = chain.source
    rows = []
    for s in chain.steps:
        if s.cohort:
            hc = bn.set_parents(s.cohort)
            phi = ",".join(bn.names(s.cohort))
            if hc:
                phi += "|" + ",".join(bn.names(hc))
        else:
            phi = "1"
        rows.append(
            {
                "i": s.index,
                "V": bn.name_of(s.promoted) if s.promoted is not None else "-",
                "C": ",".join(bn.names(s.cohort)) if s.cohort else "-",
                "B": ",".join(bn.names(s.border)),
                "phi": phi,
                "rule": str(s.rule) if s.rule is not None else "-",
            }
        )
    return rows
