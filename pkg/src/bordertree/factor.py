"""Dense factors over discrete variables.

A factor is the one numeric object in the engine: conditional probability
tables, cohort tables, evidence indicators, directional messages and
marginals are all factors.  The layout is canonical so that every operation
aligns tables deterministically:

* ``scope`` is a tuple of variable ids sorted ascending,
* ``values`` is a row-major float64 array of shape ``cards`` (one axis per
  scope variable, last axis fastest),
* entries are finite and non-negative.

Factors are immutable after construction and all operations are pure.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .errors import ImpossibleEvidenceError


class Factor:
    __slots__ = ("scope", "cards", "values")

    def __init__(self, scope: Iterable[int], cards: Iterable[int], values):
        scope = tuple(scope)
        cards = tuple(int(c) for c in cards)
        if len(scope) != len(cards):
            raise ValueError("scope and cards length mismatch")
        if any(scope[i] >= scope[i + 1] for i in range(len(scope) - 1)):
            raise ValueError("scope must be strictly ascending variable ids")
        vals = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(vals)):
            raise ValueError("factor entries must be finite")
        if vals.min(initial=0.0) < 0.0:
            raise ValueError("factor entries must be non-negative")
        vals = np.ascontiguousarray(vals).reshape(cards).copy()
        vals.setflags(write=False)
        self.scope = scope
        self.cards = cards
        self.values = vals

    # -- constructors ---------------------------------------------------

    @staticmethod
    def scalar(value: float) -> "Factor":
        return Factor((), (), np.asarray(float(value)))

    @staticmethod
    def ones(scope: Iterable[int], cards: Iterable[int]) -> "Factor":
        cards = tuple(cards)
        return Factor(scope, cards, np.ones(cards))

    # -- helpers ---------------------------------------------------------

    def card_of(self, var: int) -> int:
        return self.cards[self.scope.index(var)]

    def axis_of(self, var: int) -> int:
        return self.scope.index(var)

    def total(self) -> float:
        return float(self.values.sum())

    def __repr__(self):
        return f"Factor(scope={self.scope}, cards={self.cards})"

    def allclose(self, other: "Factor", atol: float = 1e-9) -> bool:
        return self.scope == other.scope and np.allclose(
            self.values, other.values, atol=atol, rtol=0.0
        )


def _union_scope(f: Factor, g: Factor) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Merged ascending scope and cards; raises on shared-card mismatch."""
    scope: list[int] = []
    cards: list[int] = []
    i = j = 0
    fs, gs = f.scope, g.scope
    while i < len(fs) or j < len(gs):
        if j >= len(gs) or (i < len(fs) and fs[i] < gs[j]):
            scope.append(fs[i])
            cards.append(f.cards[i])
            i += 1
        elif i >= len(fs) or gs[j] < fs[i]:
            scope.append(gs[j])
            cards.append(g.cards[j])
            j += 1
        else:
            if f.cards[i] != g.cards[j]:
                raise ValueError(
                    f"cardinality mismatch for variable {fs[i]}: "
                    f"{f.cards[i]} vs {g.cards[j]}"
                )
            scope.append(fs[i])
            cards.append(f.cards[i])
            i += 1
            j += 1
    return tuple(scope), tuple(cards)


def multiply(f: Factor, g: Factor) -> Factor:
    """Pointwise product on the union scope."""
    if not f.scope:
        return Factor(g.scope, g.cards, g.values * float(f.values))
    if not g.scope:
        return Factor(f.scope, f.cards, f.values * float(g.values))
    scope, cards = _union_scope(f, g)
    pos = {v: k for k, v in enumerate(scope)}
    f_axes = tuple(pos[v] for v in f.scope)
    g_axes = tuple(pos[v] for v in g.scope)
    vals = kernels.product(f.values, f_axes, g.values, g_axes, cards)
    return Factor(scope, cards, vals)


def product_all(factors: Iterable[Factor]) -> Factor:
    out = Factor.scalar(1.0)
    for f in factors:
        out = multiply(out, f)
    return out


def sum_out(f: Factor, vars: Iterable[int]) -> Factor:
    """Marginalize ``vars`` away; summing out the whole scope gives a scalar."""
    drop = set(vars)
    if not drop:
        return f
    missing = drop - set(f.scope)
    if missing:
        raise ValueError(f"variables {sorted(missing)} not in scope {f.scope}")
    axes = tuple(k for k, v in enumerate(f.scope) if v in drop)
    keep = tuple(v for v in f.scope if v not in drop)
    keep_cards = tuple(c for v, c in zip(f.scope, f.cards) if v not in drop)
    vals = kernels.sum_axes(f.values, axes)
    return Factor(keep, keep_cards, vals)


def marginal_to(f: Factor, keep: Iterable[int]) -> Factor:
    keep = set(keep)
    return sum_out(f, [v for v in f.scope if v not in keep])


def restrict(f: Factor, ev: "EvidenceLike") -> Factor:
    """Zero out entries inconsistent with the evidence on scope variables.

    Equivalent to multiplying by the 0/1 indicator over scope ∩ evidence.
    """
    masks = _axis_masks(f, ev)
    if not masks:
        return f
    vals = np.array(f.values, copy=True)
    nd = len(f.cards)
    for axis, mask in masks:
        shape = [1] * nd
        shape[axis] = len(mask)
        vals *= mask.reshape(shape)
    return Factor(f.scope, f.cards, vals)


def _axis_masks(f: Factor, ev) -> list[tuple[int, np.ndarray]]:
    out = []
    for axis, (var, card) in enumerate(zip(f.scope, f.cards)):
        allowed = ev.allowed(var)
        if allowed is None:
            continue
        mask = np.zeros(card)
        mask[sorted(allowed)] = 1.0
        out.append((axis, mask))
    return out


def indicator(scope: Iterable[int], cards: Mapping[int, int] | Iterable[int], ev) -> Factor:
    """Indicator factor over the evidential part of ``scope`` (scalar 1 if none)."""
    scope = tuple(scope)
    if isinstance(cards, Mapping):
        card_list = [cards[v] for v in scope]
    else:
        card_list = list(cards)
    ev_vars = [(v, c) for v, c in zip(scope, card_list) if ev.allowed(v) is not None]
    if not ev_vars:
        return Factor.scalar(1.0)
    f = Factor.ones([v for v, _ in ev_vars], [c for _, c in ev_vars])
    return restrict(f, ev)


def normalize(f: Factor) -> tuple[Factor, float]:
    """Scale to total mass 1; the normalizer is the pre-normalization sum."""
    s = f.total()
    if s <= 0.0:
        raise ImpossibleEvidenceError("all-zero factor: evidence has probability 0")
    return Factor(f.scope, f.cards, f.values / s), s


def divide(f: Factor, g: Factor) -> Factor:
    """Pointwise quotient f/g with g broadcast over f's scope.

    Requires scope(g) ⊆ scope(f) and strictly positive g entries; used only
    by the guarded division shortcut in the asynchronous sweep.
    """
    if not set(g.scope) <= set(f.scope):
        raise ValueError("divisor scope must be contained in dividend scope")
    if g.values.size and g.values.min() <= 0.0:
        raise ZeroDivisionError("division shortcut requires strictly positive divisor")
    if not g.scope:
        return Factor(f.scope, f.cards, f.values / float(g.values))
    pos = {v: k for k, v in enumerate(f.scope)}
    shape = [1] * len(f.scope)
    for k, v in enumerate(g.scope):
        shape[pos[v]] = g.cards[k]
    return Factor(f.scope, f.cards, f.values / g.values.reshape(shape))
