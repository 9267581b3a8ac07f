"""Built-in example networks used by the test-suite, docs and CLI demos.

Structures are fixed; conditional tables are sampled strictly positive from
a seeded generator unless explicit tables are supplied.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .factor import Factor
from .network import BayesianNetwork, Variable

Spec = Sequence[tuple[str, int, Sequence[str]]]


def positive_cpt(rng: np.random.Generator, bn_cards, var, parents) -> np.ndarray:
    """Strictly positive table over sorted({var} ∪ parents), rows normalized."""
    scope = tuple(sorted((var, *parents)))
    shape = tuple(bn_cards[u] for u in scope)
    vals = rng.uniform(0.1, 1.0, size=shape)
    axis = scope.index(var)
    return vals / vals.sum(axis=axis, keepdims=True)


def build_network(
    spec: Spec,
    rng: Optional[np.random.Generator] = None,
    cpts: Optional[dict[str, np.ndarray]] = None,
) -> BayesianNetwork:
    """Assemble a network from (name, cardinality, parent names) triples.

    ``cpts`` maps names to tables in file convention (axes: parents in
    declared order, then the child); missing tables are sampled from rng.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    ids = {name: i for i, (name, _, _) in enumerate(spec)}
    variables = [
        Variable(i, name, card, tuple(f"{name.lower()}{k}" for k in range(card)))
        for i, (name, card, _) in enumerate(spec)
    ]
    cards = {i: v.cardinality for i, v in enumerate(variables)}
    parents = {ids[name]: tuple(ids[p] for p in ps) for name, _, ps in spec}
    tables: dict[int, Factor] = {}
    for name, _, ps in spec:
        v = ids[name]
        scope = tuple(sorted((v, *parents[v])))
        if cpts and name in cpts:
            file_axes = (*parents[v], v)
            arr = np.asarray(cpts[name], dtype=float).reshape(
                tuple(cards[u] for u in file_axes)
            )
            arr = arr.transpose(tuple(file_axes.index(u) for u in scope))
        else:
            arr = positive_cpt(rng, cards, v, parents[v])
        tables[v] = Factor(scope, [cards[u] for u in scope], arr)
    return BayesianNetwork(variables, parents, tables)


BN_A_SPEC: Spec = [
    ("A", 2, []),
    ("B", 2, []),
    ("C", 2, ["A", "B"]),
    ("D", 3, ["A", "B"]),
    ("F", 2, ["A", "B"]),
    ("G", 3, []),
    ("H", 2, ["C", "D"]),
    ("I", 2, ["D", "F"]),
    ("J", 2, ["G", "H"]),
    ("K", 2, ["H", "I"]),
    ("L", 3, ["I"]),
]


def bn_a(seed: int = 7) -> BayesianNetwork:
    """Eleven-node multiply connected example (three root couples feeding a
    diamond of colliders)."""
    return build_network(BN_A_SPEC, np.random.default_rng(seed))


POLYTREE_B_SPEC: Spec = [
    ("A", 2, []),
    ("B", 3, ["A"]),
    ("C", 2, ["L3"]),
    ("D", 2, ["A", "C"]),
    ("H", 3, ["C"]),
    ("I", 2, ["M", "P"]),
    ("J", 2, ["I"]),
    ("K", 2, []),
    ("L1", 2, ["J"]),
    ("L3", 2, []),
    ("L4", 2, ["H"]),
    ("L9", 2, ["N"]),
    ("L10", 3, ["N"]),
    ("M", 2, ["D", "K"]),
    ("N", 2, ["D", "R12"]),
    ("P", 2, []),
    ("R8", 3, ["L3"]),
    ("R12", 2, []),
]


def polytree_b(seed: int = 11) -> BayesianNetwork:
    """Eighteen-node polytree with two natural hubs (J and H)."""
    return build_network(POLYTREE_B_SPEC, np.random.default_rng(seed))


BN_C_SPEC: Spec = [
    ("A", 2, []),
    ("B", 2, ["A"]),
    ("C", 2, ["A"]),
    ("G", 2, []),
    ("K", 2, []),
    ("L", 2, ["K"]),
    ("M", 2, ["S"]),
    ("N", 2, ["L"]),
    ("P", 2, ["M", "N", "Q"]),
    ("Q", 2, ["M", "U"]),
    ("D", 2, ["B"]),
    ("F", 2, ["B", "C"]),
    ("H", 2, ["D", "F"]),
    ("O", 2, ["C", "G", "N"]),
    ("R", 2, []),
    ("S", 2, ["L", "R", "T"]),
    ("T", 2, []),
    ("U", 2, ["R"]),
    ("V", 2, ["T"]),
    ("X", 2, ["U", "V"]),
    ("Y", 2, ["V"]),
    ("Z", 2, ["X", "Y"]),
    ("I", 2, ["F", "H"]),
    ("J", 2, ["F", "O", "P"]),
]


def bn_c(seed: int = 13) -> BayesianNetwork:
    """Twenty-four-node network with interlocking loops; its border polytree
    exercises junction borders, cross-macro chain starts, and mid-chain
    interface recording."""
    return build_network(BN_C_SPEC, np.random.default_rng(seed))


DYSPNOEA_SPEC: Spec = [
    ("visit", 2, []),
    ("smoking", 2, []),
    ("tub", 2, ["visit"]),
    ("lung", 2, ["smoking"]),
    ("bronc", 2, ["smoking"]),
    ("either", 2, ["tub", "lung"]),
    ("xray", 2, ["either"]),
    ("dysp", 2, ["either", "bronc"]),
]


def dyspnoea_shaped(seed: int = 17) -> BayesianNetwork:
    """The classic eight-node chest-clinic shape with random tables."""
    return build_network(DYSPNOEA_SPEC, np.random.default_rng(seed))


def chain_ab() -> BayesianNetwork:
    """Two-node chain with pinned numbers, handy for arithmetic checks."""
    return build_network(
        [("A", 2, []), ("B", 2, ["A"])],
        cpts={"A": np.array([0.4, 0.6]), "B": np.array([[0.5, 0.5], [0.1, 0.9]])},
    )
