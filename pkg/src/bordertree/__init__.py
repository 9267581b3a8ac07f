"""Exact posterior marginals for discrete Bayesian networks.

Three exact engines over one dense factor algebra:

* a border-chain engine that stretches any DAG into a chain of borders and
  runs a downward and an upward evidential pass,
* a polytree engine with directional edge messages for networks that are
  already singly connected,
* a border-polytree engine that first converts the DAG into a polytree of
  borders (macro-node aggregation, then per-macro chains) and propagates
  messages only inside the evidential core.

A brute-force enumeration oracle lives alongside for verification.
"""

from .bnformat import (
    emit_network,
    parse_evidence,
    parse_evidence_file,
    parse_network,
)
from .border_chain import (
    BorderChain,
    ChainStep,
    PassResult,
    build_chain,
    chain_posterior,
    choose_next,
    downward_pass,
    initial_border,
    run_passes,
    upward_pass,
)
from .bp_build import (
    BorderPolytree,
    MacroPolytree,
    aggregation_closure,
    border_polytree_from_chain,
    build_border_polytree,
    stage1,
    stage2,
    verify_bp,
    verify_macro_polytree,
)
from .bp_infer import BorderSession, asynchronous_sweep, bp_query, preload_priors
from .errors import (
    BnFormatError,
    BordertreeError,
    CycleError,
    EnumerationCapError,
    ImpossibleEvidenceError,
    NotSinglyConnectedError,
)
from .factor import Factor, indicator, marginal_to, multiply, normalize, restrict, sum_out
from .kernels import BACKEND as KERNEL_BACKEND
from .network import BayesianNetwork, EvidenceSet, NO_EVIDENCE, Variable, validate
from .oracle import joint, oracle_event_prob, oracle_marginal, oracle_posterior
from .polytree import PolytreeEngine, node_priors, polytree_query

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
