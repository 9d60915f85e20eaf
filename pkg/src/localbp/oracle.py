"""Brute-force exact posteriors on small instances.

These enumerate every label assignment and therefore serve as ground truth
for the message-passing code. The graph version scores the full generative
likelihood, *including* the (1 - a/n) / (1 - b/n) factors of absent pairs:
under this model non-edges carry information, and dropping them is exactly
the bug this oracle exists to catch. The tree version scores the
label-Markov-chain along edges plus the noisy-label channel, which is the
tree posterior in probability (rather than exponential-family) form.

All accumulation happens in log space; weights are log-probabilities, so
they never exceed 0 and alpha = 0 just contributes -inf rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import TooLarge, ValidationError, VertexOutOfRange
from .graph import LabeledGraph
from .model import ModelParams
from .tree import EXACT, NOISY, GwForest, _check_mode

__all__ = ["PosteriorResult", "exact_graph_posterior", "exact_tree_posterior"]

MAX_ENUM_VERTICES = 16


@dataclass(frozen=True)
class PosteriorResult:
    p_plus: float
    log_partition: float
    enumerated_states: int


def _all_states(k: int) -> np.ndarray:
    """(2^k, k) matrix of +/-1 assignments."""
    bits = (np.arange(1 << k)[:, None] >> np.arange(k)[None, :]) & 1
    return (2 * bits - 1).astype(np.int8)


def _log(x: float) -> float:
    return -math.inf if x == 0.0 else math.log(x)


def exact_graph_posterior(g: LabeledGraph, p: ModelParams, u: int) -> PosteriorResult:
    """P(sigma_u = + | G, sigma_tilde) by summing the joint likelihood over
    all 2^n assignments."""
    if g.n > MAX_ENUM_VERTICES:
        raise TooLarge(f"n={g.n} exceeds the enumeration cap {MAX_ENUM_VERTICES}")
    if not (0 <= u < g.n):
        raise VertexOutOfRange(f"vertex {u} not in [0, {g.n})")
    if p.n < g.n or p.n <= 0:
        raise ValidationError("params.n must cover the graph (pair factors use a/n, b/n)")
    n = g.n
    states = _all_states(n)
    loglik = np.zeros(1 << n, dtype=np.float64)
    present = {(int(a), int(b)) for a, b in g.edges}
    lg_edge_same = _log(p.a / p.n)
    lg_edge_diff = _log(p.b / p.n)
    lg_gap_same = _log(1.0 - p.a / p.n)
    lg_gap_diff = _log(1.0 - p.b / p.n)
    for i in range(n):
        for j in range(i + 1, n):
            same = states[:, i] == states[:, j]
            if (i, j) in present:
                loglik += np.where(same, lg_edge_same, lg_edge_diff)
            else:
                loglik += np.where(same, lg_gap_same, lg_gap_diff)
    lg_keep = _log(1.0 - p.alpha)
    lg_flip = _log(p.alpha)
    for i in range(n):
        loglik += np.where(states[:, i] == g.sigma_tilde[i], lg_keep, lg_flip)
    total = float(logsumexp(loglik))
    plus = float(logsumexp(loglik[states[:, u] == 1]))
    return PosteriorResult(p_plus=float(np.exp(plus - total)), log_partition=total,
                           enumerated_states=1 << n)


def exact_tree_posterior(forest: GwForest, p: ModelParams, mode: str = NOISY) -> PosteriorResult:
    """Root posterior P(tau_root = + | evidence) for a single tree.

    noisy mode: evidence is (tree shape, tau_tilde); every label is summed
    over. exact mode: labels at the tree's depth limit are additionally
    clamped to their sampled true values.
    """
    _check_mode(mode, None)
    if forest.n_trees != 1:
        raise ValidationError("tree posterior expects a single-tree forest")
    n = forest.n_nodes
    if n > MAX_ENUM_VERTICES:
        raise TooLarge(f"{n} nodes exceeds the enumeration cap {MAX_ENUM_VERTICES}")
    depths = forest.depths()
    clamped = (depths == forest.depth_limit) if mode == EXACT else np.zeros(n, dtype=bool)
    free = np.flatnonzero(~clamped)
    k = free.size
    states = _all_states(k)
    labels = np.tile(forest.tau.astype(np.int8), (1 << k, 1))
    labels[:, free] = states
    parents = forest.parents()
    loglik = np.zeros(1 << k, dtype=np.float64)
    lg_same = _log(p.a / (p.a + p.b))
    lg_diff = _log(p.b / (p.a + p.b))
    for i in range(forest.n_trees, n):
        same = labels[:, i] == labels[:, parents[i]]
        loglik += np.where(same, lg_same, lg_diff)
    lg_keep = _log(1.0 - p.alpha)
    lg_flip = _log(p.alpha)
    for i in range(n):
        loglik += np.where(labels[:, i] == forest.tau_tilde[i], lg_keep, lg_flip)
    total = float(logsumexp(loglik))
    plus = logsumexp(loglik[labels[:, 0] == 1]) if (labels[:, 0] == 1).any() else -math.inf
    return PosteriorResult(p_plus=float(np.exp(plus - total)), log_partition=total,
                           enumerated_states=1 << k)
