"""Belief propagation on the observed graph with noisy-label fields.

Messages live on directed edges; the update is synchronous (two buffers):

    new R_{i->j} = h_i + sum_{l in N(i) \\ {j}} F(R_{l->i})

with h_i = gamma * sigma_tilde_i and F = edge_coupling. Initial messages are
R_{i->j} = gamma * sigma_tilde_i, which makes the algorithm compute the
exact noisy-label LLR whenever the local neighborhood is a tree. Vertex
beliefs keep all incoming terms; labels are sign(belief) with ties mapped
to +1.

Each step computes the per-vertex total S_i once and forms every outgoing
message as S_i minus one incoming term, so a step costs O(|E|) rather than
O(sum of degree^2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ValidationError
from .graph import LabeledGraph
from .model import Derived, edge_coupling

__all__ = [
    "BpState",
    "BpRun",
    "init_state",
    "bp_iterate",
    "finalize_beliefs",
    "labels_from_beliefs",
    "run_bp",
    "empirical_accuracy",
]


@dataclass
class BpState:
    """Messages after `iteration` synchronous updates.

    messages[e] holds the message flowing into adjacency slot e, i.e. from
    adj.src[e] to adj.dst[e]; beliefs stay None until finalize_beliefs.
    """

    graph: LabeledGraph
    beta: float
    h: np.ndarray
    messages: np.ndarray
    iteration: int
    beliefs: np.ndarray | None = None


def init_state(g: LabeledGraph, dc: Derived) -> BpState:
    adj = g.adjacency
    h = dc.gamma * g.sigma_tilde.astype(np.float64)
    messages = dc.gamma * g.sigma_tilde[adj.src].astype(np.float64)
    return BpState(graph=g, beta=dc.beta, h=h, messages=messages, iteration=0)


def _incoming_totals(state: BpState) -> tuple[np.ndarray, np.ndarray]:
    adj = state.graph.adjacency
    fm = np.asarray(edge_coupling(state.messages, state.beta), dtype=np.float64).reshape(-1)
    totals = np.bincount(adj.dst, weights=fm, minlength=state.graph.n)
    return fm, totals


def bp_iterate(state: BpState) -> BpState:
    """One synchronous update; returns a new state, old buffers untouched."""
    adj = state.graph.adjacency
    fm, totals = _incoming_totals(state)
    vals = state.h[adj.dst] + totals[adj.dst] - fm
    # vals[e] is the refreshed message dst->src of slot e, which lives in
    # slot rev[e]; rev is an involution, so a gather by rev places it.
    nxt = vals[adj.rev]
    return BpState(graph=state.graph, beta=state.beta, h=state.h,
                   messages=nxt, iteration=state.iteration + 1)


def labels_from_beliefs(beliefs: np.ndarray) -> np.ndarray:
    """+1 where belief >= 0 (ties included), else -1."""
    return np.where(np.asarray(beliefs) >= 0, 1, -1).astype(np.int8)


def finalize_beliefs(state: BpState) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex beliefs h_i + sum over incoming F terms, plus hard labels."""
    _, totals = _incoming_totals(state)
    beliefs = state.h + totals
    state.beliefs = beliefs
    return beliefs, labels_from_beliefs(beliefs)


@dataclass
class BpRun:
    labels: np.ndarray
    beliefs: np.ndarray
    iteration_ms: list[float]


def run_bp(g: LabeledGraph, dc: Derived, t: int) -> BpRun:
    """init -> (t-1) message-passing steps -> beliefs; deterministic.

    With t = 1 the beliefs combine the initial messages directly.
    """
    if t < 1:
        raise ValidationError("t must be >= 1")
    state = init_state(g, dc)
    times = []
    for _ in range(t - 1):
        t0 = time.perf_counter()
        state = bp_iterate(state)
        times.append((time.perf_counter() - t0) * 1e3)
    t0 = time.perf_counter()
    beliefs, labels = finalize_beliefs(state)
    times.append((time.perf_counter() - t0) * 1e3)
    return BpRun(labels=labels, beliefs=beliefs, iteration_ms=times)


def empirical_accuracy(labels: np.ndarray, sigma: np.ndarray) -> float:
    """Fraction of vertices labeled correctly; no sign-flip maximization,
    since the noisy labels break the global +/- symmetry."""
    labels = np.asarray(labels)
    sigma = np.asarray(sigma)
    if labels.shape != sigma.shape:
        raise LengthMismatch(f"length {labels.shape} vs {sigma.shape}")
    if labels.size == 0:
        return 0.0
    return float(np.mean(labels == sigma))
