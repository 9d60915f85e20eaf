"""Sparse labeled graphs: sampling, neighborhoods, serialization.

A LabeledGraph stores the canonical undirected edge list plus the hidden
true labels sigma and observed noisy labels sigma_tilde. The adjacency is
exposed in a compressed directed-slot layout (one slot per directed edge)
because message passing iterates directed edges; ``rev`` maps each slot to
the slot of the opposite direction.

Graphs are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ValidationError, VertexOutOfRange
from .model import ModelParams, validate_params

__all__ = [
    "LabeledGraph",
    "Adjacency",
    "Neighborhood",
    "sample_sbm",
    "extract_neighborhood",
    "save_graph",
    "load_graph",
]

# Above this size per-pair Bernoulli sampling (O(n^2) uniforms) gets slow;
# switch to exact per-block binomial counts placed uniformly.
DENSE_SAMPLING_CUTOFF = 2048


@dataclass(frozen=True)
class Adjacency:
    """Directed-slot adjacency. Slot e carries the message src[e] -> dst[e],
    where dst is the slot's row vertex (slots are grouped by receiving
    vertex: offsets[i]:offsets[i+1] are the slots into vertex i)."""

    offsets: np.ndarray  # (n+1,) int64
    dst: np.ndarray      # (2m,) receiving vertex of each slot
    src: np.ndarray      # (2m,) sending vertex of each slot
    rev: np.ndarray      # (2m,) slot index of the reversed edge


@dataclass
class LabeledGraph:
    n: int
    edges: np.ndarray        # (m, 2) int64, each row (u, v) with u < v, lexicographically sorted
    sigma: np.ndarray        # (n,) int8 in {+1, -1}
    sigma_tilde: np.ndarray  # (n,) int8 in {+1, -1}

    def __post_init__(self):
        self.edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        self.sigma = np.asarray(self.sigma, dtype=np.int8)
        self.sigma_tilde = np.asarray(self.sigma_tilde, dtype=np.int8)
        if self.sigma.shape != (self.n,) or self.sigma_tilde.shape != (self.n,):
            raise ValidationError("label arrays must have length n")
        m = self.edges.shape[0]
        if m:
            lo = self.edges.min(axis=1)
            hi = self.edges.max(axis=1)
            if lo.min() < 0 or hi.max() >= self.n:
                raise ValidationError("edge endpoint out of range")
            if (lo == hi).any():
                raise ValidationError("self-loops are not allowed")
            canon = np.stack([lo, hi], axis=1)
            order = np.lexsort((canon[:, 1], canon[:, 0]))
            canon = canon[order]
            if m > 1 and (np.diff(canon, axis=0) == 0).all(axis=1).any():
                raise ValidationError("duplicate edge")
            self.edges = canon

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def adjacency(self) -> Adjacency:
        m = self.num_edges
        if m == 0:
            empty = np.zeros(0, dtype=np.int32)
            return Adjacency(np.zeros(self.n + 1, dtype=np.int64), empty, empty, empty)
        dst = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        src = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((src, dst))
        dst = dst[order]
        src = src[order]
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(dst, minlength=self.n), out=offsets[1:])
        # Slots sorted by (dst, src) against the same set sorted by (src, dst)
        # pair up opposite directions position by position.
        rev = np.lexsort((dst, src))
        return Adjacency(offsets=offsets, dst=dst.astype(np.int32),
                         src=src.astype(np.int32), rev=rev.astype(np.int32))

    def degrees(self) -> np.ndarray:
        adj = self.adjacency
        return np.diff(adj.offsets)


def _draw_distinct(rng: np.random.Generator, total: int, k: int) -> np.ndarray:
    """k distinct integers uniform over [0, total), as a sorted array.

    Rejection via unique(): the pool of distinct values seen is exchangeable
    over [0, total), so a uniform k-subset of it is a uniform k-subset
    overall. Assumes k << total (true for sparse graphs).
    """
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    got = np.unique(rng.integers(0, total, size=k, dtype=np.int64))
    while got.size < k:
        extra = rng.integers(0, total, size=2 * (k - got.size) + 16, dtype=np.int64)
        got = np.unique(np.concatenate([got, extra]))
    if got.size > k:
        keep = rng.choice(got.size, size=k, replace=False)
        got = np.sort(got[keep])
    return got


def _decode_triangular(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Invert p = j(j-1)/2 + i with 0 <= i < j (pairs below the diagonal)."""
    j = ((1.0 + np.sqrt(1.0 + 8.0 * p.astype(np.float64))) / 2.0).astype(np.int64)
    j -= j * (j - 1) // 2 > p
    j += (j + 1) * j // 2 <= p
    i = p - j * (j - 1) // 2
    return i, j


def _sample_block_pairs(rng, members: np.ndarray, prob: float) -> np.ndarray:
    """Edges inside one label block: exact Binomial count, placed uniformly."""
    m = members.size
    total = m * (m - 1) // 2
    if total == 0:
        return np.zeros((0, 2), dtype=np.int64)
    k = int(rng.binomial(total, prob))
    idx = _draw_distinct(rng, total, k)
    i, j = _decode_triangular(idx)
    return np.stack([members[i], members[j]], axis=1)


def _sample_cross_pairs(rng, left: np.ndarray, right: np.ndarray, prob: float) -> np.ndarray:
    total = left.size * right.size
    if total == 0:
        return np.zeros((0, 2), dtype=np.int64)
    k = int(rng.binomial(total, prob))
    idx = _draw_distinct(rng, total, k)
    return np.stack([left[idx // right.size], right[idx % right.size]], axis=1)


def _sample_edges_dense(rng, sigma: np.ndarray, a: float, b: float) -> np.ndarray:
    """Per-pair Bernoulli over the upper triangle, in fixed row chunks."""
    n = sigma.size
    p_same = a / n
    p_diff = b / n
    rows = []
    chunk = 512
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        block = np.arange(start, stop)
        same = sigma[block, None] == sigma[None, :]
        probs = np.where(same, p_same, p_diff)
        u = rng.random((stop - start, n))
        hit = (u < probs) & (np.arange(n)[None, :] > block[:, None])
        ii, jj = np.nonzero(hit)
        rows.append(np.stack([block[ii], jj], axis=1))
    return np.concatenate(rows) if rows else np.zeros((0, 2), dtype=np.int64)


def sample_sbm(p: ModelParams, seed: int, method: str = "auto") -> LabeledGraph:
    """Draw a graph with hidden labels and noisy observed labels.

    Deterministic given (p, seed). ``method`` picks the edge-sampling
    strategy ("dense" per-pair Bernoulli, "blocks" per-block binomial
    counts); both produce the same distribution, "auto" switches on n.
    """
    rng = np.random.default_rng(int(seed) % (1 << 64))
    n = p.n
    sigma = (rng.integers(0, 2, size=n, dtype=np.int8) * 2 - 1).astype(np.int8)
    flip = rng.random(n) < p.alpha
    sigma_tilde = np.where(flip, -sigma, sigma).astype(np.int8)
    if n == 0:
        return LabeledGraph(0, np.zeros((0, 2), dtype=np.int64), sigma, sigma_tilde)

    if method == "auto":
        method = "dense" if n <= DENSE_SAMPLING_CUTOFF else "blocks"
    if method == "dense":
        edges = _sample_edges_dense(rng, sigma, p.a, p.b)
    elif method == "blocks":
        plus = np.flatnonzero(sigma == 1)
        minus = np.flatnonzero(sigma == -1)
        edges = np.concatenate([
            _sample_block_pairs(rng, plus, p.a / n),
            _sample_block_pairs(rng, minus, p.a / n),
            _sample_cross_pairs(rng, plus, minus, p.b / n),
        ])
    else:
        raise ValidationError(f"unknown sampling method {method!r}")
    return LabeledGraph(n=n, edges=edges, sigma=sigma, sigma_tilde=sigma_tilde)


@dataclass
class Neighborhood:
    """Radius-t ball around a root vertex, relabeled so the root is vertex 0.

    vertex_ids maps the local ids back to the parent graph.
    """

    graph: LabeledGraph
    root: int
    vertex_ids: np.ndarray
    is_tree: bool


def extract_neighborhood(g: LabeledGraph, u: int, t: int) -> Neighborhood:
    """Induced subgraph on vertices within graph distance t of u.

    is_tree is True iff that induced subgraph is acyclic; a BFS ball is
    connected, so this reduces to edge count == vertex count - 1.
    """
    if not (0 <= u < g.n):
        raise VertexOutOfRange(f"vertex {u} not in [0, {g.n})")
    adj = g.adjacency
    local = np.full(g.n, -1, dtype=np.int64)
    ball = [int(u)]
    local[u] = 0
    frontier = [int(u)]
    for _ in range(t):
        nxt = []
        for v in frontier:
            for w in adj.src[adj.offsets[v]:adj.offsets[v + 1]]:
                w = int(w)
                if local[w] < 0:
                    local[w] = len(ball)
                    ball.append(w)
                    nxt.append(w)
        frontier = nxt
        if not frontier:
            break
    ids = np.asarray(ball, dtype=np.int64)
    sub_edges = []
    for v in ball:
        for w in adj.src[adj.offsets[v]:adj.offsets[v + 1]]:
            w = int(w)
            if local[w] >= 0 and v < w:
                sub_edges.append((local[v], local[w]))
    edges = np.asarray(sub_edges, dtype=np.int64).reshape(-1, 2)
    sub = LabeledGraph(n=ids.size, edges=edges, sigma=g.sigma[ids], sigma_tilde=g.sigma_tilde[ids])
    return Neighborhood(graph=sub, root=0, vertex_ids=ids, is_tree=edges.shape[0] == ids.size - 1)


def save_graph(directory, g: LabeledGraph, params: ModelParams, seed: int) -> dict:
    """Write header.json + edges.csv + labels.csv; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = directory / "header.json"
    header.write_text(json.dumps(
        {"n": params.n, "a": params.a, "b": params.b, "alpha": params.alpha, "seed": int(seed)},
        indent=2) + "\n")
    epath = directory / "edges.csv"
    with epath.open("w") as f:
        f.write("u,v\n")
        for u, v in g.edges:
            f.write(f"{u},{v}\n")
    lpath = directory / "labels.csv"
    with lpath.open("w") as f:
        f.write("vertex,sigma,sigma_tilde\n")
        for i in range(g.n):
            f.write(f"{i},{g.sigma[i]},{g.sigma_tilde[i]}\n")
    return {"header": str(header), "edges": str(epath), "labels": str(lpath)}


def load_graph(directory) -> tuple[LabeledGraph, ModelParams, int]:
    directory = Path(directory)
    meta = json.loads((directory / "header.json").read_text())
    params = validate_params(meta["n"], meta["a"], meta["b"], meta["alpha"])
    edges = np.loadtxt(directory / "edges.csv", dtype=np.int64, delimiter=",", skiprows=1, ndmin=2)
    if edges.size == 0:
        edges = np.zeros((0, 2), dtype=np.int64)
    labels = np.loadtxt(directory / "labels.csv", dtype=np.int64, delimiter=",", skiprows=1, ndmin=2)
    n = params.n
    sigma = np.zeros(n, dtype=np.int8)
    sigma_tilde = np.zeros(n, dtype=np.int8)
    if n:
        sigma[labels[:, 0]] = labels[:, 1]
        sigma_tilde[labels[:, 0]] = labels[:, 2]
    g = LabeledGraph(n=n, edges=edges, sigma=sigma, sigma_tilde=sigma_tilde)
    return g, params, int(meta["seed"])
