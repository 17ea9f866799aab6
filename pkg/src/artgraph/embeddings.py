"""node2vec context embeddings: biased random walks + skip-gram training.

Walks treat the graph as undirected and untyped by default (configurable),
so an artwork reaches its artist and back. Second-order transition tables
are built lazily with the alias method and cached with an LRU bound; the
skip-gram inner loop is compiled with numba and uses a splitmix64 generator
so a fixed seed yields bit-identical embeddings across runs.
"""

from __future__ import annotations

import random
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import FormatError, ValidationError
from .graph import PropertyGraph

EMBEDDING_MAGIC = b"AGEM"
EMBEDDING_VERSION = 1

# Cap on cached second-order alias tables; precomputing all (prev, curr)
# pairs is O(sum of squared degrees) memory.
ALIAS_CACHE_SIZE = 200_000


@dataclass
class Node2VecConfig:
    dim: int = 128
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 40
    walks_per_node: int = 10
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0
    undirected: bool = True

    def validate(self) -> None:
        for name in ("dim", "walk_length", "walks_per_node", "window", "negatives"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.p <= 0 or self.q <= 0:
            raise ValidationError("p and q must be > 0")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")


# -- alias method -------------------------------------------------------------


@dataclass
class AliasTable:
    prob: np.ndarray
    alias: np.ndarray

    def __len__(self) -> int:
        return len(self.prob)


def build_alias(weights) -> AliasTable:
    """Preprocess nonnegative weights for O(1) weighted sampling (Vose)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("weights must be a non-empty 1-d sequence")
    if np.any(w < 0):
        raise ValidationError("weights must be >= 0")
    total = w.sum()
    if total <= 0:
        raise ValidationError("weights must sum to > 0")
    n = w.size
    scaled = w * (n / total)
    prob = np.ones(n, dtype=np.float64)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    for i in small + large:
        prob[i] = 1.0
    return AliasTable(prob, alias)


def sample_alias(table: AliasTable, rng: np.random.Generator, size: int | None = None):
    """Draw index/indices from the table's distribution."""
    n = len(table)
    if size is None:
        i = int(rng.integers(n))
        return i if rng.random() < table.prob[i] else int(table.alias[i])
    idx = rng.integers(0, n, size=size)
    coin = rng.random(size)
    return np.where(coin < table.prob[idx], idx, table.alias[idx])


# -- walk generation ----------------------------------------------------------


def _undirected_neighbor_ids(graph: PropertyGraph, nid: int) -> list[int]:
    seen = {dst for _, dst in graph.out_adj[nid]}
    seen.update(src for _, src in graph.in_adj[nid])
    return sorted(seen)


def transition_weights(
    prev: int, curr: int, graph: PropertyGraph, p: float, q: float
) -> list[tuple[int, float]]:
    """Second-order walk weights for every neighbor of curr.

    Returning to prev weighs 1/p, staying within prev's neighborhood 1,
    and moving outward 1/q. The graph is viewed undirected; an isolated
    curr yields an empty list (the walk terminates).
    """
    prev_nbrs = set(_undirected_neighbor_ids(graph, prev))
    out = []
    for cand in _undirected_neighbor_ids(graph, curr):
        if cand == prev:
            out.append((cand, 1.0 / p))
        elif cand in prev_nbrs:
            out.append((cand, 1.0))
        else:
            out.append((cand, 1.0 / q))
    return out


_MIX_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _mix64(*parts: int) -> int:
    """Combine integers into one well-mixed 64-bit seed (splitmix64)."""
    state = 0
    for part in parts:
        state = (state + part + _MIX_GOLDEN) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        state = z ^ (z >> 31)
    return state


class _WalkView:
    """Compact CSR view of the graph for walk generation.

    Vocabulary order is ascending node id; neighbor lists are deduplicated
    and sorted by node id, matching :func:`transition_weights`.
    """

    def __init__(self, graph: PropertyGraph, undirected: bool = True):
        self.ids = np.array(sorted(graph.nodes), dtype=np.int64)
        index = {int(nid): i for i, nid in enumerate(self.ids)}
        self.index = index
        nbrs: list[np.ndarray] = []
        for nid in self.ids:
            if undirected:
                ids = _undirected_neighbor_ids(graph, nid)
            else:
                ids = sorted({dst for _, dst in graph.out_adj[nid]})
            nbrs.append(np.array([index[x] for x in ids], dtype=np.int64))
        self.nbrs = nbrs
        self._alias_cache: OrderedDict[tuple[int, int], AliasTable] = OrderedDict()

    def _biased_table(self, prev: int, curr: int, p: float, q: float) -> AliasTable:
        key = (prev, curr)
        cached = self._alias_cache.get(key)
        if cached is not None:
            self._alias_cache.move_to_end(key)
            return cached
        cand = self.nbrs[curr]
        prev_nbrs = self.nbrs[prev]
        within = np.isin(cand, prev_nbrs, assume_unique=True)
        weights = np.where(within, 1.0, 1.0 / q)
        weights[cand == prev] = 1.0 / p
        table = build_alias(weights)
        self._alias_cache[key] = table
        if len(self._alias_cache) > ALIAS_CACHE_SIZE:
            self._alias_cache.popitem(last=False)
        return table

    def walk(self, start: int, length: int, p: float, q: float, rng: random.Random) -> list[int]:
        path = [start]
        nbrs = self.nbrs
        unbiased = p == 1.0 and q == 1.0
        while len(path) < length:
            curr = path[-1]
            cand = nbrs[curr]
            n = len(cand)
            if n == 0:
                break
            if len(path) == 1 or unbiased:
                nxt = cand[int(rng.random() * n)]
            else:
                table = self._biased_table(path[-2], curr, p, q)
                i = int(rng.random() * n)
                nxt = cand[i if rng.random() < table.prob[i] else table.alias[i]]
            path.append(int(nxt))
        return path


def generate_walks(graph: PropertyGraph, config: Node2VecConfig) -> list[list[int]]:
    """walks_per_node random walks from every node, as node-id sequences.

    Start order is reshuffled every round and each walk gets its own
    generator seeded from (seed, round, start id), so the corpus does not
    depend on scheduling.
    """
    config.validate()
    if graph.num_nodes == 0:
        raise ValidationError("graph is empty")
    view = _WalkView(graph, undirected=config.undirected)
    walks: list[list[int]] = []
    n = len(view.ids)
    for rnd in range(config.walks_per_node):
        order = np.random.default_rng(_mix64(config.seed, 0x5757, rnd)).permutation(n)
        for compact in order:
            start_id = int(view.ids[compact])
            rng = random.Random(_mix64(config.seed, rnd, start_id))
            compact_walk = view.walk(
                int(compact), config.walk_length, config.p, config.q, rng
            )
            walks.append([int(view.ids[i]) for i in compact_walk])
    return walks


# -- skip-gram with negative sampling ------------------------------------------


@njit(cache=True)
def _sgns_kernel(
    tokens, offsets, vec, ctx, window, negatives, epochs, lr0, noise_prob, noise_alias, seed
):  # pragma: no cover - compiled
    golden = np.uint64(0x9E3779B97F4A7C15)
    mult1 = np.uint64(0xBF58476D1CE4E5B9)
    mult2 = np.uint64(0x94D049BB133111EB)
    inv53 = 1.0 / 9007199254740992.0
    state = np.uint64(seed)
    dim = vec.shape[1]
    n_vocab = vec.shape[0]
    total = tokens.shape[0] * epochs
    done = 0
    min_alpha = lr0 * 1e-4
    for _ in range(epochs):
        for w in range(offsets.shape[0] - 1):
            lo = offsets[w]
            hi = offsets[w + 1]
            for i in range(lo, hi):
                c = tokens[i]
                alpha = lr0 * (1.0 - done / (total + 1.0))
                if alpha < min_alpha:
                    alpha = min_alpha
                done += 1
                j0 = i - window
                if j0 < lo:
                    j0 = lo
                j1 = i + window + 1
                if j1 > hi:
                    j1 = hi
                for j in range(j0, j1):
                    if j == i:
                        continue
                    o = tokens[j]
                    accum = np.zeros(dim, dtype=np.float32)
                    for s in range(negatives + 1):
                        if s == 0:
                            target = o
                            label = 1.0
                        else:
                            state = state + golden
                            z = state
                            z = (z ^ (z >> np.uint64(30))) * mult1
                            z = (z ^ (z >> np.uint64(27))) * mult2
                            z = z ^ (z >> np.uint64(31))
                            u1 = (z >> np.uint64(11)) * inv53
                            state = state + golden
                            z = state
                            z = (z ^ (z >> np.uint64(30))) * mult1
                            z = (z ^ (z >> np.uint64(27))) * mult2
                            z = z ^ (z >> np.uint64(31))
                            u2 = (z >> np.uint64(11)) * inv53
                            k = int(u1 * n_vocab)
                            target = k if u2 < noise_prob[k] else noise_alias[k]
                            if target == o:
                                continue
                            label = 0.0
                        f = 0.0
                        for d in range(dim):
                            f += vec[c, d] * ctx[target, d]
                        if f >= 0.0:
                            sig = 1.0 / (1.0 + np.exp(-f))
                        else:
                            e = np.exp(f)
                            sig = e / (1.0 + e)
                        g = np.float32((label - sig) * alpha)
                        for d in range(dim):
                            accum[d] += g * ctx[target, d]
                            ctx[target, d] += g * vec[c, d]
                    for d in range(dim):
                        vec[c, d] += accum[d]


# -- embedding table -----------------------------------------------------------


@dataclass
class EmbeddingTable:
    ids: np.ndarray  # int64, sorted ascending
    vectors: np.ndarray  # float32, shape (len(ids), dim)

    def __post_init__(self) -> None:
        self._index = {int(nid): i for i, nid in enumerate(self.ids)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, node_id: int) -> bool:
        return int(node_id) in self._index

    def __len__(self) -> int:
        return len(self.ids)

    def vector(self, node_id: int) -> np.ndarray:
        try:
            return self.vectors[self._index[int(node_id)]]
        except KeyError:
            raise ValidationError(f"no embedding for node {node_id}") from None

    def id_set(self) -> set[int]:
        return set(self._index)

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            fh.write(EMBEDDING_MAGIC)
            fh.write(
                struct.pack("<HIQ", EMBEDDING_VERSION, self.dim, len(self.ids))
            )
            for i, nid in enumerate(self.ids):
                fh.write(struct.pack("<Q", int(nid)))
                fh.write(self.vectors[i].astype("<f4", copy=False).tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 18 or data[:4] != EMBEDDING_MAGIC:
            raise FormatError(f"{path}: not an embedding file")
        version, dim, count = struct.unpack_from("<HIQ", data, 4)
        if version != EMBEDDING_VERSION:
            raise FormatError(f"{path}: unsupported embedding version {version}")
        expected = 18 + count * (8 + 4 * dim)
        if len(data) != expected:
            raise FormatError(
                f"{path}: expected {expected} bytes for dim {dim} x {count}, got {len(data)}"
            )
        ids = np.empty(count, dtype=np.int64)
        vectors = np.empty((count, dim), dtype=np.float32)
        offset = 18
        for i in range(count):
            (ids[i],) = struct.unpack_from("<Q", data, offset)
            offset += 8
            vectors[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += 4 * dim
        return cls(ids, vectors)


def train_skipgram(walks: list[list[int]], config: Node2VecConfig) -> EmbeddingTable:
    """Skip-gram with negative sampling over walk corpora.

    Center vectors start uniform in [-0.5/dim, 0.5/dim) (seeded), context
    vectors at zero; negatives come from the unigram^(3/4) distribution and
    the learning rate decays linearly per processed token.
    """
    config.validate()
    if not walks:
        raise ValidationError("walks must be non-empty")
    ids = np.array(sorted({nid for walk in walks for nid in walk}), dtype=np.int64)
    index = {int(nid): i for i, nid in enumerate(ids)}
    n_vocab = len(ids)

    tokens = np.empty(sum(len(w) for w in walks), dtype=np.int32)
    offsets = np.empty(len(walks) + 1, dtype=np.int64)
    offsets[0] = 0
    pos = 0
    for k, walk in enumerate(walks):
        for nid in walk:
            tokens[pos] = index[nid]
            pos += 1
        offsets[k + 1] = pos

    rng = np.random.default_rng(config.seed)
    vec = ((rng.random((n_vocab, config.dim)) - 0.5) / config.dim).astype(np.float32)
    ctx = np.zeros((n_vocab, config.dim), dtype=np.float32)

    if config.epochs > 0:
        counts = np.bincount(tokens, minlength=n_vocab).astype(np.float64)
        noise = build_alias(counts**0.75)
        _sgns_kernel(
            tokens,
            offsets,
            vec,
            ctx,
            config.window,
            config.negatives,
            config.epochs,
            config.learning_rate,
            noise.prob,
            noise.alias,
            np.uint64(_mix64(config.seed, 0x4E32)),
        )
    return EmbeddingTable(ids, vec)


def node2vec(graph: PropertyGraph, config: Node2VecConfig) -> EmbeddingTable:
    """Full pipeline: generate walks, then train skip-gram on them."""
    if graph.num_nodes == 0:
        raise ValidationError("graph is empty")
    return train_skipgram(generate_walks(graph, config), config)
