"""Independent brute-force oracles used across the test suite.

These deliberately avoid the library's own data structures and algorithms:
plain dicts, sets, and recursion, so they stay a second opinion rather
than a mirror of the implementation under test.
"""

from __future__ import annotations

import numpy as np


def rebuild_excluding(nodes: list[int], triples, exclude: set[int]):
    """(surviving node set, surviving triple set) from raw node/edge lists."""
    keep = [n for n in nodes if n not in exclude]
    kept = set(keep)
    edges = {(s, t, d) for (s, t, d) in triples if s in kept and d in kept}
    return set(keep), edges


def dfs_all_simple_paths(adj: dict[int, list[int]], src: int, dst: int, max_depth: int):
    """Every simple path src -> dst of length <= max_depth (node-id lists)."""
    if src == dst:
        return []
    found: list[list[int]] = []

    def walk(node, path, seen):
        if len(path) - 1 >= max_depth:
            return
        for nxt in adj.get(node, []):
            if nxt in seen:
                continue
            if nxt == dst:
                found.append(path + [nxt])
            else:
                walk(nxt, path + [nxt], seen | {nxt})

    walk(src, [src], {src})
    found.sort(key=lambda p: (len(p), p))
    return found


def bfs_levels(adj: dict[int, list[int]], src: int, max_k: int):
    """Exact shortest-distance layers 1..max_k from src."""
    levels = {k: set() for k in range(1, max_k + 1)}
    seen = {src}
    frontier = [src]
    for k in range(1, max_k + 1):
        nxt = []
        for node in frontier:
            for other in adj.get(node, []):
                if other not in seen:
                    seen.add(other)
                    levels[k].add(other)
                    nxt.append(other)
        frontier = nxt
    return levels


def location_join(triples, place: int, place_label: str):
    """Nested-loop join: artworks stored at a gallery/city/country node."""
    in_city = {(s, d) for (s, t, d) in triples if t == "inCity"}
    in_country = {(s, d) for (s, t, d) in triples if t == "inCountry"}
    located = {(s, d) for (s, t, d) in triples if t == "locatedInGallery"}
    if place_label == "Gallery":
        galleries = {place}
    elif place_label == "City":
        galleries = {g for (g, c) in in_city if c == place}
    else:
        cities = {c for (c, k) in in_country if k == place}
        galleries = {g for (g, c) in in_city if c in cities}
    return {a for (a, g) in located if g in galleries}


def transition_rule(adj: dict[int, set], prev: int, curr: int, p: float, q: float):
    """The 3-case second-order walk weight rule, straight from its definition."""
    out = []
    for cand in sorted(adj.get(curr, ())):
        if cand == prev:
            out.append((cand, 1.0 / p))
        elif cand in adj.get(prev, ()):
            out.append((cand, 1.0))
        else:
            out.append((cand, 1.0 / q))
    return out


def tv_distance(counts: np.ndarray, probs: np.ndarray) -> float:
    """Total-variation distance between empirical counts and a target pmf."""
    freq = counts / counts.sum()
    return 0.5 * float(np.abs(freq - probs).sum())


def degree_counts(adjacency_rows) -> dict:
    """(edge type, direction) -> count from raw adjacency row dumps."""
    out: dict = {}
    for etype, direction in adjacency_rows:
        out[(etype, direction)] = out.get((etype, direction), 0) + 1
    return out


def finite_difference_grads(batch, params, config, step=1e-3):
    """Central finite differences of total_loss for every parameter."""
    from artgraph.classifier import forward, total_loss

    grads = {}
    for name, tensor in params.items():
        g = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = tensor[idx]
            tensor[idx] = orig + step
            up = total_loss(batch, forward(batch, params, config), config)
            tensor[idx] = orig - step
            down = total_loss(batch, forward(batch, params, config), config)
            tensor[idx] = orig
            g[idx] = (up - down) / (2.0 * step)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict, numeric: dict) -> float:
    """Worst per-tensor relative error ||g - fd|| / max(||g||, ||fd||).

    Norm-based comparison is the usual gradient-check measure: central
    differences at step 1e-3 carry O(h^2) truncation on every entry, so
    entry-wise ratios are meaningless wherever the true gradient is small,
    while the tensor-level ratio isolates real derivation mistakes (a wrong
    term shifts it by orders of magnitude, not by 1e-7).
    """
    worst = 0.0
    for name, g in analytic.items():
        fd = numeric[name]
        scale = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        worst = max(worst, float(np.linalg.norm(g - fd) / scale))
    return worst
