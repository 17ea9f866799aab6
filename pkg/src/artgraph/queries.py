"""Knowledge-discovery queries over a :class:`PropertyGraph`.

All operations are pure reads and safe under concurrent callers once the
graph has finished loading. Results carry ``to_dict`` methods so the HTTP
service can serialize them without reshaping.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NotFoundError, ValidationError
from .graph import PropertyGraph
from .schema import EdgeType, NodeLabel

MAX_INFLUENCE_DEPTH = 6


@dataclass
class PathResult:
    nodes: list[int]
    edge_types: list[EdgeType]

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edge_types": [t.value for t in self.edge_types],
        }


@dataclass
class DisplacedArtwork:
    artwork: int
    completed_country: int
    stored_country: int

    def to_dict(self) -> dict:
        return {
            "artwork": self.artwork,
            "completed_country": self.completed_country,
            "stored_country": self.stored_country,
        }


@dataclass
class DisplacedReport:
    rows: list[DisplacedArtwork]
    skipped: int

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "skipped": self.skipped}


@dataclass
class NeighborGroup:
    edge_type: EdgeType
    direction: str  # "out" or "in"
    neighbors: list[tuple[int, str, str]]  # (id, name, label)

    def to_dict(self) -> dict:
        return {
            "edge_type": self.edge_type.value,
            "direction": self.direction,
            "neighbors": [
                {"id": nid, "name": name, "label": label}
                for nid, name, label in self.neighbors
            ],
        }


@dataclass
class ProfileDocument:
    id: int
    label: str
    name: str
    props: dict
    groups: list[NeighborGroup] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "label": self.label,
            "name": self.name,
            "props": dict(self.props),
            "groups": [g.to_dict() for g in self.groups],
        }


def _require_artist(graph: PropertyGraph, nid: int) -> None:
    node = graph.node(nid)
    if node.label is not NodeLabel.ARTIST:
        raise ValidationError(f"node {nid} is {node.label.value}, expected Artist")


def influence_paths(
    graph: PropertyGraph,
    from_artist: int,
    to_artist: int,
    max_depth: int,
    edge_types: set[EdgeType] | None = None,
) -> list[PathResult]:
    """All simple influence paths of length <= max_depth, shortest first.

    Paths follow the given artist-to-artist edge types in their stored
    direction (influencer -> influenced by default). Ties at equal length
    are ordered by the node-id sequence.
    """
    _require_artist(graph, from_artist)
    _require_artist(graph, to_artist)
    if not 1 <= max_depth <= MAX_INFLUENCE_DEPTH:
        raise ValidationError(
            f"max_depth must be in [1, {MAX_INFLUENCE_DEPTH}], got {max_depth}"
        )
    if from_artist == to_artist:
        return []
    types = edge_types if edge_types is not None else {EdgeType.INFLUENCED}

    results: list[PathResult] = []
    path = [from_artist]
    types_taken: list[EdgeType] = []
    on_path = {from_artist}

    def extend(current: int) -> None:
        if len(path) - 1 >= max_depth:
            return
        for etype, nxt in graph.out_adj[current]:
            if etype not in types or nxt in on_path:
                continue
            path.append(nxt)
            types_taken.append(etype)
            if nxt == to_artist:
                results.append(PathResult(list(path), list(types_taken)))
            else:
                on_path.add(nxt)
                extend(nxt)
                on_path.discard(nxt)
            path.pop()
            types_taken.pop()

    extend(from_artist)
    results.sort(key=lambda r: (len(r.nodes), r.nodes))
    return results


def influence_reachable(
    graph: PropertyGraph,
    artist: int,
    degrees: int,
    edge_types: set[EdgeType] | None = None,
) -> dict[int, set[int]]:
    """Artists at each exact shortest influence distance 1..degrees."""
    _require_artist(graph, artist)
    if not 1 <= degrees <= MAX_INFLUENCE_DEPTH:
        raise ValidationError(
            f"degrees must be in [1, {MAX_INFLUENCE_DEPTH}], got {degrees}"
        )
    types = edge_types if edge_types is not None else {EdgeType.INFLUENCED}
    levels: dict[int, set[int]] = {k: set() for k in range(1, degrees + 1)}
    seen = {artist}
    frontier = deque([(artist, 0)])
    while frontier:
        current, dist = frontier.popleft()
        if dist >= degrees:
            continue
        for etype, nxt in graph.out_adj[current]:
            if etype not in types or nxt in seen:
                continue
            seen.add(nxt)
            levels[dist + 1].add(nxt)
            frontier.append((nxt, dist + 1))
    return levels


def artworks_displaced(graph: PropertyGraph) -> DisplacedReport:
    """Artworks stored in a different country than they were completed in.

    Completion resolves through completedIn (directly a country, or a city's
    inCountry edge); storage through locatedInGallery -> inCity -> inCountry.
    Artworks with either chain incomplete are skipped and counted. Where a
    node has several edges of one type, insertion order decides.

    Works off the per-type edge index (linear passes plus dict joins) so a
    full scan stays well under the latency budget at the 75k-node scale.
    """
    def first_wins(etype: EdgeType) -> dict[int, int]:
        # building a dict from the reversed pair list keeps the first edge
        # per source, at C speed
        return dict(reversed(graph.edge_index.get(etype, [])))

    city_country = first_wins(EdgeType.IN_COUNTRY)
    gallery_city = first_wins(EdgeType.IN_CITY)
    completed_place = first_wins(EdgeType.COMPLETED_IN)
    stored_gallery = first_wins(EdgeType.LOCATED_IN_GALLERY)
    countries = set(graph.label_index.get(NodeLabel.COUNTRY, ()))

    rows: list[DisplacedArtwork] = []
    skipped = 0
    for artwork, place in completed_place.items():
        gallery = stored_gallery.get(artwork)
        if gallery is None:
            skipped += 1
            continue
        completed_country = place if place in countries else city_country.get(place)
        city = gallery_city.get(gallery)
        stored_country = city_country.get(city) if city is not None else None
        if completed_country is None or stored_country is None:
            skipped += 1
            continue
        if completed_country != stored_country:
            rows.append(DisplacedArtwork(artwork, completed_country, stored_country))
    skipped += len(graph.label_index.get(NodeLabel.ARTWORK, ())) - len(completed_place)
    rows.sort(key=lambda r: r.artwork)
    return DisplacedReport(rows, skipped)


def artworks_at_location(graph: PropertyGraph, place: int) -> list[int]:
    """Artwork ids stored at a gallery, or anywhere in a city or country."""
    node = graph.node(place)
    if node.label is NodeLabel.GALLERY:
        galleries = [place]
    elif node.label is NodeLabel.CITY:
        galleries = [
            src for etype, src in graph.in_adj[place] if etype is EdgeType.IN_CITY
        ]
    elif node.label is NodeLabel.COUNTRY:
        cities = [
            src for etype, src in graph.in_adj[place] if etype is EdgeType.IN_COUNTRY
        ]
        galleries = [
            src
            for city in cities
            for etype, src in graph.in_adj[city]
            if etype is EdgeType.IN_CITY
        ]
    else:
        raise ValidationError(
            f"node {place} is {node.label.value}, expected Gallery, City, or Country"
        )
    found: set[int] = set()
    for gallery in galleries:
        for etype, src in graph.in_adj[gallery]:
            if etype is EdgeType.LOCATED_IN_GALLERY:
                found.add(src)
    return sorted(found)


def entity_profile(graph: PropertyGraph, nid: int) -> ProfileDocument:
    """Node properties plus neighbors grouped by (edge type, direction)."""
    node = graph.node(nid)
    grouped: dict[tuple[EdgeType, str], list[tuple[int, str, str]]] = {}
    for direction, adj in (("out", graph.out_adj[nid]), ("in", graph.in_adj[nid])):
        for etype, other in adj:
            other_node = graph.nodes[other]
            grouped.setdefault((etype, direction), []).append(
                (other, other_node.name, other_node.label.value)
            )
    groups = [
        NeighborGroup(etype, direction, members)
        for (etype, direction), members in sorted(
            grouped.items(), key=lambda kv: (kv[0][0].value, kv[0][1])
        )
    ]
    return ProfileDocument(nid, node.label.value, node.name, dict(node.props), groups)


def resolve_entity(
    graph: PropertyGraph, raw: str | int, labels: tuple[NodeLabel, ...]
) -> int:
    """Resolve a numeric id or an exact node name within the given labels."""
    try:
        return int(raw)
    except (TypeError, ValueError):
        pass
    for label in labels:
        nid = graph.find(label, str(raw))
        if nid is not None:
            return nid
    raise NotFoundError(
        f"no {'/'.join(l.value for l in labels)} named {raw!r}"
    )


def random_entities(
    graph: PropertyGraph, label: NodeLabel, n: int, seed: int
) -> list[int]:
    """Seeded sample of n distinct node ids with the given label."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    pool = graph.label_index.get(NodeLabel(label), [])
    if not pool or n == 0:
        return []
    rng = np.random.default_rng(seed)
    take = min(n, len(pool))
    picked = rng.permutation(len(pool))[:take]
    return [pool[i] for i in picked]
