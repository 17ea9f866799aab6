import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `oracles` importable

from artgraph import PropertyGraph
from artgraph.schema import EdgeType, NodeLabel

SAMPLE_DIR = Path(__file__).resolve().parents[1] / "src" / "artgraph" / "data" / "sample"
FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def sample_paths():
    return SAMPLE_DIR / "nodes.tsv", SAMPLE_DIR / "edges.tsv"


@pytest.fixture(scope="session")
def sample_graph(sample_paths):
    graph = PropertyGraph()
    graph.load_graph(*sample_paths)
    return graph


def random_influence_graph(rng: np.random.Generator, n_artists: int, edge_prob: float):
    """Random directed artist graph; returns (graph, adjacency dict, triples)."""
    graph = PropertyGraph()
    ids = [graph.add_node(NodeLabel.ARTIST, f"artist_{i}") for i in range(n_artists)]
    adj: dict[int, list[int]] = {nid: [] for nid in ids}
    triples = []
    for a in ids:
        for b in ids:
            if a != b and rng.random() < edge_prob:
                graph.add_edge(a, EdgeType.INFLUENCED, b)
                adj[a].append(b)
                triples.append((a, "influenced", b))
    return graph, adj, triples


def random_location_graph(rng: np.random.Generator, n_artworks: int):
    """Random artwork/gallery/city/country graph plus its raw triples."""
    graph = PropertyGraph()
    countries = [graph.add_node(NodeLabel.COUNTRY, f"country_{i}") for i in range(3)]
    cities = [graph.add_node(NodeLabel.CITY, f"city_{i}") for i in range(6)]
    galleries = [graph.add_node(NodeLabel.GALLERY, f"gallery_{i}") for i in range(9)]
    triples = []
    for city in cities:
        country = countries[int(rng.integers(len(countries)))]
        graph.add_edge(city, EdgeType.IN_COUNTRY, country)
        triples.append((city, "inCountry", country))
    for gallery in galleries:
        if rng.random() < 0.9:  # some galleries have no known city
            city = cities[int(rng.integers(len(cities)))]
            graph.add_edge(gallery, EdgeType.IN_CITY, city)
            triples.append((gallery, "inCity", city))
    for i in range(n_artworks):
        artwork = graph.add_node(NodeLabel.ARTWORK, f"artwork_{i}")
        if rng.random() < 0.85:
            gallery = galleries[int(rng.integers(len(galleries)))]
            graph.add_edge(artwork, EdgeType.LOCATED_IN_GALLERY, gallery)
            triples.append((artwork, "locatedInGallery", gallery))
        if rng.random() < 0.85:
            place = (
                cities[int(rng.integers(len(cities)))]
                if rng.random() < 0.8
                else countries[int(rng.integers(len(countries)))]
            )
            graph.add_edge(artwork, EdgeType.COMPLETED_IN, place)
            triples.append((artwork, "completedIn", place))
    return graph, triples
