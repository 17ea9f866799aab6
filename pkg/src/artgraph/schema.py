"""Node labels, edge types, and the closed edge schema.

The schema table drives validation in :class:`artgraph.graph.PropertyGraph`:
an edge may only be inserted if its (source label, type, target label)
triple appears in ``EDGE_SCHEMA``.
"""

from __future__ import annotations

from enum import Enum


class NodeLabel(str, Enum):
    ARTIST = "Artist"
    ARTWORK = "Artwork"
    TAG = "Tag"
    GENRE = "Genre"
    STYLE = "Style"
    PERIOD = "Period"
    SERIES = "Series"
    AUCTION = "Auction"
    MEDIA = "Media"
    GALLERY = "Gallery"
    CITY = "City"
    COUNTRY = "Country"
    FIELD = "Field"
    MOVEMENT = "Movement"
    TRAINING = "Training"
    CATEGORY = "Category"


class EdgeType(str, Enum):
    # artwork-sourced
    CREATED_BY = "createdBy"
    HAS_TAG = "hasTag"
    HAS_GENRE = "hasGenre"
    HAS_STYLE = "hasStyle"
    IN_PERIOD = "inPeriod"
    PART_OF_SERIES = "partOfSeries"
    SOLD_AT_AUCTION = "soldAtAuction"
    MADE_OF_MEDIA = "madeOfMedia"
    LOCATED_IN_GALLERY = "locatedInGallery"
    COMPLETED_IN = "completedIn"
    # artist-sourced
    HAS_FIELD = "hasField"
    PART_OF_MOVEMENT = "partOfMovement"
    TRAINED_AT = "trainedAt"
    HAS_CATEGORY = "hasCategory"
    INFLUENCED = "influenced"
    TAUGHT_BY = "taughtBy"
    PATRON_OF = "patronOf"
    # location
    IN_CITY = "inCity"
    IN_COUNTRY = "inCountry"


# (source label, target label) pairs allowed per edge type. `completedIn`
# may target a city or a country directly; `inCity` anchors galleries to
# cities so storage locations resolve down to a country.
EDGE_SCHEMA: dict[EdgeType, frozenset[tuple[NodeLabel, NodeLabel]]] = {
    EdgeType.CREATED_BY: frozenset({(NodeLabel.ARTWORK, NodeLabel.ARTIST)}),
    EdgeType.HAS_TAG: frozenset({(NodeLabel.ARTWORK, NodeLabel.TAG)}),
    EdgeType.HAS_GENRE: frozenset({(NodeLabel.ARTWORK, NodeLabel.GENRE)}),
    EdgeType.HAS_STYLE: frozenset({(NodeLabel.ARTWORK, NodeLabel.STYLE)}),
    EdgeType.IN_PERIOD: frozenset({(NodeLabel.ARTWORK, NodeLabel.PERIOD)}),
    EdgeType.PART_OF_SERIES: frozenset({(NodeLabel.ARTWORK, NodeLabel.SERIES)}),
    EdgeType.SOLD_AT_AUCTION: frozenset({(NodeLabel.ARTWORK, NodeLabel.AUCTION)}),
    EdgeType.MADE_OF_MEDIA: frozenset({(NodeLabel.ARTWORK, NodeLabel.MEDIA)}),
    EdgeType.LOCATED_IN_GALLERY: frozenset({(NodeLabel.ARTWORK, NodeLabel.GALLERY)}),
    EdgeType.COMPLETED_IN: frozenset(
        {(NodeLabel.ARTWORK, NodeLabel.CITY), (NodeLabel.ARTWORK, NodeLabel.COUNTRY)}
    ),
    EdgeType.HAS_FIELD: frozenset({(NodeLabel.ARTIST, NodeLabel.FIELD)}),
    EdgeType.PART_OF_MOVEMENT: frozenset({(NodeLabel.ARTIST, NodeLabel.MOVEMENT)}),
    EdgeType.TRAINED_AT: frozenset({(NodeLabel.ARTIST, NodeLabel.TRAINING)}),
    EdgeType.HAS_CATEGORY: frozenset({(NodeLabel.ARTIST, NodeLabel.CATEGORY)}),
    EdgeType.INFLUENCED: frozenset({(NodeLabel.ARTIST, NodeLabel.ARTIST)}),
    EdgeType.TAUGHT_BY: frozenset({(NodeLabel.ARTIST, NodeLabel.ARTIST)}),
    EdgeType.PATRON_OF: frozenset({(NodeLabel.ARTIST, NodeLabel.ARTIST)}),
    EdgeType.IN_CITY: frozenset({(NodeLabel.GALLERY, NodeLabel.CITY)}),
    EdgeType.IN_COUNTRY: frozenset({(NodeLabel.CITY, NodeLabel.COUNTRY)}),
}

# Documented per-label property vocabulary. Unknown keys are preserved on
# the node but flagged in the ingest report.
PROPERTY_VOCAB: dict[NodeLabel, frozenset[str]] = {
    NodeLabel.ARTIST: frozenset(
        {"biography", "birth_date", "death_date", "image_url"}
    ),
    NodeLabel.ARTWORK: frozenset(
        {"description", "completion_date", "image_url", "width", "height"}
    ),
    NodeLabel.GALLERY: frozenset({"description", "address", "image_url"}),
    NodeLabel.AUCTION: frozenset({"description", "date", "price"}),
}
_GENERIC_PROPS = frozenset({"description", "image_url"})


def allowed_props(label: NodeLabel) -> frozenset[str]:
    """Documented property keys for a label (generic fallback otherwise)."""
    return PROPERTY_VOCAB.get(label, _GENERIC_PROPS)


# Stable wire order of the enums; snapshot format v1 encodes labels and
# edge types as indexes into these tuples.
LABEL_ORDER: tuple[NodeLabel, ...] = tuple(NodeLabel)
EDGE_TYPE_ORDER: tuple[EdgeType, ...] = tuple(EdgeType)
