"""Artistic knowledge-graph engine.

A property-graph store for the art domain, knowledge-discovery queries,
node2vec context embeddings learned on the training subgraph, and a
multi-task multi-modal classifier that fuses visual features with
projected context embeddings to predict artist, style, and genre.
"""

from .classifier import (
    AdamState,
    ClassifierParams,
    LabeledInstance,
    ModelConfig,
    adam_step,
    backward,
    cross_entropy,
    encoder_forward,
    forward,
    init_params,
    load_checkpoint,
    mse_loss,
    predict,
    save_checkpoint,
    total_loss,
    train,
)
from .embeddings import (
    AliasTable,
    EmbeddingTable,
    Node2VecConfig,
    build_alias,
    generate_walks,
    node2vec,
    sample_alias,
    train_skipgram,
    transition_weights,
)
from .errors import (
    ArtGraphError,
    FormatError,
    LeakageError,
    NotFoundError,
    SchemaError,
    ValidationError,
)
from .experiment import (
    ComparisonReport,
    LabelVocabulary,
    SplitAssignment,
    SyntheticSpec,
    assemble_dataset,
    build_instances,
    evaluate,
    generate_synthetic,
    load_features,
    run_comparison,
    save_features,
    split,
    training_graph,
)
from .graph import GraphStats, IngestReport, Node, PropertyGraph
from .queries import (
    DisplacedArtwork,
    PathResult,
    ProfileDocument,
    artworks_at_location,
    artworks_displaced,
    entity_profile,
    influence_paths,
    influence_reachable,
    random_entities,
)
from .schema import EdgeType, NodeLabel

__version__ = "0.1.0"
