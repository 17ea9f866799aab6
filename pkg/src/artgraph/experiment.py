"""Split protocol, leakage-safe pipeline, synthetic data, and the
three-mode comparison harness.

The cardinal rule here: context embeddings are learned on the training
subgraph only. ``training_graph`` drops validation/test artworks wholesale
(nodes and incident edges), and ``assemble_dataset`` hard-fails if it is
handed an embedding table that knows about held-out artworks.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .classifier import (
    LabeledInstance,
    ModelConfig,
    MODES,
    TASKS,
    accuracy,
    train,
)
from .embeddings import EmbeddingTable, Node2VecConfig, node2vec
from .errors import FormatError, LeakageError, ValidationError
from .graph import PropertyGraph
from .schema import EdgeType, NodeLabel

FEATURES_MAGIC = b"AGVF"
FEATURES_VERSION = 1
DATASET_MAGIC = b"AGDS"
DATASET_VERSION = 1

TRAIN_FRACTION, VAL_FRACTION, TEST_FRACTION = 0.8, 0.1, 0.1


@dataclass
class SplitAssignment:
    train: set[int]
    validation: set[int]
    test: set[int]
    seed: int

    def held_out(self) -> set[int]:
        return self.validation | self.test


def split(graph: PropertyGraph, seed: int) -> SplitAssignment:
    """Seeded uniform 80/10/10 partition of the artwork nodes.

    Validation and test each take floor(N/10); training takes the rest.
    Non-artwork nodes are never assigned; they stay in every graph view.
    """
    artworks = graph.nodes_with_label(NodeLabel.ARTWORK)
    if not artworks:
        raise ValidationError("graph contains no artworks to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(artworks))
    n_val = len(artworks) // 10
    n_test = len(artworks) // 10
    val = {artworks[i] for i in order[:n_val]}
    test = {artworks[i] for i in order[n_val : n_val + n_test]}
    tr = {artworks[i] for i in order[n_val + n_test :]}
    return SplitAssignment(tr, val, test, seed)


def training_graph(graph: PropertyGraph, assignment: SplitAssignment) -> PropertyGraph:
    """Graph with every validation/test artwork (and its edges) removed."""
    return graph.subgraph_excluding(assignment.held_out())


@dataclass
class LabelVocabulary:
    """Stable class-index assignment: names sorted alphabetically per task."""

    artists: list[str]
    styles: list[str]
    genres: list[str]

    @classmethod
    def from_graph(cls, graph: PropertyGraph) -> "LabelVocabulary":
        def names(label: NodeLabel) -> list[str]:
            return sorted(graph.nodes[nid].name for nid in graph.nodes_with_label(label))

        return cls(names(NodeLabel.ARTIST), names(NodeLabel.STYLE), names(NodeLabel.GENRE))

    def class_lists(self) -> dict[str, list[str]]:
        return {"artist": self.artists, "style": self.styles, "genre": self.genres}

    def to_dict(self) -> dict:
        return self.class_lists()

    @classmethod
    def from_dict(cls, data: dict) -> "LabelVocabulary":
        return cls(list(data["artist"]), list(data["style"]), list(data["genre"]))


@dataclass
class DatasetBundle:
    train: list[LabeledInstance]
    validation: list[LabeledInstance]
    test: list[LabeledInstance]
    vocab: LabelVocabulary
    excluded_missing_labels: int


def _label_targets(graph: PropertyGraph, artwork: int) -> tuple[str, str, str] | None:
    artist = style = genre = None
    for etype, dst in graph.out_adj[artwork]:
        if etype is EdgeType.CREATED_BY and artist is None:
            artist = graph.nodes[dst].name
        elif etype is EdgeType.HAS_STYLE and style is None:
            style = graph.nodes[dst].name
        elif etype is EdgeType.HAS_GENRE and genre is None:
            genre = graph.nodes[dst].name
    if artist is None or style is None or genre is None:
        return None
    return artist, style, genre


def build_instances(
    graph: PropertyGraph,
    visual_features: dict[int, np.ndarray],
    artworks,
    vocab: LabelVocabulary,
    embeddings: EmbeddingTable | None = None,
) -> tuple[list[LabeledInstance], int]:
    """Labeled instances for the given artworks, in graph insertion order.

    Artworks missing any of the three label edges are dropped and counted.
    When an embedding table is given, every surviving instance carries its
    context vector (missing coverage is an error).
    """
    index = {
        task: {name: i for i, name in enumerate(names)}
        for task, names in vocab.class_lists().items()
    }
    wanted = set(artworks)
    instances: list[LabeledInstance] = []
    excluded = 0
    for artwork in graph.nodes_with_label(NodeLabel.ARTWORK):
        if artwork not in wanted:
            continue
        targets = _label_targets(graph, artwork)
        if targets is None:
            excluded += 1
            continue
        try:
            visual = visual_features[artwork]
        except KeyError:
            raise ValidationError(f"no visual features for artwork {artwork}") from None
        labels = (
            index["artist"][targets[0]],
            index["style"][targets[1]],
            index["genre"][targets[2]],
        )
        context = None
        if embeddings is not None:
            if artwork not in embeddings:
                raise ValidationError(
                    f"artwork {artwork} missing from embedding table"
                )
            context = np.asarray(embeddings.vector(artwork), dtype=np.float64)
        instances.append(LabeledInstance(artwork, visual, labels, context))
    return instances, excluded


def assemble_dataset(
    graph: PropertyGraph,
    assignment: SplitAssignment,
    embeddings: EmbeddingTable,
    visual_features: dict[int, np.ndarray],
) -> DatasetBundle:
    """Build labeled train/val/test instances from the graph and features.

    Training instances carry their true context embedding; validation and
    test instances never do, so inference must go through the encoder.
    An embedding table containing any held-out artwork id is rejected.
    """
    held_out = assignment.held_out()
    leaked = held_out & embeddings.id_set()
    if leaked:
        raise LeakageError(
            f"embedding table contains {len(leaked)} held-out artwork ids "
            f"(e.g. {min(leaked)}); embeddings must be trained on the training graph"
        )
    vocab = LabelVocabulary.from_graph(graph)
    train_set, excluded_train = build_instances(
        graph, visual_features, assignment.train, vocab, embeddings
    )
    val_set, excluded_val = build_instances(
        graph, visual_features, assignment.validation, vocab
    )
    test_set, excluded_test = build_instances(
        graph, visual_features, assignment.test, vocab
    )
    return DatasetBundle(
        train_set, val_set, test_set, vocab,
        excluded_train + excluded_val + excluded_test,
    )


# -- synthetic planted data -----------------------------------------------------


@dataclass
class SyntheticSpec:
    num_artists: int = 20
    num_styles: int = 5
    num_genres: int = 5
    artworks_per_artist: int = 100
    visual_noise: float = 6.0
    context_signal: float = 0.9
    seed: int = 0
    visual_dim: int = 2048

    def validate(self) -> None:
        for name in ("num_artists", "num_styles", "num_genres", "artworks_per_artist"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if not 0.0 <= self.context_signal <= 1.0:
            raise ValidationError("context_signal must be in [0, 1]")
        if self.visual_noise < 0:
            raise ValidationError("visual_noise must be >= 0")
        if self.visual_dim < 1:
            raise ValidationError("visual_dim must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        spec = cls(**data)
        spec.validate()
        return spec


def generate_synthetic(
    spec: SyntheticSpec,
) -> tuple[PropertyGraph, dict[int, np.ndarray]]:
    """Planted-rule graph plus synthetic visual features.

    Every artist has a home style and genre (assigned round-robin so each
    class is populated); an artwork inherits them with probability
    context_signal, otherwise uniformly at random. Movements group artists
    by home style, making the graph context informative.

    Visual features are the artwork's artist prototype plus Gaussian noise
    of scale visual_noise, rescaled to unit per-dimension variance so the
    encoder's tanh layers start in their active range at any noise level.
    Style and genre reach the visual features only through the planted
    artist correlation, which is exactly the regime where contextual
    knowledge can help.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    graph = PropertyGraph()
    styles = [graph.add_node(NodeLabel.STYLE, f"style_{i:02d}") for i in range(spec.num_styles)]
    genres = [graph.add_node(NodeLabel.GENRE, f"genre_{i:02d}") for i in range(spec.num_genres)]
    movements = [
        graph.add_node(NodeLabel.MOVEMENT, f"movement_{i:02d}")
        for i in range(spec.num_styles)
    ]
    artists = []
    for i in range(spec.num_artists):
        artist = graph.add_node(NodeLabel.ARTIST, f"artist_{i:02d}")
        artists.append(artist)
        graph.add_edge(artist, EdgeType.PART_OF_MOVEMENT, movements[i % spec.num_styles])

    proto_artist = rng.normal(size=(spec.num_artists, spec.visual_dim))
    scale = 1.0 / np.sqrt(1.0 + spec.visual_noise**2)

    features: dict[int, np.ndarray] = {}
    for i in range(spec.num_artists):
        home_style = i % spec.num_styles
        home_genre = i % spec.num_genres
        for k in range(spec.artworks_per_artist):
            s = home_style if rng.random() < spec.context_signal else int(
                rng.integers(spec.num_styles)
            )
            g = home_genre if rng.random() < spec.context_signal else int(
                rng.integers(spec.num_genres)
            )
            artwork = graph.add_node(NodeLabel.ARTWORK, f"artwork_{i:03d}_{k:03d}")
            graph.add_edge(artwork, EdgeType.CREATED_BY, artists[i])
            graph.add_edge(artwork, EdgeType.HAS_STYLE, styles[s])
            graph.add_edge(artwork, EdgeType.HAS_GENRE, genres[g])
            visual = scale * (
                proto_artist[i] + spec.visual_noise * rng.normal(size=spec.visual_dim)
            )
            features[artwork] = visual.astype(np.float32)
    return graph, features


# -- evaluation and comparison ----------------------------------------------------


def evaluate(
    params, config: ModelConfig, test_set: list[LabeledInstance]
) -> dict[str, float]:
    """Per-task accuracy of argmax predictions on a held-out set."""
    if not test_set:
        raise ValidationError("test set must be non-empty")
    return accuracy(params, config, test_set)


@dataclass
class ComparisonReport:
    config_fingerprint: str
    split_seed: int
    sizes: dict[str, int]
    modes: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config_fingerprint": self.config_fingerprint,
            "split_seed": self.split_seed,
            "sizes": dict(self.sizes),
            "modes": {m: dict(acc) for m, acc in self.modes.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        """Aligned table: rows are modes, columns are tasks."""
        width = max(len(m) for m in self.modes)
        lines = [
            f"{'mode'.ljust(width)}  " + "  ".join(f"{t:>8}" for t in TASKS),
        ]
        for mode, acc in self.modes.items():
            cells = "  ".join(f"{acc[t]:8.4f}" for t in TASKS)
            lines.append(f"{mode.ljust(width)}  {cells}")
        lines.append(f"fingerprint: {self.config_fingerprint}")
        return "\n".join(lines) + "\n"


def config_fingerprint(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def run_comparison(
    data: "SyntheticSpec | tuple[PropertyGraph, dict[int, np.ndarray]]",
    split_seed: int = 42,
    node2vec_config: Node2VecConfig | None = None,
    model_overrides: dict | None = None,
) -> ComparisonReport:
    """Train visual_only / regularization_only / multimodal on one split.

    All three modes share the split, the embedding table, and the model
    seed, so the report isolates the effect of contextual knowledge.
    """
    if isinstance(data, SyntheticSpec):
        graph, features = generate_synthetic(data)
    else:
        graph, features = data
    n2v = node2vec_config or Node2VecConfig()
    overrides = dict(model_overrides or {})
    overrides.setdefault("visual_dim", len(next(iter(features.values()))))

    assignment = split(graph, split_seed)
    table = node2vec(training_graph(graph, assignment), n2v)
    bundle = assemble_dataset(graph, assignment, table, features)

    base = ModelConfig(
        num_artists=len(bundle.vocab.artists),
        num_styles=len(bundle.vocab.styles),
        num_genres=len(bundle.vocab.genres),
        context_dim=n2v.dim,
        **overrides,
    )
    fingerprint = config_fingerprint(
        {
            "split_seed": split_seed,
            "node2vec": asdict(n2v),
            "model": base.to_dict(),
            "data": data.to_dict() if isinstance(data, SyntheticSpec) else None,
        }
    )
    report = ComparisonReport(
        config_fingerprint=fingerprint,
        split_seed=split_seed,
        sizes={
            "train": len(bundle.train),
            "validation": len(bundle.validation),
            "test": len(bundle.test),
            "excluded_missing_labels": bundle.excluded_missing_labels,
        },
    )
    for mode in MODES:
        cfg_dict = base.to_dict()
        cfg_dict["mode"] = mode
        config = ModelConfig.from_dict(cfg_dict)
        params, _ = train(bundle.train, config)
        report.modes[mode] = evaluate(params, config, bundle.test)
    return report


# -- feature and dataset files -------------------------------------------------------


def save_features(path: str | Path, features: dict[int, np.ndarray]) -> None:
    """Binary artwork-id -> float32 visual feature vector map."""
    if not features:
        raise ValidationError("features must be non-empty")
    dims = {np.asarray(v).shape for v in features.values()}
    if len(dims) != 1 or len(next(iter(dims))) != 1:
        raise ValidationError("all feature vectors must share one 1-d shape")
    dim = next(iter(dims))[0]
    with open(path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<HIQ", FEATURES_VERSION, dim, len(features)))
        for nid in sorted(features):
            fh.write(struct.pack("<Q", nid))
            fh.write(np.asarray(features[nid], dtype="<f4").tobytes())


def load_features(path: str | Path) -> dict[int, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 18 or data[:4] != FEATURES_MAGIC:
        raise FormatError(f"{path}: not a features file")
    version, dim, count = struct.unpack_from("<HIQ", data, 4)
    if version != FEATURES_VERSION:
        raise FormatError(f"{path}: unsupported features version {version}")
    expected = 18 + count * (8 + 4 * dim)
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, got {len(data)}")
    features: dict[int, np.ndarray] = {}
    offset = 18
    for _ in range(count):
        (nid,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        features[nid] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
    return features


def save_dataset(
    path: str | Path,
    instances: list[LabeledInstance],
    vocab: LabelVocabulary,
    names: dict[int, str],
) -> None:
    """Self-describing instance file: manifest header, then packed rows.

    Each row stores the artwork name and id, the visual vector, the three
    class indices, and (when present) the true context embedding.
    """
    if not instances:
        raise ValidationError("instances must be non-empty")
    visual_dim = len(np.asarray(instances[0].visual))
    context_dims = {
        len(np.asarray(i.context)) for i in instances if i.context is not None
    }
    if len(context_dims) > 1:
        raise ValidationError("inconsistent context dims")
    context_dim = context_dims.pop() if context_dims else 0
    manifest = {
        "count": len(instances),
        "visual_dim": visual_dim,
        "context_dim": context_dim,
        "label_vocab": vocab.to_dict(),
    }
    manifest_b = json.dumps(manifest, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<H", DATASET_VERSION))
        fh.write(struct.pack("<I", len(manifest_b)))
        fh.write(manifest_b)
        for inst in instances:
            name_b = names[inst.artwork].encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<Q", inst.artwork))
            fh.write(np.asarray(inst.visual, dtype="<f4").tobytes())
            fh.write(struct.pack("<III", *inst.labels))
            if inst.context is not None:
                fh.write(struct.pack("<B", 1))
                fh.write(np.asarray(inst.context, dtype="<f4").tobytes())
            else:
                fh.write(struct.pack("<B", 0))


def load_dataset(
    path: str | Path,
) -> tuple[list[LabeledInstance], LabelVocabulary, dict[int, str]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 10 or data[:4] != DATASET_MAGIC:
        raise FormatError(f"{path}: not a dataset file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != DATASET_VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    (manifest_len,) = struct.unpack_from("<I", data, 6)
    offset = 10
    manifest = json.loads(data[offset : offset + manifest_len].decode("utf-8"))
    offset += manifest_len
    visual_dim = manifest["visual_dim"]
    context_dim = manifest["context_dim"]
    vocab = LabelVocabulary.from_dict(manifest["label_vocab"])
    instances: list[LabeledInstance] = []
    names: dict[int, str] = {}
    for _ in range(manifest["count"]):
        if offset + 2 > len(data):
            raise FormatError(f"{path}: truncated dataset")
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (nid,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        visual = np.frombuffer(data, dtype="<f4", count=visual_dim, offset=offset).copy()
        offset += 4 * visual_dim
        labels = struct.unpack_from("<III", data, offset)
        offset += 12
        (has_context,) = struct.unpack_from("<B", data, offset)
        offset += 1
        context = None
        if has_context:
            context = np.frombuffer(
                data, dtype="<f4", count=context_dim, offset=offset
            ).copy()
            offset += 4 * context_dim
        names[nid] = name
        instances.append(LabeledInstance(nid, visual, tuple(labels), context))
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes in dataset")
    return instances, vocab, names
