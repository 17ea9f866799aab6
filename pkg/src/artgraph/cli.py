"""Command-line entry point driving the full pipeline.

Stages communicate only through files (snapshot, features, embeddings,
checkpoint) so each is independently runnable and resumable. Every
randomized step takes an explicit seed and is deterministic given it.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Flags read their defaults from ARTGRAPH_<NAME> environment variables
(e.g. ARTGRAPH_SEED, ARTGRAPH_SPLIT_SEED, ARTGRAPH_LISTEN).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import traceback
from pathlib import Path

from . import queries
from .classifier import ModelConfig, load_checkpoint, save_checkpoint, train
from .embeddings import EmbeddingTable, Node2VecConfig, node2vec
from .errors import ArtGraphError, ValidationError
from .experiment import (
    LabelVocabulary,
    SyntheticSpec,
    build_instances,
    evaluate,
    generate_synthetic,
    load_features,
    run_comparison,
    save_features,
    split,
    training_graph,
)
from .graph import PropertyGraph
from .schema import NodeLabel

log = logging.getLogger("artgraph")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class Parser(argparse.ArgumentParser):
    """argparse parser that exits with the documented usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env_default(name: str, fallback, cast=str):
    raw = os.environ.get(f"ARTGRAPH_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        return fallback


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return data


def _emit(payload: dict, out: str | None) -> str:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    return text


def _node2vec_config(args) -> Node2VecConfig:
    fields = _load_json(args.config) if getattr(args, "config", None) else {}
    if args.seed is not None:
        fields.setdefault("seed", args.seed)
    cfg = Node2VecConfig(**fields)
    cfg.validate()
    return cfg


# -- subcommands ------------------------------------------------------------


def cmd_ingest(args) -> int:
    graph = PropertyGraph()
    report = graph.load_graph(args.nodes, args.edges)
    graph.save_snapshot(args.out)
    print(_emit(report.to_dict(), None), end="")
    log.info("snapshot written to %s", args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    fields = _load_json(args.spec) if args.spec else {}
    if args.seed is not None:
        fields.setdefault("seed", args.seed)
    spec = SyntheticSpec.from_dict(fields)
    graph, features = generate_synthetic(spec)
    graph.save_snapshot(args.out_snapshot)
    save_features(args.out_features, features)
    stats = graph.stats()
    print(f"generated {stats.nodes_total} nodes, {stats.edges_total} edges, "
          f"{len(features)} feature vectors")
    return EXIT_OK


def cmd_embed(args) -> int:
    graph = PropertyGraph.load_snapshot(args.snapshot)
    assignment = split(graph, args.split_seed)
    if not assignment.train:
        raise ValidationError("split leaves no training artworks")
    # embeddings must never see held-out artworks
    subgraph = training_graph(graph, assignment)
    table = node2vec(subgraph, _node2vec_config(args))
    table.save(args.out)
    print(f"embedded {len(table)} nodes at dim {table.dim} "
          f"(training graph: {subgraph.num_nodes} nodes)")
    return EXIT_OK


def cmd_train(args) -> int:
    graph = PropertyGraph.load_snapshot(args.snapshot)
    features = load_features(args.features)
    table = EmbeddingTable.load(args.embeddings)
    assignment = split(graph, args.split_seed)
    from .experiment import assemble_dataset

    bundle = assemble_dataset(graph, assignment, table, features)
    overrides = _load_json(args.config) if args.config else {}
    overrides["mode"] = args.mode
    if args.seed is not None:
        overrides.setdefault("seed", args.seed)
    overrides.setdefault("visual_dim", len(next(iter(features.values()))))
    config = ModelConfig(
        num_artists=len(bundle.vocab.artists),
        num_styles=len(bundle.vocab.styles),
        num_genres=len(bundle.vocab.genres),
        context_dim=table.dim,
        **overrides,
    )
    config.validate()
    params, epoch_log = train(bundle.train, config, val_set=bundle.validation)
    save_checkpoint(args.out, params, config, label_vocab=bundle.vocab.to_dict())
    for entry in epoch_log:
        log.info("epoch %d: loss %.6f val %s", entry.epoch, entry.loss, entry.val_accuracy)
    last = epoch_log[-1] if epoch_log else None
    print(f"trained {config.mode} for {config.epochs} epochs on "
          f"{len(bundle.train)} instances"
          + (f" (final loss {last.loss:.6f})" if last else ""))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    bundle = load_checkpoint(args.checkpoint)
    graph = PropertyGraph.load_snapshot(args.snapshot)
    features = load_features(args.features)
    assignment = split(graph, args.split_seed)
    vocab = (
        LabelVocabulary.from_dict(bundle.label_vocab)
        if bundle.label_vocab
        else LabelVocabulary.from_graph(graph)
    )
    test_set, excluded = build_instances(graph, features, assignment.test, vocab)
    accuracy = evaluate(bundle.params, bundle.config, test_set)
    payload = {
        "mode": bundle.config.mode,
        "split_seed": args.split_seed,
        "test_size": len(test_set),
        "excluded_missing_labels": excluded,
        "accuracy": accuracy,
    }
    print(_emit(payload, args.out), end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    if bool(args.spec) == bool(args.snapshot):
        raise ValidationError("pass exactly one of --spec or --snapshot")
    if args.spec:
        fields = _load_json(args.spec)
        if args.seed is not None:
            fields.setdefault("seed", args.seed)
        data = SyntheticSpec.from_dict(fields)
    else:
        if not args.features:
            raise ValidationError("--snapshot requires --features")
        data = (PropertyGraph.load_snapshot(args.snapshot), load_features(args.features))
    overrides = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        overrides.setdefault("seed", args.seed)
    n2v_fields = _load_json(args.n2v_config) if args.n2v_config else {}
    if args.seed is not None:
        n2v_fields.setdefault("seed", args.seed)
    report = run_comparison(
        data,
        split_seed=args.split_seed,
        node2vec_config=Node2VecConfig(**n2v_fields),
        model_overrides=overrides,
    )
    if args.out:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.to_text(), end="")
    return EXIT_OK


def cmd_query(args) -> int:
    graph = PropertyGraph.load_snapshot(args.snapshot)
    if args.query == "influence":
        src = queries.resolve_entity(graph, args.from_, (NodeLabel.ARTIST,))
        dst = queries.resolve_entity(graph, args.to, (NodeLabel.ARTIST,))
        paths = queries.influence_paths(graph, src, dst, args.max_depth)
        payload = {
            "from": graph.nodes[src].name,
            "to": graph.nodes[dst].name,
            "paths": [
                {
                    "artists": [graph.nodes[n].name for n in p.nodes],
                    "edge_types": [t.value for t in p.edge_types],
                }
                for p in paths
            ],
        }
    elif args.query == "displaced":
        report = queries.artworks_displaced(graph)
        payload = {
            "rows": [
                {
                    "artwork": graph.nodes[r.artwork].name,
                    "completed_country": graph.nodes[r.completed_country].name,
                    "stored_country": graph.nodes[r.stored_country].name,
                }
                for r in report.rows
            ],
            "skipped": report.skipped,
        }
    else:  # at-location
        place = queries.resolve_entity(
            graph, args.place, (NodeLabel.GALLERY, NodeLabel.CITY, NodeLabel.COUNTRY)
        )
        artworks = queries.artworks_at_location(graph, place)
        payload = {
            "place": graph.nodes[place].name,
            "artworks": [graph.nodes[a].name for a in artworks],
        }
    print(_emit(payload, args.out), end="")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    graph = PropertyGraph.load_snapshot(args.snapshot)
    app = create_app(
        graph,
        checkpoint=args.checkpoint,
        static_dir=args.static_dir,
        cors_origins=args.cors_origin or None,
    )
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(
        prog="artgraph",
        description="Artistic knowledge-graph engine: ingest, query, embed, "
        "train, evaluate, compare, serve.",
        epilog="Flag defaults can be set via ARTGRAPH_<NAME> environment "
        "variables, e.g. ARTGRAPH_SEED=7.",
    )
    parser.add_argument("--verbose", action="store_true", help="enable info logging")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add_seed(p):
        p.add_argument(
            "--seed",
            type=int,
            default=_env_default("SEED", 42, int),
            help="seed for every randomized step (default: 42)",
        )

    def add_split_seed(p):
        p.add_argument(
            "--split-seed",
            type=int,
            default=_env_default("SPLIT_SEED", 42, int),
            help="seed of the 80/10/10 artwork split (default: 42)",
        )

    p = sub.add_parser("ingest", help="load TSV node/edge files into a snapshot")
    p.add_argument("--nodes", required=True, help="tab-separated node file")
    p.add_argument("--edges", required=True, help="tab-separated edge file")
    p.add_argument("--out", required=True, help="output snapshot path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a planted synthetic graph + features")
    p.add_argument("--spec", help="JSON file with synthetic-spec fields")
    p.add_argument("--out-snapshot", required=True, help="output snapshot path")
    p.add_argument("--out-features", required=True, help="output features path")
    add_seed(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "embed", help="train node2vec embeddings on the training subgraph"
    )
    p.add_argument("--snapshot", required=True, help="graph snapshot path")
    p.add_argument("--config", help="JSON file with node2vec config fields")
    p.add_argument("--out", required=True, help="output embeddings path")
    add_split_seed(p)
    add_seed(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("train", help="train the multi-task classifier")
    p.add_argument("--snapshot", required=True, help="graph snapshot path")
    p.add_argument("--features", required=True, help="visual features path")
    p.add_argument("--embeddings", required=True, help="context embeddings path")
    p.add_argument(
        "--mode",
        choices=("multimodal", "regularization_only", "visual_only"),
        default="multimodal",
        help="model variant (default: multimodal)",
    )
    p.add_argument("--config", help="JSON file with model-config overrides")
    p.add_argument("--out", required=True, help="output checkpoint path")
    add_split_seed(p)
    add_seed(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="per-task accuracy on the test split")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint path")
    p.add_argument("--snapshot", required=True, help="graph snapshot path")
    p.add_argument("--features", required=True, help="visual features path")
    p.add_argument("--out", help="also write the JSON report to this path")
    add_split_seed(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "compare", help="train and evaluate all three modes on one split"
    )
    p.add_argument("--spec", help="synthetic-spec JSON (alternative to --snapshot)")
    p.add_argument("--snapshot", help="graph snapshot path")
    p.add_argument("--features", help="visual features path (with --snapshot)")
    p.add_argument("--config", help="JSON file with model-config overrides")
    p.add_argument("--n2v-config", help="JSON file with node2vec config fields")
    p.add_argument("--out", help="write the JSON report to this path")
    add_split_seed(p)
    add_seed(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("query", help="run a knowledge-discovery query")
    p.add_argument("--snapshot", required=True, help="graph snapshot path")
    p.add_argument("--out", help="also write the JSON result to this path")
    qsub = p.add_subparsers(dest="query", required=True, metavar="QUERY")
    q = qsub.add_parser("influence", help="influence paths between two artists")
    q.add_argument("--from", dest="from_", required=True, metavar="ARTIST",
                   help="source artist id or exact name")
    q.add_argument("--to", required=True, metavar="ARTIST",
                   help="target artist id or exact name")
    q.add_argument("--max-depth", type=int, default=3, help="path length cap (<= 6)")
    q.set_defaults(func=cmd_query)
    q = qsub.add_parser("displaced", help="artworks stored outside their completion country")
    q.set_defaults(func=cmd_query)
    q = qsub.add_parser("at-location", help="artworks kept at a gallery/city/country")
    q.add_argument("--place", required=True, help="place id or exact name")
    q.set_defaults(func=cmd_query)

    p = sub.add_parser("serve", help="serve the HTTP API (and optional web UI)")
    p.add_argument("--snapshot", required=True, help="graph snapshot path")
    p.add_argument("--checkpoint", help="trained checkpoint for /api/predict")
    p.add_argument(
        "--listen",
        default=_env_default("LISTEN", "127.0.0.1:8000"),
        help="host:port to bind (default: 127.0.0.1:8000)",
    )
    p.add_argument("--static-dir", help="directory with the built web UI bundle")
    p.add_argument(
        "--cors-origin",
        action="append",
        help="allowed CORS origin (repeatable)",
    )
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ArtGraphError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
