"""In-memory property graph with bulk ingestion and snapshot persistence.

Nodes are identified by dense integer ids assigned at insertion and are
deduplicated on (label, name). Adjacency is kept in both directions so
neighbor queries are O(degree) either way. The graph is single-writer;
once loaded it can be shared freely between reader threads.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError, NotFoundError, SchemaError, ValidationError
from .schema import (
    EDGE_SCHEMA,
    EDGE_TYPE_ORDER,
    LABEL_ORDER,
    EdgeType,
    NodeLabel,
    allowed_props,
)

SNAPSHOT_MAGIC = b"AGPH"
SNAPSHOT_VERSION = 1

Scalar = str | int | float


@dataclass
class Node:
    id: int
    label: NodeLabel
    name: str
    props: dict[str, Scalar] = field(default_factory=dict)


@dataclass
class GraphStats:
    nodes_total: int
    edges_total: int
    nodes_by_label: dict[str, int]
    edges_by_type: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "nodes_total": self.nodes_total,
            "edges_total": self.edges_total,
            "nodes_by_label": dict(self.nodes_by_label),
            "edges_by_type": dict(self.edges_by_type),
        }


@dataclass
class IngestReport:
    nodes_loaded: int = 0
    edges_loaded: int = 0
    nodes_by_label: dict[str, int] = field(default_factory=dict)
    edges_by_type: dict[str, int] = field(default_factory=dict)
    duplicate_nodes: int = 0
    duplicate_edges: int = 0
    rejected_rows: list[dict] = field(default_factory=list)
    unknown_prop_keys: list[dict] = field(default_factory=list)

    def reject(self, path: str, line: int, reason: str) -> None:
        self.rejected_rows.append({"file": path, "line": line, "reason": reason})

    def to_dict(self) -> dict:
        return {
            "nodes_loaded": self.nodes_loaded,
            "edges_loaded": self.edges_loaded,
            "nodes_by_label": dict(self.nodes_by_label),
            "edges_by_type": dict(self.edges_by_type),
            "duplicate_nodes": self.duplicate_nodes,
            "duplicate_edges": self.duplicate_edges,
            "rejected_rows": list(self.rejected_rows),
            "unknown_prop_keys": list(self.unknown_prop_keys),
        }


class PropertyGraph:
    """Typed property graph with mirrored adjacency and name/label indexes."""

    def __init__(self) -> None:
        self.nodes: dict[int, Node] = {}
        self.out_adj: dict[int, list[tuple[EdgeType, int]]] = {}
        self.in_adj: dict[int, list[tuple[EdgeType, int]]] = {}
        self.label_index: dict[NodeLabel, list[int]] = {}
        self.name_index: dict[tuple[NodeLabel, str], int] = {}
        self.edge_index: dict[EdgeType, list[tuple[int, int]]] = {}
        self._edge_set: set[tuple[int, EdgeType, int]] = set()
        self._next_id = 0

    # -- mutation ----------------------------------------------------------

    def add_node(
        self, label: NodeLabel, name: str, props: dict[str, Scalar] | None = None
    ) -> int:
        """Insert or upsert a node; returns its id.

        Re-adding an existing (label, name) merges the given props into the
        stored node and returns the original id.
        """
        if not name:
            raise ValidationError("node name must be non-empty")
        label = NodeLabel(label)
        existing = self.name_index.get((label, name))
        if existing is not None:
            if props:
                self.nodes[existing].props.update(props)
            return existing
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = Node(nid, label, name, dict(props) if props else {})
        self.out_adj[nid] = []
        self.in_adj[nid] = []
        self.label_index.setdefault(label, []).append(nid)
        self.name_index[(label, name)] = nid
        return nid

    def add_edge(self, src: int, type: EdgeType, dst: int) -> bool:
        """Insert a typed edge; returns False if it was already present."""
        type = EdgeType(type)
        src_node = self.nodes.get(src)
        dst_node = self.nodes.get(dst)
        if src_node is None or dst_node is None:
            missing = src if src_node is None else dst
            raise NotFoundError(f"node {missing} does not exist")
        if (src_node.label, dst_node.label) not in EDGE_SCHEMA[type]:
            raise SchemaError(
                f"{type.value} edge not allowed from "
                f"{src_node.label.value} to {dst_node.label.value}"
            )
        key = (src, type, dst)
        if key in self._edge_set:
            return False
        self._edge_set.add(key)
        self.out_adj[src].append((type, dst))
        self.in_adj[dst].append((type, src))
        self.edge_index.setdefault(type, []).append((src, dst))
        return True

    # -- lookup ------------------------------------------------------------

    def node(self, nid: int) -> Node:
        try:
            return self.nodes[nid]
        except KeyError:
            raise NotFoundError(f"node {nid} does not exist") from None

    def find(self, label: NodeLabel, name: str) -> int | None:
        return self.name_index.get((NodeLabel(label), name))

    def nodes_with_label(self, label: NodeLabel) -> list[int]:
        return list(self.label_index.get(NodeLabel(label), []))

    def neighbors(
        self,
        nid: int,
        direction: str = "out",
        type_filter: set[EdgeType] | None = None,
    ) -> list[tuple[EdgeType, int]]:
        """Adjacent (edge type, node id) pairs in insertion order.

        ``direction`` is one of out/in/both; with both, out-edges precede
        in-edges.
        """
        if nid not in self.nodes:
            raise NotFoundError(f"node {nid} does not exist")
        if direction not in ("out", "in", "both"):
            raise ValidationError(f"bad direction {direction!r}")
        rows: list[tuple[EdgeType, int]] = []
        if direction in ("out", "both"):
            rows.extend(self.out_adj[nid])
        if direction in ("in", "both"):
            rows.extend(self.in_adj[nid])
        if type_filter is not None:
            rows = [r for r in rows if r[0] in type_filter]
        return rows

    def has_edge(self, src: int, type: EdgeType, dst: int) -> bool:
        return (src, type, dst) in self._edge_set

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self._edge_set)

    def stats(self) -> GraphStats:
        by_label = {
            label.value: len(ids) for label, ids in self.label_index.items() if ids
        }
        by_type = {
            t.value: len(pairs) for t, pairs in self.edge_index.items() if pairs
        }
        return GraphStats(
            nodes_total=len(self.nodes),
            edges_total=len(self._edge_set),
            nodes_by_label=by_label,
            edges_by_type=by_type,
        )

    # -- derived graphs ------------------------------------------------------

    def subgraph_excluding(self, exclude: set[int]) -> "PropertyGraph":
        """Copy of the graph without the given nodes or their incident edges.

        Surviving nodes keep their ids (so embedding tables and split
        assignments computed on the parent remain valid); the original
        graph is left untouched.
        """
        missing = [nid for nid in exclude if nid not in self.nodes]
        if missing:
            raise NotFoundError(f"node {missing[0]} does not exist")
        sub = PropertyGraph()
        sub._next_id = self._next_id
        for nid, node in self.nodes.items():
            if nid in exclude:
                continue
            sub.nodes[nid] = Node(nid, node.label, node.name, dict(node.props))
            sub.out_adj[nid] = []
            sub.in_adj[nid] = []
            sub.label_index.setdefault(node.label, []).append(nid)
            sub.name_index[(node.label, node.name)] = nid
        for (src, etype, dst) in self._iter_edges():
            if src in exclude or dst in exclude:
                continue
            sub._edge_set.add((src, etype, dst))
            sub.out_adj[src].append((etype, dst))
            sub.in_adj[dst].append((etype, src))
            sub.edge_index.setdefault(etype, []).append((src, dst))
        return sub

    def _iter_edges(self):
        for src, rows in self.out_adj.items():
            for etype, dst in rows:
                yield (src, etype, dst)

    # -- bulk ingestion ------------------------------------------------------

    def load_graph(self, nodes_path: str | Path, edges_path: str | Path) -> IngestReport:
        """Populate the graph from tab-separated node and edge files.

        Malformed rows are recorded in the report and skipped; unreadable
        files raise. Re-loading the same files is idempotent.
        """
        report = IngestReport()
        self._load_nodes(Path(nodes_path), report)
        self._load_edges(Path(edges_path), report)
        return report

    def _load_nodes(self, path: Path, report: IngestReport) -> None:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
            header = next(reader, None)
            if header != ["label", "name", "props"]:
                raise FormatError(f"{path}: bad node header {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 3:
                    report.reject(str(path), lineno, f"expected 3 columns, got {len(row)}")
                    continue
                raw_label, name, raw_props = row
                try:
                    label = NodeLabel(raw_label)
                except ValueError:
                    report.reject(str(path), lineno, f"unknown label {raw_label!r}")
                    continue
                if not name:
                    report.reject(str(path), lineno, "empty name")
                    continue
                props: dict[str, Scalar] = {}
                if raw_props.strip():
                    try:
                        parsed = json.loads(raw_props)
                    except json.JSONDecodeError as exc:
                        report.reject(str(path), lineno, f"bad props JSON: {exc}")
                        continue
                    if not isinstance(parsed, dict):
                        report.reject(str(path), lineno, "props is not a JSON object")
                        continue
                    bad_value = next(
                        (k for k, v in parsed.items() if not isinstance(v, (str, int, float))),
                        None,
                    )
                    if bad_value is not None:
                        report.reject(
                            str(path), lineno, f"non-scalar prop value for {bad_value!r}"
                        )
                        continue
                    props = parsed
                unknown = sorted(set(props) - allowed_props(label))
                if unknown:
                    report.unknown_prop_keys.append(
                        {"label": label.value, "name": name, "keys": unknown}
                    )
                if (label, name) in self.name_index:
                    report.duplicate_nodes += 1
                self.add_node(label, name, props)
                report.nodes_loaded += 1
                report.nodes_by_label[label.value] = (
                    report.nodes_by_label.get(label.value, 0) + 1
                )

    def _load_edges(self, path: Path, report: IngestReport) -> None:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
            header = next(reader, None)
            if header != ["src_label", "src_name", "type", "dst_label", "dst_name"]:
                raise FormatError(f"{path}: bad edge header {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 5:
                    report.reject(str(path), lineno, f"expected 5 columns, got {len(row)}")
                    continue
                raw_src_label, src_name, raw_type, raw_dst_label, dst_name = row
                try:
                    src_label = NodeLabel(raw_src_label)
                    dst_label = NodeLabel(raw_dst_label)
                except ValueError as exc:
                    report.reject(str(path), lineno, f"unknown label: {exc}")
                    continue
                try:
                    etype = EdgeType(raw_type)
                except ValueError:
                    report.reject(str(path), lineno, f"unknown edge type {raw_type!r}")
                    continue
                src = self.name_index.get((src_label, src_name))
                dst = self.name_index.get((dst_label, dst_name))
                if src is None or dst is None:
                    which = src_name if src is None else dst_name
                    report.reject(str(path), lineno, f"unknown node {which!r}")
                    continue
                try:
                    inserted = self.add_edge(src, etype, dst)
                except SchemaError as exc:
                    report.reject(str(path), lineno, str(exc))
                    continue
                if not inserted:
                    report.duplicate_edges += 1
                    continue
                report.edges_loaded += 1
                report.edges_by_type[etype.value] = (
                    report.edges_by_type.get(etype.value, 0) + 1
                )

    # -- snapshot persistence -------------------------------------------------

    def save_snapshot(self, path: str | Path) -> None:
        """Write the graph to a versioned binary snapshot."""
        nodes_buf = io.BytesIO()
        nodes_buf.write(struct.pack("<QQ", self._next_id, len(self.nodes)))
        for node in self.nodes.values():
            name_b = node.name.encode("utf-8")
            props_b = json.dumps(node.props, ensure_ascii=False).encode("utf-8")
            nodes_buf.write(
                struct.pack("<QBI", node.id, LABEL_ORDER.index(node.label), len(name_b))
            )
            nodes_buf.write(name_b)
            nodes_buf.write(struct.pack("<I", len(props_b)))
            nodes_buf.write(props_b)
        edges_buf = io.BytesIO()
        edge_count = 0
        for src, etype, dst in self._iter_edges():
            edges_buf.write(struct.pack("<QBQ", src, EDGE_TYPE_ORDER.index(etype), dst))
            edge_count += 1
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(struct.pack("<H", SNAPSHOT_VERSION))
            for section in (nodes_buf.getvalue(), edges_buf.getvalue()):
                fh.write(struct.pack("<Q", len(section)))
                fh.write(section)

    @classmethod
    def load_snapshot(cls, path: str | Path) -> "PropertyGraph":
        """Read a snapshot written by :meth:`save_snapshot`; rebuilds indexes."""
        with open(path, "rb") as fh:
            data = fh.read()
        view = memoryview(data)
        if len(view) < 6 or bytes(view[:4]) != SNAPSHOT_MAGIC:
            raise FormatError(f"{path}: not a graph snapshot")
        (version,) = struct.unpack_from("<H", view, 4)
        if version != SNAPSHOT_VERSION:
            raise FormatError(f"{path}: unsupported snapshot version {version}")
        offset = 6

        def take(n: int) -> memoryview:
            nonlocal offset
            if offset + n > len(view):
                raise FormatError(f"{path}: truncated snapshot")
            chunk = view[offset : offset + n]
            offset += n
            return chunk

        graph = cls()
        (nodes_len,) = struct.unpack("<Q", take(8))
        nodes_end = offset + nodes_len
        next_id, node_count = struct.unpack("<QQ", take(16))
        for _ in range(node_count):
            nid, label_idx, name_len = struct.unpack("<QBI", take(13))
            name = bytes(take(name_len)).decode("utf-8")
            (props_len,) = struct.unpack("<I", take(4))
            props = json.loads(bytes(take(props_len)).decode("utf-8"))
            if label_idx >= len(LABEL_ORDER):
                raise FormatError(f"{path}: bad label index {label_idx}")
            label = LABEL_ORDER[label_idx]
            graph.nodes[nid] = Node(nid, label, name, props)
            graph.out_adj[nid] = []
            graph.in_adj[nid] = []
            graph.label_index.setdefault(label, []).append(nid)
            graph.name_index[(label, name)] = nid
        if offset != nodes_end:
            raise FormatError(f"{path}: node section length mismatch")
        (edges_len,) = struct.unpack("<Q", take(8))
        if edges_len % 17 != 0:
            raise FormatError(f"{path}: edge section length not a multiple of 17")
        for _ in range(edges_len // 17):
            src, type_idx, dst = struct.unpack("<QBQ", take(17))
            if type_idx >= len(EDGE_TYPE_ORDER):
                raise FormatError(f"{path}: bad edge type index {type_idx}")
            etype = EDGE_TYPE_ORDER[type_idx]
            if src not in graph.nodes or dst not in graph.nodes:
                raise FormatError(f"{path}: edge references unknown node")
            graph._edge_set.add((src, etype, dst))
            graph.out_adj[src].append((etype, dst))
            graph.in_adj[dst].append((etype, src))
            graph.edge_index.setdefault(etype, []).append((src, dst))
        if offset != len(view):
            raise FormatError(f"{path}: trailing bytes after edge section")
        graph._next_id = next_id
        return graph
