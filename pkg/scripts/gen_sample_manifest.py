#!/usr/bin/env python3
"""Regenerate the sample-data manifest by counting TSV rows directly.

Deliberately independent of the artgraph package: plain csv parsing and
dict joins only, so the manifest stays an external check on the loader
and the displaced-artworks query.
"""

import csv
import json
from collections import Counter
from pathlib import Path

SAMPLE_DIR = Path(__file__).resolve().parents[1] / "src" / "artgraph" / "data" / "sample"


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        header = next(reader)
        return header, [row for row in reader if row]


def build_manifest(sample_dir=SAMPLE_DIR):
    _, node_rows = read_rows(sample_dir / "nodes.tsv")
    _, edge_rows = read_rows(sample_dir / "edges.tsv")

    nodes = {}  # (label, name) -> True, deduplicated
    node_counts = Counter()
    for label, name, _props in node_rows:
        if (label, name) not in nodes:
            nodes[(label, name)] = True
            node_counts[label] += 1

    edges = set()
    edge_counts = Counter()
    for src_label, src_name, etype, dst_label, dst_name in edge_rows:
        key = (src_label, src_name, etype, dst_label, dst_name)
        if key in edges:
            continue
        edges.add(key)
        edge_counts[etype] += 1

    # joins for the displaced-artworks oracle
    city_country = {
        s: d for (sl, s, t, dl, d) in edges if t == "inCountry" and sl == "City"
    }
    gallery_city = {
        s: d for (sl, s, t, dl, d) in edges if t == "inCity" and sl == "Gallery"
    }
    completed_in = {}
    located_in = {}
    for (sl, s, t, dl, d) in sorted(edges):
        if sl != "Artwork":
            continue
        if t == "completedIn":
            completed_in.setdefault(s, (dl, d))
        elif t == "locatedInGallery":
            located_in.setdefault(s, d)

    artworks = sorted(name for (label, name) in nodes if label == "Artwork")
    displaced = []
    skipped = 0
    for artwork in artworks:
        place = completed_in.get(artwork)
        gallery = located_in.get(artwork)
        if place is None or gallery is None:
            skipped += 1
            continue
        completed_country = place[1] if place[0] == "Country" else city_country.get(place[1])
        stored_city = gallery_city.get(gallery)
        stored_country = city_country.get(stored_city) if stored_city else None
        if completed_country is None or stored_country is None:
            skipped += 1
            continue
        if completed_country != stored_country:
            displaced.append(
                {
                    "artwork": artwork,
                    "completed_country": completed_country,
                    "stored_country": stored_country,
                }
            )

    return {
        "nodes_total": sum(node_counts.values()),
        "edges_total": sum(edge_counts.values()),
        "nodes_by_label": dict(sorted(node_counts.items())),
        "edges_by_type": dict(sorted(edge_counts.items())),
        "displaced": displaced,
        "displaced_skipped": skipped,
    }


def main():
    manifest = build_manifest()
    out = SAMPLE_DIR / "manifest.json"
    out.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}")
    print(f"  nodes {manifest['nodes_total']}, edges {manifest['edges_total']}, "
          f"displaced {len(manifest['displaced'])} (+{manifest['displaced_skipped']} skipped)")


if __name__ == "__main__":
    main()
