"""Road network graph with categorical per-segment traffic-context features.

Segments are nodes with dense integer ids; edges are directed connectivity
links. Features follow a declared schema (name + category count per feature)
and binarize to concatenated one-hot blocks used as auxiliary prediction
targets during embedding training.

File formats (UTF-8 text, tab-separated, ``#`` comments allowed):
  edges:    one ``src<TAB>dst`` per line
  features: header ``segment_id<TAB>name1...nameN``, then one row per segment
  schema:   lines ``name<TAB>cardinality``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NetworkFormatError(ValueError):
    """Parse or validation failure, carrying file and line context."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" + (f"{line}: " if line is not None else " ")
        super().__init__(where + message)


@dataclass(frozen=True)
class FeatureSchema:
    """Declared traffic-context features: names and category counts."""

    names: tuple
    cardinalities: tuple

    def __post_init__(self):
        if len(self.names) != len(self.cardinalities) or not self.names:
            raise ValueError("schema needs at least one feature with matching names")
        if any(c < 2 for c in self.cardinalities):
            raise ValueError(f"feature cardinalities must be >= 2: {self.cardinalities}")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))

    @property
    def total_categories(self):
        return sum(self.cardinalities)

    def offsets(self):
        """Start offset of each feature block in the binarized vector."""
        out, off = [], 0
        for c in self.cardinalities:
            out.append(off)
            off += c
        return out


@dataclass
class RoadNetwork:
    """Directed segment graph; immutable once constructed."""

    segment_count: int
    out_edges: list = field(default_factory=list)   # per-segment successor lists
    features: np.ndarray = None                     # [segments, n_features] ints
    schema: FeatureSchema = None

    def __post_init__(self):
        if self.segment_count <= 0:
            raise ValueError("segment_count must be positive")
        if len(self.out_edges) != self.segment_count:
            raise ValueError("out_edges length must equal segment_count")
        seen = set()
        for u, nbrs in enumerate(self.out_edges):
            for v in nbrs:
                if not 0 <= v < self.segment_count:
                    raise NetworkFormatError(f"edge {u}->{v} references unknown segment id {v}")
                if u == v:
                    raise NetworkFormatError(f"self-loop on segment {u}")
                if (u, v) in seen:
                    raise NetworkFormatError(f"duplicate edge {u}->{v}")
                seen.add((u, v))
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.int64)
            if self.features.shape[0] != self.segment_count:
                raise NetworkFormatError("feature rows must match segment count")
            if self.schema is not None:
                if self.features.shape[1] != len(self.schema.names):
                    raise NetworkFormatError("feature columns must match schema")
                for n, card in enumerate(self.schema.cardinalities):
                    col = self.features[:, n]
                    if col.min() < 0 or col.max() >= card:
                        bad = int(np.argmax((col < 0) | (col >= card)))
                        raise NetworkFormatError(
                            f"segment {bad}: category {col[bad]} out of range for "
                            f"feature '{self.schema.names[n]}' (|c|={card})")

    def neighbors(self, v):
        """Out-neighbors of segment v in insertion order."""
        if not 0 <= v < self.segment_count:
            raise IndexError(f"invalid segment id {v}")
        return list(self.out_edges[v])

    def edge_set(self):
        return {(u, v) for u, nbrs in enumerate(self.out_edges) for v in nbrs}

    def edge_count(self):
        return sum(len(n) for n in self.out_edges)

    def __eq__(self, other):
        if not isinstance(other, RoadNetwork):
            return NotImplemented
        return (self.segment_count == other.segment_count
                and [list(n) for n in self.out_edges] == [list(n) for n in other.out_edges]
                and ((self.features is None) == (other.features is None))
                and (self.features is None or np.array_equal(self.features, other.features))
                and self.schema == other.schema)


def binarize(net, schema=None):
    """Per-segment concatenated one-hot label vectors, shape [V, sum |c_n|]."""
    schema = schema or net.schema
    if schema is None or net.features is None:
        raise ValueError("binarize requires features and a schema")
    out = np.zeros((net.segment_count, schema.total_categories), dtype=np.float64)
    for n, (off, card) in enumerate(zip(schema.offsets(), schema.cardinalities)):
        col = net.features[:, n]
        if col.min() < 0 or col.max() >= card:
            raise NetworkFormatError(f"category out of range for feature '{schema.names[n]}'")
        out[np.arange(net.segment_count), off + col] = 1.0
    return out


def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_schema(path):
    names, cards = [], []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise NetworkFormatError("expected 'name<TAB>cardinality'", path, lineno)
        try:
            cards.append(int(parts[1]))
        except ValueError:
            raise NetworkFormatError(f"bad cardinality {parts[1]!r}", path, lineno) from None
        names.append(parts[0])
    if not names:
        raise NetworkFormatError("empty schema file", path)
    return FeatureSchema(tuple(names), tuple(cards))


def save_schema(schema, path):
    with open(path, "w", encoding="utf-8") as fh:
        for name, card in zip(schema.names, schema.cardinalities):
            fh.write(f"{name}\t{card}\n")


def load_network(edge_path, feature_path, schema):
    """Load and validate a network from edge and feature files."""
    rows = []
    header = None
    for lineno, line in _data_lines(feature_path):
        parts = line.split("\t")
        if header is None:
            header = parts
            if header[0] != "segment_id" or tuple(header[1:]) != schema.names:
                raise NetworkFormatError(
                    f"feature header {header} does not match schema {schema.names}",
                    feature_path, lineno)
            continue
        if len(parts) != 1 + len(schema.names):
            raise NetworkFormatError(f"expected {1 + len(schema.names)} columns", feature_path, lineno)
        try:
            rows.append([int(p) for p in parts])
        except ValueError:
            raise NetworkFormatError(f"non-integer field in {parts}", feature_path, lineno) from None
    if not rows:
        raise NetworkFormatError("no feature rows", feature_path)
    rows.sort(key=lambda r: r[0])
    ids = [r[0] for r in rows]
    if ids != list(range(len(rows))):
        raise NetworkFormatError(f"segment ids must be dense 0..{len(rows) - 1}", feature_path)
    segment_count = len(rows)
    features = np.array([r[1:] for r in rows], dtype=np.int64)

    out_edges = [[] for _ in range(segment_count)]
    for lineno, line in _data_lines(edge_path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise NetworkFormatError("expected 'src<TAB>dst'", edge_path, lineno)
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise NetworkFormatError(f"non-integer ids in {parts}", edge_path, lineno) from None
        for x in (u, v):
            if not 0 <= x < segment_count:
                raise NetworkFormatError(
                    f"edge references unknown segment id {x}", edge_path, lineno)
        out_edges[u].append(v)

    return RoadNetwork(segment_count, out_edges, features, schema)


def save_network(net, edge_path, feature_path):
    with open(edge_path, "w", encoding="utf-8") as fh:
        fh.write("# src\tdst\n")
        for u, nbrs in enumerate(net.out_edges):
            for v in nbrs:
                fh.write(f"{u}\t{v}\n")
    with open(feature_path, "w", encoding="utf-8") as fh:
        fh.write("segment_id\t" + "\t".join(net.schema.names) + "\n")
        for v in range(net.segment_count):
            fh.write(str(v) + "\t" + "\t".join(str(int(c)) for c in net.features[v]) + "\n")
