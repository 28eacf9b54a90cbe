import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynroad.roadnet import (
    FeatureSchema,
    NetworkFormatError,
    RoadNetwork,
    binarize,
    load_network,
    load_schema,
    save_network,
    save_schema,
)

SCHEMA = FeatureSchema(("road_type",), (3,))


def chain_network():
    return RoadNetwork(3, [[1], [2], []], np.array([[0], [1], [2]]), SCHEMA)


def test_chain_structure():
    net = chain_network()
    assert net.out_edges == [[1], [2], []]
    assert net.neighbors(1) == [2]
    assert net.neighbors(2) == []


def test_neighbors_invalid_id():
    with pytest.raises(IndexError):
        chain_network().neighbors(7)


def test_rejects_dangling_edge():
    with pytest.raises(NetworkFormatError, match="99"):
        RoadNetwork(3, [[1], [99], []])


def test_rejects_self_loop_and_duplicates():
    with pytest.raises(NetworkFormatError, match="self-loop"):
        RoadNetwork(2, [[0], []])
    with pytest.raises(NetworkFormatError, match="duplicate"):
        RoadNetwork(2, [[1, 1], []])


def test_binarize_single_feature():
    net = chain_network()
    vecs = binarize(net)
    np.testing.assert_array_equal(vecs[1], [0, 1, 0])


def test_binarize_two_features_concatenates_blocks():
    schema = FeatureSchema(("road_type", "lanes"), (3, 2))
    net = RoadNetwork(1, [[]], np.array([[2, 0]]), schema)
    np.testing.assert_array_equal(binarize(net)[0], [0, 0, 1, 1, 0])


def test_binarize_rejects_out_of_range_category():
    schema = FeatureSchema(("road_type",), (3,))
    with pytest.raises(NetworkFormatError):
        RoadNetwork(1, [[]], np.array([[5]]), schema)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 3)), min_size=1, max_size=20))
def test_binarize_blocks_are_one_hot(cats):
    schema = FeatureSchema(("a", "b"), (3, 4))
    feats = np.array(cats, dtype=np.int64)
    net = RoadNetwork(len(cats), [[] for _ in cats], feats, schema)
    vecs = binarize(net)
    assert vecs.shape[1] == schema.total_categories
    # each block sums to exactly one; no all-zero vector possible
    np.testing.assert_array_equal(vecs[:, :3].sum(axis=1), np.ones(len(cats)))
    np.testing.assert_array_equal(vecs[:, 3:].sum(axis=1), np.ones(len(cats)))
    assert (vecs.sum(axis=1) > 0).all()


def test_schema_requires_cardinality_two():
    with pytest.raises(ValueError):
        FeatureSchema(("x",), (1,))


def test_load_chain_from_files(tmp_path):
    edges = tmp_path / "edges.tsv"
    feats = tmp_path / "features.tsv"
    edges.write_text("# comment\n0\t1\n1\t2\n")
    feats.write_text("segment_id\troad_type\n0\t0\n1\t1\n2\t2\n")
    net = load_network(edges, feats, SCHEMA)
    assert net.out_edges == [[1], [2], []]


def test_load_reports_unknown_id_with_line(tmp_path):
    edges = tmp_path / "edges.tsv"
    feats = tmp_path / "features.tsv"
    edges.write_text("0\t1\n1\t99\n")
    feats.write_text("segment_id\troad_type\n0\t0\n1\t1\n2\t2\n")
    with pytest.raises(NetworkFormatError, match="99") as exc:
        load_network(edges, feats, SCHEMA)
    assert exc.value.line == 2


def test_load_reports_parse_error_line(tmp_path):
    edges = tmp_path / "edges.tsv"
    feats = tmp_path / "features.tsv"
    edges.write_text("0\t1\n")
    feats.write_text("segment_id\troad_type\n0\tnope\n1\t1\n2\t0\n")
    with pytest.raises(NetworkFormatError, match="non-integer"):
        load_network(edges, feats, SCHEMA)


def test_round_trip_save_load(tmp_path):
    rng = np.random.default_rng(8)
    n = 12
    out_edges = [[] for _ in range(n)]
    for u in range(n):
        for v in rng.choice(n, size=3, replace=False):
            if v != u and int(v) not in out_edges[u]:
                out_edges[u].append(int(v))
    schema = FeatureSchema(("road_type", "lanes"), (3, 2))
    feats = np.column_stack([rng.integers(0, 3, n), rng.integers(0, 2, n)])
    net = RoadNetwork(n, out_edges, feats, schema)

    save_network(net, tmp_path / "e.tsv", tmp_path / "f.tsv")
    save_schema(schema, tmp_path / "s.tsv")
    loaded = load_network(tmp_path / "e.tsv", tmp_path / "f.tsv",
                          load_schema(tmp_path / "s.tsv"))
    assert loaded == net
