import numpy as np
import pytest

from dynroad.dyngraph import (
    WalkBatch,
    build_transport_graphs,
    context_pairs,
    sample_walks,
)
from dynroad.roadnet import RoadNetwork
from dynroad.worldgen import Route, WorldConfig, generate_corpus, generate_world


def tiny_net():
    # 0 -> 1 -> 2, plus 0 -> 2
    return RoadNetwork(3, [[1, 2], [2], []])


def route_at(segs, start, gap=10.0):
    ts = start + gap * np.arange(len(segs))
    return Route(np.array(segs), ts)


def test_weight_is_gamma_plus_count():
    net = tiny_net()
    corpus = [route_at([0, 1], 100.0), route_at([0, 1], 200.0), route_at([0, 1], 300.0)]
    tg = build_transport_graphs(net, corpus, frames=24, gamma=1.0)
    assert tg.weights[0][(0, 1)] == 4.0          # gamma * 1 + count 3
    assert tg.weights[0][(0, 2)] == 1.0          # structural only
    assert tg.weights[5][(0, 1)] == 1.0          # counts land in frame 0 only


def test_zero_gamma_empty_frame_has_no_weights():
    net = tiny_net()
    corpus = [route_at([0, 1], 100.0)]
    tg = build_transport_graphs(net, corpus, frames=24, gamma=0.0)
    assert tg.weights[3] == {}
    assert tg.weights[0] == {(0, 1): 1.0}


def test_departure_frame_attribution():
    net = tiny_net()
    # departure at 3599s is frame 0; arrival in frame 1 must not matter
    corpus = [Route(np.array([0, 1]), np.array([3599.0, 3700.0]))]
    tg = build_transport_graphs(net, corpus, frames=24, gamma=0.0)
    assert (0, 1) in tg.weights[0]
    assert (0, 1) not in tg.weights[1]


def test_counts_match_brute_force_on_generated_corpus():
    cfg = WorldConfig(grid_width=4, grid_height=4, n_trajectories=2000,
                      trajectory_length_range=(5, 20), regime_strength=0.5, seed=11)
    net, truth = generate_world(cfg)
    corpus = generate_corpus(net, truth, cfg)
    gamma = 1.0
    tg = build_transport_graphs(net, corpus, frames=24, gamma=gamma)

    # independent O(corpus) recount
    brute = [{} for _ in range(24)]
    for r in corpus:
        for a, b, t in zip(r.segments[:-1], r.segments[1:], r.timestamps[:-1]):
            f = int((t % 86400.0) // 3600.0)
            key = (int(a), int(b))
            brute[f][key] = brute[f].get(key, 0) + 1
    edges = net.edge_set()
    for t in range(24):
        keys = set(tg.weights[t]) | set(brute[t]) | edges
        for key in keys:
            expect = gamma * (key in edges) + brute[t].get(key, 0)
            assert tg.weights[t].get(key, 0.0) == expect


def test_invalid_frames_rejected():
    with pytest.raises(ValueError):
        build_transport_graphs(tiny_net(), [], frames=0)


def test_static_degenerate_case_identical_frames():
    net = tiny_net()
    tg = build_transport_graphs(net, [], frames=6, gamma=2.5)
    for t in range(6):
        assert tg.weights[t] == {(0, 1): 2.5, (0, 2): 2.5, (1, 2): 2.5}


def test_single_successor_walk_is_deterministic_chain():
    net = RoadNetwork(3, [[1], [2], []])
    tg = build_transport_graphs(net, [], frames=1, gamma=1.0)
    batch = sample_walks(tg, walks_per_node=2, walk_length=5, seed=0)
    for seq, t in batch.walks:
        assert t == 0
        start = seq[0]
        expected = list(range(start, 3))
        assert list(seq) == expected  # truncated at the sink


def test_walk_first_step_proportions():
    net = RoadNetwork(3, [[1, 2], [], []])
    corpus = [route_at([0, 2], 10.0)] * 2  # weight(0->2) = 1+2, weight(0->1) = 1
    tg = build_transport_graphs(net, corpus, frames=1, gamma=1.0)
    batch = sample_walks(tg, walks_per_node=10000, walk_length=2, seed=3)
    firsts = [seq[1] for seq, _ in batch.walks if seq[0] == 0 and len(seq) > 1]
    frac_to_2 = np.mean([f == 2 for f in firsts])
    assert abs(frac_to_2 - 0.75) < 0.02


def test_walks_deterministic_given_seed():
    cfg = WorldConfig(grid_width=3, grid_height=3, n_trajectories=100,
                      trajectory_length_range=(4, 8), seed=2)
    net, truth = generate_world(cfg)
    corpus = generate_corpus(net, truth, cfg)
    tg = build_transport_graphs(net, corpus, frames=4)
    a = sample_walks(tg, 3, 10, seed=77)
    b = sample_walks(tg, 3, 10, seed=77)
    assert len(a) == len(b)
    for (sa, ta), (sb, tb) in zip(a.walks, b.walks):
        assert ta == tb and np.array_equal(sa, sb)


def test_every_sampled_transition_has_positive_weight():
    cfg = WorldConfig(grid_width=3, grid_height=3, n_trajectories=200,
                      trajectory_length_range=(4, 8), seed=5)
    net, truth = generate_world(cfg)
    corpus = generate_corpus(net, truth, cfg)
    tg = build_transport_graphs(net, corpus, frames=6, gamma=0.5)
    batch = sample_walks(tg, 2, 8, seed=1)
    for seq, t in batch.walks:
        for a, b in zip(seq, seq[1:]):
            assert tg.weights[t].get((int(a), int(b)), 0.0) > 0.0


def test_context_pairs_window_one():
    batch = WalkBatch([(np.array([7, 8, 9]), 4)])
    pairs = context_pairs(batch, window=1)
    got = {tuple(p) for p in pairs}
    assert got == {(7, 8, 4), (8, 7, 4), (8, 9, 4), (9, 8, 4)}


def test_context_pairs_large_window_gives_all_ordered_pairs():
    batch = WalkBatch([(np.array([1, 2, 3]), 0)])
    pairs = context_pairs(batch, window=10)
    assert len(pairs) == 6  # 3 positions x 2 others


def test_context_pair_count_matches_combinatorial_oracle():
    rng = np.random.default_rng(9)
    for length in (2, 5, 12, 20):
        for window in (1, 3, 7):
            seq = rng.integers(0, 50, size=length)
            pairs = context_pairs(WalkBatch([(seq, 2)]), window)
            expected = sum(
                1 for i in range(length) for j in range(length)
                if j != i and abs(i - j) <= window)
            assert len(pairs) == expected
            # brute-force content check
            got = sorted(map(tuple, pairs))
            want = sorted(
                (int(seq[i]), int(seq[j]), 2)
                for i in range(length) for j in range(length)
                if j != i and abs(i - j) <= window)
            assert got == want


def test_dump_edge_weights(tmp_path):
    net = tiny_net()
    tg = build_transport_graphs(net, [route_at([0, 1], 0.0)], frames=2, gamma=1.0)
    from dynroad.dyngraph import dump_edge_weights
    dump_edge_weights(tg, tmp_path / "w.tsv")
    lines = (tmp_path / "w.tsv").read_text().strip().splitlines()
    assert lines[0] == "0\t0\t1\t2.0"
    assert len(lines) == 6
