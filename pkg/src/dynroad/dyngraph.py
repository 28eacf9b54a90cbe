"""Per-frame weighted transportation graphs and random walks over them.

Each time frame t gets its own weighted view of the road network:
``w[t][(i, j)] = gamma * e_ij + count_t(i -> j)`` where e_ij marks a
structural edge and count_t tallies corpus transitions whose departure
timestamp falls in frame t. Walks sample successors proportionally to these
weights, and (target, context, frame) pairs are enumerated from the walks
with a sliding window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .temporal import frames_of
from .worldgen import DAY_SECONDS


@dataclass
class TransportGraphSet:
    """Frame-indexed sparse edge weights plus the structural gamma term."""

    frames: int
    weights: list          # per-frame dict: (src, dst) -> float
    gamma: float
    segment_count: int

    def frame_weights(self, t):
        return self.weights[t]


@dataclass
class WalkBatch:
    """Sampled node sequences, each tagged with its frame index."""

    walks: list            # list of (np.ndarray of segment ids, frame)

    def __len__(self):
        return len(self.walks)


def build_transport_graphs(net, corpus, frames, gamma=1.0, day_seconds=DAY_SECONDS):
    """Assemble per-frame weights from structure and corpus transitions."""
    if frames <= 0:
        raise ValueError(f"frames must be positive, got {frames}")
    frame_len = day_seconds / frames
    counts = [{} for _ in range(frames)]
    for route in corpus:
        segs = route.segments
        if len(segs) < 2:
            continue
        fr = frames_of(route.timestamps[:-1], frames, frame_len)
        for t, a, b in zip(fr, segs[:-1], segs[1:]):
            key = (int(a), int(b))
            counts[t][key] = counts[t].get(key, 0) + 1

    structural = net.edge_set()
    weights = []
    for t in range(frames):
        wt = {}
        if gamma > 0.0:
            for e in structural:
                wt[e] = gamma
        for key, c in counts[t].items():
            wt[key] = wt.get(key, 0.0) + float(c)
        weights.append(wt)
    return TransportGraphSet(frames, weights, float(gamma), net.segment_count)


def _dense_tables(tg, t):
    """Per-node successor and cumulative-probability tables for one frame."""
    n = tg.segment_count
    succ = [[] for _ in range(n)]
    wts = [[] for _ in range(n)]
    for (a, b), w in sorted(tg.weights[t].items()):
        if w > 0.0:
            succ[a].append(b)
            wts[a].append(w)
    deg = np.array([len(s) for s in succ])
    width = max(1, int(deg.max()) if n else 1)
    nbrs = np.zeros((n, width), dtype=np.int64)
    cum = np.ones((n, width))
    for v in range(n):
        if deg[v]:
            nbrs[v, :deg[v]] = succ[v]
            p = np.array(wts[v])
            cum[v, :deg[v]] = np.cumsum(p / p.sum())
            cum[v, deg[v]:] = 1.0
    return nbrs, cum, deg


def sample_walks(tg, walks_per_node, walk_length, seed):
    """Weighted walks per (frame, node); truncates at zero-outflow nodes."""
    if walk_length < 2:
        raise ValueError(f"walk_length must be >= 2, got {walk_length}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 0x3A]))
    out = []
    for t in range(tg.frames):
        nbrs, cum, deg = _dense_tables(tg, t)
        start_nodes = np.flatnonzero(deg > 0)
        if start_nodes.size == 0:
            continue
        starts = np.repeat(start_nodes, walks_per_node)
        n = starts.shape[0]
        steps = np.full((n, walk_length), -1, dtype=np.int64)
        steps[:, 0] = starts
        alive = np.ones(n, dtype=bool)
        for k in range(1, walk_length):
            cur = steps[alive, k - 1]
            can_move = deg[cur] > 0
            movers = np.flatnonzero(alive)[can_move]
            if movers.size == 0:
                break
            cur = steps[movers, k - 1]
            u = rng.random(movers.size)
            pick = (cum[cur] < u[:, None]).sum(axis=1)
            steps[movers, k] = nbrs[cur, np.minimum(pick, nbrs.shape[1] - 1)]
            alive[:] = False
            alive[movers] = True
        for i in range(n):
            seq = steps[i][steps[i] >= 0]
            out.append((seq, t))
    return WalkBatch(out)


def context_pairs(batch, window):
    """Sliding-window (target, context, frame) triples as an [N, 3] array."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    by_len = {}
    for seq, t in batch.walks:
        by_len.setdefault(len(seq), []).append((seq, t))
    chunks = []
    for length, group in sorted(by_len.items()):
        if length < 2:
            continue
        ii, jj = [], []
        for i in range(length):
            for j in range(max(0, i - window), min(length, i + window + 1)):
                if j != i:
                    ii.append(i)
                    jj.append(j)
        ii, jj = np.array(ii), np.array(jj)
        seqs = np.stack([seq for seq, _ in group])
        frames = np.array([t for _, t in group], dtype=np.int64)
        n_walks, n_pairs = seqs.shape[0], ii.shape[0]
        chunk = np.empty((n_walks * n_pairs, 3), dtype=np.int64)
        chunk[:, 0] = seqs[:, ii].ravel()
        chunk[:, 1] = seqs[:, jj].ravel()
        chunk[:, 2] = np.repeat(frames, n_pairs)
        chunks.append(chunk)
    if not chunks:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(chunks, axis=0)


def dump_edge_weights(tg, path):
    """Debug dump: one ``t<TAB>src<TAB>dst<TAB>weight`` line per edge."""
    with open(path, "w", encoding="utf-8") as fh:
        for t in range(tg.frames):
            for (a, b), w in sorted(tg.weights[t].items()):
                fh.write(f"{t}\t{a}\t{b}\t{repr(float(w))}\n")
