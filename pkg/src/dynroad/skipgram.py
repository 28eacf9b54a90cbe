"""Traffic-context-enhanced skip-gram with optional time-aware targets.

The target embedding of a segment is concatenated with its predicted
traffic context: xi(v) = sigmoid(f(v) . g(c)) over every declared feature
category, so the context table is d + sum|c_n| wide. Auxiliary binary
cross-entropy terms push xi toward the true binarized features, weighted per
feature. In dynamic mode the structural part of the target becomes
u_v + psi(t) for the walk's time frame, with psi a learnable trigonometric
encoder shared across frames; the context-prediction part stays static
(road type does not change with the hour).

Negative sampling follows the word2vec recipe: K noise draws per positive
from the corpus unigram distribution raised to 3/4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .dyngraph import context_pairs, sample_walks
from .temporal import TemporalEncoder

SIGMOID_CLAMP = 1e-7   # keeps log terms finite at saturation


@dataclass
class SkipGramConfig:
    d: int = 128
    negatives: int = 5
    aux_weights: tuple = None      # per-feature delta_n; None -> all 1.0
    epochs: int = 30
    lr: float = 0.025
    dynamic: bool = True
    window: int = 5
    walks_per_node: int = 10
    walk_length: int = 20
    batch_size: int = 1024
    encoder_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.negatives < 1:
            raise ValueError("need at least one negative sample")
        if self.d % 2 != 0:
            raise ValueError("embedding dimension must be even")


class EmbeddingSet:
    """Learnable tables: targets f, contexts h, feature rows g, frequencies w."""

    def __init__(self, segment_count, d, context_categories=0, dynamic=False,
                 encoder_sigma=1.0, seed=0):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE0B]))
        bound = 0.5 / d
        self.segment_count = segment_count
        self.d = d
        self.context_categories = int(context_categories)
        self.dynamic = bool(dynamic)
        self.target = Tensor(rng.uniform(-bound, bound, size=(segment_count, d)),
                             requires_grad=True)
        self.context = Tensor(np.zeros((segment_count, d + self.context_categories)),
                              requires_grad=True)
        if self.context_categories:
            self.feature = Tensor(
                rng.uniform(-bound, bound, size=(self.context_categories, d)),
                requires_grad=True)
        else:
            self.feature = None
        self.encoder = TemporalEncoder(d, sigma=encoder_sigma,
                                       seed=int(rng.integers(2**31)))
        self.loss_trace = []

    def parameters(self):
        params = [self.target, self.context]
        if self.feature is not None:
            params.append(self.feature)
        if self.dynamic:
            params.append(self.encoder.w)
        return params

    @property
    def context_width(self):
        return self.d + self.context_categories


def predict_context(es, v):
    """Predicted traffic context xi(v): sigmoids of f(v).g over all categories."""
    if es.feature is None:
        return np.zeros(0)
    logits = es.target.data[v] @ es.feature.data.T
    return 1.0 / (1.0 + np.exp(-logits))


def segment_embedding(es, v, t=None):
    """u_v, or u_v + psi(t) for a dynamic embedding set."""
    if not 0 <= v < es.segment_count:
        raise IndexError(f"invalid segment id {v}")
    if t is None:
        return es.target.data[v].copy()
    if not es.dynamic:
        raise ValueError("time-conditioned embedding requested from a static set")
    return es.target.data[v] + es.encoder.values(float(t))


def segment_embeddings(es, vs, ts=None):
    """Vectorized segment_embedding over id (and optional frame) arrays."""
    vs = np.asarray(vs, dtype=np.int64)
    base = es.target.data[vs]
    if ts is None:
        return base.copy()
    if not es.dynamic:
        raise ValueError("time-conditioned embedding requested from a static set")
    return base + es.encoder.values(np.asarray(ts, dtype=np.float64))


class NegativeSampler:
    """Unigram^(3/4) noise distribution with deterministic draws."""

    def __init__(self, counts, seed=0):
        counts = np.asarray(counts, dtype=np.float64)
        if counts.size == 0 or counts.min() < 0 or counts.sum() == 0:
            raise ValueError("counts must be nonnegative and not all zero")
        p = counts ** 0.75
        self.probs = p / p.sum()
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0
        self.rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7E6]))

    def draw(self, shape):
        return np.searchsorted(self.cum, self.rng.random(shape), side="right")

    def draw_avoiding(self, shape, forbidden):
        """Draw negatives, resampling any that collide with the positive."""
        out = self.draw(shape)
        forbidden = np.broadcast_to(np.asarray(forbidden)[..., None], shape)
        for _ in range(64):
            clash = out == forbidden
            if not clash.any():
                break
            out[clash] = self.draw(int(clash.sum()))
        return out


def _bce_elements(logits, labels):
    """Elementwise binary cross entropy with clamped sigmoid outputs."""
    p = ad.clip(ad.sigmoid(logits), SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    pos = ad.mul(Tensor(labels), ad.log(p))
    neg = ad.mul(Tensor(1.0 - labels), ad.log(ad.sub(Tensor(np.ones_like(labels)), p)))
    return ad.scale(ad.add(pos, neg), -1.0)


def aux_loss(es, v, labels, n, schema):
    """BCE of predicted vs true context for feature block n of segment v."""
    off, card = schema.offsets()[n], schema.cardinalities[n]
    f_v = ad.embedding_lookup(es.target, [v])
    g_n = ad.tslice(es.feature, (slice(off, off + card), slice(None)))
    logits = ad.matmul(f_v, ad.swap_last2(g_n))
    block = np.asarray(labels, dtype=np.float64)[off:off + card].reshape(1, card)
    return ad.tsum(_bce_elements(logits, block))


def pair_loss(es, v_i, v_j, negatives, t=None):
    """Negative-sampling loss for one (target, context) pair.

    Builds the traffic-enhanced target concat(u_i [+ psi(t)], xi(v_i)) and
    scores it against the context rows of the positive and the negatives.
    """
    negatives = np.asarray(negatives, dtype=np.int64)
    u = ad.embedding_lookup(es.target, [v_i])
    parts = []
    if t is not None:
        if not es.dynamic:
            raise ValueError("frame passed to a static embedding set")
        psi = ad.reshape(es.encoder.encode(float(t)), (1, es.d))
        parts.append(ad.add(u, psi))
    else:
        parts.append(u)
    if es.feature is not None:
        xi = ad.sigmoid(ad.matmul(u, ad.swap_last2(es.feature)))
        parts.append(xi)
    ftilde = ad.concat(parts, axis=-1) if len(parts) > 1 else parts[0]

    h_pos = ad.embedding_lookup(es.context, [v_j])
    s_pos = ad.tsum(ad.mul(ftilde, h_pos))
    p_pos = ad.clip(ad.sigmoid(s_pos), SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)

    h_neg = ad.embedding_lookup(es.context, negatives)
    fb = ad.broadcast_to(ftilde, (negatives.shape[0], es.context_width))
    s_neg = ad.tsum(ad.mul(fb, h_neg), axis=-1)
    p_neg = ad.clip(ad.sigmoid(ad.scale(s_neg, -1.0)), SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    return ad.scale(ad.add(ad.log(p_pos), ad.tsum(ad.log(p_neg))), -1.0)


def _batch_losses(es, vi, vj, negs, frame, labels, aux_weights, offsets, cards):
    """Mean pair loss and delta-weighted aux losses for one same-frame batch."""
    b = vi.shape[0]
    u = ad.embedding_lookup(es.target, vi)
    if frame is not None:
        psi = ad.broadcast_to(ad.reshape(es.encoder.encode(float(frame)),
                                         (1, es.d)), (b, es.d))
        structural = ad.add(u, psi)
    else:
        structural = u
    parts = [structural]
    if es.feature is not None:
        xi_logits = ad.matmul(u, ad.swap_last2(es.feature))
        parts.append(ad.sigmoid(xi_logits))
    ftilde = ad.concat(parts, axis=-1) if len(parts) > 1 else parts[0]

    h_pos = ad.embedding_lookup(es.context, vj)
    s_pos = ad.tsum(ad.mul(ftilde, h_pos), axis=-1)
    p_pos = ad.clip(ad.sigmoid(s_pos), SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    h_neg = ad.embedding_lookup(es.context, negs)
    fb = ad.broadcast_to(ad.reshape(ftilde, (b, 1, es.context_width)),
                         (b, negs.shape[1], es.context_width))
    s_neg = ad.tsum(ad.mul(fb, h_neg), axis=-1)
    p_neg = ad.clip(ad.sigmoid(ad.scale(s_neg, -1.0)), SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    pair = ad.scale(ad.add(ad.tsum(ad.log(p_pos)),
                           ad.tsum(ad.log(p_neg))), -1.0 / b)

    aux_terms = []
    if es.feature is not None and any(w != 0.0 for w in aux_weights):
        bce = _bce_elements(ad.matmul(u, ad.swap_last2(es.feature)), labels[vi])
        for n, (off, card) in enumerate(zip(offsets, cards)):
            if aux_weights[n] == 0.0:
                continue
            block = ad.tsum(ad.tslice(bce, (slice(None), slice(off, off + card))))
            aux_terms.append(ad.scale(block, aux_weights[n] / b))
    aux = None
    if aux_terms:
        aux = aux_terms[0]
        for term in aux_terms[1:]:
            aux = ad.add(aux, term)
    return pair, aux


def train(net, tg, ctx, cfg, noise_counts=None, schema=None):
    """Train embeddings on walk pairs from the per-frame transport graphs.

    ``ctx`` is the binarized context matrix [V, sum|c_n|] or None for a
    plain structural model. Walks are resampled every epoch with an
    epoch-derived seed; batches are grouped per frame.
    """
    schema = schema if schema is not None else getattr(net, "schema", None)
    if ctx is not None and schema is None:
        raise ValueError("binarized context requires a schema")
    categories = ctx.shape[1] if ctx is not None else 0
    es = EmbeddingSet(net.segment_count, cfg.d, categories, dynamic=cfg.dynamic,
                      encoder_sigma=cfg.encoder_sigma, seed=cfg.seed)

    offsets = schema.offsets() if schema is not None else []
    cards = list(schema.cardinalities) if schema is not None else []
    if cfg.aux_weights is None:
        aux_weights = [1.0] * len(cards)
    else:
        aux_weights = list(cfg.aux_weights)
        if len(aux_weights) != len(cards):
            raise ValueError("aux_weights length must match feature count")

    if noise_counts is None:
        # fall back to weighted outflow from the transport graphs
        noise_counts = np.zeros(net.segment_count)
        for t in range(tg.frames):
            for (a, _b), w in tg.weights[t].items():
                noise_counts[a] += w
    sampler = NegativeSampler(noise_counts, seed=cfg.seed)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5F]))
    params = es.parameters()

    total_steps = None
    step = 0
    for epoch in range(cfg.epochs):
        walks = sample_walks(tg, cfg.walks_per_node, cfg.walk_length,
                             seed=cfg.seed * 1_000_003 + epoch)
        pairs = context_pairs(walks, cfg.window)
        pairs = pairs[shuffle_rng.permutation(pairs.shape[0])]
        # per-frame batching: stable sort keeps the shuffle within frames
        pairs = pairs[np.argsort(pairs[:, 2], kind="stable")]
        n_batches = max(1, int(np.ceil(pairs.shape[0] / cfg.batch_size)))
        if total_steps is None:
            total_steps = cfg.epochs * n_batches
        sum_pair = sum_aux = 0.0
        for k in range(n_batches):
            batch = pairs[k * cfg.batch_size:(k + 1) * cfg.batch_size]
            if batch.shape[0] == 0:
                continue
            # a batch may straddle a frame boundary after the sort; split it
            for frame in np.unique(batch[:, 2]):
                sel = batch[batch[:, 2] == frame]
                vi, vj = sel[:, 0], sel[:, 1]
                negs = sampler.draw_avoiding((sel.shape[0], cfg.negatives), vj)
                pair, aux = _batch_losses(
                    es, vi, vj, negs, float(frame) if cfg.dynamic else None,
                    ctx, aux_weights, offsets, cards)
                loss = pair if aux is None else ad.add(pair, aux)
                if not np.isfinite(loss.data):
                    raise RuntimeError(
                        f"skip-gram diverged at epoch {epoch} step {step}: loss "
                        f"{float(loss.data)}")
                ad.backward(loss, leaves=params)
                lr = cfg.lr * max(1.0 - step / total_steps, 1e-4)
                ad.sgd_step(params, lr)
                w = sel.shape[0] / pairs.shape[0]
                sum_pair += float(pair.data) * w
                sum_aux += (float(aux.data) if aux is not None else 0.0) * w
            step += 1
        es.loss_trace.append({"epoch": epoch, "loss_pair": sum_pair,
                              "loss_aux": sum_aux, "total": sum_pair + sum_aux})
    return es


def write_loss_trace(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss_pair,loss_aux,total\n")
        for row in trace:
            fh.write(f"{row['epoch']},{row['loss_pair']:.6f},"
                     f"{row['loss_aux']:.6f},{row['total']:.6f}\n")
