"""Prediction heads and multi-stage forecasting.

A feed-forward trunk maps the fused embedding to a representation y; a
pairwise link head scores future edges and an independent-sigmoid head
scores the eight activity categories. Forecasts roll the model forward up
to four stages, feeding each stage's predictions back into the encoders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graphgen import Post, Snapshot, TemporalDataset, post_text

EDGE_THRESHOLD = 0.5
MAX_HORIZON = 4


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class PredictorParams:
    """Feed-forward trunk plus link and activity head weights."""

    w_h: np.ndarray     # (d_h, d_f)
    b_h: np.ndarray     # (d_h,)
    w_out: np.ndarray   # (d_y, d_h)
    b_out: np.ndarray   # (d_y,)
    w_link: np.ndarray  # (2 * d_y,)
    b_link: np.ndarray  # (1,)
    w_act: np.ndarray   # (k, d_y)
    b_act: np.ndarray   # (k,)

    def __post_init__(self):
        if self.w_out.shape[1] != self.w_h.shape[0]:
            raise ValueError("hidden/output layer dimensions do not chain")
        d_y = self.w_out.shape[0]
        if self.w_link.shape != (2 * d_y,):
            raise ValueError(f"link head expects shape ({2 * d_y},), got {self.w_link.shape}")
        if self.w_act.shape[1] != d_y:
            raise ValueError("activity head width does not match d_y")

    @property
    def d_y(self) -> int:
        return self.w_out.shape[0]

    @property
    def n_categories(self) -> int:
        return self.w_act.shape[0]


def init_predictor_params(seed: int, d_f: int, d_h: int, d_y: int,
                          n_categories: int) -> PredictorParams:
    rng = np.random.default_rng(seed)
    mat = lambda rows, cols: rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols))
    return PredictorParams(
        w_h=mat(d_h, d_f),
        b_h=np.zeros(d_h),
        w_out=mat(d_y, d_h),
        b_out=np.zeros(d_y),
        w_link=rng.normal(0.0, 1.0 / np.sqrt(2 * d_y), size=2 * d_y),
        b_link=np.zeros(1),
        w_act=mat(n_categories, d_y),
        b_act=np.zeros(n_categories),
    )


# ---------------------------------------------------------------------------
# Trunk
# ---------------------------------------------------------------------------

def predictor_forward(f: np.ndarray, params: PredictorParams,
                      return_hidden: bool = False):
    """y = W_out tanh(W_h f + b_h) + b_out, row-wise over users."""
    if f.shape[-1] != params.w_h.shape[1]:
        raise ValueError(
            f"fused dimension {f.shape[-1]} does not match trunk input "
            f"{params.w_h.shape[1]}")
    h = np.tanh(f @ params.w_h.T + params.b_h)
    y = h @ params.w_out.T + params.b_out
    return (y, h) if return_hidden else y


def predictor_backward(dy: np.ndarray, f: np.ndarray, h: np.ndarray,
                       params: PredictorParams):
    """Returns (df, grads for w_h/b_h/w_out/b_out); inputs may be batched."""
    dy2, h2, f2 = np.atleast_2d(dy), np.atleast_2d(h), np.atleast_2d(f)
    d_pre = (dy2 @ params.w_out) * (1.0 - h2 ** 2)
    grads = {
        "w_out": dy2.T @ h2,
        "b_out": dy2.sum(axis=0),
        "w_h": d_pre.T @ f2,
        "b_h": d_pre.sum(axis=0),
    }
    df = d_pre @ params.w_h
    if dy.ndim == 1:
        df = df[0]
    return df, grads


# ---------------------------------------------------------------------------
# Link head
# ---------------------------------------------------------------------------

def link_probability(y_i: np.ndarray, y_j: np.ndarray, params: PredictorParams,
                     pair: tuple[int, int] | None = None,
                     undirected: bool = True) -> float:
    """sigmoid(w_link . [y_i ; y_j] + b_link).

    In undirected mode the pair is put in canonical (low id, high id) order
    before concatenation, so the probability is symmetric in its arguments.
    """
    if undirected and pair is not None and pair[0] > pair[1]:
        y_i, y_j = y_j, y_i
    z = params.w_link @ np.concatenate([y_i, y_j]) + params.b_link[0]
    return float(sigmoid(np.array(z)))


def pair_logits(y: np.ndarray, pairs: np.ndarray, params: PredictorParams,
                undirected: bool = True) -> np.ndarray:
    """Link logits for an (M, 2) index array; canonicalizes in undirected mode."""
    pairs = np.asarray(pairs)
    if undirected:
        pairs = np.sort(pairs, axis=1)
    cat = np.concatenate([y[pairs[:, 0]], y[pairs[:, 1]]], axis=1)
    return cat @ params.w_link + params.b_link[0]


def pair_logits_backward(dz: np.ndarray, y: np.ndarray, pairs: np.ndarray,
                         params: PredictorParams, undirected: bool = True):
    """Returns (dy, grads for w_link/b_link) given per-pair logit gradients."""
    pairs = np.asarray(pairs)
    if undirected:
        pairs = np.sort(pairs, axis=1)
    d_y = params.d_y
    dy = np.zeros_like(y)
    np.add.at(dy, pairs[:, 0], dz[:, None] * params.w_link[:d_y])
    np.add.at(dy, pairs[:, 1], dz[:, None] * params.w_link[d_y:])
    cat = np.concatenate([y[pairs[:, 0]], y[pairs[:, 1]]], axis=1)
    return dy, {"w_link": dz @ cat, "b_link": np.array([dz.sum()])}


def classify_edge(p: float, theta: float = EDGE_THRESHOLD) -> bool:
    """Edge iff the probability strictly exceeds the threshold."""
    return p > theta


def edge_probability_matrix(y: np.ndarray, params: PredictorParams,
                            undirected: bool = True) -> np.ndarray:
    """All-pairs edge probabilities with zero diagonal.

    Undirected mode evaluates canonical (i < j) pairs and mirrors them, so
    the matrix is exactly symmetric.
    """
    n = y.shape[0]
    probs = np.zeros((n, n), dtype=np.float64)
    if undirected:
        iu, ju = np.triu_indices(n, k=1)
        p = sigmoid(pair_logits(y, np.stack([iu, ju], axis=1), params))
        probs[iu, ju] = p
        probs[ju, iu] = p
    else:
        idx = np.array([(i, j) for i in range(n) for j in range(n) if i != j])
        p = sigmoid(pair_logits(y, idx, params, undirected=False))
        probs[idx[:, 0], idx[:, 1]] = p
    return probs


# ---------------------------------------------------------------------------
# Activity head
# ---------------------------------------------------------------------------

def activity_logits(y: np.ndarray, params: PredictorParams) -> np.ndarray:
    return y @ params.w_act.T + params.b_act


def activity_probabilities(y: np.ndarray, params: PredictorParams) -> np.ndarray:
    """Independent per-category sigmoids; rows are not renormalized."""
    return sigmoid(activity_logits(y, params))


def activity_distribution(y: np.ndarray, params: PredictorParams) -> np.ndarray:
    """Softmax over the category logits: the model's distribution over categories.

    Used wherever a simplex is needed (perplexity, rollout pseudo-counts).
    Renormalizing the sigmoids directly would wash out to uniform once the
    positive-target loss saturates them, while the logit gap stays
    informative at any scale.
    """
    logits = np.atleast_2d(activity_logits(y, params))
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)
    return out if np.ndim(y) > 1 else out[0]


def activity_logits_backward(d_logits: np.ndarray, y: np.ndarray,
                             params: PredictorParams):
    d2, y2 = np.atleast_2d(d_logits), np.atleast_2d(y)
    dy = d2 @ params.w_act
    if d_logits.ndim == 1:
        dy = dy[0]
    return dy, {"w_act": d2.T @ y2, "b_act": d2.sum(axis=0)}


# ---------------------------------------------------------------------------
# Ranking
# ---------------------------------------------------------------------------

def rank_candidates(user: int, edge_probs: np.ndarray, k: int = 10,
                    exclude_existing: bool = False,
                    adjacency: np.ndarray | None = None) -> list[int]:
    """Top-k candidate ids for a user, by probability then ascending id.

    With ``exclude_existing``, current neighbors (per ``adjacency``) are
    removed from the candidate pool before ranking.
    """
    n = edge_probs.shape[0]
    if not 0 <= user < n:
        raise ValueError(f"unknown user id {user}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    candidates = [j for j in range(n) if j != user]
    if exclude_existing:
        if adjacency is None:
            raise ValueError("exclude_existing requires an adjacency matrix")
        candidates = [j for j in candidates if not adjacency[user, j]]
    ranked = sorted(candidates, key=lambda j: (-edge_probs[user, j], j))
    return ranked[:k]


# ---------------------------------------------------------------------------
# Forecast container and file format
# ---------------------------------------------------------------------------

@dataclass
class StageForecast:
    stage: int
    edge_probs: np.ndarray       # (N, N) in [0, 1]
    predicted_edges: np.ndarray  # (N, N) bool, edge_probs > threshold
    activity_probs: np.ndarray   # (N, k) in [0, 1], independent sigmoids
    activity_dist: np.ndarray    # (N, k) simplex rows, softmax over logits


@dataclass
class EvolutionForecast:
    stages: list[StageForecast]

    def stage(self, s: int) -> StageForecast:
        return self.stages[s - 1]


def forecast_to_dict(forecast: EvolutionForecast) -> dict:
    """Probabilities are rounded to 6 decimals on disk only."""
    stages = []
    for st in forecast.stages:
        n = st.edge_probs.shape[0]
        iu, ju = np.triu_indices(n, k=1)
        stages.append({
            "stage": st.stage,
            "edges": [[int(i), int(j), round(float(st.edge_probs[i, j]), 6)]
                      for i, j in zip(iu, ju)],
            "activities": [[round(float(p), 6) for p in row]
                           for row in st.activity_probs],
        })
    return {"schema_version": "1", "stages": stages}


def forecast_from_dict(doc: dict) -> EvolutionForecast:
    stages = []
    for st in doc["stages"]:
        activities = np.asarray(st["activities"], dtype=np.float64)
        n = activities.shape[0]
        probs = np.zeros((n, n))
        for i, j, p in st["edges"]:
            probs[i, j] = probs[j, i] = p
        # Recover the category distribution from the stored sigmoids via
        # normalized odds; exact up to the probability clamp.
        odds = np.clip(activities, 1e-12, 1 - 1e-12)
        odds = odds / (1.0 - odds)
        stages.append(StageForecast(
            stage=st["stage"],
            edge_probs=probs,
            predicted_edges=probs > EDGE_THRESHOLD,
            activity_probs=activities,
            activity_dist=odds / odds.sum(axis=1, keepdims=True),
        ))
    return EvolutionForecast(stages=stages)


def save_forecast(forecast: EvolutionForecast, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forecast_to_dict(forecast), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_forecast(path: str) -> EvolutionForecast:
    with open(path, encoding="utf-8") as fh:
        return forecast_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Multi-stage rollout
# ---------------------------------------------------------------------------

def _historical_post_volume(conditioning: TemporalDataset) -> np.ndarray:
    totals = np.stack([snap.post_counts().sum(axis=1)
                       for snap in conditioning.snapshots])
    return totals.mean(axis=0)


def _engagement_rates(conditioning: TemporalDataset) -> np.ndarray:
    """Per-user mean (reactions, comments, shares) per historical post."""
    n = conditioning.n_users
    totals = np.zeros((n, 3))
    posts = np.zeros(n)
    for snap in conditioning.snapshots:
        posts += snap.post_counts().sum(axis=1)
        for i, rec in enumerate(snap.engagement):
            totals[i] += rec.as_matrix().sum(axis=0)
    return totals / np.maximum(posts, 1.0)[:, None]


def _synthetic_snapshot(step: int, adjacency: np.ndarray,
                        activity_shares: np.ndarray,
                        conditioning: TemporalDataset,
                        post_volume: np.ndarray,
                        engagement_rates: np.ndarray) -> Snapshot:
    """Feed predictions back into the input pipeline.

    The predicted category distribution becomes per-category pseudo-counts
    scaled by each user's historical post volume; engagement counts reuse
    the user's historical per-post engagement rates. Synthetic post text
    cycles through the category keyword pool so its token-frequency profile
    matches organically generated posts.
    """
    from .graphgen import EngagementRecord, keyword_pool

    vocab = conditioning.category_vocabulary
    pools = [keyword_pool(c) for c in vocab]
    pseudo = activity_shares * post_volume[:, None]
    counts = np.rint(pseudo).astype(np.int64)

    posts = []
    engagement = []
    for i in range(conditioning.n_users):
        user_posts = []
        for c in range(len(vocab)):
            pool = pools[c]
            for j in range(counts[i, c]):
                kws = [pool[(2 * j) % len(pool)], pool[(2 * j + 1) % len(pool)]]
                user_posts.append(
                    Post(category=c, text=post_text(vocab[c], kws), step=step))
        posts.append(user_posts)
        eng = np.rint(pseudo[i][:, None] * engagement_rates[i][None, :]).astype(np.int64)
        engagement.append(EngagementRecord(eng[:, 0], eng[:, 1], eng[:, 2]))
    return Snapshot(
        step=step,
        adjacency=adjacency.astype(np.uint8),
        profiles=conditioning.profiles,
        posts=posts,
        engagement=engagement,
    )


def rollout(conditioning: TemporalDataset, model, horizon: int = MAX_HORIZON) -> EvolutionForecast:
    """Autoregressive forecast of the next ``horizon`` stages.

    Stage 1 is predicted from the final conditioning state. Each later
    stage feeds the previous stage's fused embedding forward as F_prev and
    substitutes its predicted adjacency and pseudo-counts into the modality
    encoders. Deterministic given (model, conditioning); stage s of a
    horizon-h rollout is bitwise identical to stage s of any longer one.
    """
    if not 1 <= horizon <= MAX_HORIZON:
        raise ValueError(f"horizon must be in [1, {MAX_HORIZON}], got {horizon}")
    # Imported here: model owns the sequence forward, which builds on this module.
    from .embed import encode_snapshot
    from .fusion import fuse, project
    from .model import encode_sequence, forward_sequence

    undirected = not conditioning.directed
    states = forward_sequence(encode_sequence(conditioning, model), model)
    f_prev = states[-1].fused.f
    y = states[-1].y

    post_volume = _historical_post_volume(conditioning)
    engagement_rates = _engagement_rates(conditioning)
    last_step = conditioning.snapshots[-1].step

    stages = []
    for s in range(1, horizon + 1):
        edge_probs = edge_probability_matrix(y, model.predictor, undirected=undirected)
        predicted = edge_probs > EDGE_THRESHOLD
        stages.append(StageForecast(
            stage=s,
            edge_probs=edge_probs,
            predicted_edges=predicted,
            activity_probs=activity_probabilities(y, model.predictor),
            activity_dist=activity_distribution(y, model.predictor),
        ))
        if s == horizon:
            break
        snap = _synthetic_snapshot(last_step + s, predicted,
                                   stages[-1].activity_dist, conditioning,
                                   post_volume, engagement_rates)
        raw_d, raw_p, raw_e = encode_snapshot(
            snap, model.stats, model.gnn, model.vocabularies,
            model.category_vocabulary, model.dims.d, model.text_embed)
        fused = fuse(project(raw_d, raw_p, raw_e, model.fusion), f_prev, model.fusion)
        y = predictor_forward(fused.f, model.predictor)
        f_prev = fused.f
    return EvolutionForecast(stages=stages)
