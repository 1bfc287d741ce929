"""Evaluation metrics and the held-out evaluation pipeline.

Pure metric functions (AUC-ROC, Hits@10, Precision@10, Macro-F1, accuracy,
perplexity) plus the dataset-level report builder that rolls a trained
model over the held-out stages. Perplexity is exp of the mean negative log
probability assigned to each user-step's dominant activity category;
pseudo-perplexity predicts each interior step with that step's history and
engagement masked out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .graphgen import EngagementRecord, TemporalDataset
from .model import EvolutionModel, encode_sequence, forward_sequence
from .predict import (
    EDGE_THRESHOLD,
    activity_distribution,
    rank_candidates,
    rollout,
)
from .train import sample_pairs

PROB_CLAMP = 1e-12


@dataclass
class EvalReport:
    perplexity: float
    pseudo_perplexity: float | None
    precision_at_10: float | None
    hits_at_10: float | None
    auc_roc: float
    macro_f1: float
    accuracy: float
    per_stage: list[dict] = field(default_factory=list)
    parse_failures: int = 0
    strategy: str | None = None

    FIELD_ORDER = ("perplexity", "pseudo_perplexity", "precision_at_10",
                   "hits_at_10", "auc_roc", "macro_f1", "accuracy")

    def to_dict(self) -> dict:
        doc = {name: getattr(self, name) for name in self.FIELD_ORDER}
        doc["per_stage"] = self.per_stage
        doc["parse_failures"] = self.parse_failures
        doc["strategy"] = self.strategy
        return doc

    def table(self) -> str:
        """Fixed-order plain-text table for CLI output."""
        rows = []
        for name in self.FIELD_ORDER:
            value = getattr(self, name)
            rows.append(f"{name:<16} {'n/a' if value is None else f'{value:.4f}'}")
        return "\n".join(rows)


# ---------------------------------------------------------------------------
# Pure metric functions
# ---------------------------------------------------------------------------

def to_simplex(probs: np.ndarray) -> np.ndarray:
    """Renormalize rows to sum to one; all-zero rows become uniform."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    sums = probs.sum(axis=1, keepdims=True)
    uniform = np.full_like(probs, 1.0 / probs.shape[1])
    return np.divide(probs, sums, out=uniform, where=sums > 0)


def dominant_category(counts: np.ndarray) -> int:
    """Index of the largest count; ties resolve to the lowest index."""
    return int(np.argmax(counts))


def perplexity(predicted_dists: np.ndarray, actual_labels: np.ndarray) -> float:
    """exp of the mean negative log probability of the actual label per user-step.

    ``predicted_dists`` rows must already be simplex-normalized. Computed in
    base 2 so power-of-two probabilities (uniform over 8 categories, the
    1/2-1/4-1/8 family) produce exact results.
    """
    dists = np.atleast_2d(np.asarray(predicted_dists, dtype=np.float64))
    labels = np.asarray(actual_labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("empty evaluation set")
    q = np.clip(dists[np.arange(labels.size), labels], PROB_CLAMP, None)
    return float(np.exp2(-np.mean(np.log2(q))))


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random positive outranks a random negative; ties count 0.5.

    Computed with tie-averaged ranks, which matches the brute-force pairwise
    definition exactly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(labels.size, dtype=np.float64)
    ranks[order] = np.arange(1, labels.size + 1)
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    rank_sums = np.bincount(inverse, weights=ranks)
    ranks = (rank_sums / counts)[inverse]
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def hits_at_10(rankings: dict[int, list[int]],
               new_edges: list[tuple[int, int]]) -> float:
    """Fraction of true new edges whose partner shows up in a top-10 list.

    Undirected credit: the edge (i, j) hits if j is ranked for i or i for j.
    """
    if not new_edges:
        raise ValueError("no ground-truth new edges")
    hits = 0
    for i, j in new_edges:
        if j in rankings.get(i, []) or i in rankings.get(j, []):
            hits += 1
    return hits / len(new_edges)


def precision_at_10(rankings: dict[int, list[int]],
                    new_edges: list[tuple[int, int]],
                    candidate_counts: dict[int, int]) -> float:
    """Mean over users of |top-10 hits| / min(10, candidate count)."""
    if not new_edges:
        raise ValueError("no ground-truth new edges")
    truth: dict[int, set[int]] = {}
    for i, j in new_edges:
        truth.setdefault(i, set()).add(j)
        truth.setdefault(j, set()).add(i)
    scores = []
    for user, ranked in rankings.items():
        n_candidates = candidate_counts.get(user, len(ranked))
        if n_candidates == 0:
            continue
        relevant = truth.get(user, set())
        scores.append(len(set(ranked) & relevant) / min(10, n_candidates))
    return float(np.mean(scores)) if scores else 0.0


def macro_f1(predicted_active: np.ndarray, true_active: np.ndarray) -> float:
    """Unweighted mean of per-category F1 over the category axis.

    A category absent from both predictions and truth scores F1 = 1, so
    correctly silent categories are not penalized on small datasets.
    """
    pred = np.atleast_2d(np.asarray(predicted_active)).astype(bool)
    true = np.atleast_2d(np.asarray(true_active)).astype(bool)
    if pred.shape != true.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {true.shape}")
    f1s = []
    for c in range(pred.shape[1]):
        tp = int((pred[:, c] & true[:, c]).sum())
        fp = int((pred[:, c] & ~true[:, c]).sum())
        fn = int((~pred[:, c] & true[:, c]).sum())
        if tp == fp == fn == 0:
            f1s.append(1.0)
        elif tp == 0:
            f1s.append(0.0)
        else:
            precision = tp / (tp + fp)
            recall = tp / (tp + fn)
            f1s.append(2 * precision * recall / (precision + recall))
    return float(np.mean(f1s))


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of evaluated pairs where the thresholded prediction matches."""
    predicted = np.asarray(predicted).astype(bool).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    if predicted.size == 0:
        raise ValueError("empty pair set")
    if predicted.size != truth.size:
        raise ValueError("prediction/truth length mismatch")
    return float(np.mean(predicted == truth))


# ---------------------------------------------------------------------------
# Pseudo-perplexity: masked interior-step prediction
# ---------------------------------------------------------------------------

def _mask_step(ds: TemporalDataset, t: int) -> TemporalDataset:
    """Copy of the dataset with step t's posts and engagement zeroed out."""
    snap = ds.snapshots[t]
    k = ds.n_categories
    masked = replace(
        snap,
        posts=[[] for _ in range(ds.n_users)],
        engagement=[EngagementRecord.zeros(k) for _ in range(ds.n_users)],
    )
    snapshots = list(ds.snapshots)
    snapshots[t] = masked
    return replace(ds, snapshots=snapshots)


def pseudo_perplexity(model: EvolutionModel, ds: TemporalDataset) -> float:
    """Perplexity over interior steps, each predicted with itself masked.

    For each interior step t the encoder runs over the sequence with step
    t's history and engagement zero-masked; the prediction at the masked
    step conditions on every other step's activity plus step t's graph and
    demographics. Labels are the true dominant categories at step t.
    """
    if ds.n_steps < 3:
        raise ValueError(f"pseudo-perplexity needs at least 3 steps, got {ds.n_steps}")
    dists, labels = [], []
    for t in range(1, ds.n_steps - 1):
        masked = _mask_step(ds, t)
        states = forward_sequence(encode_sequence(masked, model), model)
        q = np.atleast_2d(activity_distribution(states[t].y, model.predictor))
        counts = ds.snapshots[t].post_counts()
        for i in range(ds.n_users):
            if counts[i].sum() > 0:
                dists.append(q[i])
                labels.append(dominant_category(counts[i]))
    return perplexity(np.array(dists), np.array(labels))


# ---------------------------------------------------------------------------
# Held-out evaluation pipeline
# ---------------------------------------------------------------------------

def _new_edges(current: np.ndarray, base: np.ndarray) -> list[tuple[int, int]]:
    iu, ju = np.triu_indices(current.shape[0], k=1)
    fresh = (current[iu, ju] > 0) & (base[iu, ju] == 0)
    return [(int(i), int(j)) for i, j in zip(iu[fresh], ju[fresh])]


def evaluate_model(model: EvolutionModel, conditioning: TemporalDataset,
                   target: TemporalDataset, negative_ratio: int = 1,
                   seed: int = 0) -> EvalReport:
    """Roll the model over the held-out stages and score every metric.

    Stage s is compared against the s-th target snapshot. The new-edge
    ground truth and the candidate exclusion graph for ranking both use the
    true previous step (the final conditioning snapshot for stage 1).
    """
    horizon = min(target.n_steps, 4)
    forecast = rollout(conditioning, model, horizon)
    rng = np.random.default_rng(seed)

    pooled_scores, pooled_labels, pooled_pred, pooled_truth = [], [], [], []
    pooled_dists, pooled_cat_labels = [], []
    pooled_hits_num = pooled_hits_den = 0
    p10_values, f1_values = [], []
    per_stage = []

    for s in range(1, horizon + 1):
        snap = target.snapshots[s - 1]
        base = (conditioning.snapshots[-1].adjacency if s == 1
                else target.snapshots[s - 2].adjacency)
        stage = forecast.stage(s)

        pairs = sample_pairs(snap.adjacency, negative_ratio, rng)
        scores = stage.edge_probs[pairs[:, 0], pairs[:, 1]]
        labels = snap.adjacency[pairs[:, 0], pairs[:, 1]] > 0
        stage_auc = auc_roc(scores, labels)
        stage_acc = accuracy(scores > EDGE_THRESHOLD, labels)
        pooled_scores.append(scores)
        pooled_labels.append(labels)
        pooled_pred.append(scores > EDGE_THRESHOLD)
        pooled_truth.append(labels)

        new_edges = _new_edges(snap.adjacency, base)
        rankings = {
            i: rank_candidates(i, stage.edge_probs, 10,
                               exclude_existing=True, adjacency=base)
            for i in range(conditioning.n_users)
        }
        candidate_counts = {
            i: int((base[i] == 0).sum()) - 1 for i in range(conditioning.n_users)
        }
        if new_edges:
            stage_hits = hits_at_10(rankings, new_edges)
            stage_p10 = precision_at_10(rankings, new_edges, candidate_counts)
            hit_count = sum(
                1 for i, j in new_edges
                if j in rankings.get(i, []) or i in rankings.get(j, []))
            pooled_hits_num += hit_count
            pooled_hits_den += len(new_edges)
            p10_values.append(stage_p10)
        else:
            stage_hits = stage_p10 = None

        counts = snap.post_counts()
        true_active = counts > 0
        pred_active = stage.activity_probs > 0.5
        stage_f1 = macro_f1(pred_active, true_active)
        f1_values.append(stage_f1)

        dists = stage.activity_dist
        stage_dists, stage_cats = [], []
        for i in range(conditioning.n_users):
            if counts[i].sum() > 0:
                stage_dists.append(dists[i])
                stage_cats.append(dominant_category(counts[i]))
        stage_ppl = (perplexity(np.array(stage_dists), np.array(stage_cats))
                     if stage_cats else None)
        pooled_dists.extend(stage_dists)
        pooled_cat_labels.extend(stage_cats)

        per_stage.append({
            "stage": s,
            "auc_roc": stage_auc,
            "accuracy": stage_acc,
            "hits_at_10": stage_hits,
            "precision_at_10": stage_p10,
            "macro_f1": stage_f1,
            "perplexity": stage_ppl,
            "n_new_edges": len(new_edges),
        })

    try:
        ppl_masked = pseudo_perplexity(model, conditioning)
    except ValueError:
        ppl_masked = None

    return EvalReport(
        perplexity=perplexity(np.array(pooled_dists), np.array(pooled_cat_labels)),
        pseudo_perplexity=ppl_masked,
        precision_at_10=float(np.mean(p10_values)) if p10_values else None,
        hits_at_10=(pooled_hits_num / pooled_hits_den) if pooled_hits_den else None,
        auc_roc=auc_roc(np.concatenate(pooled_scores), np.concatenate(pooled_labels)),
        macro_f1=float(np.mean(f1_values)),
        accuracy=accuracy(np.concatenate(pooled_pred), np.concatenate(pooled_truth)),
        per_stage=per_stage,
        strategy=model.strategy,
    )
