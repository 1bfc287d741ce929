"""Training: dual losses, negative sampling, Adam, and gradient checking.

The total objective is lambda1 * link loss + lambda2 * activity loss,
evaluated full-batch over every conditioning transition. Gradients are the
hand-derived backward passes from the fusion/predict modules; the gradient
checker verifies every parameter block against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphgen import TemporalDataset
from .model import (
    EvolutionModel,
    backward_sequence,
    encode_sequence,
    forward_sequence,
    get_param,
    init_model,
    trainable_param_names,
)
from .predict import (
    activity_logits,
    activity_logits_backward,
    pair_logits,
    pair_logits_backward,
    sigmoid,
)

PROB_CLAMP = 1e-12


class TrainingDivergedError(RuntimeError):
    """Raised when a loss term stops being finite; names the offending term."""

    def __init__(self, term: str, epoch: int):
        super().__init__(f"non-finite {term} loss at epoch {epoch}")
        self.term = term
        self.epoch = epoch


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.5  # link loss weight
    lambda2: float = 0.5  # activity loss weight

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-2
    weight_decay: float = 0.0
    negative_ratio: int = 1
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    strategy: str = "crossmodal"
    d: int = 32
    d_h: int = 32
    d_y: int = 32

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.negative_ratio < 1:
            raise ValueError("negative_ratio must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight decay must be non-negative")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "learning_rate": self.learning_rate,
                "weight_decay": self.weight_decay,
                "negative_ratio": self.negative_ratio, "seed": self.seed,
                "lambda1": self.weights.lambda1, "lambda2": self.weights.lambda2,
                "strategy": self.strategy, "d": self.d, "d_h": self.d_h,
                "d_y": self.d_y}


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def link_loss(edge_probs: np.ndarray, true_adjacency: np.ndarray,
              sampled_pairs: np.ndarray) -> float:
    """Mean binary cross-entropy over the sampled pair set."""
    pairs = np.asarray(sampled_pairs)
    if pairs.size == 0:
        raise ValueError("empty pair set")
    p = np.clip(edge_probs[pairs[:, 0], pairs[:, 1]], PROB_CLAMP, 1.0 - PROB_CLAMP)
    a = true_adjacency[pairs[:, 0], pairs[:, 1]].astype(np.float64)
    return float(-np.mean(a * np.log(p) + (1.0 - a) * np.log(1.0 - p)))


def activity_targets(true_counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-user max-normalized targets plus the mask of users with any activity."""
    counts = np.asarray(true_counts, dtype=np.float64)
    peak = counts.max(axis=1)
    include = peak > 0
    targets = np.zeros_like(counts)
    targets[include] = counts[include] / peak[include, None]
    return targets, include


def activity_loss(activity_probs: np.ndarray, true_counts: np.ndarray) -> float:
    """Soft-target cross-entropy, averaged over users with any activity.

    Targets are each user's counts divided by their largest count; users
    whose counts are all zero are skipped.
    """
    targets, include = activity_targets(true_counts)
    if not include.any():
        return 0.0
    p = np.clip(activity_probs[include], PROB_CLAMP, 1.0 - PROB_CLAMP)
    per_user = -(targets[include] * np.log(p)).sum(axis=1)
    return float(per_user.mean())


def total_loss(l_link: float, l_activity: float, weights: LossWeights) -> float:
    return weights.lambda1 * l_link + weights.lambda2 * l_activity


# ---------------------------------------------------------------------------
# Negative sampling
# ---------------------------------------------------------------------------

def sample_pairs(adjacency: np.ndarray, ratio: int,
                 rng: np.random.Generator) -> np.ndarray:
    """All positive pairs plus ratio-times-as-many seeded negative samples.

    Pairs are canonical (i < j). Same generator state yields the same set.
    """
    iu, ju = np.triu_indices(adjacency.shape[0], k=1)
    edge = adjacency[iu, ju] > 0
    positives = np.stack([iu[edge], ju[edge]], axis=1)
    negatives = np.stack([iu[~edge], ju[~edge]], axis=1)
    n_neg = min(len(negatives), ratio * len(positives))
    if n_neg > 0:
        chosen = rng.choice(len(negatives), size=n_neg, replace=False)
        negatives = negatives[np.sort(chosen)]
    else:
        negatives = negatives[:0]
    return np.concatenate([positives, negatives], axis=0)


# ---------------------------------------------------------------------------
# Full-objective gradients
# ---------------------------------------------------------------------------

def loss_and_gradients(model: EvolutionModel, raws: list[tuple],
                       adjacency_targets: list[np.ndarray],
                       count_targets: list[np.ndarray],
                       pairs_per_step: list[np.ndarray],
                       weights: LossWeights):
    """Total loss and analytic gradients for every trainable block.

    Step t's representation predicts step t+1's adjacency and activity;
    per-step means are averaged across steps so the two loss components
    stay comparable regardless of graph size or sequence length.
    """
    states = forward_sequence(raws, model)
    n_train = len(adjacency_targets)
    undirected = not model.directed
    d_ys = [np.zeros_like(st.y) for st in states]
    head_grads = {name: np.zeros_like(get_param(model, name))
                  for name in ("w_link", "b_link", "w_act", "b_act")}
    link_losses, act_losses = [], []

    for t in range(n_train):
        y = states[t].y
        pairs = pairs_per_step[t]
        if pairs.size == 0:
            raise ValueError(f"empty pair set for transition {t} -> {t + 1}")
        z = pair_logits(y, pairs, model.predictor, undirected=undirected)
        p = sigmoid(z)
        a = adjacency_targets[t][pairs[:, 0], pairs[:, 1]].astype(np.float64)
        pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
        link_losses.append(float(-np.mean(a * np.log(pc) + (1 - a) * np.log(1 - pc))))
        dz = weights.lambda1 * (p - a) / (len(pairs) * n_train)
        dy_link, lg = pair_logits_backward(dz, y, pairs, model.predictor,
                                           undirected=undirected)
        d_ys[t] += dy_link
        for name, g in lg.items():
            head_grads[name] += g

        logits = activity_logits(y, model.predictor)
        probs = sigmoid(logits)
        targets, include = activity_targets(count_targets[t])
        if include.any():
            pc = np.clip(probs[include], PROB_CLAMP, 1.0 - PROB_CLAMP)
            act_losses.append(float(-(targets[include] * np.log(pc)).sum(axis=1).mean()))
            d_logits = np.zeros_like(logits)
            d_logits[include] = (weights.lambda2
                                 * -(targets[include] * (1.0 - probs[include]))
                                 / (include.sum() * n_train))
            dy_act, ag = activity_logits_backward(d_logits, y, model.predictor)
            d_ys[t] += dy_act
            for name, g in ag.items():
                head_grads[name] += g
        else:
            act_losses.append(0.0)

    l_link = float(np.mean(link_losses))
    l_act = float(np.mean(act_losses))
    grads = backward_sequence(d_ys, raws, states, model)
    grads.update(head_grads)
    return total_loss(l_link, l_act, weights), l_link, l_act, grads


def _training_targets(conditioning: TemporalDataset, ratio: int, seed: int):
    """Adjacency/count targets and the seeded pair sets for each transition."""
    rng = np.random.default_rng(seed)
    adjacency_targets, count_targets, pairs = [], [], []
    for t in range(conditioning.n_steps - 1):
        nxt = conditioning.snapshots[t + 1]
        adjacency_targets.append(nxt.adjacency)
        count_targets.append(nxt.post_counts())
        pairs.append(sample_pairs(nxt.adjacency, ratio, rng))
    return adjacency_targets, count_targets, pairs


# ---------------------------------------------------------------------------
# Optimizer and training loop
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: EvolutionModel) -> "AdamState":
        names = trainable_param_names(model.strategy)
        return cls(m={n: np.zeros_like(get_param(model, n)) for n in names},
                   v={n: np.zeros_like(get_param(model, n)) for n in names})


def adam_update(model: EvolutionModel, grads: dict[str, np.ndarray],
                state: AdamState, lr: float, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8,
                weight_decay: float = 0.0) -> None:
    """One Adam step with decoupled weight decay over every trainable block."""
    state.step += 1
    t = state.step
    for name in state.m:
        g = grads[name]
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1 ** t)
        v_hat = state.v[name] / (1 - beta2 ** t)
        param = get_param(model, name)
        param[...] -= lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * param)


def train(conditioning: TemporalDataset, config: TrainConfig):
    """Full-batch Adam over all conditioning transitions.

    Returns (model, trace) where trace holds per-epoch total/link/activity
    losses measured before each update. Deterministic given the config seed.
    """
    if conditioning.n_steps < 2:
        raise ValueError("training needs at least two conditioning steps")
    model = init_model(conditioning, config.seed, config.strategy,
                       d=config.d, d_h=config.d_h, d_y=config.d_y)
    model.train_config = config.to_dict()
    raws = encode_sequence(conditioning, model)
    adjacency_targets, count_targets, pairs = _training_targets(
        conditioning, config.negative_ratio, config.seed)

    adam = AdamState.for_model(model)
    trace = []
    for epoch in range(config.epochs):
        total, l_link, l_act, grads = loss_and_gradients(
            model, raws, adjacency_targets, count_targets, pairs, config.weights)
        for term, value in (("link", l_link), ("activity", l_act), ("total", total)):
            if not np.isfinite(value):
                raise TrainingDivergedError(term, epoch)
        trace.append({"epoch": epoch, "total": total, "link": l_link,
                      "activity": l_act})
        adam_update(model, grads, adam, config.learning_rate,
                    weight_decay=config.weight_decay)
    model.final_metrics = {"final_loss": trace[-1]["total"]}
    return model, trace


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

@dataclass
class GradientCheckReport:
    block_errors: dict[str, float]
    tolerance: float

    @property
    def max_error(self) -> float:
        return max(self.block_errors.values())

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def __str__(self) -> str:
        lines = [f"{name}: {err:.3e}" for name, err in sorted(self.block_errors.items())]
        verdict = "PASS" if self.passed else "FAIL"
        return f"gradient check [{verdict}, tol {self.tolerance:g}]\n" + "\n".join(lines)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-5) -> float:
    """Elementwise |a - n| / max(|a|, |n|, floor), maximized.

    The floor absorbs finite-difference noise on near-zero gradients
    without masking real disagreements at meaningful magnitudes.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def gradient_check(model: EvolutionModel, sample: TemporalDataset,
                   weights: LossWeights | None = None,
                   tolerance: float = 1e-4, h: float = 1e-5,
                   seed: int = 0) -> GradientCheckReport:
    """Compare every analytic parameter gradient with central differences.

    Perturbs each element of each trainable block by +-h and differentiates
    the full training objective on the sample dataset.
    """
    weights = weights or LossWeights()
    raws = encode_sequence(sample, model)
    adjacency_targets, count_targets, pairs = _training_targets(sample, 1, seed)

    def objective() -> float:
        total, _, _, _ = loss_and_gradients(
            model, raws, adjacency_targets, count_targets, pairs, weights)
        return total

    _, _, _, analytic = loss_and_gradients(
        model, raws, adjacency_targets, count_targets, pairs, weights)

    block_errors = {}
    for name in trainable_param_names(model.strategy):
        param = get_param(model, name)
        numeric = np.zeros_like(param)
        flat = param.reshape(-1)
        num_flat = numeric.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            up = objective()
            flat[idx] = orig - h
            down = objective()
            flat[idx] = orig
            num_flat[idx] = (up - down) / (2.0 * h)
        block_errors[name] = max_relative_error(analytic[name], numeric)
    return GradientCheckReport(block_errors=block_errors, tolerance=tolerance)
