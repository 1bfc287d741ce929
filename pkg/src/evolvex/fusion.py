"""Fusion of the three modality embeddings into a single vector.

Three strategies: plain concatenation, softmax-weighted modality attention,
and cross-modal attention where a query derived from the previous step's
fused vector attends over the modality stack as keys and values. Forward
passes are paired with analytically derived backward passes; training never
relies on numeric differentiation.

Modality attention computes one scalar score per modality and applies a
single softmax across the three scores jointly, so the mixing weights are
a genuine distribution over modalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STRATEGIES = ("concat", "attention", "crossmodal")


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; stable for logit magnitudes well beyond 1e3."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_vjp(alpha: np.ndarray, d_alpha: np.ndarray, axis: int = -1) -> np.ndarray:
    """Backward through softmax: alpha * (d_alpha - sum(alpha * d_alpha))."""
    inner = np.sum(alpha * d_alpha, axis=axis, keepdims=True)
    return alpha * (d_alpha - inner)


@dataclass
class ModalityTriple:
    """The three per-user embeddings at the common dimension.

    Arrays may be single vectors of shape (d,) or user-batched (N, d);
    fusion treats rows independently either way.
    """

    e_d: np.ndarray
    e_p: np.ndarray
    e_e: np.ndarray
    step: int | None = None

    def __post_init__(self):
        if not (self.e_d.shape == self.e_p.shape == self.e_e.shape):
            raise ValueError(
                f"modality shapes differ: {self.e_d.shape}, {self.e_p.shape}, "
                f"{self.e_e.shape}")
        for name in ("e_d", "e_p", "e_e"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.e_d.shape[-1]

    def stack(self) -> np.ndarray:
        return np.stack([self.e_d, self.e_p, self.e_e], axis=-2)


@dataclass
class FusedEmbedding:
    """Fusion output: vector(s) plus the attention weights that produced them."""

    f: np.ndarray
    strategy: str
    alphas: np.ndarray | None = None  # (..., 3); None for concat
    step: int | None = None


@dataclass
class FusionParams:
    """Learnable fusion parameters.

    ``p_d``/``p_p``/``p_e`` project raw encoder outputs to the common
    dimension d. ``w_d``/``w_p``/``w_e`` score modalities for attention
    fusion; ``w_q`` maps the previous fused vector to a query for
    cross-modal fusion. Query/key/value dimensions all equal d.
    """

    strategy: str
    w_d: np.ndarray
    w_p: np.ndarray
    w_e: np.ndarray
    w_q: np.ndarray
    p_d: np.ndarray
    p_p: np.ndarray
    p_e: np.ndarray

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown fusion strategy {self.strategy!r}")
        d = self.p_d.shape[0]
        if not (self.p_p.shape[0] == self.p_e.shape[0] == d):
            raise ValueError("projections disagree on the common dimension")
        if self.w_q.shape != (d, d):
            raise ValueError(f"w_q must be ({d}, {d}), got {self.w_q.shape}")
        for name in ("w_d", "w_p", "w_e"):
            if getattr(self, name).shape != (d,):
                raise ValueError(f"{name} must have shape ({d},)")

    @property
    def dim(self) -> int:
        return self.p_d.shape[0]

    @property
    def fused_dim(self) -> int:
        return 3 * self.dim if self.strategy == "concat" else self.dim


# Score and query weights start small so the modality softmax begins close
# to uniform; saturated attention at initialization starves the losing
# modalities' projections of gradient.
SCORE_INIT_SCALE = 0.1


def init_fusion_params(seed: int, d: int, raw_d_dim: int, raw_p_dim: int,
                       raw_e_dim: int, strategy: str) -> FusionParams:
    rng = np.random.default_rng(seed)
    proj = lambda rows, cols: rng.normal(0.0, 1.0 / np.sqrt(cols), size=(rows, cols))
    score = lambda: rng.normal(0.0, SCORE_INIT_SCALE / np.sqrt(d), size=d)
    return FusionParams(
        strategy=strategy,
        w_d=score(),
        w_p=score(),
        w_e=score(),
        w_q=SCORE_INIT_SCALE * proj(d, d),
        p_d=proj(d, raw_d_dim),
        p_p=proj(d, raw_p_dim),
        p_e=proj(d, raw_e_dim),
    )


# ---------------------------------------------------------------------------
# Projection to the common dimension
# ---------------------------------------------------------------------------

def project(raw_d: np.ndarray, raw_p: np.ndarray, raw_e: np.ndarray,
            params: FusionParams, step: int | None = None) -> ModalityTriple:
    return ModalityTriple(
        e_d=raw_d @ params.p_d.T,
        e_p=raw_p @ params.p_p.T,
        e_e=raw_e @ params.p_e.T,
        step=step,
    )


def project_backward(d_triple: tuple[np.ndarray, np.ndarray, np.ndarray],
                     raw_d: np.ndarray, raw_p: np.ndarray,
                     raw_e: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the three projection matrices; raw inputs are constants."""
    de_d, de_p, de_e = (np.atleast_2d(g) for g in d_triple)
    return {
        "p_d": de_d.T @ np.atleast_2d(raw_d),
        "p_p": de_p.T @ np.atleast_2d(raw_p),
        "p_e": de_e.T @ np.atleast_2d(raw_e),
    }


def initial_fused_state(triple: ModalityTriple) -> np.ndarray:
    """Strategy-neutral stand-in for the previous fused vector at the first step."""
    return (triple.e_d + triple.e_p + triple.e_e) / 3.0


# ---------------------------------------------------------------------------
# Concatenation
# ---------------------------------------------------------------------------

def fuse_concat(triple: ModalityTriple) -> FusedEmbedding:
    """f = [e_d ; e_p ; e_e], entries copied verbatim."""
    f = np.concatenate([triple.e_d, triple.e_p, triple.e_e], axis=-1)
    return FusedEmbedding(f=f, strategy="concat", alphas=None, step=triple.step)


def fuse_concat_backward(df: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return df[..., :dim], df[..., dim:2 * dim], df[..., 2 * dim:]


# ---------------------------------------------------------------------------
# Modality attention
# ---------------------------------------------------------------------------

def fuse_attention(triple: ModalityTriple, params: FusionParams) -> FusedEmbedding:
    """Scalar score per modality, one softmax across the three, convex mix.

    f = alpha_d e_d + alpha_p e_p + alpha_e e_e with
    alpha = softmax(w_d.e_d, w_p.e_p, w_e.e_e).
    """
    scores = np.stack([
        triple.e_d @ params.w_d,
        triple.e_p @ params.w_p,
        triple.e_e @ params.w_e,
    ], axis=-1)
    alphas = softmax(scores, axis=-1)
    f = (alphas[..., 0, None] * triple.e_d
         + alphas[..., 1, None] * triple.e_p
         + alphas[..., 2, None] * triple.e_e)
    return FusedEmbedding(f=f, strategy="attention", alphas=alphas, step=triple.step)


def fuse_attention_backward(df: np.ndarray, triple: ModalityTriple,
                            params: FusionParams, fused: FusedEmbedding):
    """Backward for attention fusion.

    Returns ((de_d, de_p, de_e), {"w_d": ..., "w_p": ..., "w_e": ...}).
    Each modality gradient has a value path (alpha_m df) and a score path
    (d_score_m w_m) because e_m feeds both the mix and its own score.
    """
    alphas = fused.alphas
    modalities = (triple.e_d, triple.e_p, triple.e_e)
    weights = (params.w_d, params.w_p, params.w_e)

    d_alpha = np.stack([np.sum(df * e, axis=-1) for e in modalities], axis=-1)
    d_scores = softmax_vjp(alphas, d_alpha, axis=-1)

    d_inputs = []
    d_params = {}
    for m, (e, w, name) in enumerate(zip(modalities, weights, ("w_d", "w_p", "w_e"))):
        ds = d_scores[..., m, None]
        d_inputs.append(alphas[..., m, None] * df + ds * w)
        d_params[name] = np.sum(np.atleast_2d(ds * e), axis=0)
    return tuple(d_inputs), d_params


# ---------------------------------------------------------------------------
# Cross-modal attention
# ---------------------------------------------------------------------------

def fuse_crossmodal(triple: ModalityTriple, f_prev: np.ndarray,
                    params: FusionParams) -> FusedEmbedding:
    """Query from the previous fused vector attends over the modality stack.

    q = w_q f_prev; logits_m = q.e_m / sqrt(d); f = sum_m softmax(logits)_m e_m.
    Keys and values are both the projected modality vectors, so the output
    stays inside the convex hull of the three modalities.
    """
    q = f_prev @ params.w_q.T
    scale = 1.0 / np.sqrt(triple.dim)
    logits = np.stack([
        np.sum(q * triple.e_d, axis=-1),
        np.sum(q * triple.e_p, axis=-1),
        np.sum(q * triple.e_e, axis=-1),
    ], axis=-1) * scale
    alphas = softmax(logits, axis=-1)
    f = (alphas[..., 0, None] * triple.e_d
         + alphas[..., 1, None] * triple.e_p
         + alphas[..., 2, None] * triple.e_e)
    return FusedEmbedding(f=f, strategy="crossmodal", alphas=alphas, step=triple.step)


def fuse_crossmodal_backward(df: np.ndarray, triple: ModalityTriple,
                             f_prev: np.ndarray, params: FusionParams,
                             fused: FusedEmbedding):
    """Backward for cross-modal fusion.

    Returns ((de_d, de_p, de_e), df_prev, {"w_q": ...}). Modality vectors
    act as keys and values, so each gets a value-path and a key-path term.
    """
    alphas = fused.alphas
    modalities = (triple.e_d, triple.e_p, triple.e_e)
    scale = 1.0 / np.sqrt(triple.dim)
    q = f_prev @ params.w_q.T

    d_alpha = np.stack([np.sum(df * e, axis=-1) for e in modalities], axis=-1)
    d_logits = softmax_vjp(alphas, d_alpha, axis=-1)

    dq = np.zeros_like(np.atleast_2d(q), dtype=np.float64)
    d_inputs = []
    for m, e in enumerate(modalities):
        dl = d_logits[..., m, None]
        d_inputs.append(alphas[..., m, None] * df + dl * q * scale)
        dq += np.atleast_2d(dl * e) * scale
    d_w_q = dq.T @ np.atleast_2d(f_prev)
    df_prev = dq @ params.w_q
    if f_prev.ndim == 1:
        df_prev = df_prev[0]
    return tuple(d_inputs), df_prev, {"w_q": d_w_q}


# ---------------------------------------------------------------------------
# Strategy dispatch
# ---------------------------------------------------------------------------

def fuse(triple: ModalityTriple, f_prev: np.ndarray | None,
         params: FusionParams) -> FusedEmbedding:
    """Fuse under params.strategy; concat and attention ignore f_prev."""
    if params.strategy == "concat":
        return fuse_concat(triple)
    if params.strategy == "attention":
        return fuse_attention(triple, params)
    if params.strategy == "crossmodal":
        if f_prev is None:
            raise ValueError("crossmodal fusion requires the previous fused vector")
        return fuse_crossmodal(triple, f_prev, params)
    raise ValueError(f"unknown fusion strategy {params.strategy!r}")


def fuse_backward(df: np.ndarray, triple: ModalityTriple,
                  f_prev: np.ndarray | None, params: FusionParams,
                  fused: FusedEmbedding):
    """Dispatch backward; returns ((de_d, de_p, de_e), df_prev, param_grads)."""
    if params.strategy == "concat":
        return fuse_concat_backward(df, triple.dim), None, {}
    if params.strategy == "attention":
        d_inputs, d_params = fuse_attention_backward(df, triple, params, fused)
        return d_inputs, None, d_params
    d_inputs, df_prev, d_params = fuse_crossmodal_backward(
        df, triple, f_prev, params, fused)
    return d_inputs, df_prev, d_params
