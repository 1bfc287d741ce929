"""Per-user modality encoders.

Three channels feed the fusion stage: a small graph network over the
adjacency matrix and demographic features, a signed-hashing bag-of-tokens
embedder for post text, and scaled engagement counts concatenated with an
embedded engagement summary. All encoders are deterministic given frozen
parameters and preprocessing statistics fitted on conditioning steps only.
"""

from __future__ import annotations

import hashlib
import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .graphgen import DemographicProfile, EngagementRecord, Post, Snapshot, TemporalDataset

DEFAULT_DIM = 32

STOP_WORDS = frozenset(
    "a an and are as at by for from in is it of on or that the this to was with".split()
)

_TOKEN_RE = re.compile(r"[a-z0-9]+")


# ---------------------------------------------------------------------------
# Preprocessing statistics (fit on conditioning data only)
# ---------------------------------------------------------------------------

@dataclass
class PreprocessingStats:
    """Normalization constants: z-score for age, min-max for engagement counts."""

    age_mean: float
    age_std: float
    engagement_min: np.ndarray  # (n_categories, 3)
    engagement_max: np.ndarray  # (n_categories, 3)

    def to_dict(self) -> dict:
        return {
            "age_mean": self.age_mean,
            "age_std": self.age_std,
            "engagement_min": self.engagement_min.tolist(),
            "engagement_max": self.engagement_max.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PreprocessingStats":
        return cls(
            age_mean=doc["age_mean"],
            age_std=doc["age_std"],
            engagement_min=np.asarray(doc["engagement_min"], dtype=np.float64),
            engagement_max=np.asarray(doc["engagement_max"], dtype=np.float64),
        )


def fit_preprocessing(conditioning: TemporalDataset) -> PreprocessingStats:
    """Compute normalization statistics from the conditioning steps.

    Target steps must not be included; feeding the split's conditioning half
    keeps held-out information out of every downstream embedding.
    """
    ages = np.array([p.age for p in conditioning.profiles], dtype=np.float64)
    counts = np.stack([
        rec.as_matrix()
        for snap in conditioning.snapshots
        for rec in snap.engagement
    ]).astype(np.float64)
    return PreprocessingStats(
        age_mean=float(ages.mean()),
        age_std=float(ages.std()),
        engagement_min=counts.min(axis=0),
        engagement_max=counts.max(axis=0),
    )


def preprocess_demographics(profiles: list[DemographicProfile],
                            stats: PreprocessingStats,
                            vocabularies: dict[str, tuple[str, ...]]) -> np.ndarray:
    """Feature matrix: z-scored age followed by one-hot categorical blocks.

    A zero age standard deviation maps the feature to 0 rather than raising;
    tiny synthetic datasets hit this case routinely.
    """
    n = len(profiles)
    sizes = [len(vocabularies["gender"]), len(vocabularies["occupation"]),
             len(vocabularies["location"])]
    out = np.zeros((n, 1 + sum(sizes)), dtype=np.float64)
    if stats.age_std > 0:
        out[:, 0] = (np.array([p.age for p in profiles]) - stats.age_mean) / stats.age_std
    offset = 1
    for size, attr in zip(sizes, ("gender", "occupation", "location")):
        codes = np.array([getattr(p, attr) for p in profiles])
        out[np.arange(n), offset + codes] = 1.0
        offset += size
    return out


# ---------------------------------------------------------------------------
# Demographic embedding: mean-aggregation message passing over the graph
# ---------------------------------------------------------------------------

@dataclass
class GnnLayer:
    w_self: np.ndarray
    w_nbr: np.ndarray
    bias: np.ndarray


@dataclass
class GnnParams:
    """Frozen message-passing weights; two tanh layers by default."""

    layers: list[GnnLayer]
    activation: str = "tanh"

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.w_self.shape[1] != prev.w_self.shape[0]:
                raise ValueError("layer dimensions do not chain")

    def to_dict(self) -> dict:
        return {
            "activation": self.activation,
            "layers": [
                {"w_self": l.w_self.tolist(), "w_nbr": l.w_nbr.tolist(),
                 "bias": l.bias.tolist()}
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GnnParams":
        layers = [
            GnnLayer(np.asarray(l["w_self"], dtype=np.float64),
                     np.asarray(l["w_nbr"], dtype=np.float64),
                     np.asarray(l["bias"], dtype=np.float64))
            for l in doc["layers"]
        ]
        return cls(layers=layers, activation=doc["activation"])


def init_gnn_params(seed: int, in_dim: int, out_dim: int, n_layers: int = 2) -> GnnParams:
    rng = np.random.default_rng(seed)
    dims = [in_dim] + [out_dim] * n_layers
    layers = []
    for d_in, d_out in zip(dims, dims[1:]):
        scale = 1.0 / np.sqrt(d_in)
        layers.append(GnnLayer(
            w_self=rng.normal(0.0, scale, size=(d_out, d_in)),
            w_nbr=rng.normal(0.0, scale, size=(d_out, d_in)),
            bias=np.zeros(d_out),
        ))
    return GnnParams(layers=layers)


def _activation(tag: str):
    if tag == "tanh":
        return np.tanh
    if tag == "identity":
        return lambda x: x
    raise ValueError(f"unknown activation {tag!r}")


def neighbor_mean(adjacency: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Mean of each node's neighbor rows; isolated nodes get the zero vector."""
    adj = adjacency.astype(np.float64)
    deg = adj.sum(axis=1, keepdims=True)
    agg = adj @ x
    return np.divide(agg, deg, out=np.zeros_like(agg), where=deg > 0)


def embed_demographics(adjacency: np.ndarray, features: np.ndarray,
                       params: GnnParams) -> np.ndarray:
    """Per-user structural embedding via repeated mean-neighbor aggregation.

    Each layer computes act(W_self x + W_nbr mean_{j in N(i)} x_j + b).
    """
    if features.shape[0] != adjacency.shape[0]:
        raise ValueError(
            f"feature rows {features.shape[0]} != adjacency order {adjacency.shape[0]}")
    if features.shape[1] != params.layers[0].w_self.shape[1]:
        raise ValueError(
            f"feature width {features.shape[1]} does not match first layer "
            f"input {params.layers[0].w_self.shape[1]}")
    act = _activation(params.activation)
    h = features
    for layer in params.layers:
        h = act(h @ layer.w_self.T + neighbor_mean(adjacency, h) @ layer.w_nbr.T + layer.bias)
    return h


# ---------------------------------------------------------------------------
# Text embedding: deterministic signed feature hashing
# ---------------------------------------------------------------------------

def tokenize(text: str, remove_stopwords: bool = False) -> list[str]:
    tokens = _TOKEN_RE.findall(text.lower())
    if remove_stopwords:
        tokens = [t for t in tokens if t not in STOP_WORDS]
    return tokens


def _token_hash(token: str, salt: bytes) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=salt).digest()
    return int.from_bytes(digest, "big")


def hashed_text_vector(text: str, dim: int, remove_stopwords: bool = False) -> np.ndarray:
    """L2-normalized signed bag-of-tokens hash; empty text gives the zero vector."""
    v = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text, remove_stopwords):
        bucket = _token_hash(token, b"bucket") % dim
        sign = 1.0 if _token_hash(token, b"sign") & 1 else -1.0
        v[bucket] += sign
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def embed_posts(posts: list[Post], dim: int = DEFAULT_DIM,
                remove_stopwords: bool = False) -> np.ndarray:
    """Embed a user's posts as one token bag; permutation-invariant over posts."""
    return hashed_text_vector(" ".join(p.text for p in posts), dim, remove_stopwords)


def make_text_embedder(dim: int, remove_stopwords: bool = False):
    """Built-in batch text embedder with the external-encoder call shape."""
    def encode(texts: list[str]) -> np.ndarray:
        return np.stack([hashed_text_vector(t, dim, remove_stopwords) for t in texts])
    return encode


# ---------------------------------------------------------------------------
# Engagement embedding
# ---------------------------------------------------------------------------

def summarize_engagement(rec: EngagementRecord, vocabulary: tuple[str, ...]) -> str:
    """One clause per active category, in vocabulary order; 'no engagement' if idle."""
    clauses = []
    for c, name in enumerate(vocabulary):
        r, co, s = int(rec.reactions[c]), int(rec.comments[c]), int(rec.shares[c])
        if r or co or s:
            clauses.append(f"{name}: {r} reactions, {co} comments, {s} shares")
    return "; ".join(clauses) if clauses else "no engagement"


def scale_engagement_counts(rec: EngagementRecord, stats: PreprocessingStats) -> np.ndarray:
    """Min-max scaled counts flattened to (n_categories * 3,); constant features map to 0."""
    x = rec.as_matrix().astype(np.float64)
    span = stats.engagement_max - stats.engagement_min
    scaled = np.divide(x - stats.engagement_min, span,
                       out=np.zeros_like(x), where=span > 0)
    return scaled.ravel()


def engagement_features(rec: EngagementRecord, stats: PreprocessingStats,
                        vocabulary: tuple[str, ...], dim: int = DEFAULT_DIM,
                        text_embed=None) -> np.ndarray:
    """Raw engagement vector: scaled count block plus embedded summary text."""
    if text_embed is None:
        text_embed = make_text_embedder(dim)
    summary_vec = text_embed([summarize_engagement(rec, vocabulary)])[0]
    return np.concatenate([scale_engagement_counts(rec, stats), summary_vec])


def embed_engagement(rec: EngagementRecord, stats: PreprocessingStats,
                     vocabulary: tuple[str, ...], projection: np.ndarray,
                     text_embed=None) -> np.ndarray:
    """Engagement embedding at the common dimension: projection @ raw features."""
    feats = engagement_features(rec, stats, vocabulary, projection.shape[1] - 3 * len(vocabulary),
                                text_embed)
    return projection @ feats


# ---------------------------------------------------------------------------
# External encoder contract
# ---------------------------------------------------------------------------

class ExternalEncoderError(Exception):
    """Base class; every subclass signals that fallback is required."""


class TransportError(ExternalEncoderError):
    pass


class DimensionMismatchError(ExternalEncoderError):
    pass


class NonFiniteEmbeddingError(ExternalEncoderError):
    pass


@dataclass(frozen=True)
class ExternalEncoderConfig:
    url: str
    dim: int
    timeout_ms: int = 5000


def http_post_json(url: str, payload: dict, timeout_ms: int) -> dict:
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=body,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=timeout_ms / 1000.0) as resp:
        return json.loads(resp.read().decode("utf-8"))


def external_encode(texts: list[str], config: ExternalEncoderConfig,
                    transport=http_post_json) -> np.ndarray:
    """Encode a batch of texts through an HTTP endpoint.

    Wire format: request {"texts": [...]} and response {"vectors": [[...]]}.
    The batch is atomic: any transport failure, dimension mismatch, or
    non-finite value raises and no partial result is returned.
    """
    try:
        doc = transport(config.url, {"texts": texts}, config.timeout_ms)
    except (urllib.error.URLError, TimeoutError, OSError, ValueError) as exc:
        raise TransportError(f"external encoder at {config.url}: {exc}") from exc
    vectors = doc.get("vectors")
    if vectors is None or len(vectors) != len(texts):
        raise DimensionMismatchError(
            f"expected {len(texts)} vectors, got "
            f"{'none' if vectors is None else len(vectors)}")
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != config.dim:
        raise DimensionMismatchError(
            f"expected vectors of dimension {config.dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEmbeddingError("external encoder returned non-finite values")
    return arr


def make_external_embedder(config: ExternalEncoderConfig, transport=http_post_json):
    def encode(texts: list[str]) -> np.ndarray:
        return external_encode(texts, config, transport)
    return encode


# ---------------------------------------------------------------------------
# Snapshot-level encoding
# ---------------------------------------------------------------------------

def encode_snapshot(snapshot: Snapshot, stats: PreprocessingStats,
                    gnn: GnnParams, vocabularies: dict[str, tuple[str, ...]],
                    category_vocabulary: tuple[str, ...], dim: int = DEFAULT_DIM,
                    text_embed=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw modality matrices for one snapshot.

    Returns (demographic, post, engagement) arrays of shapes (N, d), (N, d)
    and (N, 3k + d). Projection to the common dimension is the fusion
    stage's job; these are encoder outputs.
    """
    if text_embed is None:
        text_embed = make_text_embedder(dim)
    features = preprocess_demographics(snapshot.profiles, stats, vocabularies)
    raw_d = embed_demographics(snapshot.adjacency, features, gnn)
    raw_p = text_embed([" ".join(p.text for p in user_posts)
                        for user_posts in snapshot.posts])
    raw_e = np.stack([
        engagement_features(rec, stats, category_vocabulary, dim, text_embed)
        for rec in snapshot.engagement
    ])
    return raw_d, raw_p, raw_e
