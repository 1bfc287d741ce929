"""Deterministic synthetic generator of temporal social networks.

Plants three recoverable signals: homophily (attribute-matched pairs connect
more often), triadic closure (open triangles gain their missing edge over
time), and interest drift (each user's category mixture moves toward its
neighborhood mean). Generated datasets stand in for real social-media data
as reproducible ground truth for the forecasting pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

SCHEMA_VERSION = "1"

DEFAULT_CATEGORIES = (
    "Politics",
    "Education",
    "Sports",
    "Travel",
    "Entertainment",
    "Health",
    "Technology",
    "Lifestyle",
)

GENDERS = ("female", "male", "nonbinary")
OCCUPATIONS = ("student", "engineer", "teacher", "artist", "doctor", "journalist")
LOCATIONS = ("US", "GB", "DE", "BR", "IN", "JP", "NG", "AU")

# Age anchor/scale for the sociability curve: younger users connect more.
SOCIABILITY_AGE_MID = 45.0
SOCIABILITY_AGE_SCALE = 22.0

# Mean engagement events per post, by kind.
REACTION_RATE = 20.0
COMMENT_RATE = 8.0
SHARE_RATE = 4.0

MIN_AGE, MAX_AGE = 13, 100


@dataclass(frozen=True)
class DemographicProfile:
    """Static per-user attributes; categorical fields are vocabulary codes."""

    age: int
    gender: int
    occupation: int
    location: int

    def __post_init__(self):
        if not MIN_AGE <= self.age <= MAX_AGE:
            raise ValueError(f"age {self.age} outside [{MIN_AGE}, {MAX_AGE}]")


@dataclass(frozen=True)
class Post:
    category: int
    text: str
    step: int

    def __post_init__(self):
        if not self.text:
            raise ValueError("post text must be non-empty")


@dataclass
class EngagementRecord:
    """Per-category counts of reactions, comments, and shares."""

    reactions: np.ndarray
    comments: np.ndarray
    shares: np.ndarray

    @classmethod
    def zeros(cls, n_categories: int) -> "EngagementRecord":
        z = lambda: np.zeros(n_categories, dtype=np.int64)
        return cls(z(), z(), z())

    def as_matrix(self) -> np.ndarray:
        """Counts as an (n_categories, 3) matrix ordered reactions/comments/shares."""
        return np.stack([self.reactions, self.comments, self.shares], axis=1)

    def total(self) -> int:
        return int(self.reactions.sum() + self.comments.sum() + self.shares.sum())


@dataclass
class Snapshot:
    """One time step: graph plus per-user content and engagement.

    Adjacency is binary with zero diagonal, symmetric unless the dataset was
    generated in directed mode. ``category_mixture`` is generator ground
    truth (the latent interest distribution) and is not serialized.
    """

    step: int
    adjacency: np.ndarray
    profiles: list[DemographicProfile]
    posts: list[list[Post]]
    engagement: list[EngagementRecord]
    category_mixture: np.ndarray | None = None

    @property
    def n_users(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def post_counts(self) -> np.ndarray:
        """Per-user per-category post counts, shape (n_users, n_categories)."""
        k = len(self.engagement[0].reactions)
        counts = np.zeros((self.n_users, k), dtype=np.int64)
        for i, user_posts in enumerate(self.posts):
            for p in user_posts:
                counts[i, p.category] += 1
        return counts


@dataclass
class TemporalDataset:
    """An ordered sequence of snapshots over a fixed user set."""

    snapshots: list[Snapshot]
    category_vocabulary: tuple[str, ...]
    vocabularies: dict[str, tuple[str, ...]]
    seed: int
    holdout_steps: tuple[int, ...] = ()
    directed: bool = False

    def __post_init__(self):
        sizes = {s.n_users for s in self.snapshots}
        if len(sizes) > 1:
            raise ValueError(f"snapshots disagree on user count: {sorted(sizes)}")

    @property
    def n_users(self) -> int:
        return self.snapshots[0].n_users

    @property
    def n_steps(self) -> int:
        return len(self.snapshots)

    @property
    def n_categories(self) -> int:
        return len(self.category_vocabulary)

    @property
    def profiles(self) -> list[DemographicProfile]:
        return self.snapshots[0].profiles


@dataclass(frozen=True)
class GeneratorConfig:
    n_users: int = 24
    n_steps: int = 8
    homophily: float = 0.5
    closure: float = 0.35
    drift: float = 0.5
    base_edge_prob: float = 0.1
    step_edge_prob: float = 0.005
    post_rate: float = 12.0
    engagement_rate: float = 1.0
    demographic_bias: float = 0.6
    sociability_sigma: float = 1.0
    directed: bool = False
    category_vocabulary: tuple[str, ...] = DEFAULT_CATEGORIES

    def __post_init__(self):
        if self.n_users < 4:
            raise ValueError(f"n_users must be >= 4, got {self.n_users}")
        if self.n_steps < 5:
            raise ValueError(f"n_steps must be >= 5, got {self.n_steps}")
        for name in ("homophily", "closure", "drift", "base_edge_prob",
                     "step_edge_prob", "demographic_bias"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.post_rate < 0 or self.engagement_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.sociability_sigma < 0:
            raise ValueError("sociability_sigma must be non-negative")


def _attribute_match(profiles: list[DemographicProfile]) -> np.ndarray:
    """Pairwise count of shared location/occupation, shape (N, N) in {0,1,2}."""
    loc = np.array([p.location for p in profiles])
    occ = np.array([p.occupation for p in profiles])
    same_loc = (loc[:, None] == loc[None, :]).astype(np.float64)
    same_occ = (occ[:, None] == occ[None, :]).astype(np.float64)
    return same_loc + same_occ


def sociability(profiles: list[DemographicProfile], sigma: float) -> np.ndarray:
    """Per-user connection propensity, declining with age.

    Independent of occupation and location, so attribute-match statistics
    stay clean of it; at sigma 0 every user is equally sociable.
    """
    ages = np.array([p.age for p in profiles], dtype=np.float64)
    return np.exp(sigma * (SOCIABILITY_AGE_MID - ages) / SOCIABILITY_AGE_SCALE)


def edge_probabilities(base: float, homophily: float, match: np.ndarray,
                       social: np.ndarray) -> np.ndarray:
    """Pairwise connection probabilities.

    Multiplicative in the two users' sociability; homophily interpolates
    between attribute-blind rates and rates scaled by the number of shared
    attributes, so non-matching pairs are suppressed as homophily rises.
    """
    affinity = (1.0 - homophily) + homophily * match
    return np.clip(base * np.outer(social, social) * affinity, 0.0, 0.95)


def initial_adjacency(draws: np.ndarray, profiles: list[DemographicProfile],
                      base_prob: float, homophily: float,
                      social: np.ndarray | None = None,
                      directed: bool = False) -> np.ndarray:
    """Seed graph: pairwise coin flips against the planted probabilities."""
    if social is None:
        social = np.ones(len(profiles))
    prob = edge_probabilities(base_prob, homophily, _attribute_match(profiles), social)
    adj = (draws < prob).astype(np.uint8)
    np.fill_diagonal(adj, 0)
    if not directed:
        adj = np.triu(adj, 1)
        adj = adj | adj.T
    return adj


def evolve_adjacency(adjacency: np.ndarray, closure_draws: np.ndarray,
                     new_edge_draws: np.ndarray, closure: float,
                     new_edge_prob: np.ndarray,
                     directed: bool = False) -> np.ndarray:
    """One growth step: close open triangles and add fresh random edges.

    A non-adjacent pair with at least one common neighbor closes with
    probability ``closure``; any non-adjacent pair additionally forms an
    edge with its entry of ``new_edge_prob``. Existing edges never drop, so
    edge sets grow monotonically and are monotone in ``closure`` under
    shared draws.
    """
    adj = adjacency.astype(np.uint8)
    common = (adj @ adj) > 0
    non_edge = (adj == 0) & ~np.eye(adj.shape[0], dtype=bool)
    closable = common & non_edge
    closed = closable & (closure_draws < closure)
    fresh = non_edge & (new_edge_draws < new_edge_prob)
    out = adj | closed.astype(np.uint8) | fresh.astype(np.uint8)
    if not directed:
        upper = np.triu(out, 1)
        out = upper | upper.T
    np.fill_diagonal(out, 0)
    return out


def interest_plasticity(profiles: list[DemographicProfile]) -> np.ndarray:
    """How strongly a user's interests follow their neighborhood, by age.

    Young users track their network; older users keep personal mixtures.
    This is the demographic-by-engagement interaction a predictor must
    recover: the informative modality differs per user.
    """
    ages = np.array([p.age for p in profiles], dtype=np.float64)
    return np.clip(0.15 + 0.85 * (80.0 - ages) / (80.0 - MIN_AGE), 0.1, 1.0)


def _drift_mixtures(mixtures: np.ndarray, adjacency: np.ndarray,
                    drift: float, plasticity: np.ndarray) -> np.ndarray:
    """Move each mixture toward its closed-neighborhood mean.

    The per-user rate is drift scaled by interest plasticity. The
    neighborhood includes the user itself so full drift on a connected
    graph is an averaging (consensus) step rather than a swap, which keeps
    mixtures contracting even on bipartite graphs.
    """
    closed = adjacency.astype(np.float64) + np.eye(adjacency.shape[0])
    neighborhood_mean = (closed @ mixtures) / closed.sum(axis=1, keepdims=True)
    rate = (drift * plasticity)[:, None]
    out = (1.0 - rate) * mixtures + rate * neighborhood_mean
    return out / out.sum(axis=1, keepdims=True)


def _initial_mixtures(rng: np.random.Generator, profiles: list[DemographicProfile],
                      n_categories: int, bias: float) -> np.ndarray:
    """Interest mixtures seeded from noise plus demographic preferences.

    Occupation and location each pull probability mass toward one category,
    so activity carries a demographic signal that models can recover.
    """
    n = len(profiles)
    noise = rng.dirichlet(np.full(n_categories, 0.3), size=n)
    pref = np.zeros((n, n_categories))
    for i, p in enumerate(profiles):
        pref[i, p.occupation % n_categories] += 0.7
        pref[i, (p.location + 3) % n_categories] += 0.3
    out = (1.0 - bias) * noise + bias * pref
    return out / out.sum(axis=1, keepdims=True)


def keyword_pool(category: str) -> list[str]:
    name = category.lower()
    return [f"{name}{k}" for k in range(6)]


def post_text(category_name: str, keywords: list[str]) -> str:
    """Canonical post text: the category token followed by keywords."""
    return " ".join([category_name.lower()] + keywords)


def _make_posts(rng: np.random.Generator, mixtures: np.ndarray, step: int,
                post_rate: float, vocabulary: tuple[str, ...]) -> list[list[Post]]:
    n, k = mixtures.shape
    pools = [keyword_pool(c) for c in vocabulary]
    counts = rng.poisson(post_rate, size=n)
    all_posts: list[list[Post]] = []
    for i in range(n):
        per_cat = rng.multinomial(counts[i], mixtures[i])
        user_posts = []
        for c in range(k):
            for _ in range(per_cat[c]):
                kws = [pools[c][j] for j in rng.integers(0, len(pools[c]), size=2)]
                user_posts.append(Post(category=c, text=post_text(vocabulary[c], kws), step=step))
        all_posts.append(user_posts)
    return all_posts


def _make_engagement(rng: np.random.Generator, mixtures: np.ndarray,
                     rate: float) -> list[EngagementRecord]:
    n, k = mixtures.shape
    reactions = rng.poisson(rate * REACTION_RATE * mixtures)
    comments = rng.poisson(rate * COMMENT_RATE * mixtures)
    shares = rng.poisson(rate * SHARE_RATE * mixtures)
    return [EngagementRecord(reactions[i], comments[i], shares[i]) for i in range(n)]


def generate(config: GeneratorConfig, seed: int) -> TemporalDataset:
    """Generate a temporal social network from (config, seed), deterministically.

    Three independent random streams are spawned from the seed: graph
    structure, post content, and engagement. The graph stream draws a fixed
    number of uniforms per step regardless of outcomes, so datasets produced
    with the same seed but different closure values share their draws and
    the resulting edge sets are nested.
    """
    ss = np.random.SeedSequence(seed)
    rng_graph, rng_content, rng_engage = [np.random.default_rng(c) for c in ss.spawn(3)]
    n, t_max, k = config.n_users, config.n_steps, len(config.category_vocabulary)

    profiles = [
        DemographicProfile(
            age=int(a), gender=int(g), occupation=int(o), location=int(l))
        for a, g, o, l in zip(
            rng_graph.integers(MIN_AGE, 80, size=n),
            rng_graph.integers(0, len(GENDERS), size=n),
            rng_graph.integers(0, len(OCCUPATIONS), size=n),
            rng_graph.integers(0, len(LOCATIONS), size=n),
        )
    ]
    match = _attribute_match(profiles)
    social = sociability(profiles, config.sociability_sigma)
    plasticity = interest_plasticity(profiles)
    step_prob = edge_probabilities(config.step_edge_prob, config.homophily,
                                   match, social)

    adjacency = initial_adjacency(
        rng_graph.random((n, n)), profiles, config.base_edge_prob,
        config.homophily, social, config.directed)
    mixtures = _initial_mixtures(rng_content, profiles, k, config.demographic_bias)

    snapshots = []
    for step in range(t_max):
        if step > 0:
            closure_draws = rng_graph.random((n, n))
            new_edge_draws = rng_graph.random((n, n))
            adjacency = evolve_adjacency(
                adjacency, closure_draws, new_edge_draws,
                config.closure, step_prob, config.directed)
            mixtures = _drift_mixtures(mixtures, prev_adjacency, config.drift, plasticity)
        snapshots.append(Snapshot(
            step=step,
            adjacency=adjacency.copy(),
            profiles=profiles,
            posts=_make_posts(rng_content, mixtures, step,
                              config.post_rate, config.category_vocabulary),
            engagement=_make_engagement(rng_engage, mixtures, config.engagement_rate),
            category_mixture=mixtures.copy(),
        ))
        prev_adjacency = adjacency

    horizon = min(4, t_max - 1)
    return TemporalDataset(
        snapshots=snapshots,
        category_vocabulary=config.category_vocabulary,
        vocabularies={
            "gender": GENDERS,
            "occupation": OCCUPATIONS,
            "location": LOCATIONS,
        },
        seed=seed,
        holdout_steps=tuple(range(t_max - horizon, t_max)),
        directed=config.directed,
    )


def split_dataset(ds: TemporalDataset, horizon: int = 4) -> tuple[TemporalDataset, TemporalDataset]:
    """Partition into conditioning (all but the last ``horizon`` steps) and target."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if horizon >= ds.n_steps:
        raise ValueError(
            f"horizon {horizon} must be smaller than the {ds.n_steps}-step dataset")
    cut = ds.n_steps - horizon
    conditioning = replace(ds, snapshots=ds.snapshots[:cut], holdout_steps=())
    target = replace(ds, snapshots=ds.snapshots[cut:], holdout_steps=())
    return conditioning, target


# ---------------------------------------------------------------------------
# Serialization. Edge lists, not dense matrices, on disk.
# ---------------------------------------------------------------------------

def edges_from_adjacency(adjacency: np.ndarray, directed: bool = False) -> list[list[int]]:
    if directed:
        idx = np.argwhere(adjacency > 0)
    else:
        idx = np.argwhere(np.triu(adjacency, 1) > 0)
    return [[int(i), int(j)] for i, j in idx]


def adjacency_from_edges(edges: list[list[int]], n: int, directed: bool = False) -> np.ndarray:
    adj = np.zeros((n, n), dtype=np.uint8)
    for i, j in edges:
        adj[i, j] = 1
        if not directed:
            adj[j, i] = 1
    return adj


def dataset_to_dict(ds: TemporalDataset) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "seed": ds.seed,
        "directed": ds.directed,
        "category_vocabulary": list(ds.category_vocabulary),
        "vocabularies": {k: list(v) for k, v in ds.vocabularies.items()},
        "holdout_steps": list(ds.holdout_steps),
        "users": [
            {"id": i, "profile": {"age": p.age, "gender": p.gender,
                                  "occupation": p.occupation, "location": p.location}}
            for i, p in enumerate(ds.profiles)
        ],
        "snapshots": [
            {
                "step": s.step,
                "edges": edges_from_adjacency(s.adjacency, ds.directed),
                "posts": [[{"category": p.category, "text": p.text} for p in user_posts]
                          for user_posts in s.posts],
                "engagement": [
                    {"reactions": r.reactions.tolist(),
                     "comments": r.comments.tolist(),
                     "shares": r.shares.tolist()}
                    for r in s.engagement
                ],
            }
            for s in ds.snapshots
        ],
    }


def dataset_from_dict(doc: dict) -> TemporalDataset:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported dataset schema {doc.get('schema_version')!r}, "
            f"expected {SCHEMA_VERSION!r}")
    directed = bool(doc.get("directed", False))
    profiles = [
        DemographicProfile(**u["profile"])
        for u in sorted(doc["users"], key=lambda u: u["id"])
    ]
    n = len(profiles)
    snapshots = []
    for s in doc["snapshots"]:
        posts = [
            [Post(category=p["category"], text=p["text"], step=s["step"])
             for p in user_posts]
            for user_posts in s["posts"]
        ]
        engagement = [
            EngagementRecord(
                np.asarray(e["reactions"], dtype=np.int64),
                np.asarray(e["comments"], dtype=np.int64),
                np.asarray(e["shares"], dtype=np.int64))
            for e in s["engagement"]
        ]
        snapshots.append(Snapshot(
            step=s["step"],
            adjacency=adjacency_from_edges(s["edges"], n, directed),
            profiles=profiles,
            posts=posts,
            engagement=engagement,
        ))
    return TemporalDataset(
        snapshots=snapshots,
        category_vocabulary=tuple(doc["category_vocabulary"]),
        vocabularies={k: tuple(v) for k, v in doc["vocabularies"].items()},
        seed=doc["seed"],
        holdout_steps=tuple(doc["holdout_steps"]),
        directed=directed,
    )


def save_dataset(ds: TemporalDataset, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_dict(ds), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path: str) -> TemporalDataset:
    with open(path, encoding="utf-8") as fh:
        return dataset_from_dict(json.load(fh))
