"""Encode one snapshot into the three modality embeddings.

Demographics flow through a two-layer mean-aggregation graph network, post
text through deterministic signed feature hashing, and engagement through
min-max scaled counts concatenated with an embedded textual summary.
"""

import numpy as np

from evolvex.embed import (
    embed_demographics,
    embed_posts,
    engagement_features,
    fit_preprocessing,
    init_gnn_params,
    preprocess_demographics,
    summarize_engagement,
)
from evolvex.graphgen import GeneratorConfig, generate, split_dataset

ds = generate(GeneratorConfig(n_users=12, n_steps=8), seed=7)
conditioning, _ = split_dataset(ds, 4)
snap = conditioning.snapshots[-1]

# Preprocessing statistics come from conditioning steps only.
stats = fit_preprocessing(conditioning)
print(f"age stats: mean {stats.age_mean:.1f}, std {stats.age_std:.1f}")

features = preprocess_demographics(snap.profiles, stats, ds.vocabularies)
print(f"demographic feature width: {features.shape[1]} "
      f"(1 z-scored age + one-hot blocks)")

gnn = init_gnn_params(seed=0, in_dim=features.shape[1], out_dim=16)
e_d = embed_demographics(snap.adjacency, features, gnn)
print(f"graph embedding: shape {e_d.shape}, all finite {np.isfinite(e_d).all()}")

user = 0
posts = snap.posts[user]
e_p = embed_posts(posts, dim=16)
print(f"user {user} wrote {len(posts)} posts; "
      f"post embedding norm {np.linalg.norm(e_p):.6f}")
print("sample post text:", posts[0].text if posts else "(none)")

rec = snap.engagement[user]
print("engagement summary:", summarize_engagement(rec, ds.category_vocabulary))
raw_e = engagement_features(rec, stats, ds.category_vocabulary, dim=16)
print(f"engagement feature vector: {raw_e.shape[0]} entries "
      f"(24 scaled counts + 16 summary dims)")
