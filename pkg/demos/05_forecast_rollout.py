"""Four-stage autoregressive forecast for a single user.

Stage 1 comes from the final conditioning state; each later stage feeds the
previous stage's fused embedding and predictions back into the encoders.
The printed view mirrors what the HTTP API serves to the UI: ranked
connection suggestions and the predicted activity distribution per stage.
"""

import numpy as np

from evolvex.graphgen import GeneratorConfig, generate, split_dataset
from evolvex.predict import rank_candidates, rollout, save_forecast
from evolvex.train import LossWeights, TrainConfig, train

ds = generate(GeneratorConfig(n_users=24, n_steps=8, drift=0.5, homophily=0.8,
                              post_rate=20.0), seed=3)
conditioning, _ = split_dataset(ds, 4)
model, _ = train(conditioning, TrainConfig(epochs=200, learning_rate=3e-3,
                                           negative_ratio=3, seed=3,
                                           weights=LossWeights(0.5, 0.5),
                                           strategy="crossmodal",
                                           d=32, d_h=16, d_y=8))

forecast = rollout(conditioning, model, horizon=4)
user = 5
base = conditioning.snapshots[-1].adjacency
countries = ds.vocabularies["location"]
print(f"user {user}: {int(base[user].sum())} current connections, "
      f"location {countries[ds.profiles[user].location]}\n")

for stage in forecast.stages:
    suggested = rank_candidates(user, stage.edge_probs, k=5,
                                exclude_existing=True, adjacency=base)
    pairs = ", ".join(
        f"{j}({countries[ds.profiles[j].location]}) p={stage.edge_probs[user, j]:.2f}"
        for j in suggested)
    top = np.argsort(stage.activity_dist[user])[::-1][:3]
    cats = ", ".join(f"{ds.category_vocabulary[c]} {stage.activity_dist[user, c]:.2f}"
                     for c in top)
    print(f"stage {stage.stage}: suggest [{pairs}]")
    print(f"         top activities: {cats}")

save_forecast(forecast, "demo_forecast.json")
print("\nwrote demo_forecast.json")
