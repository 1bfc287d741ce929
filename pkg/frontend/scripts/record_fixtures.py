"""Record API fixtures for the UI tests from a real served model.

Regenerate with:  python frontend/scripts/record_fixtures.py
"""

import json
import pathlib

from fastapi.testclient import TestClient

from evolvex.api import build_state, create_app
from evolvex.graphgen import GeneratorConfig, generate, split_dataset
from evolvex.train import LossWeights, TrainConfig, train

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures"

ds = generate(GeneratorConfig(n_users=14, n_steps=8, post_rate=10.0), seed=18)
conditioning, _ = split_dataset(ds, 4)
model, _ = train(conditioning, TrainConfig(epochs=80, learning_rate=3e-3, seed=18,
                                           strategy="crossmodal", negative_ratio=3,
                                           weights=LossWeights(0.5, 0.5),
                                           d=16, d_h=16, d_y=8))
client = TestClient(create_app(build_state(ds, model)))

USER = 2
fixtures = {
    "users.json": client.get("/api/users").json(),
    "suggestions_stage1.json": client.get(
        f"/api/users/{USER}/suggestions?stage=1").json(),
    "suggestions_stage2.json": client.get(
        f"/api/users/{USER}/suggestions?stage=2").json(),
    "map_stage1.json": client.get(f"/api/users/{USER}/map?stage=1").json(),
    "map_stage2.json": client.get(f"/api/users/{USER}/map?stage=2").json(),
    "activities.json": client.get(f"/api/users/{USER}/activities").json(),
}

red1 = {(m["id"], round(m["confidence"], 6))
        for m in fixtures["map_stage1.json"]["predicted"]}
red2 = {(m["id"], round(m["confidence"], 6))
        for m in fixtures["map_stage2.json"]["predicted"]}
assert red1 != red2, "fixture must have differing stage-1/stage-2 forecasts"
assert len(fixtures["activities.json"]["categories"]) == 8
assert len(fixtures["suggestions_stage1.json"]) > 0

OUT.mkdir(parents=True, exist_ok=True)
for name, doc in fixtures.items():
    (OUT / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"wrote {OUT / name}")
