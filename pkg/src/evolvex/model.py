"""Model assembly: frozen encoders plus trainable fusion and prediction.

The trainable surface is the three modality projections, the fusion
parameters of the active strategy, the feed-forward trunk, and the two
heads. The graph encoder and preprocessing statistics are fitted once and
frozen; checkpoints bundle them so a saved model is self-contained.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embed import (
    GnnParams,
    PreprocessingStats,
    encode_snapshot,
    fit_preprocessing,
    init_gnn_params,
)
from .fusion import (
    FusedEmbedding,
    FusionParams,
    ModalityTriple,
    fuse,
    fuse_backward,
    init_fusion_params,
    initial_fused_state,
    project,
    project_backward,
)
from .graphgen import TemporalDataset
from .predict import (
    PredictorParams,
    init_predictor_params,
    predictor_backward,
    predictor_forward,
)

CHECKPOINT_SCHEMA = "1"

PREDICTOR_BLOCKS = ("w_h", "b_h", "w_out", "b_out", "w_link", "b_link", "w_act", "b_act")
PROJECTION_BLOCKS = ("p_d", "p_p", "p_e")
ATTENTION_BLOCKS = ("w_d", "w_p", "w_e")


@dataclass(frozen=True)
class Dims:
    d: int
    d_h: int
    d_y: int
    demo_dim: int
    raw_e_dim: int
    n_categories: int

    def to_dict(self) -> dict:
        return {"d": self.d, "d_h": self.d_h, "d_y": self.d_y,
                "demo_dim": self.demo_dim, "raw_e_dim": self.raw_e_dim,
                "n_categories": self.n_categories}


@dataclass
class EvolutionModel:
    strategy: str
    dims: Dims
    fusion: FusionParams
    predictor: PredictorParams
    gnn: GnnParams
    stats: PreprocessingStats
    vocabularies: dict[str, tuple[str, ...]]
    category_vocabulary: tuple[str, ...]
    directed: bool = False
    text_embed: object = None  # optional external text encoder, not serialized
    train_config: dict | None = None
    final_metrics: dict | None = None


def init_model(conditioning: TemporalDataset, seed: int, strategy: str,
               d: int = 32, d_h: int = 32, d_y: int = 32,
               gnn_layers: int = 2) -> EvolutionModel:
    """Fresh model sized from the conditioning dataset; all parameters seeded."""
    stats = fit_preprocessing(conditioning)
    demo_dim = 1 + sum(len(v) for v in conditioning.vocabularies.values())
    k = conditioning.n_categories
    raw_e_dim = 3 * k + d
    dims = Dims(d=d, d_h=d_h, d_y=d_y, demo_dim=demo_dim,
                raw_e_dim=raw_e_dim, n_categories=k)
    seeds = np.random.default_rng(seed).integers(0, 2 ** 31, size=3)
    return EvolutionModel(
        strategy=strategy,
        dims=dims,
        fusion=init_fusion_params(int(seeds[0]), d, raw_d_dim=d, raw_p_dim=d,
                                  raw_e_dim=raw_e_dim, strategy=strategy),
        predictor=init_predictor_params(int(seeds[1]),
                                        d_f=3 * d if strategy == "concat" else d,
                                        d_h=d_h, d_y=d_y, n_categories=k),
        gnn=init_gnn_params(int(seeds[2]), in_dim=demo_dim, out_dim=d,
                            n_layers=gnn_layers),
        stats=stats,
        vocabularies=conditioning.vocabularies,
        category_vocabulary=conditioning.category_vocabulary,
        directed=conditioning.directed,
    )


def trainable_param_names(strategy: str) -> tuple[str, ...]:
    names = list(PROJECTION_BLOCKS)
    if strategy == "attention":
        names += list(ATTENTION_BLOCKS)
    elif strategy == "crossmodal":
        names.append("w_q")
    return tuple(names) + PREDICTOR_BLOCKS


def get_param(model: EvolutionModel, name: str) -> np.ndarray:
    owner = model.fusion if hasattr(model.fusion, name) and name not in PREDICTOR_BLOCKS \
        else model.predictor
    return getattr(owner, name)


def set_param(model: EvolutionModel, name: str, value: np.ndarray) -> None:
    owner = model.fusion if hasattr(model.fusion, name) and name not in PREDICTOR_BLOCKS \
        else model.predictor
    setattr(owner, name, value)


# ---------------------------------------------------------------------------
# Sequence forward / backward
# ---------------------------------------------------------------------------

@dataclass
class StepState:
    triple: ModalityTriple
    f_prev: np.ndarray | None
    fused: FusedEmbedding
    h: np.ndarray
    y: np.ndarray


def encode_sequence(ds: TemporalDataset, model: EvolutionModel) -> list[tuple]:
    """Raw modality matrices per step; constants during training."""
    return [
        encode_snapshot(snap, model.stats, model.gnn, model.vocabularies,
                        model.category_vocabulary, model.dims.d, model.text_embed)
        for snap in ds.snapshots
    ]


def forward_sequence(raws: list[tuple], model: EvolutionModel) -> list[StepState]:
    """Project, fuse, and run the trunk over an encoded step sequence.

    Cross-modal fusion chains each step's fused vector into the next step's
    query; the first step uses the strategy-neutral modality mean.
    """
    states: list[StepState] = []
    for t, (raw_d, raw_p, raw_e) in enumerate(raws):
        triple = project(raw_d, raw_p, raw_e, model.fusion, step=t)
        if model.strategy == "crossmodal":
            f_prev = initial_fused_state(triple) if t == 0 else states[-1].fused.f
        else:
            f_prev = None
        fused = fuse(triple, f_prev, model.fusion)
        y, h = predictor_forward(fused.f, model.predictor, return_hidden=True)
        states.append(StepState(triple=triple, f_prev=f_prev, fused=fused, h=h, y=y))
    return states


def backward_sequence(d_ys: list[np.ndarray], raws: list[tuple],
                      states: list[StepState],
                      model: EvolutionModel) -> dict[str, np.ndarray]:
    """Accumulate gradients for trunk, fusion, and projection blocks.

    ``d_ys`` holds the loss gradient at each step's y (zeros where a step
    carries no loss). For cross-modal fusion the gradient flows backward
    through the F_prev chain; at the first step it lands on the modality
    mean used as the initial state.
    """
    grads = {name: np.zeros_like(get_param(model, name))
             for name in trainable_param_names(model.strategy)
             if name not in ("w_link", "b_link", "w_act", "b_act")}
    carry: np.ndarray | None = None
    for t in reversed(range(len(states))):
        st = states[t]
        df, trunk_grads = predictor_backward(d_ys[t], st.fused.f, st.h, model.predictor)
        for name, g in trunk_grads.items():
            grads[name] += g
        if carry is not None:
            df = df + carry
        (de_d, de_p, de_e), df_prev, fusion_grads = fuse_backward(
            df, st.triple, st.f_prev, model.fusion, st.fused)
        for name, g in fusion_grads.items():
            grads[name] += g
        carry = None
        if model.strategy == "crossmodal":
            if t > 0:
                carry = df_prev
            else:
                de_d = de_d + df_prev / 3.0
                de_p = de_p + df_prev / 3.0
                de_e = de_e + df_prev / 3.0
        raw_d, raw_p, raw_e = raws[t]
        for name, g in project_backward((de_d, de_p, de_e), raw_d, raw_p, raw_e).items():
            grads[name] += g
    return grads


# ---------------------------------------------------------------------------
# Checkpoint format
# ---------------------------------------------------------------------------

def model_to_dict(model: EvolutionModel) -> dict:
    fusion_blocks = {name: getattr(model.fusion, name).tolist()
                     for name in PROJECTION_BLOCKS + ATTENTION_BLOCKS + ("w_q",)}
    predictor_blocks = {name: getattr(model.predictor, name).tolist()
                        for name in PREDICTOR_BLOCKS}
    return {
        "schema_version": CHECKPOINT_SCHEMA,
        "strategy": model.strategy,
        "dims": model.dims.to_dict(),
        "directed": model.directed,
        "category_vocabulary": list(model.category_vocabulary),
        "vocabularies": {k: list(v) for k, v in model.vocabularies.items()},
        "preprocessing": model.stats.to_dict(),
        "gnn": model.gnn.to_dict(),
        "fusion": fusion_blocks,
        "predictor": predictor_blocks,
        "train_config": model.train_config,
        "final_metrics": model.final_metrics,
    }


def model_from_dict(doc: dict) -> EvolutionModel:
    if doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise ValueError(
            f"unsupported checkpoint schema {doc.get('schema_version')!r}, "
            f"expected {CHECKPOINT_SCHEMA!r}")
    dims = Dims(**doc["dims"])
    arr = lambda block, name: np.asarray(block[name], dtype=np.float64)
    fusion = FusionParams(
        strategy=doc["strategy"],
        **{name: arr(doc["fusion"], name)
           for name in PROJECTION_BLOCKS + ATTENTION_BLOCKS + ("w_q",)},
    )
    predictor = PredictorParams(
        **{name: arr(doc["predictor"], name) for name in PREDICTOR_BLOCKS})
    return EvolutionModel(
        strategy=doc["strategy"],
        dims=dims,
        fusion=fusion,
        predictor=predictor,
        gnn=GnnParams.from_dict(doc["gnn"]),
        stats=PreprocessingStats.from_dict(doc["preprocessing"]),
        vocabularies={k: tuple(v) for k, v in doc["vocabularies"].items()},
        category_vocabulary=tuple(doc["category_vocabulary"]),
        directed=doc["directed"],
        train_config=doc.get("train_config"),
        final_metrics=doc.get("final_metrics"),
    )


def save_model(model: EvolutionModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> EvolutionModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
