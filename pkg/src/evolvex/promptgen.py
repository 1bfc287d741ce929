"""Role-based prompt construction, completion providers, and forecast parsing.

Each prompt assigns the data-scientist role, states the forecasting task,
and serializes a user's record into four fixed data sections: User Graph,
User History, User Engagement Scores, and User Demography. Responses must
be a single JSON object; parsing tolerates surrounding prose and fenced
blocks because instruction-tuned models wrap their output.
"""

from __future__ import annotations

import hashlib
import json
import urllib.error
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import jsonschema
import numpy as np

from .embed import http_post_json, summarize_engagement
from .graphgen import TemporalDataset, split_dataset
from .metrics import (
    EvalReport,
    _new_edges,
    dominant_category,
    accuracy,
    auc_roc,
    hits_at_10,
    macro_f1,
    perplexity,
    precision_at_10,
    to_simplex,
)

DATA_SECTIONS = ("User Graph", "User History", "User Engagement Scores", "User Demography")
MAX_NEIGHBORHOOD = 50

ROLE_TEXT = (
    "You are a data scientist specializing in social-network analysis. You "
    "study how accounts gain connections and how their posting interests "
    "shift over time."
)


class PromptParseError(Exception):
    """Base for response-parsing failures; ``code`` identifies the kind."""

    code = "parse_error"


class NoJsonError(PromptParseError):
    code = "no_json"


class SchemaViolationError(PromptParseError):
    code = "schema_violation"


class UnknownUserError(PromptParseError):
    code = "unknown_user"


class ConfidenceRangeError(PromptParseError):
    code = "out_of_range"


def response_schema(n_categories: int) -> dict:
    """JSON schema the model's reply must satisfy."""
    return {
        "type": "object",
        "properties": {
            "connections": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "id": {"type": "integer"},
                        "confidence": {"type": "number"},
                    },
                    "required": ["id", "confidence"],
                },
            },
            "activities": {
                "type": "array",
                "items": {"type": "number", "minimum": 0, "maximum": 1},
                "minItems": n_categories,
                "maxItems": n_categories,
            },
            "stage": {"type": "integer", "minimum": 1, "maximum": 4},
        },
        "required": ["connections", "activities", "stage"],
    }


@dataclass
class PromptBundle:
    """A fully assembled prompt plus the metadata providers may need."""

    role: str
    task: str
    context: str
    instructions: str
    data_sections: dict[str, str]
    response_schema: str
    user: int
    stage: int

    @property
    def text(self) -> str:
        parts = [
            f"Role: {self.role}",
            f"Task: {self.task}",
            f"Context: {self.context}",
            "Data:",
        ]
        for label in DATA_SECTIONS:
            parts.append(f"## {label}\n{self.data_sections[label]}")
        parts.append(f"Instructions: {self.instructions}")
        parts.append(self.response_schema)
        return "\n\n".join(parts)


@dataclass
class LlmForecast:
    connections: list[tuple[int, float]]
    activities: np.ndarray
    stage: int
    rationale: str = ""


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------

def _graph_section(user: int, adjacency: np.ndarray) -> str:
    neighbors = set(np.flatnonzero(adjacency[user]).tolist())
    if not neighbors:
        return "no connections"
    two_hop = set()
    for j in neighbors:
        two_hop.update(np.flatnonzero(adjacency[j]).tolist())
    two_hop |= neighbors
    two_hop.discard(user)
    degree = adjacency.sum(axis=1).astype(np.int64)
    kept = sorted(two_hop, key=lambda j: (-degree[j], j))[:MAX_NEIGHBORHOOD]
    keep = set(kept) | {user}
    lines = []
    for i in sorted(keep):
        for j in sorted(keep):
            if i < j and adjacency[i, j]:
                lines.append(f"{i} -- {j}")
    return "\n".join(lines) if lines else "no connections"


def _history_section(user: int, ds: TemporalDataset) -> str:
    lines = []
    for snap in ds.snapshots:
        counts = snap.post_counts()[user]
        active = [f"{ds.category_vocabulary[c]}={int(counts[c])}"
                  for c in range(ds.n_categories) if counts[c] > 0]
        lines.append(f"step {snap.step}: " + (", ".join(active) if active else "none"))
    return "\n".join(lines)


def _engagement_section(user: int, ds: TemporalDataset) -> str:
    return "\n".join(
        f"step {snap.step}: "
        f"{summarize_engagement(snap.engagement[user], ds.category_vocabulary)}"
        for snap in ds.snapshots
    )


def _demography_section(user: int, ds: TemporalDataset) -> str:
    p = ds.profiles[user]
    return (f"age: {p.age}; gender: {ds.vocabularies['gender'][p.gender]}; "
            f"occupation: {ds.vocabularies['occupation'][p.occupation]}; "
            f"location: {ds.vocabularies['location'][p.location]}")


def build_prompt(user: int, ds: TemporalDataset, stage: int) -> PromptBundle:
    """Deterministic prompt for forecasting one user's evolution stage.

    The graph section covers the user's two-hop neighborhood in the latest
    snapshot, truncated to the 50 highest-degree neighbors. Users appear
    only as opaque integer ids.
    """
    if not 0 <= user < ds.n_users:
        raise ValueError(f"unknown user id {user}")
    if not 1 <= stage <= 4:
        raise ValueError(f"stage must be in [1, 4], got {stage}")
    schema = response_schema(ds.n_categories)
    ordinal = {1: "next", 2: "second", 3: "third", 4: "fourth"}[stage]
    categories = ", ".join(ds.category_vocabulary)
    return PromptBundle(
        role=ROLE_TEXT,
        task=(f"Forecast evolution stage {stage} (the {ordinal} future step) for "
              f"user {user}: which users they will newly connect with, and how "
              f"their posting activity will distribute over the categories "
              f"{categories}."),
        context=(f"The record below covers {ds.n_steps} observed steps of a "
                 f"network with {ds.n_users} users. Connections only ever "
                 f"accumulate; interests drift gradually toward those of "
                 f"connected users."),
        instructions=("Reply with one JSON object that satisfies the schema "
                      "below, and nothing else. List only users you expect to "
                      "become new connections, each with a confidence between "
                      "0 and 1. Give one activity value in [0, 1] per category, "
                      "in the category order shown above."),
        data_sections={
            "User Graph": _graph_section(user, ds.snapshots[-1].adjacency),
            "User History": _history_section(user, ds),
            "User Engagement Scores": _engagement_section(user, ds),
            "User Demography": _demography_section(user, ds),
        },
        response_schema=json.dumps(schema, indent=2, sort_keys=True),
        user=user,
        stage=stage,
    )


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

def _extract_json(text: str) -> dict:
    decoder = json.JSONDecoder()
    for start, ch in enumerate(text):
        if ch != "{":
            continue
        try:
            obj, _ = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    raise NoJsonError("no JSON object found in response")


def parse_response(text: str, n_users: int, n_categories: int = 8) -> LlmForecast:
    """Extract, schema-validate, and range-check a model response."""
    doc = _extract_json(text)
    try:
        jsonschema.validate(doc, response_schema(n_categories))
    except jsonschema.ValidationError as exc:
        raise SchemaViolationError(f"response violates schema: {exc.message}") from exc
    connections = []
    for item in doc["connections"]:
        uid, conf = int(item["id"]), float(item["confidence"])
        if not 0 <= uid < n_users:
            raise UnknownUserError(f"unknown user id {uid}")
        if not 0.0 <= conf <= 1.0:
            raise ConfidenceRangeError(f"confidence {conf} outside [0, 1]")
        connections.append((uid, conf))
    return LlmForecast(
        connections=connections,
        activities=np.asarray(doc["activities"], dtype=np.float64),
        stage=int(doc["stage"]),
        rationale=str(doc.get("rationale", "")),
    )


# ---------------------------------------------------------------------------
# Completion providers
# ---------------------------------------------------------------------------

class CompletionTransportError(Exception):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    url: str
    model: str = "default"
    timeout_ms: int = 10000
    concurrency: int = 4


class StubProvider:
    """Offline provider: a schema-valid forecast derived from a prompt hash.

    Lets the whole prompt pipeline run deterministically with no model
    behind it; the same prompt always yields the same response text.
    """

    concurrency = 1

    def __init__(self, n_users: int, n_categories: int = 8):
        self.n_users = n_users
        self.n_categories = n_categories

    def complete(self, bundle: PromptBundle) -> str:
        digest = hashlib.blake2b(bundle.text.encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "big"))
        others = [j for j in range(self.n_users) if j != bundle.user]
        n_conn = int(rng.integers(1, min(5, len(others)) + 1))
        ids = sorted(int(j) for j in rng.choice(others, size=n_conn, replace=False))
        payload = {
            "connections": [
                {"id": j, "confidence": round(float(rng.random()), 3)} for j in ids
            ],
            "activities": [round(float(v), 3) for v in rng.random(self.n_categories)],
            "stage": bundle.stage,
            "rationale": "projected from recent activity and neighborhood growth",
        }
        body = json.dumps(payload, indent=2, sort_keys=True)
        return (f"Here is the forecast for user {bundle.user}, stage "
                f"{bundle.stage}:\n```json\n{body}\n```\n")


class HttpChatProvider:
    """Chat-endpoint provider: {model, messages:[{role, content}]} -> {content}."""

    def __init__(self, config: ProviderConfig, transport=http_post_json):
        self.config = config
        self.transport = transport
        self.concurrency = config.concurrency

    def complete(self, bundle: PromptBundle) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": bundle.text}],
        }
        try:
            doc = self.transport(self.config.url, payload, self.config.timeout_ms)
        except (urllib.error.URLError, TimeoutError, OSError, ValueError) as exc:
            raise CompletionTransportError(
                f"completion endpoint at {self.config.url}: {exc}") from exc
        if "content" not in doc:
            raise CompletionTransportError("completion response lacks 'content'")
        return str(doc["content"])


def complete(bundle: PromptBundle, provider) -> str:
    """Run one completion through the given provider."""
    return provider.complete(bundle)


# ---------------------------------------------------------------------------
# LLM-path evaluation
# ---------------------------------------------------------------------------

def evaluate_llm_path(ds: TemporalDataset, provider, horizon: int = 4,
                      negative_ratio: int = 1, seed: int = 0) -> EvalReport:
    """Score the prompt-completion-parse pipeline against held-out stages.

    One prompt per (user, stage). Failures (transport or parse) never abort
    the sweep: the affected user-stage is scored as an empty prediction and
    counted in ``parse_failures``. Prompts see conditioning data only;
    pseudo-perplexity equals perplexity on this path because prompts already
    condition on the full provided history.
    """
    conditioning, target = split_dataset(ds, horizon)
    n, k = ds.n_users, ds.n_categories
    workers = max(1, getattr(provider, "concurrency", 1))

    def run_one(task: tuple[int, int]):
        user, stage = task
        bundle = build_prompt(user, conditioning, stage)
        try:
            text = provider.complete(bundle)
            return parse_response(text, n, k)
        except (PromptParseError, CompletionTransportError):
            return None

    tasks = [(user, stage) for stage in range(1, horizon + 1) for user in range(n)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_one, tasks))
    else:
        outcomes = [run_one(t) for t in tasks]
    forecasts = dict(zip(tasks, outcomes))
    failures = sum(1 for fc in outcomes if fc is None)

    pooled_scores, pooled_labels, pooled_pred, pooled_truth = [], [], [], []
    pooled_dists, pooled_cats = [], []
    hits_num = hits_den = 0
    p10_values, f1_values = [], []
    per_stage = []

    for stage in range(1, horizon + 1):
        snap = target.snapshots[stage - 1]
        base = (conditioning.snapshots[-1].adjacency if stage == 1
                else target.snapshots[stage - 2].adjacency)
        new_edges = _new_edges(snap.adjacency, base)
        counts = snap.post_counts()

        rankings: dict[int, list[int]] = {}
        candidate_counts: dict[int, int] = {}
        activities = np.zeros((n, k))
        for user in range(n):
            fc = forecasts[(user, stage)]
            conf: dict[int, float] = {}
            if fc is not None:
                activities[user] = fc.activities
                for uid, c in fc.connections:
                    conf[uid] = max(c, conf.get(uid, 0.0))
            candidates = [j for j in range(n) if j != user and not base[user, j]]
            candidate_counts[user] = len(candidates)
            scores = np.array([conf.get(j, 0.0) for j in candidates])
            labels = np.array([snap.adjacency[user, j] > 0 for j in candidates])
            pooled_scores.append(scores)
            pooled_labels.append(labels)
            pooled_pred.append(scores > 0.5)
            pooled_truth.append(labels)
            rankings[user] = sorted(
                (j for j in candidates if conf.get(j, 0.0) > 0),
                key=lambda j: (-conf[j], j))[:10]

        if new_edges:
            stage_hits = hits_at_10(rankings, new_edges)
            stage_p10 = precision_at_10(rankings, new_edges, candidate_counts)
            hits_num += sum(1 for i, j in new_edges
                            if j in rankings.get(i, []) or i in rankings.get(j, []))
            hits_den += len(new_edges)
            p10_values.append(stage_p10)
        else:
            stage_hits = stage_p10 = None

        stage_f1 = macro_f1(activities > 0.5, counts > 0)
        f1_values.append(stage_f1)
        dists = to_simplex(activities)
        for i in range(n):
            if counts[i].sum() > 0:
                pooled_dists.append(dists[i])
                pooled_cats.append(dominant_category(counts[i]))

        per_stage.append({
            "stage": stage,
            "hits_at_10": stage_hits,
            "precision_at_10": stage_p10,
            "macro_f1": stage_f1,
            "n_new_edges": len(new_edges),
        })

    ppl = perplexity(np.array(pooled_dists), np.array(pooled_cats))
    return EvalReport(
        perplexity=ppl,
        pseudo_perplexity=ppl,
        precision_at_10=float(np.mean(p10_values)) if p10_values else None,
        hits_at_10=(hits_num / hits_den) if hits_den else None,
        auc_roc=auc_roc(np.concatenate(pooled_scores), np.concatenate(pooled_labels)),
        macro_f1=float(np.mean(f1_values)),
        accuracy=accuracy(np.concatenate(pooled_pred), np.concatenate(pooled_truth)),
        per_stage=per_stage,
        parse_failures=failures,
        strategy="llm",
    )
