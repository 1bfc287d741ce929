"""Command-line pipeline: generate, train, eval, forecast, prompt, serve.

Artifacts are plain JSON files wired together by paths. Every command is
idempotent given identical inputs and seeds. Exit codes: 0 success, 2 for
usage or configuration errors, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ConfigError, resolve_config
from .graphgen import GeneratorConfig, generate, load_dataset, save_dataset, split_dataset
from .metrics import evaluate_model
from .model import load_model, save_model
from .predict import rollout, save_forecast
from .promptgen import (
    HttpChatProvider,
    ProviderConfig,
    StubProvider,
    build_prompt,
    evaluate_llm_path,
)
from .train import LossWeights, TrainConfig, train

STRATEGIES = ("concat", "attention", "crossmodal")


class UsageError(Exception):
    pass


def _write_json(doc: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_dataset(path: str):
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found: {path}")
    return load_dataset(path)


def _load_model(path: str):
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return load_model(path)


def cmd_generate(args, _cfg) -> int:
    try:
        config = GeneratorConfig(
            n_users=args.users,
            n_steps=args.steps,
            homophily=args.homophily,
            closure=args.closure,
            drift=args.drift,
            base_edge_prob=args.base_edge_prob,
            step_edge_prob=args.step_edge_prob,
            post_rate=args.post_rate,
            demographic_bias=args.demographic_bias,
            directed=args.directed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = generate(config, args.seed)
    save_dataset(ds, args.out)
    edges = [int(s.adjacency.sum()) // (1 if ds.directed else 2) for s in ds.snapshots]
    print(f"wrote {args.out}: {ds.n_users} users, {ds.n_steps} steps")
    print("edges per step:", " ".join(str(e) for e in edges))
    return 0


def cmd_train(args, _cfg) -> int:
    try:
        config = TrainConfig(
            epochs=args.epochs,
            learning_rate=args.lr,
            negative_ratio=args.negative_ratio,
            seed=args.seed,
            weights=LossWeights(lambda1=args.lambda1, lambda2=args.lambda2),
            strategy=args.strategy,
            d=args.dim,
            d_h=args.hidden,
            d_y=args.out_dim,
        )
        if args.horizon < 1:
            raise ValueError("horizon must be >= 1")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    ds = _load_dataset(args.dataset)
    conditioning, _ = split_dataset(ds, args.horizon)
    model, trace = train(conditioning, config)
    save_model(model, args.out)
    trace_path = args.trace_out or f"{args.out}.trace.json"
    _write_json({"trace": trace}, trace_path)
    first, last = trace[0]["total"], trace[-1]["total"]
    print(f"wrote {args.out} ({args.strategy}); loss {first:.4f} -> {last:.4f}")
    return 0


def cmd_eval(args, _cfg) -> int:
    ds = _load_dataset(args.dataset)
    model = _load_model(args.checkpoint)
    conditioning, target = split_dataset(ds, args.horizon)
    report = evaluate_model(model, conditioning, target,
                            negative_ratio=args.negative_ratio, seed=args.seed)
    _write_json(report.to_dict(), args.out)
    print(report.table())
    return 0


def cmd_forecast(args, _cfg) -> int:
    ds = _load_dataset(args.dataset)
    model = _load_model(args.checkpoint)
    conditioning, _ = split_dataset(ds, args.horizon)
    forecast = rollout(conditioning, model, args.horizon)
    save_forecast(forecast, args.out)
    print(f"wrote {args.out}: {len(forecast.stages)} stages")
    return 0


def cmd_prompt(args, cfg) -> int:
    ds = _load_dataset(args.dataset)
    if args.dump_prompts:
        conditioning, _ = split_dataset(ds, args.horizon)
        os.makedirs(args.dump_prompts, exist_ok=True)
        for user in range(ds.n_users):
            for stage in range(1, args.horizon + 1):
                bundle = build_prompt(user, conditioning, stage)
                path = os.path.join(args.dump_prompts, f"user{user}_stage{stage}.txt")
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(bundle.text)
        print(f"wrote {ds.n_users * args.horizon} prompts to {args.dump_prompts}")
        return 0
    if args.provider == "stub":
        provider = StubProvider(ds.n_users, ds.n_categories)
    else:
        if not cfg.llm_url:
            raise UsageError("http provider requires llm.url (config) or --llm-url")
        provider = HttpChatProvider(ProviderConfig(
            url=cfg.llm_url, model=cfg.llm_model,
            timeout_ms=cfg.llm_timeout_ms, concurrency=cfg.llm_concurrency))
    report = evaluate_llm_path(ds, provider, horizon=args.horizon,
                               negative_ratio=args.negative_ratio, seed=args.seed)
    _write_json(report.to_dict(), args.out)
    print(report.table())
    print(f"parse_failures    {report.parse_failures}")
    return 0


def cmd_serve(args, _cfg) -> int:
    import uvicorn

    from .api import build_state, create_app

    ds = _load_dataset(args.dataset)
    model = _load_model(args.checkpoint)
    state = build_state(ds, model)
    static = args.ui_dir if args.ui_dir and os.path.isdir(args.ui_dir) else None
    app = create_app(state, static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evolvex",
        description="Forecast social-network user evolution over four stages.")
    parser.add_argument("--config", default=None,
                        help="config file path (default evolvex.json; "
                             "EVOLVEX_CONFIG overrides)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic temporal network")
    p.add_argument("--users", type=int, default=24)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--homophily", type=float, default=0.5)
    p.add_argument("--closure", type=float, default=0.3)
    p.add_argument("--drift", type=float, default=0.5)
    p.add_argument("--base-edge-prob", type=float, default=0.08)
    p.add_argument("--step-edge-prob", type=float, default=0.01)
    p.add_argument("--post-rate", type=float, default=6.0)
    p.add_argument("--demographic-bias", type=float, default=0.5)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model on the conditioning steps")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="crossmodal")
    p.add_argument("--lambda1", type=float, default=0.5)
    p.add_argument("--lambda2", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negative-ratio", type=int, default=1)
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--out-dim", type=int, default=32)
    p.add_argument("--out", required=True)
    p.add_argument("--trace-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on the held-out stages")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negative-ratio", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("forecast", help="write a multi-stage forecast file")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("prompt", help="run the prompt-based forecasting path")
    p.add_argument("--dataset", required=True)
    p.add_argument("--provider", choices=("stub", "http"), default="stub")
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negative-ratio", type=int, default=1)
    p.add_argument("--dump-prompts", default=None,
                   help="write prompt text files to this directory instead of scoring")
    p.add_argument("--llm-url", default=None)
    p.add_argument("--llm-model", default=None)
    p.add_argument("--out", default="llm_report.json")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("serve", help="serve forecasts over HTTP")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default="frontend/dist")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.config, overrides={
            "llm.url": getattr(args, "llm_url", None),
            "llm.model": getattr(args, "llm_model", None),
        })
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map anything else to a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
