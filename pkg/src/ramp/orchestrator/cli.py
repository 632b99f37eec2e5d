"""`ramp` command-line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ExperimentConfig, artifact_dir, load_config
from .theory import run_theory_checks, write_theory_report


def _add_config_arg(p):
    p.add_argument("--config", type=Path, default=None,
                   help="experiment config file (YAML); defaults apply if omitted")
    p.add_argument("--seed", type=int, default=None,
                   help="override the first configured seed")


def _resolve(args) -> tuple[ExperimentConfig, int]:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    return cfg, seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ramp",
        description="world-model-conditioned policy training pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (("stage1", "expert corpus + world-model pre-training"),
                      ("stage2", "policy training (all compared methods)"),
                      ("stage3", "supervised rollout collection"),
                      ("stage4", "continual training on the data mixture")):
        p = sub.add_parser(name, help=doc)
        _add_config_arg(p)

    p = sub.add_parser("iterate", help="repeat stage3+stage4 for R rounds")
    _add_config_arg(p)
    p.add_argument("--rounds", type=int, required=True)

    p = sub.add_parser("eval", help="success-rate and value-metric report")
    _add_config_arg(p)
    p.add_argument("--methods", type=str, default="ramp,recap,awr,bc")
    p.add_argument("--episodes", type=int, default=None)

    p = sub.add_parser("theory-check",
                       help="tabular closed-form verification suite")
    p.add_argument("--fast", action="store_true",
                   help="coarser grids for a quick smoke run")
    p.add_argument("--out", type=Path, default=None,
                   help="also write the JSON verdict to this path")

    p = sub.add_parser("hil-serve",
                       help="serve the live-takeover bridge (and console)")
    _add_config_arg(p)
    p.add_argument("--port", type=int, default=8742)
    p.add_argument("--task", type=str, default=None,
                   help="task to serve (default: first configured)")
    p.add_argument("--static-dir", type=Path, default=None,
                   help="browser console assets to serve at /")
    return parser


def cmd_hil_serve(args) -> int:
    import uvicorn

    from ..numerics import Rng
    from ..rollout import BridgeSession, make_bridge_app, make_policy_runner

    cfg, seed = _resolve(args)
    name = args.task or cfg.tasks[0]
    task = pipeline.build_task(cfg, name)
    out_path = artifact_dir(cfg, seed) / name / "hil_sessions.jsonl"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        _, _, _, wm, pol_params, pcfg = pipeline._load_policy_stack(
            cfg, seed, name)

        def chunk_fn_for(rng):
            return make_policy_runner(pol_params, pcfg, wm, rng,
                                      mode="standard")
        chunk_len = pcfg.chunk_len
    except pipeline.PipelineError:
        import numpy as np
        logging.getLogger("ramp").warning(
            "no trained policy found; serving a zero-action policy")
        chunk_len = cfg.policy.chunk_len

        def chunk_fn_for(rng):
            return lambda frame, proprio: np.zeros(
                (chunk_len, task.action_dim))

    session_counter = [0]

    def factory():
        session_counter[0] += 1
        ep_seed = seed * 100_000 + 80_000 + session_counter[0]
        rng = Rng(ep_seed)
        return BridgeSession(task, chunk_fn_for(rng.split("policy")), ep_seed,
                             out_path, rng, chunk_len=chunk_len)

    app = make_bridge_app(factory, static_dir=args.static_dir)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "theory-check":
        result = run_theory_checks(fast=args.fast)
        print(json.dumps(result, indent=2, sort_keys=True))
        if args.out:
            write_theory_report(result, args.out)
        return 0 if result["passed"] else 1
    if args.command == "hil-serve":
        return cmd_hil_serve(args)

    cfg, seed = _resolve(args)
    if args.command in ("stage1", "stage2", "stage3", "stage4"):
        fn = getattr(pipeline, args.command)
        out = fn(cfg, seed)
    elif args.command == "iterate":
        out = pipeline.iterate(cfg, seed, args.rounds)
    elif args.command == "eval":
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
        out = pipeline.evaluate(cfg, seed, methods,
                                episodes_per_task=args.episodes)
        print(out["report"])
        out = {"success": out["success"], "values": out["values"]}
    else:  # pragma: no cover - argparse enforces the choices
        raise SystemExit(2)
    print(json.dumps(out, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
