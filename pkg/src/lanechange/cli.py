"""Command line front end.

Subcommands train agents, evaluate agents or classical planners, summarize
interactive session logs, and serve the TCP bridge. Results go to stdout as
single JSON objects so they can be piped; progress chatter goes to stderr.
Failures print {"error": category, "detail": ...} and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .config import (ConfigError, PlannerParams, SimConfig, TrainConfig,
                     load_config_file)
from .harness import (aggregate, evaluate_agent, evaluate_planner,
                      ingest_session_log, load_checkpoint,
                      rolling_collision_rate, train)
from .planners import PLANNERS


def _configs(args) -> tuple[SimConfig, TrainConfig, PlannerParams]:
    if getattr(args, "config", None):
        return load_config_file(args.config)
    return SimConfig(), TrainConfig(), PlannerParams()


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout)
    sys.stdout.write("\n")


def _stats_payload(stats) -> dict:
    agg = aggregate(stats)
    out = asdict(agg)
    out["rolling_collision_rate"] = rolling_collision_rate(
        [s.outcome for s in stats])
    return out


def cmd_train(args) -> None:
    sim_cfg, train_cfg, planner_params = _configs(args)
    if args.episodes is not None:
        episodes = args.episodes
    else:
        episodes = train_cfg.train_episodes

    def progress(ep, st):
        if (ep + 1) % args.log_every == 0:
            print(f"episode {ep + 1}/{episodes}: {st.outcome} "
                  f"steps={st.steps} reward={st.reward:.2f}",
                  file=sys.stderr)

    agent, stats = train(
        sim_cfg, train_cfg, planner_params,
        augmented=not args.primitive, option=args.option,
        episodes=episodes, seed=args.seed,
        checkpoint_dir=args.out_dir,
        checkpoint_every=args.checkpoint_every,
        metrics_path=args.metrics, progress=progress)
    payload = _stats_payload(stats)
    payload["grad_steps"] = agent.grad_steps
    payload["seed"] = args.seed
    _emit(payload)


def cmd_eval(args) -> None:
    agent, sim_cfg, planner_params, option, episode = \
        load_checkpoint(args.checkpoint)
    stats = evaluate_agent(agent, sim_cfg, planner_params, option=option,
                           episodes=args.episodes, seed=args.seed,
                           eps=args.eps)
    payload = _stats_payload(stats)
    payload["checkpoint"] = str(args.checkpoint)
    payload["trained_episodes"] = episode
    _emit(payload)


def cmd_baseline_eval(args) -> None:
    sim_cfg, _, planner_params = _configs(args)
    stats = evaluate_planner(args.planner, sim_cfg, planner_params,
                             episodes=args.episodes, seed=args.seed)
    payload = _stats_payload(stats)
    payload["planner"] = args.planner
    _emit(payload)


def cmd_human_stats(args) -> None:
    header, stats = ingest_session_log(args.log)
    if not stats:
        raise ValueError("session log holds no finished episodes")
    payload = _stats_payload(stats)
    payload["mode"] = header.get("mode")
    payload["episodes_logged"] = len(stats)
    _emit(payload)


def cmd_serve(args) -> None:
    from .bridge import serve, ws_gateway
    sim_cfg, _, planner_params = _configs(args)
    kwargs = dict(host=args.host, port=args.port, sim_cfg=sim_cfg,
                  planner_params=planner_params, mode=args.mode,
                  checkpoint=args.checkpoint, log_path=args.log,
                  seed=args.seed, paced=not args.unpaced)
    if args.ws_port is None:
        serve(**kwargs)
        return
    import threading
    th = threading.Thread(target=serve, kwargs=kwargs, daemon=True)
    th.start()
    print(f"bridge on tcp {args.host}:{args.port}, "
          f"websocket gateway on {args.host}:{args.ws_port}", file=sys.stderr)
    ws_gateway(args.host, args.ws_port, args.host, args.port)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lanechange")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a DQN agent")
    t.add_argument("--config", type=Path, default=None)
    t.add_argument("--episodes", type=int, default=None)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--option", choices=sorted(PLANNERS), default="p1",
                   help="planner behind the option action")
    t.add_argument("--primitive", action="store_true",
                   help="only the four primitive actions, no planner option")
    t.add_argument("--out-dir", type=Path, default=None,
                   help="checkpoint directory")
    t.add_argument("--checkpoint-every", type=int, default=500)
    t.add_argument("--metrics", type=Path, default=None,
                   help="JSONL training metrics path")
    t.add_argument("--log-every", type=int, default=50)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a trained checkpoint")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--episodes", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--eps", type=float, default=0.0)
    e.set_defaults(fn=cmd_eval)

    b = sub.add_parser("baseline-eval", help="evaluate a classical planner")
    b.add_argument("--planner", choices=sorted(PLANNERS), required=True)
    b.add_argument("--config", type=Path, default=None)
    b.add_argument("--episodes", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(fn=cmd_baseline_eval)

    h = sub.add_parser("human-stats",
                       help="summarize a bridge session log")
    h.add_argument("--log", type=Path, required=True)
    h.set_defaults(fn=cmd_human_stats)

    s = sub.add_parser("serve", help="run the TCP bridge")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8964)
    s.add_argument("--mode", choices=("human", "watch", "replay"),
                   default="human")
    s.add_argument("--config", type=Path, default=None)
    s.add_argument("--checkpoint", type=Path, default=None,
                   help="required for watch mode")
    s.add_argument("--log", type=Path, default=None,
                   help="session log to write (human/watch) or replay")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--unpaced", action="store_true",
                   help="run steps as fast as the client acknowledges")
    s.add_argument("--ws-port", type=int, default=None,
                   help="also expose a WebSocket gateway on this port")
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ConfigError as exc:
        _emit({"error": "config", "detail": str(exc)})
        return 2
    except FileNotFoundError as exc:
        _emit({"error": "io", "detail": str(exc)})
        return 3
    except ValueError as exc:
        _emit({"error": "usage", "detail": str(exc)})
        return 4
    except KeyboardInterrupt:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
