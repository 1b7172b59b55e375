#!/usr/bin/env python3
"""Record a deterministic bridge session for the frontend test suite.

Runs a lockstep human-mode session with a scripted keyboard-like policy,
captures every server message byte-for-byte, and writes:

    frontend/tests/fixtures/session_messages.jsonl   raw server lines
    frontend/tests/fixtures/expected_stats.json      ingested aggregate
    frontend/tests/fixtures/hello.json               first handshake message

The frontend parses the recorded lines through its protocol module and must
reproduce the expected aggregate exactly.
"""
from __future__ import annotations

import json
import socket
import sys
import threading
from dataclasses import asdict, replace
from pathlib import Path
from queue import Queue

from lanechange.bridge import serve
from lanechange.config import PlannerParams, SimConfig
from lanechange.harness import aggregate, ingest_session_log
from lanechange.sim import ACCELERATE, DECELERATE, NO_ACTION, SWITCH_RIGHT

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "frontend" / "tests" / "fixtures"

EPISODES = 25
SEED = 20260822


def scripted_action(frame: dict) -> int:
    """Vary inputs the way a fidgety human would."""
    step = frame["step"]
    if step % 40 == 10:
        return SWITCH_RIGHT
    if step % 7 == 0:
        return ACCELERATE
    if step % 11 == 0:
        return DECELERATE
    return NO_ACTION


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    log_path = FIXTURES / "session_log.jsonl"
    if log_path.exists():
        log_path.unlink()
    sim_cfg = replace(SimConfig(), max_steps=2000)

    ports: Queue = Queue()
    th = threading.Thread(
        target=serve,
        kwargs=dict(port=0, ready=ports.put, sim_cfg=sim_cfg,
                    planner_params=PlannerParams(), mode="human",
                    log_path=log_path, seed=SEED, paced=False,
                    max_episodes=EPISODES, once=True),
        daemon=True)
    th.start()
    port = ports.get(timeout=30)

    sock = socket.create_connection(("127.0.0.1", port), timeout=60)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    fh = sock.makefile("rb")
    raw_lines: list[bytes] = []
    while True:
        line = fh.readline()
        if not line:
            break
        raw_lines.append(line)
        msg = json.loads(line)
        if msg["type"] == "frame" and not msg["done"]:
            action = scripted_action(msg)
            sock.sendall((json.dumps(
                {"v": 1, "type": "action", "seq": msg["seq"],
                 "action": action}) + "\n").encode())
        elif msg["type"] == "bye":
            break
    sock.close()
    th.join(timeout=120)

    (FIXTURES / "session_messages.jsonl").write_bytes(b"".join(raw_lines))
    hello = json.loads(raw_lines[0])
    (FIXTURES / "hello.json").write_text(json.dumps(hello, indent=2) + "\n")

    header, stats = ingest_session_log(log_path)
    agg = aggregate(stats)
    expected = {
        "episodes": [asdict(s) for s in stats],
        "aggregate": asdict(agg),
        "header_mode": header["mode"],
    }
    (FIXTURES / "expected_stats.json").write_text(
        json.dumps(expected, indent=2) + "\n")
    print(f"recorded {len(raw_lines)} server messages, "
          f"{agg.episodes} episodes "
          f"(success {agg.success_rate:.2f} collision {agg.collision_rate:.2f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
