"""TCP bridge: streams simulator frames as JSON lines and accepts actions.

Wire format: one JSON object per newline-terminated line, every message
tagged "v": 1. The server speaks first.

    server -> client
      hello         session parameters and action names
      episode_start per-episode vehicle roster (kinds are redrawn on reset)
      frame         post-step world state; "seq" increments monotonically
      episode_end   outcome plus running aggregate
      error         protocol or verification failure, then the socket closes
      bye           session summary

    client -> server
      action  {"v":1,"type":"action","seq":<frame seq>,"action":0..3}
      ack     {"v":1,"type":"ack","seq":<frame seq>}
      quit    {"v":1,"type":"quit"}

Action latency is exactly one frame: an action tagged with the latest
frame's seq is applied to the following step. Actions tagged with any
older seq are counted as stale and ignored; unknown action indices are
counted as invalid and ignored. When no valid action arrives in time the
step holds speed (the no-op action).

Modes: "human" steps on the wall clock at 1/dt Hz (or in lockstep when
unpaced, waiting for one client message per frame); "watch" drives a
checkpoint greedily and adds its q-values to every frame; "replay"
re-simulates a logged session from its recorded seeds and actions,
verifying the reward sequence matches the log bit for bit.
"""
from __future__ import annotations

import json
import select
import socket
import time
from pathlib import Path

import numpy as np

from .config import PlannerParams, SimConfig
from .harness import (EpisodeStats, _episode_seed, _streams, aggregate,
                      append_jsonl, load_checkpoint, outcome_of, read_jsonl)
from .dqn import N_PRIMITIVE_ACTIONS
from .planners import PLANNERS, PidState
from .sim import ACTION_NAMES, EGO, NO_ACTION, OPTION, observe_flat, reset, step

PROTOCOL_VERSION = 1


class ProtocolError(ValueError):
    pass


class _LineChannel:
    """Buffered newline-delimited JSON over a connected socket."""

    def __init__(self, conn: socket.socket):
        self.conn = conn
        self.buf = b""
        self.closed = False

    def send(self, obj: dict) -> None:
        if self.closed:
            return
        try:
            self.conn.sendall(json.dumps(obj).encode() + b"\n")
        except OSError:
            self.closed = True

    def _pump(self, timeout: float) -> None:
        if self.closed:
            return
        ready, _, _ = select.select([self.conn], [], [], timeout)
        if not ready:
            return
        try:
            chunk = self.conn.recv(65536)
        except OSError:
            chunk = b""
        if not chunk:
            self.closed = True
            return
        self.buf += chunk

    def drain(self, timeout: float = 0.0) -> list[dict]:
        """All complete messages currently available, waiting at most
        timeout for the first read."""
        self._pump(timeout)
        while not self.closed:  # keep reading while data is instantly there
            before = len(self.buf)
            self._pump(0.0)
            if len(self.buf) == before:
                break
        out = []
        while b"\n" in self.buf:
            line, self.buf = self.buf.split(b"\n", 1)
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"bad message: {exc}") from exc
        return out

    def wait_message(self, timeout: float | None = None) -> dict | None:
        """Block until one message arrives (None on disconnect/timeout)."""
        deadline = None if timeout is None else time.monotonic() + timeout
        pending = self.drain(0.0)
        while not pending:
            if self.closed:
                return None
            left = 1.0 if deadline is None \
                else min(1.0, deadline - time.monotonic())
            if left <= 0.0:
                return None
            self._pump(left)
            pending = self.drain(0.0)
        first, rest = pending[0], pending[1:]
        if rest:  # keep later messages for the next call
            self.buf = b"".join(json.dumps(m).encode() + b"\n"
                                for m in rest) + self.buf
        return first


def _roster(state) -> list[dict]:
    out = []
    for i in range(state.n):
        out.append({
            "id": i,
            "kind": "moto" if bool(state.is_moto[i]) else "car",
            "width": float(state.width[i]),
            "length": float(state.length[i]),
            "adversarial": bool(state.adversarial[i]),
        })
    return out


def _frame_vehicles(state) -> list[dict]:
    out = []
    for i in range(state.n):
        out.append({
            "id": i,
            "lane": int(state.lane[i]),
            "lat": float(state.lateral[i]),
            "y": float(state.y[i]),
            "speed": float(state.speed[i]),
            "changing": bool(state.lc_active[i]),
        })
    return out


class _Session:
    """One connected client driving (or watching) a run of episodes."""

    def __init__(self, chan: _LineChannel, sim_cfg: SimConfig,
                 planner_params: PlannerParams, mode: str,
                 checkpoint: str | Path | None, log_path: str | Path | None,
                 seed: int, paced: bool, max_episodes: int | None):
        self.chan = chan
        self.sim_cfg = sim_cfg
        self.planner_params = planner_params
        self.mode = mode
        self.log_path = log_path
        self.seed = seed
        self.paced = paced
        self.max_episodes = max_episodes
        self.seq = 0
        self.stale_actions = 0
        self.invalid_actions = 0
        self.pending_action: int | None = None
        self.want_quit = False
        self.stats: list[EpisodeStats] = []
        self.agent = None
        self.option_fn = None
        self.option_name = None
        if mode == "watch":
            if checkpoint is None:
                raise ProtocolError("watch mode needs a checkpoint")
            self.agent, ck_sim, ck_params, option, _ = \
                load_checkpoint(checkpoint)
            self.sim_cfg = ck_sim
            self.planner_params = ck_params
            self.option_fn = PLANNERS[option]
            self.option_name = option

    # -- logging ----------------------------------------------------------

    def log(self, record: dict) -> None:
        if self.log_path is not None:
            append_jsonl(self.log_path, record)

    def write_header(self) -> None:
        from dataclasses import asdict
        self.log({"type": "header", "v": PROTOCOL_VERSION, "mode": self.mode,
                  "seed": self.seed, "sim_cfg": asdict(self.sim_cfg),
                  "option": self.option_name})

    # -- client input -----------------------------------------------------

    def _consume(self, messages: list[dict]) -> None:
        for msg in messages:
            kind = msg.get("type")
            if kind == "quit":
                self.want_quit = True
            elif kind == "action":
                if msg.get("seq") != self.seq:
                    self.stale_actions += 1
                    continue
                action = msg.get("action")
                if not isinstance(action, int) \
                        or not 0 <= action < N_PRIMITIVE_ACTIONS:
                    self.invalid_actions += 1
                    continue
                self.pending_action = action
            elif kind == "ack":
                pass
            else:
                self.invalid_actions += 1

    def gather_action(self, deadline: float | None) -> int:
        """Latest valid action for the upcoming step. Paced sessions wait
        until the frame deadline; lockstep sessions wait for one client
        message (a disconnect or quit ends the session)."""
        self.pending_action = None
        if self.paced:
            while True:
                left = deadline - time.monotonic()
                if left <= 0.0:
                    break
                self._consume(self.chan.drain(left))
                if self.chan.closed:
                    break
        else:
            msg = self.chan.wait_message()
            if msg is None:
                self.want_quit = True
            else:
                self._consume([msg])
                self._consume(self.chan.drain(0.0))
        return NO_ACTION if self.pending_action is None else self.pending_action

    # -- frames -----------------------------------------------------------

    def send_frame(self, state, episode: int, reward: float, total: float,
                   applied: int, agent_action: int | None,
                   q: np.ndarray | None, events=None) -> None:
        frame = {
            "v": PROTOCOL_VERSION, "type": "frame", "seq": self.seq,
            "episode": episode, "step": int(state.step_count),
            "reward": reward, "total_reward": total,
            "action": applied,
            "agent_action": agent_action,
            "ego": {"lane": int(state.lane[EGO]),
                    "lat": float(state.lateral[EGO]),
                    "speed": float(state.speed[EGO]),
                    "changing": bool(state.lc_active[EGO])},
            "vehicles": _frame_vehicles(state),
            "done": bool(events.done) if events is not None else False,
            "q": None if q is None else [float(x) for x in q],
        }
        self.chan.send(frame)

    def run(self) -> dict:
        self.write_header()
        self.chan.send({
            "v": PROTOCOL_VERSION, "type": "hello", "mode": self.mode,
            "n_lanes": self.sim_cfg.n_lanes,
            "lane_width": self.sim_cfg.lane_width,
            "range_half": self.sim_cfg.range_half,
            "dt": self.sim_cfg.dt,
            "speed_limit": self.sim_cfg.speed_limit_mps,
            "actions": list(ACTION_NAMES),
            "seed": self.seed,
        })
        _, _, _, episode_rng = _streams(self.seed)
        episode = 0
        while not self.want_quit and not self.chan.closed:
            if self.max_episodes is not None and episode >= self.max_episodes:
                break
            sim_seed = _episode_seed(episode_rng)
            self.run_episode(episode, sim_seed)
            episode += 1
        summary = {
            "episodes": len(self.stats),
            "stale_actions": self.stale_actions,
            "invalid_actions": self.invalid_actions,
        }
        if self.stats:
            from dataclasses import asdict
            summary["stats"] = asdict(aggregate(self.stats))
        self.log({"type": "summary", **summary})
        self.chan.send({"v": PROTOCOL_VERSION, "type": "bye",
                        "summary": summary})
        return summary

    def run_episode(self, episode: int, sim_seed: int) -> None:
        state = reset(self.sim_cfg, seed=sim_seed)
        pid = PidState()
        self.log({"type": "episode_start", "episode": episode,
                  "sim_seed": sim_seed})
        self.chan.send({"v": PROTOCOL_VERSION, "type": "episode_start",
                        "episode": episode, "sim_seed": sim_seed,
                        "vehicles": _roster(state)})
        total = 0.0
        obs = observe_flat(state)
        # seed frame: state before the first step, seq tags the action slot
        self.seq += 1
        self.send_frame(state, episode, 0.0, 0.0, NO_ACTION, None,
                        self.agent.q_values(obs) if self.agent else None)
        frame_dt = self.sim_cfg.dt
        next_deadline = time.monotonic() + frame_dt
        while not self.want_quit and not self.chan.closed:
            agent_action = None
            q = None
            if self.agent is not None:  # watch mode drives itself
                q = self.agent.q_values(obs)
                agent_action = int(np.argmax(q))
                if self.paced:  # stay responsive to quit while paced
                    self._consume(self.chan.drain(
                        max(0.0, next_deadline - time.monotonic())))
                else:
                    msg = self.chan.wait_message()
                    if msg is None:
                        self.want_quit = True
                    else:
                        self._consume([msg])
                if agent_action == OPTION:
                    primitive, pid = self.option_fn(
                        state, self.planner_params, pid)
                else:
                    primitive = agent_action
            else:
                primitive = self.gather_action(
                    next_deadline if self.paced else None)
            if self.want_quit or self.chan.closed:
                return
            ev = step(state, primitive)
            total += ev.reward
            self.seq += 1
            obs = observe_flat(state)
            self.log({"type": "step", "episode": episode,
                      "step": int(state.step_count), "action": primitive,
                      "agent_action": agent_action, "reward": ev.reward,
                      "speed": float(state.speed[EGO])})
            self.send_frame(state, episode, ev.reward, total, primitive,
                            agent_action, q, events=ev)
            next_deadline += frame_dt
            if self.paced:
                now = time.monotonic()
                if next_deadline < now:  # fell behind; do not burst
                    next_deadline = now + frame_dt
            if ev.done:
                st = EpisodeStats(episode=episode, steps=int(state.step_count),
                                  reward=total, outcome=outcome_of(ev),
                                  avg_speed=0.0)
                self.stats.append(st)
                self.log({"type": "episode", "episode": episode,
                          "outcome": st.outcome, "steps": st.steps,
                          "reward": st.reward})
                from dataclasses import asdict
                self.chan.send({"v": PROTOCOL_VERSION, "type": "episode_end",
                                "episode": episode, "outcome": st.outcome,
                                "steps": st.steps, "reward": st.reward,
                                "running": asdict(aggregate(self.stats))})
                return


def _replay_session(chan: _LineChannel, log_path: str | Path,
                    paced: bool) -> dict:
    """Re-simulate a recorded session and stream it, verifying rewards."""
    records = read_jsonl(log_path)
    if not records or records[0].get("type") != "header":
        raise ProtocolError("replay log must start with a header record")
    header = records[0]
    sim_cfg = SimConfig(**header["sim_cfg"])
    chan.send({
        "v": PROTOCOL_VERSION, "type": "hello", "mode": "replay",
        "n_lanes": sim_cfg.n_lanes, "lane_width": sim_cfg.lane_width,
        "range_half": sim_cfg.range_half, "dt": sim_cfg.dt,
        "speed_limit": sim_cfg.speed_limit_mps,
        "actions": list(ACTION_NAMES), "seed": header.get("seed"),
    })
    seq = 0
    state = None
    episode = -1
    total = 0.0
    verified_steps = 0
    frame_dt = sim_cfg.dt
    next_deadline = time.monotonic() + frame_dt
    for rec in records[1:]:
        kind = rec.get("type")
        if kind == "episode_start":
            episode = rec["episode"]
            state = reset(sim_cfg, seed=rec["sim_seed"])
            total = 0.0
            chan.send({"v": PROTOCOL_VERSION, "type": "episode_start",
                       "episode": episode, "sim_seed": rec["sim_seed"],
                       "vehicles": _roster(state)})
        elif kind == "step":
            if state is None:
                raise ProtocolError("step record before episode_start")
            ev = step(state, int(rec["action"]))
            total += ev.reward
            seq += 1
            verified_steps += 1
            if ev.reward != rec["reward"]:
                chan.send({"v": PROTOCOL_VERSION, "type": "error",
                           "detail": f"reward mismatch at episode {episode} "
                                     f"step {rec['step']}: re-simulated "
                                     f"{ev.reward!r}, logged "
                                     f"{rec['reward']!r}"})
                raise ProtocolError("replay diverged from log")
            frame = {
                "v": PROTOCOL_VERSION, "type": "frame", "seq": seq,
                "episode": episode, "step": int(state.step_count),
                "reward": ev.reward, "total_reward": total,
                "action": int(rec["action"]),
                "agent_action": rec.get("agent_action"),
                "ego": {"lane": int(state.lane[EGO]),
                        "lat": float(state.lateral[EGO]),
                        "speed": float(state.speed[EGO]),
                        "changing": bool(state.lc_active[EGO])},
                "vehicles": _frame_vehicles(state),
                "done": ev.done,
                "q": None,
            }
            chan.send(frame)
            if paced:
                time.sleep(max(0.0, next_deadline - time.monotonic()))
                next_deadline += frame_dt
        elif kind == "episode":
            chan.send({"v": PROTOCOL_VERSION, "type": "episode_end",
                       "episode": episode, "outcome": rec["outcome"],
                       "steps": rec["steps"], "reward": rec["reward"],
                       "running": None})
    summary = {"verified": True, "steps": verified_steps}
    chan.send({"v": PROTOCOL_VERSION, "type": "bye", "summary": summary})
    return summary


def ws_gateway(ws_host: str, ws_port: int, tcp_host: str, tcp_port: int, *,
               once: bool = False, ready=None) -> None:
    """WebSocket front door for browsers: each WS client gets a private TCP
    connection to the bridge; text frames map 1:1 to JSON lines."""
    import threading

    from websockets.sync.server import serve as _ws_serve

    stop = threading.Event()

    def handler(ws):
        tcp = socket.create_connection((tcp_host, tcp_port))
        tcp.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

        def tcp_to_ws():
            buf = b""
            try:
                while True:
                    chunk = tcp.recv(65536)
                    if not chunk:
                        break
                    buf += chunk
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        if line.strip():
                            ws.send(line.decode())
            except OSError:
                pass
            finally:
                try:
                    ws.close()
                except OSError:
                    pass

        pump = threading.Thread(target=tcp_to_ws, daemon=True)
        pump.start()
        try:
            for message in ws:
                if isinstance(message, bytes):
                    message = message.decode()
                tcp.sendall(message.encode() + b"\n")
        except OSError:
            pass
        finally:
            try:
                tcp.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            tcp.close()
            pump.join(timeout=5)
            if once:
                stop.set()

    with _ws_serve(handler, ws_host, ws_port) as server:
        if ready is not None:
            ready(server.socket.getsockname()[1])
        if once:
            th = threading.Thread(target=server.serve_forever, daemon=True)
            th.start()
            stop.wait()
            server.shutdown()
            th.join(timeout=5)
        else:
            server.serve_forever()


def serve(host: str = "127.0.0.1", port: int = 8964, *,
          sim_cfg: SimConfig | None = None,
          planner_params: PlannerParams | None = None,
          mode: str = "human", checkpoint: str | Path | None = None,
          log_path: str | Path | None = None, seed: int = 0,
          paced: bool = True, max_episodes: int | None = None,
          once: bool = False, sock: socket.socket | None = None,
          ready=None) -> None:
    """Accept clients sequentially; each gets its own session. With
    once=True the server returns after the first session (tests)."""
    if mode not in ("human", "watch", "replay"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "replay" and log_path is None:
        raise ValueError("replay mode needs a session log")
    sim_cfg = sim_cfg or SimConfig()
    planner_params = planner_params or PlannerParams()
    own_sock = sock is None
    if own_sock:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
    sock.listen(1)
    if ready is not None:
        ready(sock.getsockname()[1])
    try:
        while True:
            conn, _ = sock.accept()
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            chan = _LineChannel(conn)
            try:
                if mode == "replay":
                    _replay_session(chan, log_path, paced)
                else:
                    _Session(chan, sim_cfg, planner_params, mode, checkpoint,
                             log_path, seed, paced, max_episodes).run()
            except ProtocolError as exc:
                chan.send({"v": PROTOCOL_VERSION, "type": "error",
                           "detail": str(exc)})
            finally:
                # half-close then drain, so a late client ack cannot turn
                # into a RST that drops the tail of the stream client-side
                try:
                    conn.shutdown(socket.SHUT_WR)
                    conn.settimeout(2.0)
                    while conn.recv(65536):
                        pass
                except OSError:
                    pass
                conn.close()
            if once:
                return
    finally:
        if own_sock:
            sock.close()
