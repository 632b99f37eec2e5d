"""Live-takeover bridge: a WebSocket endpoint streaming JSON text frames.

Wire protocol:
  server -> client:
    {"type": "state", "seq": u64, "frame": base64, "step": u32,
     "value_estimate": f64, "intervening": bool}
  client -> server:
    {"type": "takeover"} | {"type": "action", "ax": f64, "ay": f64,
     "grip": 0|1} | {"type": "release"} |
    {"type": "label", "outcome": "success"|"failure"}

seq increases strictly. The server applies the latest client action per
control tick; a label message terminates the episode. The base64 frame
payload is self-describing: three little-endian u32 extents (C, H, W)
followed by row-major uint8 intensities (value * 255).
"""
from __future__ import annotations

import asyncio
import base64
import struct
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket

from ..envs import EpisodeRecord, normalize_value, reward_sequence, save_episodes
from ..envs import gridpack
from ..numerics import ContractError
from .stitch import stitch_interventions


def encode_frame(frame: np.ndarray) -> str:
    c, h, w = frame.shape
    payload = struct.pack("<III", c, h, w)
    payload += np.clip(np.round(frame * 255.0), 0, 255).astype(np.uint8).tobytes()
    return base64.b64encode(payload).decode("ascii")


def decode_frame(blob: str) -> np.ndarray:
    raw = base64.b64decode(blob)
    c, h, w = struct.unpack_from("<III", raw, 0)
    data = np.frombuffer(raw, dtype=np.uint8, offset=12)
    if data.size != c * h * w:
        raise ContractError(f"frame payload {data.size} != {c}*{h}*{w}")
    return data.reshape(c, h, w).astype(np.float64) / 255.0


def map_ui_action(task, state, ax: float, ay: float, grip: int) -> np.ndarray:
    """Translate the console's (ax, ay, grip) into an environment action."""
    if task.family == "pushbox":
        lim = task.a_max
        return np.clip(np.array([ax, ay], dtype=np.float64), -lim, lim)
    onehot = np.zeros(task.action_dim)
    carrying = state.carrying is not None
    if grip and not carrying:
        onehot[gridpack.GRASP] = 1.0
    elif not grip and carrying:
        onehot[gridpack.RELEASE] = 1.0
    elif abs(ax) >= abs(ay) and ax != 0:
        onehot[gridpack.RIGHT if ax > 0 else gridpack.LEFT] = 1.0
    elif ay != 0:
        onehot[gridpack.DOWN if ay > 0 else gridpack.UP] = 1.0
    else:
        # no input: repeat a harmless grasp-free no-op (grasp on empty cell)
        onehot[gridpack.GRASP] = 1.0
    return onehot


class BridgeSession:
    """One live episode driven over the wire.

    tick_s > 0 paces steps with a wall-clock tick, draining queued client
    messages each tick. tick_s == 0 runs in lockstep: the server waits for
    at least one client message per step, which makes tests deterministic.
    """

    def __init__(self, task, chunk_fn, seed: int, out_path, rng,
                 tick_s: float = 0.05, value_fn=None, stitch: bool = True,
                 chunk_len: int = 4):
        self.task = task
        self.chunk_fn = chunk_fn
        self.chunk_len = chunk_len
        self.seed = seed
        self.out_path = Path(out_path)
        self.rng = rng
        self.tick_s = tick_s
        self.value_fn = value_fn
        self.stitch = stitch
        self.seq = 0
        self.intervening = False
        self.label: str | None = None
        self.saved: list[EpisodeRecord] = []

    def state_message(self, state, step: int) -> dict:
        if self.value_fn is not None:
            value = float(self.value_fn(self.task, state))
        else:
            value = float(normalize_value(self.task.oracle_value(state),
                                          self.task.max_steps, self.task.c_fail))
        self.seq += 1
        return {
            "type": "state",
            "seq": self.seq,
            "frame": encode_frame(self.task.render(state)),
            "step": step,
            "value_estimate": value,
            "intervening": self.intervening,
        }

    def apply_messages(self, messages) -> dict | None:
        """Fold a tick's worth of client messages; returns the latest action
        message, if any."""
        latest_action = None
        for msg in messages:
            kind = msg.get("type")
            if kind == "takeover":
                self.intervening = True
            elif kind == "release":
                self.intervening = False
            elif kind == "action":
                latest_action = msg
            elif kind == "label":
                if self.label is None:
                    outcome = msg.get("outcome")
                    if outcome not in ("success", "failure"):
                        raise ContractError(f"bad label outcome {outcome!r}")
                    self.label = outcome
            else:
                raise ContractError(f"unknown message type {kind!r}")
        return latest_action

    def finalize(self, frames, proprios, actions, flags, outcome) -> EpisodeRecord:
        # an explicit operator label wins over the env predicate
        final = self.label if self.label is not None else outcome
        if final is None:
            final = "failure"
        rec = EpisodeRecord(
            task=self.task.name, seed=self.seed, frames=np.array(frames),
            proprio=np.array(proprios), actions=np.array(actions),
            chunk_len=self.chunk_len, rewards=reward_sequence(
                len(frames), final, self.task.c_fail),
            intervention=np.array(flags, dtype=np.uint8), outcome=final,
            c_fail=self.task.c_fail,
            meta={"labeled": self.label is not None, "source": "bridge"},
        )
        to_save = rec
        if self.stitch:
            stitched = stitch_interventions(rec, self.task.a_max)
            if stitched is not None:
                to_save = stitched
        self.saved.append(to_save)
        save_episodes(self.saved, self.out_path)
        return rec

    async def run(self, websocket) -> None:
        """Drive the episode over an (accepted) WebSocket connection."""
        queue: asyncio.Queue = asyncio.Queue()
        closed = asyncio.Event()

        async def reader():
            try:
                while True:
                    queue.put_nowait(await websocket.receive_json())
            except Exception:
                closed.set()

        reader_task = asyncio.create_task(reader())
        try:
            state = self.task.reset(self.rng.split("reset"))
            frames, proprios, actions, flags = [], [], [], []
            pending: list[np.ndarray] = []
            outcome = None
            while len(frames) < self.task.max_steps:
                step = len(frames)
                await websocket.send_json(self.state_message(state, step))
                messages = await self._tick_messages(queue, closed)
                latest = self.apply_messages(messages)
                if self.label is not None or closed.is_set():
                    break
                if self.intervening:
                    if latest is None:
                        continue       # no operator input this tick: hold
                    a = map_ui_action(self.task, state,
                                      float(latest.get("ax", 0.0)),
                                      float(latest.get("ay", 0.0)),
                                      int(latest.get("grip", 0)))
                    pending = []
                    flag = 1
                else:
                    if not pending:
                        pending = list(self.chunk_fn(self.task.render(state),
                                                     self.task.proprio(state)))
                    a = np.asarray(pending.pop(0), dtype=np.float64)
                    flag = 0
                frames.append(self.task.render(state))
                proprios.append(self.task.proprio(state))
                actions.append(a)
                flags.append(flag)
                state, done, outcome = self.task.step(state, a)
                if done:
                    await websocket.send_json(self.state_message(state, step + 1))
                    if self.label is None and not closed.is_set():
                        # give the operator one chance to label the outcome
                        self.apply_messages(await self._tick_messages(queue, closed))
                    break
            if frames:
                self.finalize(frames, proprios, actions, flags, outcome)
        finally:
            reader_task.cancel()

    async def _tick_messages(self, queue: asyncio.Queue, closed) -> list:
        messages = []
        if self.tick_s > 0:
            await asyncio.sleep(self.tick_s)
        else:
            # lockstep: block for the first message of the tick
            getter = asyncio.create_task(queue.get())
            closer = asyncio.create_task(closed.wait())
            done, pending = await asyncio.wait(
                {getter, closer}, return_when=asyncio.FIRST_COMPLETED)
            for t in pending:
                t.cancel()
            if getter in done:
                messages.append(getter.result())
        while not queue.empty():
            messages.append(queue.get_nowait())
        return messages


def make_bridge_app(session_factory, static_dir=None):
    """FastAPI app exposing the bridge at /ws, one live session at a time.

    session_factory() -> BridgeSession builds a fresh session per connection.
    static_dir, when given, is served at / for the browser console.
    """
    app = FastAPI()
    busy = asyncio.Lock()

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        if busy.locked():
            await websocket.close(code=1013)
            return
        async with busy:
            await websocket.accept()
            session = session_factory()
            try:
                await session.run(websocket)
            finally:
                try:
                    await websocket.close()
                except Exception:
                    pass

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(static_dir), html=True))
    return app
