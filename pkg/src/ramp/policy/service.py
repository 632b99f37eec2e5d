"""Action-chunk inference service over a local Unix socket.

Protocol: newline-delimited JSON, one request / one response per line.
Request:  {"observation": <base64 frame blob>, "proprio": [f64...],
           "instruction": str, "mode": "standard"|"efficient",
           "seed": optional int}
Response: {"actions": [[f64 x action_dim] x chunk_len]} on success,
          {"error": str} otherwise.

The server holds read-only parameters; each request derives a fresh rng
(from the request seed when given, else from a call counter), so concurrent
calls are independent and a seeded call is reproducible.
"""
from __future__ import annotations

import json
import socket
import socketserver
import threading
from pathlib import Path

import numpy as np

from ..numerics import ContractError, Rng
from ..rollout.bridge import decode_frame, encode_frame
from .model import sample_actions
from .train import future_latents_from_model


class PolicyService:
    """Serves a trained policy at a Unix-domain socket path."""

    def __init__(self, params, cfg, wm, socket_path, base_seed: int = 0):
        self.params = params
        self.cfg = cfg
        self.wm = wm
        self.socket_path = Path(socket_path)
        self.base_seed = base_seed
        self._calls = 0
        self._lock = threading.Lock()
        self._server: socketserver.ThreadingUnixStreamServer | None = None
        self._thread: threading.Thread | None = None

    def handle_request(self, request: dict) -> dict:
        mode = request.get("mode", "standard")
        if mode not in ("standard", "efficient"):
            raise ContractError(f"unknown inference mode {mode!r}")
        frame = decode_frame(request["observation"])
        proprio = np.asarray(request["proprio"], dtype=np.float64)
        seed = request.get("seed")
        if seed is None:
            with self._lock:
                self._calls += 1
                rng = Rng(self.base_seed).split(f"call-{self._calls}")
        else:
            rng = Rng(int(seed))
        frames = frame[None]
        prop = proprio[None]
        if mode == "standard":
            if self.wm is None:
                raise ContractError("standard mode needs a world model")
            wm_params, wm_cfg = self.wm
            latents = future_latents_from_model(wm_params, wm_cfg, frames,
                                                prop, rng.split("latent"))
        else:
            latents = None
        eps = rng.normal((1, self.cfg.out_dim))
        chunk = sample_actions(self.params, self.cfg, frames, prop, latents,
                               eps, mode=mode)[0]
        return {"actions": chunk.tolist()}

    def start(self) -> None:
        service = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                for line in self.rfile:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        reply = service.handle_request(json.loads(line))
                    except Exception as exc:  # report, keep the server alive
                        reply = {"error": str(exc)}
                    self.wfile.write(json.dumps(reply).encode() + b"\n")
                    self.wfile.flush()

        self.socket_path.unlink(missing_ok=True)
        self._server = socketserver.ThreadingUnixStreamServer(
            str(self.socket_path), Handler)
        self._server.daemon_threads = True
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self.socket_path.unlink(missing_ok=True)
            self._server = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()


class PolicyClient:
    """Blocking line-oriented client for :class:`PolicyService`."""

    def __init__(self, socket_path, timeout: float = 10.0):
        self.socket_path = str(socket_path)
        self.timeout = timeout
        self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        self._sock.connect(self.socket_path)
        self._file = self._sock.makefile("rwb")

    def chunk(self, frame: np.ndarray, proprio, instruction: str = "",
              mode: str = "standard", seed: int | None = None) -> np.ndarray:
        request = {
            "observation": encode_frame(frame),
            "proprio": np.asarray(proprio, dtype=np.float64).tolist(),
            "instruction": instruction,
            "mode": mode,
        }
        if seed is not None:
            request["seed"] = seed
        self._file.write(json.dumps(request).encode() + b"\n")
        self._file.flush()
        line = self._file.readline()
        if not line:
            raise ConnectionError("policy service closed the connection")
        reply = json.loads(line)
        if "error" in reply:
            raise ContractError(f"policy service error: {reply['error']}")
        return np.asarray(reply["actions"], dtype=np.float64)

    def close(self) -> None:
        self._file.close()
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
