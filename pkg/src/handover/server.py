"""WebSocket service for live steering and log playback.

The control loop runs on a worker thread and owns every mutable simulation
object.  The asyncio side talks to it only through two bounded channels: an
inbound command queue drained once per control cycle, and one outbound
snapshot queue per client.  A slow client never stalls the loop -- its queue
drops the oldest frames and the drop count is reported with the final
metrics message.

Wire format: JSON ``{"type", "t", "payload"}``.  The server greets every
connection with ``{"v": 1}``; a client message announcing a different ``v``
is rejected and the connection closed.  Malformed or unknown messages get an
``error`` reply and the connection stays up.
"""

from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from collections import deque
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .geometry import Pose
from .simulation import RunLog, run_scenario

log = logging.getLogger("handover.server")

PROTOCOL_VERSION = 1
OUTBOUND_QUEUE = 256        # frames buffered per client before drop-oldest
STATE_DECIMATION = 16       # one broadcast state per 16 control cycles


def _pose_doc(position, quaternion) -> dict:
    return {"position": [float(v) for v in position],
            "quaternion": [float(v) for v in quaternion]}


def _wire(msg_type: str, t, payload) -> str:
    return json.dumps({"type": msg_type,
                       "t": None if t is None else float(t),
                       "payload": payload})


def translate_command(msg: dict) -> dict:
    """Map a client wire message onto a simulation command dict."""
    kind = msg.get("type")
    payload = msg.get("payload") or {}

    def pose():
        pos = np.asarray(payload["position"], dtype=float).reshape(3)
        quat = np.asarray(payload.get("quaternion", [1.0, 0.0, 0.0, 0.0]),
                          dtype=float).reshape(4)
        return Pose(pos, quat)

    if kind == "set_target_pose":
        return {"kind": "retarget", "pose": pose(),
                "duration": float(payload.get("duration", 0.5))}
    if kind == "set_grasp_offset":
        return {"kind": "grasp_offset", "pose": pose()}
    if kind == "abort":
        return {"kind": "abort", "duration": float(payload.get("duration", 1.0))}
    if kind in ("pause", "resume"):
        return {"kind": kind}
    if kind == "set_weights":
        cmd = {"kind": "set_weights"}
        for key in ("observation", "tracking", "posture"):
            if key in payload:
                cmd[key] = float(payload[key])
        return cmd
    raise ValueError(f"unknown type {kind!r}")


class Broadcaster:
    """Per-client bounded fan-out queues shared by live and replay sessions."""

    accepts_commands = False

    def __init__(self):
        self._lock = threading.Lock()
        self._clients: dict[int, deque] = {}
        self._next_id = 0
        self.drops = 0
        self.final_metrics: dict | None = None

    def subscribe(self) -> int:
        with self._lock:
            cid = self._next_id
            self._next_id += 1
            self._clients[cid] = deque()
            if self.final_metrics is not None:   # late joiner on a finished run
                self._clients[cid].append(
                    _wire("metrics", self.final_metrics.get("duration"),
                          self.final_metrics))
            return cid

    def unsubscribe(self, cid: int):
        with self._lock:
            self._clients.pop(cid, None)

    def pop_all(self, cid: int) -> list:
        with self._lock:
            q = self._clients.get(cid)
            if not q:
                return []
            out = list(q)
            q.clear()
            return out

    def broadcast(self, text: str):
        with self._lock:
            for q in self._clients.values():
                if len(q) >= OUTBOUND_QUEUE:
                    q.popleft()
                    self.drops += 1
                q.append(text)


class LiveSession(Broadcaster):
    """Owns one simulation run; commands flow in, telemetry flows out.

    ``realtime_scale``: simulated seconds per wall second (1 = real time,
    0 = unpaced, as fast as the loop solves).
    """

    accepts_commands = True

    def __init__(self, scenario_factory, realtime_scale: float = 1.0):
        super().__init__()
        self.scenario_factory = scenario_factory
        self.scale = float(realtime_scale)
        self._inbound = deque()
        self._thread: threading.Thread | None = None
        self._state_count = 0
        self._wall0 = 0.0
        self._last_t = -1.0
        self.done = False

    def submit(self, cmd: dict):
        with self._lock:
            self._inbound.append(cmd)

    def ensure_started(self):
        with self._lock:
            if self._thread is not None:
                return
            self._thread = threading.Thread(target=self._run, daemon=True,
                                            name="handover-sim")
        self._thread.start()

    # ---- worker-thread side -------------------------------------------

    def _drain(self) -> list:
        with self._lock:
            out = list(self._inbound)
            self._inbound.clear()
        return out

    def _telemetry(self, kind: str, payload: dict):
        if kind == "state":
            self._state_count += 1
            if (self._state_count - 1) % STATE_DECIMATION:
                return
            body = {
                "q": [float(v) for v in payload["q"]],
                "X_ee": _pose_doc(payload["ee"].position,
                                  payload["ee"].orientation),
                "X_obj": _pose_doc(payload["obj"].position,
                                   payload["obj"].orientation),
                "X_obs": _pose_doc(payload["obs"].position,
                                   payload["obs"].orientation),
                "X_grasp": _pose_doc(payload["grasp"].position,
                                     payload["grasp"].orientation),
                "eta_obs": payload["eta_obs"],
                "eta_tt": payload["eta_tt"],
                "status": payload["status"],
                "meet": payload["meet"],
            }
            self.broadcast(_wire("state", payload["t"], body))
        elif kind == "event":
            self.broadcast(_wire("event", payload.get("t"), payload))
        else:   # metrics: final message of the run
            body = dict(payload)
            body["queue_drops"] = self.drops
            self.final_metrics = body
            self.broadcast(_wire("metrics", body.get("duration"), body))

    def _pace(self, t: float):
        if self.scale <= 0.0:
            return
        if t == self._last_t:          # paused: idle without burning a core
            time.sleep(0.001)
            return
        self._last_t = t
        ahead = self._wall0 + t / self.scale - time.monotonic()
        if ahead > 0.0:
            time.sleep(ahead)

    def _run(self):
        try:
            scenario = self.scenario_factory()
            self._wall0 = time.monotonic()
            run_scenario(scenario, commands=self._drain,
                         telemetry=self._telemetry, pacer=self._pace)
        except Exception:
            log.exception("simulation thread died")
        finally:
            self.done = True


class ReplaySession(Broadcaster):
    """Re-broadcasts a recorded run over the same wire protocol."""

    def __init__(self, runlog: RunLog, speed: float = 1.0,
                 decimation: int = STATE_DECIMATION):
        super().__init__()
        self.rl = runlog
        self.speed = float(speed)
        self.decimation = int(decimation)
        self._thread: threading.Thread | None = None
        self.done = False

    def ensure_started(self):
        with self._lock:
            if self._thread is not None:
                return
            self._thread = threading.Thread(target=self._run, daemon=True,
                                            name="handover-replay")
        self._thread.start()

    def row_payload(self, i: int) -> dict:
        rl = self.rl
        return {
            "q": [float(v) for v in rl.q[i]],
            "X_ee": _pose_doc(rl.ee[i][:3], rl.ee[i][3:]),
            "X_obj": _pose_doc(rl.obj[i][:3], rl.obj[i][3:]),
            "X_obs": _pose_doc(rl.obs[i][:3], rl.obs[i][3:]),
            "X_grasp": _pose_doc(rl.grasp[i][:3], rl.grasp[i][3:]),
            "eta_obs": float(np.linalg.norm(rl.eta_obs[i][:6])),
            "eta_tt": float(np.linalg.norm(rl.eta_tt[i][:6])),
            "status": rl.status[i],
            "meet": None,
        }

    def _run(self):
        rl = self.rl
        if rl.cycles == 0:
            self.done = True
            return
        dt = rl.time[1] - rl.time[0] if rl.cycles > 1 else 1e-3
        period = self.decimation * dt / self.speed
        wall0 = time.monotonic()
        for k, i in enumerate(range(0, rl.cycles, self.decimation)):
            self.broadcast(_wire("state", rl.time[i], self.row_payload(i)))
            ahead = wall0 + (k + 1) * period - time.monotonic()
            if ahead > 0.0:
                time.sleep(ahead)
        body = dict(rl.metrics) if rl.metrics else {}
        body.update({"replay": True, "rows": rl.cycles,
                     "duration": float(rl.time[-1] + dt),
                     "queue_drops": self.drops})
        self.final_metrics = body
        self.broadcast(_wire("metrics", body["duration"], body))
        self.done = True


def _default_ui_dir() -> Path:
    return Path(__file__).resolve().parents[2] / "frontend" / "dist"


def build_app(session: Broadcaster, model_doc: dict | None = None,
              ui_dir=None) -> FastAPI:
    if model_doc is None:
        from importlib import resources
        model_doc = json.loads(resources.files("handover")
                               .joinpath("models/panda7.json").read_text())
    app = FastAPI(title="handover")

    @app.get("/model")
    def model():
        return JSONResponse(model_doc)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        await ws.send_text(json.dumps({"v": PROTOCOL_VERSION}))
        # register the queue before the stream can produce its first frame
        cid = session.subscribe()
        session.ensure_started()
        pump = asyncio.create_task(_pump(ws, session, cid))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be a JSON object")
                except (json.JSONDecodeError, ValueError) as exc:
                    await ws.send_text(_wire("error", None,
                                             {"message": f"rejected: {exc}"}))
                    continue
                if msg.get("v") not in (None, PROTOCOL_VERSION):
                    await ws.send_text(_wire("error", None, {
                        "message": f"unsupported protocol version {msg['v']}"}))
                    break
                if "type" not in msg:
                    continue        # bare handshake echo; nothing to do
                try:
                    cmd = translate_command(msg)
                    if not session.accepts_commands:
                        raise ValueError("replay stream accepts no commands")
                    session.submit(cmd)
                except (KeyError, TypeError, ValueError) as exc:
                    await ws.send_text(_wire("error", None,
                                             {"message": f"rejected: {exc}"}))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            session.unsubscribe(cid)

    ui = Path(ui_dir) if ui_dir is not None else _default_ui_dir()
    if ui.is_dir():
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")
    else:
        @app.get("/")
        def index():
            return JSONResponse({"service": "handover", "ws": "/ws",
                                 "model": "/model"})
    return app


async def _pump(ws: WebSocket, session: Broadcaster, cid: int):
    try:
        while True:
            for text in session.pop_all(cid):
                await ws.send_text(text)
            await asyncio.sleep(0.004)
    except asyncio.CancelledError:
        pass
