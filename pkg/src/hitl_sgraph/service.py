"""Live bridge between the SLAM back-end and UI clients.

Transport: persistent WebSocket on a local port (default 8765), one
JSON document per frame. Message types (normative): hello, snapshot,
delta, create_room, ack, nack, metrics_update. Clients connect, send
hello (optionally with their last applied revision), receive a snapshot
or a gap-free resume stream of deltas, then ordered deltas for every
new revision. create_room commands are answered exactly once per
cmd_id; re-sent cmd_ids get the original response.

The same port also serves the browser UI as static files plus three
plain-HTTP helpers used by tests and the step-on-command mode:
GET /state, GET /hash[?revision=N], and GET /step.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import logging
import mimetypes
from collections import OrderedDict
from pathlib import Path

from websockets.asyncio.server import serve
from websockets.datastructures import Headers
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from .metrics import MetricsError, ate, room_prf
from .scene_graph import RoomValidationError, SceneGraphError
from .simulator import PipelineOptions, PipelineRunner, SimulationLog

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
DEFAULT_PORT = 8765
REPLAY_BUFFER = 1024  # revisions; older reconnects get a fresh snapshot

MESSAGE_SCHEMAS = {
    "hello": ({"protocol"}, {"last_revision", "revision"}),
    "snapshot": ({"revision", "graph"}, set()),
    "delta": ({"revision", "events"}, set()),
    "create_room": ({"cmd_id", "plane_ids"}, set()),
    "ack": ({"cmd_id", "room_id"}, set()),
    "nack": ({"cmd_id", "violation"}, set()),
    "metrics_update": ({"payload"}, set()),
}


class ProtocolError(Exception):
    pass


def validate_message(msg) -> dict:
    if not isinstance(msg, dict):
        raise ProtocolError("message must be a JSON object")
    mtype = msg.get("type")
    if mtype not in MESSAGE_SCHEMAS:
        raise ProtocolError(f"unknown message type {mtype!r}")
    required, optional = MESSAGE_SCHEMAS[mtype]
    fields = set(msg) - {"type"}
    missing = required - fields
    if missing:
        raise ProtocolError(f"{mtype}: missing field(s) {sorted(missing)}")
    unknown = fields - required - optional
    if unknown:
        raise ProtocolError(f"{mtype}: unknown field(s) {sorted(unknown)}")
    return msg


def encode_message(msg: dict) -> str:
    return json.dumps(validate_message(msg))


def decode_message(text: str) -> dict:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc}")
    return validate_message(msg)


# ----------------------------------------------------------------------
# canonical state hash (mirrored by the browser client)
# ----------------------------------------------------------------------


def _f(v: float) -> str:
    return f"{float(v) + 0.0:.9f}"  # +0.0 folds -0.0 into 0.0


def canonical_state_string(graph_dict: dict) -> str:
    lines = [f"revision {graph_dict['revision']}"]
    for kf in graph_dict["keyframes"]:
        lines.append("keyframe {} {} {} obs {}".format(
            kf["id"], _f(kf["stamp"]), " ".join(_f(v) for v in kf["pose"]),
            ",".join(str(i) for i in kf["observed_plane_ids"])))
    for p in graph_dict["planes"]:
        e = p["extent"]
        lines.append("plane {} {} {} {} {} {} {} {}".format(
            p["id"], " ".join(_f(v) for v in p["normal"]), _f(p["offset"]),
            " ".join(_f(v) for v in e["center"]), _f(e["half_u"]), _f(e["half_v"]),
            p["provenance"], p["axis_class"]))
    for r in graph_dict["rooms"]:
        lines.append("room {} {} {} {} {} {}".format(
            r["id"], _f(r["center"][0]), _f(r["center"][1]),
            ",".join(str(i) for i in r["plane_ids"]), r["provenance"], r["floor_id"]))
    for fl in graph_dict["floors"]:
        lines.append("floor {} {}".format(fl["id"], ",".join(str(i) for i in fl["room_ids"])))
    return "\n".join(lines)


def state_hash(graph_dict: dict) -> str:
    return hashlib.sha256(canonical_state_string(graph_dict).encode()).hexdigest()


# ----------------------------------------------------------------------
# live session
# ----------------------------------------------------------------------


class _Client:
    def __init__(self, connection):
        self.connection = connection
        self.queue: asyncio.Queue = asyncio.Queue()
        self.synced = False


class LiveSession:
    """Replays a simulation log into the back-end and serves clients.

    All graph mutations run on the event loop (single writer); clients
    receive revision-ordered deltas fanned out after each commit.
    """

    def __init__(self, log: SimulationLog, options: PipelineOptions | None = None,
                 speed: float = 1.0, ui_dir: str | Path | None = None):
        options = options or PipelineOptions()
        options.interventions = False  # live interventions come from clients
        self.runner = PipelineRunner(log, options)
        self.graph = self.runner.graph
        self.log = log
        self.speed = float(speed)
        self.ui_dir = Path(ui_dir).resolve() if ui_dir else None
        self._clients: set[_Client] = set()
        self._cmd_cache: dict[str, dict] = {}
        self._broadcast_rev = 0
        self._hashes: OrderedDict[int, str] = OrderedDict()
        self._record_hash()

    # -- state -----------------------------------------------------------

    def _record_hash(self):
        snap = self.graph.snapshot().to_dict()
        self._hashes[snap["revision"]] = state_hash(snap)
        while len(self._hashes) > 64:
            self._hashes.popitem(last=False)

    def step_once(self) -> dict:
        """Advance the replay by one keyframe and broadcast the result."""
        kf_id = self.runner.step()
        self._after_mutation(send_metrics=True)
        return {"stepped": kf_id is not None, "keyframe": kf_id,
                "revision": self.graph.revision, "finished": self.runner.finished}

    def handle_create_room(self, cmd: dict) -> dict:
        """ack/nack for a create_room command; idempotent per cmd_id."""
        cmd_id = str(cmd["cmd_id"])
        if cmd_id in self._cmd_cache:
            return self._cmd_cache[cmd_id]
        try:
            plane_ids = tuple(int(p) for p in cmd["plane_ids"])
            if len(plane_ids) != 4:
                raise RoomValidationError("not-4-distinct", "need exactly 4 plane ids")
            room_id = self.graph.add_room(plane_ids, "human")
            self.runner.report.human_rooms.append(room_id)
            self.runner.optimize()  # human insertion re-optimizes immediately
            response = {"type": "ack", "cmd_id": cmd_id, "room_id": room_id}
        except RoomValidationError as exc:
            response = {"type": "nack", "cmd_id": cmd_id, "violation": exc.violation}
        except (SceneGraphError, ValueError, TypeError) as exc:
            response = {"type": "nack", "cmd_id": cmd_id, "violation": f"bad-command: {exc}"}
        self._cmd_cache[cmd_id] = response
        self._after_mutation(send_metrics=response["type"] == "ack")
        return response

    def _metrics_payload(self) -> dict:
        payload = {"keyframes": len(self.graph.keyframes), "rooms": len(self.graph.rooms)}
        try:
            est = self.runner.trajectory()
            gt = self.log.gt_trajectory()[: len(est)]
            payload["ate_m"] = ate(est, gt)
        except MetricsError:
            pass
        gt_centers = [room.center for room in self.log.gt_rooms]
        if gt_centers:
            prf = room_prf([r.center for r in self.graph.rooms.values()], gt_centers)
            payload.update({k: prf[k] for k in ("precision", "recall", "f1")})
        return payload

    def _after_mutation(self, send_metrics: bool = False):
        deltas = self.graph.deltas_since(self._broadcast_rev)
        if deltas:
            self._broadcast_rev = deltas[-1].revision
            self._record_hash()
            for delta in deltas:
                self._broadcast({"type": "delta", "revision": delta.revision,
                                 "events": [e.to_dict() for e in delta.events]})
        if send_metrics:
            self._broadcast({"type": "metrics_update", "payload": self._metrics_payload()})

    def _broadcast(self, msg: dict):
        text = encode_message(msg)
        for client in self._clients:
            if client.synced:
                client.queue.put_nowait(text)

    # -- websocket handling ------------------------------------------------

    async def handler(self, connection):
        client = _Client(connection)
        self._clients.add(client)
        sender = asyncio.create_task(self._sender(client))
        try:
            async for raw in connection:
                try:
                    msg = decode_message(raw)
                except ProtocolError as exc:
                    logger.warning("protocol error: %s", exc)
                    await connection.close(code=1002, reason=str(exc)[:120])
                    break
                if msg["type"] == "hello":
                    self._sync_client(client, msg.get("last_revision"))
                elif not client.synced:
                    await connection.close(code=1002, reason="hello required first")
                    break
                elif msg["type"] == "create_room":
                    response = self.handle_create_room(msg)
                    client.queue.put_nowait(encode_message(response))
                else:
                    await connection.close(code=1002, reason=f"unexpected {msg['type']}")
                    break
        except ConnectionClosed:
            pass
        finally:
            self._clients.discard(client)
            sender.cancel()

    def _sync_client(self, client: _Client, last_revision):
        """Snapshot, or gap-free delta resume when the buffer covers it."""
        current = self.graph.revision
        client.queue.put_nowait(encode_message(
            {"type": "hello", "protocol": PROTOCOL_VERSION, "revision": current}))
        resumable = (
            isinstance(last_revision, int)
            and 0 <= last_revision <= current
            and last_revision >= current - REPLAY_BUFFER
        )
        if resumable:
            for delta in self.graph.deltas_since(last_revision):
                client.queue.put_nowait(encode_message(
                    {"type": "delta", "revision": delta.revision,
                     "events": [e.to_dict() for e in delta.events]}))
        else:
            snap = self.graph.snapshot().to_dict()
            client.queue.put_nowait(encode_message(
                {"type": "snapshot", "revision": snap["revision"], "graph": snap}))
        client.synced = True

    async def _sender(self, client: _Client):
        try:
            while True:
                await client.connection.send(await client.queue.get())
        except (ConnectionClosed, asyncio.CancelledError):
            pass

    # -- plain HTTP on the same port ---------------------------------------

    def process_request(self, connection, request):
        if "websocket" in request.headers.get("Upgrade", "").lower():
            return None
        path, _, query = request.path.partition("?")
        if path == "/step":
            return _json_response(self.step_once())
        if path == "/hash":
            params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
            if "revision" in params:
                rev = int(params["revision"])
                if rev not in self._hashes:
                    return _json_response({"error": f"no hash retained for revision {rev}"}, status=404)
                return _json_response({"revision": rev, "hash": self._hashes[rev]})
            snap = self.graph.snapshot().to_dict()
            return _json_response({"revision": snap["revision"], "hash": state_hash(snap)})
        if path == "/state":
            return _json_response(self.graph.snapshot().to_dict())
        return self._static(path)

    def _static(self, path: str):
        if self.ui_dir is None:
            return _json_response({"service": "hitl-sgraph", "protocol": PROTOCOL_VERSION,
                                   "revision": self.graph.revision})
        name = "index.html" if path == "/" else path.lstrip("/")
        target = (self.ui_dir / name).resolve()
        if not str(target).startswith(str(self.ui_dir)) or not target.is_file():
            return _json_response({"error": f"not found: {path}"}, status=404)
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return _response(target.read_bytes(), ctype)

    # -- lifecycle -----------------------------------------------------------

    async def _replay_task(self):
        while not self.runner.finished:
            stamps = [k.stamp for k in self.log.keyframes]
            idx = self.runner._cursor
            if idx > 0 and idx < len(stamps):
                await asyncio.sleep(max(0.0, (stamps[idx] - stamps[idx - 1]) / self.speed))
            self.step_once()

    async def run(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT, ready=None):
        async with serve(self.handler, host, port, process_request=self.process_request) as server:
            actual_port = server.sockets[0].getsockname()[1] if server.sockets else port
            logger.info("serving on ws://%s:%d (speed %s)", host, actual_port, self.speed)
            if ready is not None:
                ready.set_result(actual_port)
            replay = asyncio.create_task(self._replay_task()) if self.speed > 0 else None
            try:
                await server.serve_forever()
            finally:
                if replay:
                    replay.cancel()


def _response(body: bytes, content_type: str, status: int = 200) -> Response:
    headers = Headers()
    headers["Content-Type"] = content_type
    headers["Content-Length"] = str(len(body))
    headers["Connection"] = "close"
    reason = {200: "OK", 404: "Not Found"}.get(status, "")
    return Response(status, reason, headers, body)


def _json_response(payload: dict, status: int = 200) -> Response:
    return _response(json.dumps(payload).encode(), "application/json", status)
