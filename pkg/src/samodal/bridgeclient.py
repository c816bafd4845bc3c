"""Client side of the external-backend wire protocol.

A backend server is any subprocess speaking line-delimited JSON over stdio:
one request line in, one reply line out, in order, ids matching. The engine
sends an init handshake (protocol version, grid dims, video length), then
per-frame predict/track requests carrying a self-contained frame payload,
and finally a shutdown. See bridge/PROTOCOL.md for the full schema and
golden transcripts.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import time

import numpy as np

from . import masks
from .backends import BackendError, TrackResult, VisiblePrediction
from .sampling import PointTuple
from .scenegen import SyntheticVideo

PROTOCOL_VERSION = 1


def frame_payload(video: SyntheticVideo, t: int) -> dict:
    """Ground-truth slice for frame t: everything a reference model needs to
    answer like the in-process oracles (ids, depths, anchors, amodal RLEs)."""
    instances = []
    for track in video.objects:
        instances.append(
            {
                "instance": track.spec.instance,
                "class": track.spec.class_label,
                "depth": track.spec.depth,
                "anchor": list(track.anchors[t - 1]),
                "amodal": masks.rle_to_text(track.amodal[t - 1]),
            }
        )
    return {"t": t, "instances": instances}


class BridgeClient:
    """Owns the server subprocess; strictly serial request/reply."""

    def __init__(self, command: str, video: SyntheticVideo):
        self.video = video
        self.latencies: list[tuple[str, float]] = []
        self._next_id = 0
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendError(f"cannot start bridge server {command!r}: {exc}") from exc
        reply = self.request(
            "init",
            {
                "protocol": PROTOCOL_VERSION,
                "dims": list(video.dims),
                "frames": video.length,
            },
        )
        self.capabilities = reply.get("capabilities", {})

    def request(self, kind: str, payload: dict) -> dict:
        if self._closed:
            raise BackendError("bridge client already shut down")
        request_id = self._next_id
        self._next_id += 1
        message = {"kind": kind, "id": request_id, **payload}
        started = time.perf_counter()
        try:
            self._proc.stdin.write(json.dumps(message, separators=(",", ":")) + "\n")
            self._proc.stdin.flush()
            line = self._proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise BackendError(f"bridge transport failed during {kind!r}: {exc}") from exc
        self.latencies.append((kind, time.perf_counter() - started))
        if not line:
            raise BackendError(f"bridge server closed the stream during {kind!r}")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"bridge sent invalid JSON: {line!r}") from exc
        if reply.get("kind") == "error":
            raise BackendError(f"bridge error for {kind!r}: {reply.get('message')}")
        if reply.get("kind") != "reply" or reply.get("id") != request_id:
            raise BackendError(f"bridge reply out of order: {reply!r}")
        return reply

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._proc.stdin.write(
                json.dumps(
                    {"kind": "shutdown", "id": self._next_id}, separators=(",", ":")
                )
                + "\n"
            )
            self._proc.stdin.flush()
            self._proc.stdout.readline()
            self._proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        self._proc.wait(timeout=10)

    def __enter__(self) -> "BridgeClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class BridgeVisible:
    def __init__(self, client: BridgeClient):
        if not client.capabilities.get("visible"):
            raise BackendError("bridge server does not serve the visible role")
        self.client = client

    def predict(self, t: int, frame: np.ndarray) -> list[VisiblePrediction]:
        reply = self.client.request(
            "predict_visible", {"t": t, "frame": frame_payload(self.client.video, t)}
        )
        out = []
        for entry in reply.get("predictions", []):
            out.append(
                VisiblePrediction(
                    instance=int(entry["instance"]),
                    mask=masks.rle_from_text(entry["mask"]),
                    score=float(entry["score"]),
                    class_label=None if entry.get("class") is None else int(entry["class"]),
                )
            )
        return out


class BridgeAmodal:
    def __init__(self, client: BridgeClient):
        if not client.capabilities.get("amodal"):
            raise BackendError("bridge server does not serve the amodal role")
        self.client = client

    def predict(
        self, t: int, frame: np.ndarray, prompt: PointTuple, declared: int | None = None
    ) -> masks.Mask:
        # the wire contract is id-free: image + points only
        reply = self.client.request(
            "predict_amodal",
            {
                "t": t,
                "frame": frame_payload(self.client.video, t),
                "points": list(prompt.points),
                "labels": list(prompt.labels),
            },
        )
        return masks.rle_from_text(reply["mask"])


class BridgeTracker:
    def __init__(self, client: BridgeClient):
        if not client.capabilities.get("tracker"):
            raise BackendError("bridge server does not serve the tracker role")
        self.client = client

    def track(
        self, t: int, frame: np.ndarray, queries: PointTuple, instance: int
    ) -> TrackResult:
        reply = self.client.request(
            "track_points",
            {
                "t": t,
                "frame": frame_payload(self.client.video, t),
                "prev_frame": frame_payload(self.client.video, t - 1),
                "queries": list(queries.points),
                "instance": instance,
            },
        )
        return TrackResult(
            tuple(int(p) for p in reply["points"]),
            tuple(int(o) for o in reply["occluded"]),
        )
