"""Stdio JSONL server loop: handshake, dispatch, shutdown.

One request line in, one reply line out, in order. Protocol violations get
an error reply and terminate the loop; shutdown replies ok and exits 0.
Per-request latency goes to stderr when --log-latency is set.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import PROTOCOL_VERSION
from .model import DummyModel


def _reply(request_id: int, payload: dict) -> str:
    return json.dumps({"kind": "reply", "id": request_id, **payload}, separators=(",", ":"))


def _error(request_id: int, message: str) -> str:
    return json.dumps(
        {"kind": "error", "id": request_id, "message": message}, separators=(",", ":")
    )


class BridgeServer:
    def __init__(self, drop=0.0, dilate=0, min_visible=0.0, seed=0, log_latency=False):
        self.knobs = dict(drop=drop, dilate=dilate, min_visible=min_visible, seed=seed)
        self.log_latency = log_latency
        self.model: DummyModel | None = None

    def handle(self, message: dict) -> tuple[str, bool]:
        """Returns (reply line, keep_running)."""
        kind = message.get("kind")
        request_id = int(message.get("id", -1))
        if kind == "shutdown":
            return _reply(request_id, {"ok": True}), False
        if kind == "init":
            if message.get("protocol") != PROTOCOL_VERSION:
                return (
                    _error(
                        request_id,
                        f"unsupported protocol {message.get('protocol')!r}, "
                        f"server speaks {PROTOCOL_VERSION}",
                    ),
                    False,
                )
            dims = (int(message["dims"][0]), int(message["dims"][1]))
            self.model = DummyModel(dims, **self.knobs)
            return (
                _reply(
                    request_id,
                    {"capabilities": {"visible": True, "amodal": True, "tracker": True}},
                ),
                True,
            )
        if self.model is None:
            return _error(request_id, "init handshake required first"), False
        try:
            if kind == "predict_visible":
                predictions = self.model.visible(int(message["t"]), message["frame"])
                return _reply(request_id, {"predictions": predictions}), True
            if kind == "predict_amodal":
                mask = self.model.amodal(
                    int(message["t"]),
                    message["frame"],
                    [int(p) for p in message["points"]],
                )
                return _reply(request_id, {"mask": mask}), True
            if kind == "track_points":
                points, occluded = self.model.track(
                    int(message["t"]),
                    message["frame"],
                    message["prev_frame"],
                    [int(q) for q in message["queries"]],
                    int(message["instance"]),
                )
                return _reply(request_id, {"points": points, "occluded": occluded}), True
        except (KeyError, ValueError, IndexError) as exc:
            return _error(request_id, f"bad {kind} request: {exc}"), False
        return _error(request_id, f"unknown request kind {kind!r}"), False

    def serve(self, stdin=None, stdout=None) -> int:
        stdin = stdin if stdin is not None else sys.stdin
        stdout = stdout if stdout is not None else sys.stdout
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            started = time.perf_counter()
            try:
                message = json.loads(line)
            except json.JSONDecodeError:
                stdout.write(_error(-1, "unparseable request line") + "\n")
                stdout.flush()
                return 1
            reply, keep_running = self.handle(message)
            stdout.write(reply + "\n")
            stdout.flush()
            if self.log_latency:
                elapsed_ms = 1000.0 * (time.perf_counter() - started)
                print(
                    f"[bridge] {message.get('kind')} id={message.get('id')} "
                    f"{elapsed_ms:.3f}ms",
                    file=sys.stderr,
                )
            if not keep_running:
                return 0 if message.get("kind") in ("shutdown", "init") and reply.startswith(
                    '{"kind":"reply"'
                ) else 1
        return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="samodal-bridge")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("serve", help="serve the three backend roles over stdio")
    p.add_argument("--drop", type=float, default=0.0, help="per-instance drop rate")
    p.add_argument("--dilate", type=int, default=0, help="visible-mask dilation radius")
    p.add_argument("--min-visible", type=float, default=0.0, help="suppression threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log-latency", action="store_true", help="per-request timing on stderr")
    args = parser.parse_args(argv)
    server = BridgeServer(
        drop=args.drop,
        dilate=args.dilate,
        min_visible=args.min_visible,
        seed=args.seed,
        log_latency=args.log_latency,
    )
    return server.serve()


if __name__ == "__main__":
    sys.exit(main())
