"""Transparent stdio recorder: wraps a bridge server and logs the traffic.

Usage: python3 stdio_tee.py TRANSCRIPT -- <server command...>

Relays one request line from stdin to the server and one reply line back,
writing `> request` / `< reply` pairs to TRANSCRIPT. Works because the
protocol is strictly serial.
"""

from __future__ import annotations

import subprocess
import sys


def main() -> int:
    split = sys.argv.index("--")
    transcript_path = sys.argv[1]
    command = sys.argv[split + 1 :]
    proc = subprocess.Popen(
        command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
    )
    with open(transcript_path, "w", encoding="utf-8") as log:
        for line in sys.stdin:
            if not line.strip():
                continue
            log.write("> " + line.rstrip("\n") + "\n")
            proc.stdin.write(line)
            proc.stdin.flush()
            reply = proc.stdout.readline()
            if not reply:
                break
            log.write("< " + reply.rstrip("\n") + "\n")
            sys.stdout.write(reply)
            sys.stdout.flush()
    proc.stdin.close()
    return proc.wait()


if __name__ == "__main__":
    sys.exit(main())
