"""Regenerate the golden protocol transcripts in tests/golden/.

Drives the engine CLI against the reference server through the stdio_tee
recorder, capturing real request/reply traffic for three fixture scenes.
Run from the bridge/ directory: python3 scripts/record_transcripts.py
"""

from __future__ import annotations

import subprocess
import sys
import tempfile
from pathlib import Path

HERE = Path(__file__).resolve().parent
GOLDEN = HERE.parent / "tests" / "golden"
TEE = HERE / "stdio_tee.py"

# (name, generate args, run args, server args)
FIXTURES = [
    ("plain", ["--seed", "14", "--dims", "24", "24", "--frames", "6", "--objects", "3"],
     ["--seed", "4"], []),
    ("occlusion", ["--seed", "3", "--dims", "24", "24", "--frames", "8", "--objects", "4"],
     ["--seed", "9", "-K", "2"], []),
    ("droppy", ["--seed", "14", "--dims", "24", "24", "--frames", "6", "--objects", "3"],
     ["--seed", "21"], ["--drop", "0.4", "--seed", "21"]),
]


def main() -> int:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for name, gen_args, run_args, server_args in FIXTURES:
            scene = Path(tmp) / f"{name}.json"
            subprocess.run(
                ["samodal", "generate", "--gt-out", str(scene), "--name", name, *gen_args],
                check=True,
            )
            transcript = GOLDEN / f"transcript_{name}.txt"
            server = "python3 -m samodal_bridge serve " + " ".join(server_args)
            bridge_cmd = f"{sys.executable} {TEE} {transcript} -- {server}"
            subprocess.run(
                ["samodal", "run", "--scene", str(scene),
                 "--vis", "bridge", "--amodal", "bridge", "--tracker", "bridge",
                 "--bridge-cmd", bridge_cmd,
                 "-o", str(Path(tmp) / f"{name}.jsonl"), *run_args],
                check=True,
            )
            lines = transcript.read_text().splitlines()
            print(f"{transcript.name}: {len(lines) // 2} request/reply pairs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
