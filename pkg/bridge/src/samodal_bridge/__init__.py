"""Reference external-backend server for the samodal bridge protocol.

Implements the three backend roles (visible segmenter, point-prompted amodal
segmenter, point tracker) over the protocol's ground-truth frame payloads,
bit-identically to the engine's in-process oracles. Deliberately free of any
dependency on the engine package: everything it needs is specified in
PROTOCOL.md.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
