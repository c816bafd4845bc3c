"""Overlay rendering to portable pixmaps (PPM, P6).

Each frame becomes one image: light background, mid-gray where an occluder's
visible surface sits, and per-instance colors alpha-blended over the amodal
masks being visualized. PPM needs no codec dependency and is byte-stable.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .masks import Mask
from .scenegen import SyntheticVideo

# tab10-like palette, cycled by instance id
PALETTE = [
    (31, 119, 180),
    (255, 127, 14),
    (44, 160, 44),
    (214, 39, 40),
    (148, 103, 189),
    (140, 86, 75),
    (227, 119, 194),
    (127, 127, 127),
    (188, 189, 34),
    (23, 190, 207),
]

BACKGROUND = 245
OCCUPIED = 180
ALPHA = 0.55


def instance_color(instance: int) -> tuple[int, int, int]:
    return PALETTE[(instance - 1) % len(PALETTE)]


def render_frame(label_grid: np.ndarray, overlays: list[tuple[int, Mask]]) -> np.ndarray:
    """RGB uint8 image: label-grid occupancy in gray, overlay masks colored."""
    h, w = label_grid.shape
    img = np.full((h, w, 3), BACKGROUND, dtype=np.float64)
    img[label_grid > 0] = OCCUPIED
    for instance, mask in overlays:
        color = np.array(instance_color(instance), dtype=np.float64)
        img[mask] = (1 - ALPHA) * img[mask] + ALPHA * color
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def render_video(
    video: SyntheticVideo,
    out_dir: str | Path,
    overlays_per_frame: list[list[tuple[int, Mask]]],
    prefix: str = "frame",
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(video.length):
        image = render_frame(video.frames[t], overlays_per_frame[t])
        path = out_dir / f"{prefix}_{t + 1:04d}.ppm"
        write_ppm(path, image)
        paths.append(path)
    return paths
