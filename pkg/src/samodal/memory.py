"""Per-instance point memory bridging occlusions.

Keeps the most recent prompt points and amodal mask per instance. When the
visible segmenter stops predicting an instance, the memory serves its latest
state to the tracking fallback; while the instance stays missing, tracked
state is written back so multi-frame occlusions chain frame to frame. The
anchor fields additionally pin the last *visible* state for the
shift-from-last-visible mode.
"""

from __future__ import annotations

from dataclasses import dataclass

from .masks import Mask, rle_to_text
from .sampling import PointTuple


@dataclass
class MemoryEntry:
    instance: int
    last_frame: int
    points: PointTuple
    amodal: Mask
    occluded_streak: int = 0
    score: float = 1.0
    class_label: int | None = None
    anchor_frame: int = 0
    anchor_points: PointTuple | None = None
    anchor_amodal: Mask | None = None


class PointMemory:
    """Single-writer store, owned by one pipeline run."""

    def __init__(self, max_occlusion: int | None = None):
        if max_occlusion is not None and max_occlusion < 1:
            raise ValueError(f"max_occlusion must be positive, got {max_occlusion}")
        self.max_occlusion = max_occlusion
        self.entries: dict[int, MemoryEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def store_visible(
        self,
        t: int,
        instance: int,
        points: PointTuple,
        amodal: Mask,
        score: float = 1.0,
        class_label: int | None = None,
    ) -> None:
        existing = self.entries.get(instance)
        if existing is not None and t < existing.last_frame:
            raise ValueError(
                f"time regression for instance {instance}: "
                f"store at t={t} after t={existing.last_frame}"
            )
        self.entries[instance] = MemoryEntry(
            instance=instance,
            last_frame=t,
            points=points,
            amodal=amodal,
            occluded_streak=0,
            score=score,
            class_label=class_label,
            anchor_frame=t,
            anchor_points=points,
            anchor_amodal=amodal,
        )

    def retrieve_missing(self, t: int, visible_ids: set[int]) -> list[MemoryEntry]:
        """Entries for instances not currently visible: previously observed
        (updated through t-1) and not expired by max_occlusion. Sorted by id."""
        out = []
        for instance in sorted(self.entries):
            entry = self.entries[instance]
            if instance in visible_ids:
                continue
            if entry.last_frame != t - 1:
                continue
            if self.max_occlusion is not None and entry.occluded_streak >= self.max_occlusion:
                continue
            out.append(entry)
        return out

    def store_tracked(
        self, t: int, instance: int, predicted_points: PointTuple, shifted_amodal: Mask
    ) -> None:
        entry = self.entries.get(instance)
        if entry is None:
            raise KeyError(f"store_tracked for never-seen instance {instance}")
        if t < entry.last_frame:
            raise ValueError(
                f"time regression for instance {instance}: "
                f"store at t={t} after t={entry.last_frame}"
            )
        entry.last_frame = t
        entry.points = predicted_points
        entry.amodal = shifted_amodal
        entry.occluded_streak += 1

    def dump(self) -> str:
        """One line per entry: `id last_frame streak points... rle(amodal)`."""
        lines = []
        for instance in sorted(self.entries):
            e = self.entries[instance]
            pts = " ".join(str(p) for p in e.points.points)
            lines.append(
                f"{e.instance} {e.last_frame} {e.occluded_streak} {pts} {rle_to_text(e.amodal)}"
            )
        return "\n".join(lines)
