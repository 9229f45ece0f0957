"""Point correspondences between two frames and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class MatchSet:
    i: int
    j: int
    pts_i: np.ndarray
    pts_j: np.ndarray
    ground_plane: np.ndarray = field(default=None)

    def __post_init__(self):
        self.pts_i = np.asarray(self.pts_i, dtype=float).reshape(-1, 2)
        self.pts_j = np.asarray(self.pts_j, dtype=float).reshape(-1, 2)
        if self.pts_i.shape != self.pts_j.shape:
            raise ValueError("both frames need the same number of points")
        if self.ground_plane is None:
            self.ground_plane = np.ones(len(self.pts_i), dtype=bool)
        self.ground_plane = np.asarray(self.ground_plane, dtype=bool).reshape(-1)
        if len(self.ground_plane) != len(self.pts_i):
            raise ValueError("ground_plane flags must match the number of pairs")

    def __len__(self):
        return len(self.pts_i)

    def subset(self, mask) -> MatchSet:
        return MatchSet(self.i, self.j, self.pts_i[mask], self.pts_j[mask], self.ground_plane[mask])

    def ground_only(self) -> MatchSet:
        return self.subset(self.ground_plane)

    def to_json(self) -> dict:
        return {
            "i": int(self.i),
            "j": int(self.j),
            "matches": np.hstack([self.pts_i, self.pts_j]).tolist(),
            "ground_plane": self.ground_plane.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> MatchSet:
        m = np.asarray(obj.get("matches", []), dtype=float).reshape(-1, 4)
        return cls(obj["i"], obj["j"], m[:, :2], m[:, 2:], obj.get("ground_plane"))


def dump_match_file(frames: int, pairs: list[MatchSet], path: str | Path | None = None) -> dict:
    doc = {"frames": int(frames), "pairs": [p.to_json() for p in pairs]}
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=1) + "\n")
    return doc


def load_match_file(doc: dict) -> tuple[int, list[MatchSet]]:
    return int(doc["frames"]), [MatchSet.from_json(p) for p in doc["pairs"]]
