"""Ordered point collections with provenance, shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

PROVENANCES = ("langevin", "flow", "moser_pushforward", "prior", "reference")


@dataclass
class SampleSet:
    """``points`` is an ``(n, d)`` float array; row order is meaningful for
    trajectories and arbitrary but stable for i.i.d. draws."""

    points: np.ndarray
    provenance: str = "prior"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InvalidArgumentError("points must be a 2-d array (n, d)")
        self.points = pts
        if self.provenance not in PROVENANCES:
            raise InvalidArgumentError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def coordinate(self, axis: int) -> np.ndarray:
        return self.points[:, axis]

    def split(self, fraction: float, seed: int | None = None) -> tuple["SampleSet", "SampleSet"]:
        """Random partition into ``(rest, held_out)`` with ``fraction`` held out."""
        n = len(self)
        order = np.random.default_rng(seed).permutation(n)
        k = int(round(fraction * n))
        held, rest = np.sort(order[:k]), np.sort(order[k:])
        return (
            SampleSet(self.points[rest], self.provenance, self.seed, dict(self.meta)),
            SampleSet(self.points[held], self.provenance, self.seed, dict(self.meta)),
        )
