"""Geometry behind the on-demand annotation tool.

Candidate locations for place (farthest-point sampling inside a mask), push
(collinear end points along the image x-axis) and grasp sections, plus the
final grasp selector that maximises confidence times location score.

All coordinates are raster cell units: cell ``(col, row)`` has its centre at
``Point2(col, row)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from expmem.errors import InvalidInput, NoFeasibleGrasp

APPROACHES = ("top", "side-left", "side-right")
DEFAULT_CANDIDATES = 5
PUSH_DIRECTIONS = ("left", "right")


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInput(f"non-finite point ({self.x}, {self.y})")

    def distance(self, other: Point2) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class RasterMask:
    """Row-major boolean grid; ``grid[row, col]``."""

    __slots__ = ("width", "height", "grid")

    def __init__(self, width: int, height: int, bits: Sequence[bool] | None = None) -> None:
        if width < 1 or height < 1:
            raise InvalidInput(f"raster must be at least 1x1, got {width}x{height}")
        if bits is None:
            grid = np.zeros((height, width), dtype=bool)
        else:
            if len(bits) != width * height:
                raise InvalidInput(f"expected {width * height} bits, got {len(bits)}")
            grid = np.asarray(bits, dtype=bool).reshape(height, width)
        grid.setflags(write=False)
        self.width = int(width)
        self.height = int(height)
        self.grid = grid

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> RasterMask:
        grid = np.asarray(grid, dtype=bool)
        h, w = grid.shape
        return cls(w, h, grid.ravel())

    @classmethod
    def disk(cls, width: int, height: int, center: Point2, radius: float) -> RasterMask:
        """Cells whose centre lies within ``radius`` of ``center``.

        The cell nearest the centre is always set, so tiny radii still yield a
        nonempty mask when the centre is on the raster.
        """
        rows, cols = np.mgrid[0:height, 0:width]
        grid = (cols - center.x) ** 2 + (rows - center.y) ** 2 <= radius * radius
        cx, cy = int(round(center.x)), int(round(center.y))
        if 0 <= cx < width and 0 <= cy < height:
            grid[cy, cx] = True
        return cls.from_grid(grid)

    @property
    def bits(self) -> tuple[bool, ...]:
        return tuple(bool(b) for b in self.grid.ravel())

    @property
    def count(self) -> int:
        return int(self.grid.sum())

    def cells(self) -> list[Point2]:
        """Centres of set cells in row-major order."""
        rows, cols = np.nonzero(self.grid)
        return [Point2(float(c), float(r)) for r, c in zip(rows, cols)]

    def contains(self, p: Point2) -> bool:
        cx, cy = int(round(p.x)), int(round(p.y))
        return 0 <= cx < self.width and 0 <= cy < self.height and bool(self.grid[cy, cx])

    def __and__(self, other: RasterMask) -> RasterMask:
        if (self.width, self.height) != (other.width, other.height):
            raise InvalidInput("mask dimensions differ")
        return RasterMask.from_grid(self.grid & other.grid)

    def to_rows(self) -> list[str]:
        return ["".join("1" if b else "0" for b in row) for row in self.grid]

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> RasterMask:
        if not rows:
            raise InvalidInput("empty row list")
        return cls.from_grid(np.array([[c == "1" for c in row] for row in rows], dtype=bool))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterMask):
            return NotImplemented
        return self.width == other.width and self.height == other.height and bool(
            np.array_equal(self.grid, other.grid)
        )

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.grid.tobytes()))

    def __repr__(self) -> str:
        return f"RasterMask({self.width}x{self.height}, set={self.count})"


@dataclass(frozen=True)
class GraspHypothesis:
    position: Point2
    approach_label: str
    confidence: float

    def __post_init__(self) -> None:
        if self.approach_label not in APPROACHES:
            raise InvalidInput(f"unknown approach {self.approach_label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInput(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class Candidate:
    label: int
    location: Point2
    mask: RasterMask | None = None


@dataclass(frozen=True)
class CandidateSet:
    items: tuple[Candidate, ...] = ()

    def __post_init__(self) -> None:
        for expected, item in enumerate(self.items, start=1):
            if item.label != expected:
                raise InvalidInput(f"candidate labels must be 1..n, got {item.label} at {expected}")
            if item.mask is not None and not item.mask.contains(item.location):
                raise InvalidInput(f"candidate {item.label} lies outside its mask")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def labels(self) -> list[int]:
        return [c.label for c in self.items]

    def location(self, label: int) -> Point2:
        if not 1 <= label <= len(self.items):
            raise InvalidInput(f"label {label} not in 1..{len(self.items)}")
        return self.items[label - 1].location


def farthest_point_sample(points: Sequence[Point2], k: int, seed_index: int = 0) -> list[int]:
    """Greedy maximin selection of ``k`` indices starting at ``seed_index``.

    Each step picks the unselected point whose distance to the nearest
    selected point is largest; ties go to the lowest index.
    """
    n = len(points)
    if n == 0:
        raise InvalidInput("farthest_point_sample needs at least one point")
    if not 1 <= k <= n:
        raise InvalidInput(f"k={k} must be in [1, {n}]")
    if not 0 <= seed_index < n:
        raise InvalidInput(f"seed_index {seed_index} out of range")

    xy = np.array([(p.x, p.y) for p in points], dtype=float)
    # squared distances keep integer-grid inputs exact
    nearest = ((xy - xy[seed_index]) ** 2).sum(axis=1)
    taken = np.zeros(n, dtype=bool)
    taken[seed_index] = True
    order = [seed_index]
    for _ in range(k - 1):
        j = int(np.argmax(np.where(taken, -np.inf, nearest)))
        order.append(j)
        taken[j] = True
        nearest = np.minimum(nearest, ((xy - xy[j]) ** 2).sum(axis=1))
    return order


def candidate_placements(
    mask: RasterMask, k: int = DEFAULT_CANDIDATES, spot_radius: float = 1.5
) -> CandidateSet:
    """Numbered FPS candidates inside ``mask``, seeded at the cell nearest the centroid."""
    if k < 1:
        raise InvalidInput(f"k must be >= 1, got {k}")
    cells = mask.cells()
    if not cells:
        raise InvalidInput("cannot place candidates in an empty mask")
    xy = np.array([(c.x, c.y) for c in cells])
    centroid = xy.mean(axis=0)
    seed = int(np.argmin(((xy - centroid) ** 2).sum(axis=1)))
    order = farthest_point_sample(cells, min(k, len(cells)), seed)
    items = []
    for label, idx in enumerate(order, start=1):
        loc = cells[idx]
        spot = mask & RasterMask.disk(mask.width, mask.height, loc, spot_radius)
        items.append(Candidate(label, loc, spot))
    return CandidateSet(tuple(items))


def candidate_push_endpoints(start: Point2, direction: str, step: float, count: int) -> CandidateSet:
    """End points ``start ± i*step`` along x for i = 1..count.

    Label 0 is reserved for ``start`` (the gripper's position before pushing)
    and is not part of the returned set.
    """
    if direction not in PUSH_DIRECTIONS:
        raise InvalidInput(f"push direction must be left or right, got {direction!r}")
    if not step > 0:
        raise InvalidInput(f"push step must be positive, got {step}")
    if count < 1:
        raise InvalidInput(f"need at least one push candidate, got {count}")
    sign = 1.0 if direction == "right" else -1.0
    return CandidateSet(
        tuple(Candidate(i, Point2(start.x + sign * i * step, start.y)) for i in range(1, count + 1))
    )


def location_score(g: GraspHypothesis, chosen: Point2, diag: float) -> float:
    if not diag > 0:
        raise InvalidInput(f"normaliser must be positive, got {diag}")
    return 1.0 - min(1.0, g.position.distance(chosen) / diag)


def best_grasp_index(
    hypotheses: Sequence[GraspHypothesis],
    feasible: Callable[[GraspHypothesis], bool],
    chosen: Point2 | None = None,
    diag: float | None = None,
) -> int:
    """Index of the feasible hypothesis maximising confidence x location score.

    Without ``chosen`` the location score is 1 for every hypothesis, i.e. the
    pick reduces to the most confident feasible grasp.
    """
    if chosen is not None and (diag is None or not diag > 0):
        raise InvalidInput("a positive diag is required when a location is chosen")
    best, best_score = -1, -math.inf
    for i, g in enumerate(hypotheses):
        if not feasible(g):
            continue
        score = g.confidence if chosen is None else g.confidence * location_score(g, chosen, diag)
        if score > best_score:
            best, best_score = i, score
    if best < 0:
        raise NoFeasibleGrasp(f"none of {len(hypotheses)} grasp hypotheses is feasible")
    return best


def select_grasp(
    hypotheses: Sequence[GraspHypothesis],
    feasible: Callable[[GraspHypothesis], bool],
    chosen: Point2 | None = None,
    diag: float | None = None,
) -> GraspHypothesis:
    return hypotheses[best_grasp_index(hypotheses, feasible, chosen, diag)]


@dataclass(frozen=True)
class Reachability:
    """Stand-in for an IK check: a reachable rectangle plus per-approach exclusions.

    ``excluded`` maps an approach label to rectangles ``(x0, y0, x1, y1)`` in
    which that approach is not permitted.
    """

    rect: tuple[float, float, float, float]
    excluded: dict[str, tuple[tuple[float, float, float, float], ...]] = field(default_factory=dict)

    def __call__(self, g: GraspHypothesis) -> bool:
        x0, y0, x1, y1 = self.rect
        p = g.position
        if not (x0 <= p.x <= x1 and y0 <= p.y <= y1):
            return False
        for ex0, ey0, ex1, ey1 in self.excluded.get(g.approach_label, ()):
            if ex0 <= p.x <= ex1 and ey0 <= p.y <= ey1:
                return False
        return True


@dataclass(frozen=True)
class AnnotatedView:
    """What the selector backends see: a base mask with numbered candidates."""

    base: RasterMask
    candidates: CandidateSet
    descriptions: tuple[str, ...]
    origin: Point2 | None = None

    @property
    def labels(self) -> list[int]:
        return self.candidates.labels

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "width": self.base.width,
            "height": self.base.height,
            "base": self.base.to_rows(),
            "candidates": [
                {
                    "label": c.label,
                    "x": c.location.x,
                    "y": c.location.y,
                    "description": d,
                    "mask": c.mask.to_rows() if c.mask is not None else None,
                }
                for c, d in zip(self.candidates, self.descriptions)
            ],
        }
        if self.origin is not None:
            out["origin"] = {"x": self.origin.x, "y": self.origin.y}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AnnotatedView:
        base = RasterMask.from_rows(data["base"])
        items, descriptions = [], []
        for c in data["candidates"]:
            mask = RasterMask.from_rows(c["mask"]) if c.get("mask") else None
            items.append(Candidate(int(c["label"]), Point2(float(c["x"]), float(c["y"])), mask))
            descriptions.append(c["description"])
        origin = data.get("origin")
        return cls(
            base,
            CandidateSet(tuple(items)),
            tuple(descriptions),
            Point2(origin["x"], origin["y"]) if origin else None,
        )

    @classmethod
    def from_json(cls, text: str) -> AnnotatedView:
        return cls.from_dict(json.loads(text))

    def render_text(self) -> str:
        lines = []
        if self.origin is not None:
            lines.append(f"0: initial position at (x={self.origin.x:g}, y={self.origin.y:g})")
        lines.extend(self.descriptions)
        return "\n".join(lines)


def annotate(base: RasterMask, candidates: CandidateSet, origin: Point2 | None = None) -> AnnotatedView:
    descriptions = tuple(
        f"{c.label}: location at (x={c.location.x:g}, y={c.location.y:g})" for c in candidates
    )
    return AnnotatedView(base, candidates, descriptions, origin)
