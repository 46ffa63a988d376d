"""Geometric recognition of horizontal, vertical, and allocentric relations.

Everything here is a pure function over centroids, axis-aligned footprints
and a threshold bundle (RelationConfig).  Directional tests assume an
egocentric frame where forward is +y and left is -x (see
scene.to_agent_frame).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

from .scene import ObjectInstance


class RelationError(Exception):
    pass


class UnknownRelation(RelationError):
    pass


class EmptyCandidates(RelationError):
    pass


class ZeroDirection(RelationError):
    pass


#: Base vocabulary; "<H> o'clock" forms (H in 1..12) are also valid labels.
BASE_RELATIONS = (
    "closest",
    "farthest",
    "within reach",
    "around",
    "on",
    "above",
    "below",
    "left",
    "right",
    "front",
    "back",
)

ALLOCENTRIC = ("left", "right", "front", "back")

_AXES = {
    "front": (0.0, 1.0),
    "back": (0.0, -1.0),
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
}


def parse_relation_label(label: str) -> str:
    """Validate a label against the closed vocabulary; returns it unchanged."""
    if label in BASE_RELATIONS:
        return label
    parts = label.split()
    if len(parts) == 2 and parts[1] == "o'clock":
        try:
            hour = int(parts[0])
        except ValueError:
            hour = 0
        if 1 <= hour <= 12:
            return label
    raise UnknownRelation(
        f"unknown relation {label!r}; expected one of {', '.join(BASE_RELATIONS)} "
        "or an '<H> o'clock' form"
    )


@dataclass(frozen=True)
class RelationConfig:
    """Geometric thresholds, all overridable from the config file."""

    epsilon: float = 0.1          # margin for closest/farthest (m)
    wr_dist: float = 1.0          # within reach radius (m)
    ar_dist: float = 3.0          # around radius (m)
    min_iou: float = 0.1          # footprint gate for vertical relations
    min_on_ratio: float = 0.3     # anchor-coverage ratio for "on"
    max_on_dist: float = 0.1      # max |target bottom - anchor top| for "on" (m)
    max_on_ratio: float = 1.5     # max target/anchor footprint area ratio for "on"
    sector_half_width: float = 67.5   # allocentric sector half-width (deg)

    def __post_init__(self):
        for name in ("epsilon", "wr_dist", "ar_dist", "max_on_dist"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.min_iou <= 1.0:
            raise ValueError("min_iou must be in [0, 1]")
        if not 0.0 < self.min_on_ratio <= 1.0:
            raise ValueError("min_on_ratio must be in (0, 1]")
        if self.max_on_ratio <= 0:
            raise ValueError("max_on_ratio must be > 0")
        if not 0.0 < self.sector_half_width < 90.0:
            raise ValueError("sector_half_width must be in (0, 90) degrees")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def pairwise_distance(a: ObjectInstance, b: ObjectInstance) -> float:
    return point_distance(a.centroid, b.centroid)


def point_distance(p: Sequence[float], q: Sequence[float]) -> float:
    return math.sqrt(sum((float(pi) - float(qi)) ** 2 for pi, qi in zip(p, q)))


def iou_2d(a: tuple[float, float, float, float],
           b: tuple[float, float, float, float]) -> float:
    """Intersection-over-union of two XY rectangles given as (xmin,ymin,xmax,ymax)."""
    inter = intersection_area(a, b)
    if inter <= 0.0:
        return 0.0
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / (area_a + area_b - inter)


def intersection_area(a: tuple[float, float, float, float],
                      b: tuple[float, float, float, float]) -> float:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0.0 or h <= 0.0:
        return 0.0
    return w * h


def extremal_neighbor(
    target: ObjectInstance,
    others: Sequence[ObjectInstance],
    which: str,
    cfg: RelationConfig,
) -> ObjectInstance | None:
    """The unambiguously closest/farthest object to `target`, if any.

    Candidates are sorted by centroid distance; the extremal one only counts
    when it beats its runner-up by more than epsilon.  With a single
    candidate there is no runner-up and it is both closest and farthest.
    """
    return extremal_from_point(target.centroid, others, which, cfg)


def extremal_from_point(
    point: Sequence[float],
    others: Sequence[ObjectInstance],
    which: str,
    cfg: RelationConfig,
) -> ObjectInstance | None:
    if which not in ("closest", "farthest"):
        raise UnknownRelation(f"which must be closest or farthest, got {which!r}")
    if not others:
        raise EmptyCandidates("no candidate objects")
    ranked = sorted(others, key=lambda o: point_distance(point, o.centroid))
    if len(ranked) == 1:
        return ranked[0]
    dists = [point_distance(point, o.centroid) for o in ranked]
    if which == "closest":
        return ranked[0] if dists[0] + cfg.epsilon < dists[1] else None
    return ranked[-1] if dists[-2] + cfg.epsilon < dists[-1] else None


def proximity_labels(
    target: ObjectInstance, anchor: ObjectInstance, cfg: RelationConfig
) -> set[str]:
    return proximity_labels_at(point_distance(target.centroid, anchor.centroid), cfg)


def proximity_labels_at(distance: float, cfg: RelationConfig) -> set[str]:
    labels = set()
    if distance < cfg.wr_dist:
        labels.add("within reach")
    if distance < cfg.ar_dist:
        labels.add("around")
    return labels


def vertical_relation(
    target: ObjectInstance, anchor: ObjectInstance, cfg: RelationConfig
) -> str | None:
    """"on", "above", "below", or None; footprint-gated by 2D IoU."""
    ft, fa = target.footprint, anchor.footprint
    if iou_2d(ft, fa) < cfg.min_iou:
        return None
    inter = intersection_area(ft, fa)
    anchor_area = anchor.footprint_area
    if (
        inter / anchor_area > cfg.min_on_ratio
        and abs(target.bottom_z - anchor.top_z) <= cfg.max_on_dist
        and target.footprint_area / anchor_area < cfg.max_on_ratio
    ):
        return "on"
    if target.bottom_z - anchor.top_z > cfg.max_on_dist:
        return "above"
    if anchor.bottom_z - target.top_z > cfg.max_on_dist:
        return "below"
    return None


def angle_between_deg(u: tuple[float, float], v: tuple[float, float]) -> float:
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu < 1e-12 or nv < 1e-12:
        raise ZeroDirection("cannot take the angle of a zero vector")
    cos = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.degrees(math.acos(max(-1.0, min(1.0, cos))))


def allocentric_labels(
    direction: tuple[float, float], cfg: RelationConfig
) -> set[str]:
    """Sector membership of a direction in an egocentric frame.

    Several labels can hold at once (e.g. a diagonal is both left and back).
    Boundaries are exclusive: the angle must be strictly inside the sector.
    """
    if math.hypot(*direction) < 1e-12:
        raise ZeroDirection("direction must be non-zero")
    return {
        name
        for name, axis in _AXES.items()
        if angle_between_deg(direction, axis) < cfg.sector_half_width
    }


def oclock_label(direction: tuple[float, float]) -> str:
    """Clock-face bearing: forward is 12 o'clock, hours run clockwise."""
    if math.hypot(*direction) < 1e-12:
        raise ZeroDirection("direction must be non-zero")
    clockwise = math.degrees(math.atan2(direction[0], direction[1])) % 360.0
    hour = round(clockwise / 30.0) % 12
    return f"{12 if hour == 0 else hour} o'clock"
