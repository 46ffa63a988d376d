"""Object-centric scene model: bundle loading, validation, and the agent frame.

A scene bundle is a JSON document describing segmented objects (category,
axis-aligned box, optional attributes/states/embedding).  Situations and
question files are small JSON/JSONL documents defined alongside it; loaders
for all three live here so every other module works on validated values.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence


class SceneError(Exception):
    """Base class for scene bundle and situation problems."""


class MalformedBundle(SceneError):
    pass


class DuplicateObjectId(SceneError):
    pass


class NonPositiveExtent(SceneError):
    pass


class EmbeddingDimMismatch(SceneError):
    pass


Vec3 = tuple[float, float, float]


def _as_floats(value, n: int, what: str) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise MalformedBundle(f"{what}: expected {n} numbers, got {value!r}")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise MalformedBundle(f"{what}: expected {n} numbers, got {value!r}") from None


@dataclass(frozen=True, eq=True)
class ObjectInstance:
    """One segmented object: category, centroid, axis-aligned extents."""

    id: str
    category: str
    centroid: Vec3
    lwh: Vec3
    attributes: Mapping[str, str] = field(default_factory=dict)
    states: Mapping[str, str] = field(default_factory=dict)
    embedding: tuple[float, ...] | None = None

    @property
    def bottom_z(self) -> float:
        return self.centroid[2] - self.lwh[2] / 2.0

    @property
    def top_z(self) -> float:
        return self.centroid[2] + self.lwh[2] / 2.0

    @property
    def footprint(self) -> tuple[float, float, float, float]:
        """Axis-aligned XY rectangle as (xmin, ymin, xmax, ymax)."""
        x, y, _ = self.centroid
        l, w, _ = self.lwh
        return (x - l / 2.0, y - w / 2.0, x + l / 2.0, y + w / 2.0)

    @property
    def footprint_area(self) -> float:
        return self.lwh[0] * self.lwh[1]

    def __repr__(self) -> str:  # shown inside interpreter output
        return f"<{self.category} {self.id}>"


@dataclass(frozen=True)
class AgentSituation:
    """Agent position + heading + free-text description of the situation.

    The heading is a unit 2D vector in the world XY plane; it is normalized
    at construction (a zero heading is rejected).
    """

    position: Vec3
    heading: tuple[float, float]
    description: str = ""

    def __post_init__(self):
        hx, hy = float(self.heading[0]), float(self.heading[1])
        norm = math.hypot(hx, hy)
        if norm < 1e-12:
            raise SceneError("situation heading must be non-zero")
        object.__setattr__(self, "heading", (hx / norm, hy / norm))
        object.__setattr__(
            self, "position", tuple(float(v) for v in self.position)
        )


@dataclass(frozen=True)
class Scene:
    scene_id: str
    objects: tuple[ObjectInstance, ...]
    embedding_dim: int | None = None

    def by_id(self, object_id: str) -> ObjectInstance:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise KeyError(object_id)

    def to_bundle(self) -> dict:
        """Bundle-shaped dict; json.dumps of this round-trips load_scene."""
        objs = []
        for o in self.objects:
            rec: dict = {
                "id": o.id,
                "category": o.category,
                "centroid": list(o.centroid),
                "lwh": list(o.lwh),
            }
            if o.attributes:
                rec["attributes"] = dict(o.attributes)
            if o.states:
                rec["states"] = dict(o.states)
            if o.embedding is not None:
                rec["embedding"] = list(o.embedding)
            objs.append(rec)
        bundle = {"scene_id": self.scene_id, "objects": objs}
        if self.embedding_dim is not None:
            bundle["embedding_dim"] = self.embedding_dim
        return bundle


def _parse_object(rec, declared_dim: int | None) -> tuple[ObjectInstance, int | None]:
    if not isinstance(rec, dict):
        raise MalformedBundle(f"object record must be a mapping, got {rec!r}")
    oid = rec.get("id")
    if not isinstance(oid, str) or not oid:
        raise MalformedBundle(f"object record missing string id: {rec!r}")
    category = rec.get("category")
    if not isinstance(category, str) or not category.strip():
        raise MalformedBundle(f"object {oid!r}: missing category")
    centroid = _as_floats(rec.get("centroid"), 3, f"object {oid!r} centroid")
    lwh = _as_floats(rec.get("lwh"), 3, f"object {oid!r} lwh")
    if any(v <= 0 for v in lwh):
        raise NonPositiveExtent(f"object {oid!r}: lwh must be positive, got {lwh}")

    attributes = rec.get("attributes") or {}
    states = rec.get("states") or {}
    for name, mapping in (("attributes", attributes), ("states", states)):
        if not isinstance(mapping, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in mapping.items()
        ):
            raise MalformedBundle(f"object {oid!r}: {name} must map strings to strings")

    embedding = None
    if rec.get("embedding") is not None:
        vec = rec["embedding"]
        embedding = _as_floats(vec, len(vec) if isinstance(vec, list) else 0,
                               f"object {oid!r} embedding")
        if declared_dim is not None and len(embedding) != declared_dim:
            raise EmbeddingDimMismatch(
                f"object {oid!r}: embedding has dim {len(embedding)}, "
                f"bundle declares {declared_dim}"
            )
        declared_dim = declared_dim if declared_dim is not None else len(embedding)
        norm = math.sqrt(sum(v * v for v in embedding))
        if abs(norm - 1.0) > 1e-6:
            raise MalformedBundle(
                f"object {oid!r}: embedding norm {norm:.8f} is not 1"
            )

    obj = ObjectInstance(
        id=oid,
        category=category.strip().lower(),
        centroid=centroid,
        lwh=lwh,
        attributes=dict(attributes),
        states=dict(states),
        embedding=embedding,
    )
    return obj, declared_dim


def load_scene(source: BinaryIO | bytes | str) -> Scene:
    """Parse and validate a scene bundle from a byte stream (or bytes/str)."""
    if isinstance(source, (bytes, str)):
        raw = source
    else:
        raw = source.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedBundle(f"bundle is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedBundle("bundle top level must be a mapping")
    scene_id = doc.get("scene_id")
    if not isinstance(scene_id, str) or not scene_id:
        raise MalformedBundle("bundle missing string scene_id")
    declared_dim = doc.get("embedding_dim")
    if declared_dim is not None and (not isinstance(declared_dim, int) or declared_dim <= 0):
        raise MalformedBundle(f"embedding_dim must be a positive integer, got {declared_dim!r}")
    records = doc.get("objects")
    if not isinstance(records, list):
        raise MalformedBundle("bundle missing objects list")

    objects: list[ObjectInstance] = []
    seen: set[str] = set()
    dim = declared_dim
    for rec in records:
        obj, dim = _parse_object(rec, dim)
        if obj.id in seen:
            raise DuplicateObjectId(f"duplicate object id {obj.id!r}")
        seen.add(obj.id)
        objects.append(obj)
    return Scene(scene_id=scene_id, objects=tuple(objects), embedding_dim=dim)


def load_scene_file(path: str | Path) -> Scene:
    with open(path, "rb") as f:
        return load_scene(f)


def load_situation(source: BinaryIO | bytes | str) -> AgentSituation:
    if isinstance(source, (bytes, str)):
        raw = source
    else:
        raw = source.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedBundle(f"situation file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedBundle("situation top level must be a mapping")
    pos = doc.get("position", [0.0, 0.0, 0.0])
    if isinstance(pos, (list, tuple)) and len(pos) == 2:
        pos = list(pos) + [0.0]
    position = _as_floats(pos, 3, "situation position")
    heading = _as_floats(doc.get("heading"), 2, "situation heading")
    description = doc.get("description", "")
    if not isinstance(description, str):
        raise MalformedBundle("situation description must be a string")
    if math.hypot(*heading) < 1e-12:
        raise MalformedBundle("situation heading must be non-zero")
    return AgentSituation(position=position, heading=heading, description=description)


def load_situation_file(path: str | Path) -> AgentSituation:
    with open(path, "rb") as f:
        return load_situation(f)


@dataclass(frozen=True)
class QuestionRecord:
    qid: str
    scene_id: str
    situation_ref: str
    question: str
    answers: tuple[str, ...]
    question_types: tuple[str, ...] = ()


def load_questions(path: str | Path) -> list[QuestionRecord]:
    """Read the one-record-per-line questions file."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedBundle(f"{path}:{lineno}: bad question record: {exc}") from None
            try:
                records.append(
                    QuestionRecord(
                        qid=str(doc["qid"]),
                        scene_id=str(doc["scene_id"]),
                        situation_ref=str(doc.get("situation_ref", "")),
                        question=str(doc["question"]),
                        answers=tuple(str(a) for a in doc["answers"]),
                        question_types=tuple(str(t) for t in doc.get("question_types", [])),
                    )
                )
            except KeyError as exc:
                raise MalformedBundle(f"{path}:{lineno}: question record missing {exc}") from None
    return records


def summarize_scene(scene: Scene) -> str:
    """Room summary sentence fed to the model, e.g. "... 2 chair, 1 couch."."""
    if not scene.objects:
        return "I am in a room. Looking around me, I see no objects."
    counts = Counter(obj.category for obj in scene.objects)
    parts = [f"{counts[cat]} {cat}" for cat in sorted(counts)]
    return (
        "I am in a room. Looking around me, I see some objects: "
        + ", ".join(parts)
        + "."
    )


def to_agent_frame(point: Sequence[float], situation: AgentSituation) -> Vec3:
    """Rigidly map a world-frame point into the agent's frame.

    The agent sits at the origin facing +y; left is -x.  z is shifted by the
    agent's height but never rotated (headings are planar).
    """
    px, py, pz = float(point[0]), float(point[1]), float(point[2])
    ax, ay, az = situation.position
    hx, hy = situation.heading
    dx, dy = px - ax, py - ay
    # rotation taking (hx, hy) to (0, 1)
    return (hy * dx - hx * dy, hx * dx + hy * dy, pz - az)
