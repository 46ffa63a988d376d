"""The callable scene-query surface bound to one (scene, situation, config).

These eight operations are what interpreted programs may call: enumerate
objects, filter by category, query relations between objects or against the
agent, and classify attributes/states either from stored annotations or by
cosine similarity against label embeddings.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .relations import (
    ALLOCENTRIC,
    BASE_RELATIONS,
    EmptyCandidates,
    RelationConfig,
    UnknownRelation,
    allocentric_labels,
    extremal_from_point,
    oclock_label,
    point_distance,
    proximity_labels_at,
    vertical_relation,
)
from .scene import AgentSituation, ObjectInstance, Scene, to_agent_frame


class ApiError(Exception):
    pass


class UnknownAttributeType(ApiError):
    pass


class MissingCandidates(ApiError):
    pass


class MissingEmbedding(ApiError):
    pass


class UnknownLabel(ApiError):
    pass


class Unresolvable(ApiError):
    pass


class DimensionMismatch(ApiError):
    pass


class EmptyReferences(ApiError):
    pass


class BadK(ApiError):
    pass


ATTRIBUTE_TYPES = ("lwh", "distance", "color", "shape", "material")

# relations each entry point accepts; "behind" is an alias of "back"
RELATE_RELATIONS = BASE_RELATIONS
RELATE_AGENT_RELATIONS = (
    "left", "right", "front", "back",
    "closest", "farthest", "within reach", "around",
)


class ObjectSet:
    """Ordered, duplicate-free collection of scene objects.

    Iterates in scene-bundle order so program output is reproducible; set
    algebra is available through | and &.  Equality ignores order.
    """

    __slots__ = ("_items",)

    def __init__(self, items: Iterable[ObjectInstance] = ()):
        seen: set[str] = set()
        out = []
        for obj in items:
            if obj.id not in seen:
                seen.add(obj.id)
                out.append(obj)
        self._items: tuple[ObjectInstance, ...] = tuple(out)

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, obj) -> bool:
        return isinstance(obj, ObjectInstance) and any(
            o.id == obj.id for o in self._items
        )

    def __or__(self, other: "ObjectSet") -> "ObjectSet":
        if not isinstance(other, ObjectSet):
            return NotImplemented
        return ObjectSet(list(self._items) + list(other._items))

    def __and__(self, other: "ObjectSet") -> "ObjectSet":
        if not isinstance(other, ObjectSet):
            return NotImplemented
        ids = {o.id for o in other._items}
        return ObjectSet(o for o in self._items if o.id in ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObjectSet):
            return NotImplemented
        return {o.id for o in self._items} == {o.id for o in other._items}

    def __hash__(self):
        return hash(frozenset(o.id for o in self._items))

    def __repr__(self) -> str:
        return "{" + ", ".join(repr(o) for o in self._items) + "}"

    def ids(self) -> frozenset[str]:
        return frozenset(o.id for o in self._items)


def _normalize_relation(relation: str, allowed: Sequence[str], op: str) -> str:
    name = relation.strip().lower()
    if name == "behind":
        name = "back"
    if name not in allowed:
        raise UnknownRelation(
            f"{op} does not support relation {relation!r}; "
            f"expected one of: {', '.join(allowed)} (or 'behind' for 'back')"
        )
    return name


@dataclass(frozen=True)
class ApiContext:
    """Immutable binding of a scene, an agent situation and the thresholds."""

    scene: Scene
    situation: AgentSituation
    cfg: RelationConfig = field(default_factory=RelationConfig)
    label_embeddings: Mapping[str, tuple[float, ...]] | None = None
    knn_references: Mapping[str, Sequence[tuple[Sequence[float], str]]] | None = None

    def __post_init__(self):
        dim = self.scene.embedding_dim
        if dim is None:
            return
        if self.label_embeddings:
            for label, vec in self.label_embeddings.items():
                if len(vec) != dim:
                    raise DimensionMismatch(
                        f"label embedding {label!r} has dim {len(vec)}, scene declares {dim}"
                    )
        if self.knn_references:
            for group, refs in self.knn_references.items():
                for vec, _label in refs:
                    if len(vec) != dim:
                        raise DimensionMismatch(
                            f"knn reference in group {group!r} has dim {len(vec)}, "
                            f"scene declares {dim}"
                        )

    # -- object retrieval ---------------------------------------------------

    def api_scene(self) -> ObjectSet:
        return ObjectSet(self.scene.objects)

    def api_filter(self, objs: ObjectSet, category: str) -> ObjectSet:
        wanted = category.strip().lower()
        return ObjectSet(o for o in objs if o.category == wanted)

    # -- relations ----------------------------------------------------------

    def api_relate(
        self, objs: ObjectSet, reference: ObjectInstance, relation: str
    ) -> ObjectSet:
        name = _normalize_relation(relation, RELATE_RELATIONS, "relate")
        candidates = [o for o in objs if o.id != reference.id]
        if not candidates:
            return ObjectSet()
        if name in ("closest", "farthest"):
            extremal = extremal_from_point(
                reference.centroid, candidates, name, self.cfg
            )
            return ObjectSet([extremal] if extremal is not None else [])
        if name in ("within reach", "around"):
            return ObjectSet(
                o
                for o in candidates
                if name
                in proximity_labels_at(
                    point_distance(o.centroid, reference.centroid), self.cfg
                )
            )
        if name in ("on", "above", "below"):
            return ObjectSet(
                o for o in candidates if vertical_relation(o, reference, self.cfg) == name
            )
        # allocentric: direction candidate - reference, expressed in the agent frame
        return ObjectSet(
            o for o in candidates if name in self._pair_allocentric(o, reference)
        )

    def api_relate_agent(self, objs: ObjectSet, relation: str) -> ObjectSet:
        name = _normalize_relation(relation, RELATE_AGENT_RELATIONS, "relate_agent")
        agent = self.situation.position
        candidates = list(objs)
        if not candidates:
            return ObjectSet()
        if name in ("closest", "farthest"):
            extremal = extremal_from_point(agent, candidates, name, self.cfg)
            return ObjectSet([extremal] if extremal is not None else [])
        if name in ("within reach", "around"):
            return ObjectSet(
                o
                for o in candidates
                if name
                in proximity_labels_at(point_distance(o.centroid, agent), self.cfg)
            )
        return ObjectSet(
            o for o in candidates if name in self._agent_allocentric(o)
        )

    def api_query_relation(
        self,
        obj: ObjectInstance,
        reference: ObjectInstance,
        candidate_relations: Sequence[str] | None = None,
    ) -> list[str]:
        candidates = (
            list(ALLOCENTRIC) if candidate_relations is None else list(candidate_relations)
        )
        singleton = ObjectSet([obj])
        held = []
        for cand in candidates:
            if obj in self.api_relate(singleton, reference, cand):
                held.append(cand)
        return held

    def api_query_relation_agent(
        self,
        obj: ObjectInstance,
        candidate_relations: Sequence[str] | None = None,
    ) -> list[str]:
        candidates = (
            list(ALLOCENTRIC) if candidate_relations is None else list(candidate_relations)
        )
        singleton = ObjectSet([obj])
        held: list[str] = []
        for cand in candidates:
            if cand.strip().lower() == "o'clock":
                direction = self._agent_direction(obj)
                if direction is not None:
                    held.append(oclock_label(direction))
                continue
            if obj in self.api_relate_agent(singleton, cand):
                held.append(cand)
        return held

    def _agent_direction(self, obj: ObjectInstance) -> tuple[float, float] | None:
        x, y, _ = to_agent_frame(obj.centroid, self.situation)
        if math.hypot(x, y) < 1e-12:
            return None
        return (x, y)

    def _agent_allocentric(self, obj: ObjectInstance) -> set[str]:
        direction = self._agent_direction(obj)
        if direction is None:
            return set()  # co-located with the agent: no direction
        return allocentric_labels(direction, self.cfg)

    def _pair_allocentric(
        self, obj: ObjectInstance, reference: ObjectInstance
    ) -> set[str]:
        hx, hy = self.situation.heading
        dx = obj.centroid[0] - reference.centroid[0]
        dy = obj.centroid[1] - reference.centroid[1]
        direction = (hy * dx - hx * dy, hx * dx + hy * dy)
        if math.hypot(*direction) < 1e-12:
            return set()
        return allocentric_labels(direction, self.cfg)

    # -- attributes and states ----------------------------------------------

    def api_query_attribute(
        self,
        obj: ObjectInstance,
        attribute_type: str,
        candidates: Sequence[str] | None = None,
    ):
        if attribute_type not in ATTRIBUTE_TYPES:
            raise UnknownAttributeType(
                f"unknown attribute type {attribute_type!r}; "
                f"expected one of {', '.join(ATTRIBUTE_TYPES)}"
            )
        if attribute_type == "lwh":
            return list(obj.lwh)
        if attribute_type == "distance":
            return point_distance(self.situation.position, obj.centroid)
        stored = obj.attributes.get(attribute_type)
        if stored is not None:
            if candidates is None:
                return stored
            for cand in candidates:
                if cand.strip().lower() == stored.strip().lower():
                    return stored
        if not candidates:
            raise MissingCandidates(
                f"classifying {attribute_type!r} of {obj.id!r} requires candidate values"
            )
        return self._classify(obj, list(candidates))

    def api_query_state(
        self, obj: ObjectInstance, candidate_states: Sequence[str]
    ) -> str:
        if not candidate_states:
            raise MissingCandidates(f"query_state on {obj.id!r} requires candidate states")
        stored = {v.strip().lower() for v in obj.states.values()}
        for cand in candidate_states:
            if cand.strip().lower() in stored:
                return cand
        try:
            return self._classify(obj, list(candidate_states))
        except (MissingEmbedding, UnknownLabel) as exc:
            raise Unresolvable(
                f"state of {obj.id!r} has no usable annotation and no embedding route: {exc}"
            ) from None

    def _classify(self, obj: ObjectInstance, candidates: list[str]) -> str:
        if obj.embedding is None:
            raise MissingEmbedding(f"object {obj.id!r} carries no embedding")
        if not self.label_embeddings:
            raise UnknownLabel("no label embeddings are loaded")
        labeled = []
        for cand in candidates:
            try:
                labeled.append((cand, self.label_embeddings[cand]))
            except KeyError:
                raise UnknownLabel(f"no embedding for candidate label {cand!r}") from None
        return cosine_classify(obj.embedding, labeled)


def cosine_classify(
    query: Sequence[float], labeled: Sequence[tuple[str, Sequence[float]]]
) -> str:
    """Label whose vector has the highest cosine similarity with the query.

    Ties keep the earliest label in list order.
    """
    if not labeled:
        raise EmptyCandidates("no labeled vectors to classify against")
    q = np.asarray(query, dtype=float)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise DimensionMismatch("query vector has zero norm")
    best_label, best_sim = None, -math.inf
    for label, vec in labeled:
        v = np.asarray(vec, dtype=float)
        if v.shape != q.shape:
            raise DimensionMismatch(
                f"label {label!r} has dim {v.size}, query has dim {q.size}"
            )
        vn = np.linalg.norm(v)
        sim = float(q @ v / (qn * vn)) if vn > 0.0 else -math.inf
        if sim > best_sim:
            best_label, best_sim = label, sim
    return best_label


def knn_classify(
    query: Sequence[float],
    references: Sequence[tuple[Sequence[float], str]],
    k: int,
) -> str:
    """Majority label among the k nearest references (Euclidean).

    Ties go to the class with the smaller mean distance, then to the class
    appearing earliest in the reference list.
    """
    if not references:
        raise EmptyReferences("no reference vectors")
    if k < 1 or k > len(references):
        raise BadK(f"k must be in [1, {len(references)}], got {k}")
    q = np.asarray(query, dtype=float)
    mat = np.asarray([vec for vec, _ in references], dtype=float)
    if mat.shape[1] != q.size:
        raise DimensionMismatch(
            f"references have dim {mat.shape[1]}, query has dim {q.size}"
        )
    dists = np.linalg.norm(mat - q, axis=1)
    order = np.argsort(dists, kind="stable")[:k]

    per_label: dict[str, list[float]] = {}
    for idx in order:
        per_label.setdefault(references[idx][1], []).append(float(dists[idx]))
    first_index = {}
    for pos, (_vec, label) in enumerate(references):
        first_index.setdefault(label, pos)
    return min(
        per_label,
        key=lambda lab: (
            -len(per_label[lab]),
            sum(per_label[lab]) / len(per_label[lab]),
            first_index[lab],
        ),
    )


# -- embedding sidecar files -------------------------------------------------

def load_label_embeddings(path: str | Path) -> dict[str, tuple[float, ...]]:
    """Read the {dim, entries:[{label, vector}]} sidecar."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    dim = int(doc["dim"])
    table: dict[str, tuple[float, ...]] = {}
    for entry in doc["entries"]:
        vec = tuple(float(v) for v in entry["vector"])
        if len(vec) != dim:
            raise DimensionMismatch(
                f"label {entry['label']!r} has dim {len(vec)}, file declares {dim}"
            )
        table[str(entry["label"])] = vec
    return table


def load_knn_references(
    path: str | Path,
) -> dict[str, list[tuple[tuple[float, ...], str]]]:
    """Read the {dim, groups:{name:[{label, vector}]}} reference bank."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    dim = int(doc["dim"])
    groups: dict[str, list[tuple[tuple[float, ...], str]]] = {}
    for name, entries in doc["groups"].items():
        refs = []
        for entry in entries:
            vec = tuple(float(v) for v in entry["vector"])
            if len(vec) != dim:
                raise DimensionMismatch(
                    f"reference {entry['label']!r} in group {name!r} has dim "
                    f"{len(vec)}, file declares {dim}"
                )
            refs.append((vec, str(entry["label"])))
        groups[str(name)] = refs
    return groups


def load_category_mapping(path: str | Path) -> dict[str, str]:
    """Two-column text file: raw category TAB high-level class."""
    table = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two columns, got {line!r}")
            table[parts[0].strip().lower()] = parts[1].strip().lower()
    return table


def reclassify_categories(
    scene: Scene,
    mapping: Mapping[str, str],
    references: Mapping[str, Sequence[tuple[Sequence[float], str]]],
    k: int = 5,
) -> tuple[Scene, int]:
    """Rewrite object categories hierarchically: map each raw category to its
    high-level class, then pick a subcategory by KNN over that class's
    reference embeddings.  Objects without an embedding or an applicable
    group are left untouched.  Returns the new scene and the rewrite count.
    """
    new_objects = []
    changed = 0
    for obj in scene.objects:
        group = mapping.get(obj.category)
        refs = references.get(group) if group is not None else None
        if obj.embedding is None or not refs:
            new_objects.append(obj)
            continue
        label = knn_classify(obj.embedding, refs, min(k, len(refs)))
        if label != obj.category:
            changed += 1
            obj = ObjectInstance(
                id=obj.id,
                category=label,
                centroid=obj.centroid,
                lwh=obj.lwh,
                attributes=dict(obj.attributes),
                states=dict(obj.states),
                embedding=obj.embedding,
            )
        new_objects.append(obj)
    return (
        Scene(
            scene_id=scene.scene_id,
            objects=tuple(new_objects),
            embedding_dim=scene.embedding_dim,
        ),
        changed,
    )
