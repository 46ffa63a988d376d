import json
import math
import random

import pytest

from conftest import ROOM_BUNDLE
from scenereason.scene import (
    AgentSituation,
    DuplicateObjectId,
    EmbeddingDimMismatch,
    MalformedBundle,
    NonPositiveExtent,
    SceneError,
    load_questions,
    load_scene,
    load_situation,
    summarize_scene,
    to_agent_frame,
)


def bundle(objects, **extra):
    return json.dumps({"scene_id": "test", "objects": objects, **extra})


MINIMAL_OBJECT = {
    "id": "c1",
    "category": "chair",
    "centroid": [0.0, 0.0, 0.5],
    "lwh": [0.5, 0.5, 1.0],
}


def test_load_minimal_bundle():
    scene = load_scene(bundle([MINIMAL_OBJECT]))
    assert len(scene.objects) == 1
    obj = scene.objects[0]
    assert obj.id == "c1"
    assert obj.category == "chair"
    assert obj.centroid == (0.0, 0.0, 0.5)
    assert obj.lwh == (0.5, 0.5, 1.0)
    assert obj.bottom_z == 0.0
    assert obj.top_z == 1.0
    assert obj.footprint == (-0.25, -0.25, 0.25, 0.25)


def test_load_room_fixture():
    scene = load_scene(json.dumps(ROOM_BUNDLE))
    assert len(scene.objects) == 11


def test_duplicate_id_rejected():
    objs = [MINIMAL_OBJECT, dict(MINIMAL_OBJECT, centroid=[1.0, 0.0, 0.5])]
    with pytest.raises(DuplicateObjectId, match="c1"):
        load_scene(bundle(objs))


def test_nonpositive_extent_rejected():
    with pytest.raises(NonPositiveExtent, match="c1"):
        load_scene(bundle([dict(MINIMAL_OBJECT, lwh=[0.5, 0.0, 1.0])]))


def test_embedding_dim_mismatch_names_object():
    objs = [dict(MINIMAL_OBJECT, embedding=[1.0, 0.0, 0.0])]
    with pytest.raises(EmbeddingDimMismatch, match="c1"):
        load_scene(bundle(objs, embedding_dim=4))


def test_embedding_must_be_unit_norm():
    objs = [dict(MINIMAL_OBJECT, embedding=[1.0, 1.0, 0.0, 0.0])]
    with pytest.raises(MalformedBundle, match="c1"):
        load_scene(bundle(objs, embedding_dim=4))


def test_embedding_dim_inferred_from_first_object():
    objs = [
        dict(MINIMAL_OBJECT, embedding=[1.0, 0.0]),
        dict(MINIMAL_OBJECT, id="c2", embedding=[0.0, 1.0, 0.0]),
    ]
    with pytest.raises(EmbeddingDimMismatch, match="c2"):
        load_scene(bundle(objs))


@pytest.mark.parametrize(
    "raw",
    [
        "not json at all",
        json.dumps([1, 2, 3]),
        json.dumps({"objects": []}),
        json.dumps({"scene_id": "s"}),
        bundle([{"id": "c1", "category": "chair", "centroid": [0, 0], "lwh": [1, 1, 1]}]),
        bundle([dict(MINIMAL_OBJECT, attributes={"color": 3})]),
    ],
)
def test_malformed_bundles_rejected(raw):
    with pytest.raises(MalformedBundle):
        load_scene(raw)


def test_load_serialize_roundtrip():
    scene = load_scene(json.dumps(ROOM_BUNDLE))
    again = load_scene(json.dumps(scene.to_bundle()))
    assert again == scene


def test_load_is_deterministic():
    raw = json.dumps(ROOM_BUNDLE)
    assert load_scene(raw) == load_scene(raw)


# -- summaries ------------------------------------------------------------

def test_summary_matches_room_example(room_scene):
    assert summarize_scene(room_scene) == (
        "I am in a room. Looking around me, I see some objects: "
        "2 chair, 1 coffee table, 1 couch, 2 lamp, 1 pillow, 2 table, 2 window."
    )


def test_summary_empty_scene():
    scene = load_scene(bundle([]))
    assert summarize_scene(scene) == "I am in a room. Looking around me, I see no objects."


def test_summary_single_category_count():
    objs = [dict(MINIMAL_OBJECT, id=f"c{i}") for i in range(3)]
    assert summarize_scene(load_scene(bundle(objs))).endswith(": 3 chair.")


def test_summary_invariant_to_object_order():
    rng = random.Random(7)
    objects = list(ROOM_BUNDLE["objects"])
    reference = summarize_scene(load_scene(json.dumps(ROOM_BUNDLE)))
    for _ in range(5):
        rng.shuffle(objects)
        shuffled = dict(ROOM_BUNDLE, objects=objects)
        assert summarize_scene(load_scene(json.dumps(shuffled))) == reference


# -- agent frame -----------------------------------------------------------

def test_agent_frame_identity_at_position():
    situation = AgentSituation((1.0, 2.0, 0.5), (0.6, 0.8))
    assert to_agent_frame((1.0, 2.0, 0.5), situation) == (0.0, 0.0, 0.0)


def test_agent_frame_heading_already_forward():
    situation = AgentSituation((0.0, 0.0, 0.0), (0.0, 1.0))
    assert to_agent_frame((0.0, 2.0, 0.0), situation) == (0.0, 2.0, 0.0)


def test_agent_frame_quarter_turn():
    # oracle: explicit 2x2 rotation matrix sending (1,0) to (0,1)
    situation = AgentSituation((0.0, 0.0, 0.0), (1.0, 0.0))
    x, y, z = to_agent_frame((2.0, 0.0, 0.0), situation)
    assert (x, y, z) == pytest.approx((0.0, 2.0, 0.0), abs=1e-12)


def test_agent_frame_left_is_negative_x():
    situation = AgentSituation((0.0, 0.0, 0.0), (0.0, 1.0))
    x, _, _ = to_agent_frame((-1.0, 0.0, 0.0), situation)
    assert x == pytest.approx(-1.0)


def test_agent_frame_heading_maps_to_unit_y():
    rng = random.Random(11)
    for _ in range(200):
        pos = (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1))
        angle = rng.uniform(0, 2 * math.pi)
        heading = (math.cos(angle), math.sin(angle))
        situation = AgentSituation(pos, heading)
        x, y, _ = to_agent_frame(
            (pos[0] + heading[0], pos[1] + heading[1], pos[2]), situation
        )
        assert abs(x) < 1e-9
        assert abs(y - 1.0) < 1e-9


def test_agent_frame_preserves_distances():
    rng = random.Random(13)
    for _ in range(200):
        situation = AgentSituation(
            (rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)),
            (rng.uniform(-1, 1), rng.uniform(-1, 1))
            if rng.random() > 0.5
            else (1.0, 0.0),
        )
        p = [rng.uniform(-10, 10) for _ in range(3)]
        q = [rng.uniform(-10, 10) for _ in range(3)]
        tp = to_agent_frame(p, situation)
        tq = to_agent_frame(q, situation)
        before = math.dist(p, q)
        after = math.dist(tp, tq)
        assert abs(before - after) < 1e-9


# -- situation and question files -------------------------------------------

def test_load_situation_normalizes_heading():
    doc = {"position": [0, 0, 0], "heading": [3.0, 4.0], "description": "x"}
    situation = load_situation(json.dumps(doc))
    assert situation.heading == pytest.approx((0.6, 0.8))


def test_load_situation_rejects_zero_heading():
    doc = {"position": [0, 0, 0], "heading": [0.0, 0.0], "description": ""}
    with pytest.raises(MalformedBundle):
        load_situation(json.dumps(doc))


def test_situation_z_defaults_to_zero():
    doc = {"position": [1.0, 2.0], "heading": [0, 1], "description": ""}
    assert load_situation(json.dumps(doc)).position == (1.0, 2.0, 0.0)


def test_zero_heading_rejected_at_construction():
    with pytest.raises(SceneError):
        AgentSituation((0, 0, 0), (0.0, 0.0))


def test_load_questions(tmp_path):
    path = tmp_path / "questions.jsonl"
    path.write_text(
        json.dumps(
            {
                "qid": "q1",
                "scene_id": "s",
                "situation_ref": "sit.json",
                "question": "What?",
                "answers": ["chair"],
                "question_types": ["relation"],
            }
        )
        + "\n\n",
        encoding="utf-8",
    )
    records = load_questions(path)
    assert len(records) == 1
    assert records[0].qid == "q1"
    assert records[0].answers == ("chair",)
    assert records[0].question_types == ("relation",)


def test_load_questions_missing_field(tmp_path):
    path = tmp_path / "questions.jsonl"
    path.write_text(json.dumps({"qid": "q1"}) + "\n", encoding="utf-8")
    with pytest.raises(MalformedBundle):
        load_questions(path)
