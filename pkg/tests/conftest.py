"""Shared fixtures: the showroom scene, classification sidecars, and the
synthetic benchmark suite used by the CLI and acceptance tests."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from scenereason.scene import AgentSituation, Scene, load_scene

# A living room matching the in-context example: 2 chair, 1 coffee table,
# 1 couch, 2 lamp, 1 pillow, 2 table, 2 window.  The agent stands at the
# origin facing +y; the coffee table, couch and pillow sit behind it at
# increasing distance.
ROOM_BUNDLE = {
    "scene_id": "fixture_room",
    "objects": [
        {"id": "chair_1", "category": "chair", "centroid": [0.0, 2.0, 0.45], "lwh": [0.5, 0.5, 0.9]},
        {"id": "chair_2", "category": "chair", "centroid": [-1.2, 1.5, 0.45], "lwh": [0.5, 0.5, 0.9]},
        {"id": "coffee_table_1", "category": "coffee table", "centroid": [0.0, -1.05, 0.2], "lwh": [1.0, 0.6, 0.4]},
        {"id": "couch_1", "category": "couch", "centroid": [0.3, -1.5, 0.4], "lwh": [2.0, 0.9, 0.8]},
        {"id": "lamp_1", "category": "lamp", "centroid": [1.8, 0.4, 0.75], "lwh": [0.3, 0.3, 1.5]},
        {"id": "lamp_2", "category": "lamp", "centroid": [-1.7, 0.6, 0.75], "lwh": [0.3, 0.3, 1.5]},
        {"id": "pillow_1", "category": "pillow", "centroid": [0.35, -1.55, 0.875], "lwh": [0.4, 0.3, 0.15]},
        {"id": "table_1", "category": "table", "centroid": [1.5, 1.2, 0.35], "lwh": [0.9, 0.9, 0.7]},
        {"id": "table_2", "category": "table", "centroid": [-1.4, -0.2, 0.35], "lwh": [0.9, 0.9, 0.7]},
        {"id": "window_1", "category": "window", "centroid": [0.0, 2.5, 1.5], "lwh": [1.2, 0.1, 1.0]},
        {"id": "window_2", "category": "window", "centroid": [2.4, 0.1, 1.5], "lwh": [0.1, 1.2, 1.0]},
    ],
}

SITUATION_DOC = {
    "position": [0.0, 0.0, 0.0],
    "heading": [0.0, 1.0],
    "description": "I am facing a chair, while having a couch on my right and a coffee table behind me.",
}

# book resting on a small table: anchor coverage 0.5625 > 0.3,
# |bottom - top| = 0, area ratio 0.5625 < 1.5, IoU 0.5625 > 0.1
BOOK_TABLE_BUNDLE = {
    "scene_id": "book_table",
    "objects": [
        {"id": "table_1", "category": "table", "centroid": [1.0, 1.0, 0.35], "lwh": [0.6, 0.6, 0.7]},
        {"id": "book_1", "category": "book", "centroid": [1.0, 1.0, 0.75], "lwh": [0.45, 0.45, 0.1]},
        {"id": "plant_1", "category": "plant", "centroid": [-2.0, 0.5, 0.25], "lwh": [0.3, 0.3, 0.5]},
    ],
}

_E = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
]

# annotated + embedded objects for attribute/state classification
CLASSIFY_BUNDLE = {
    "scene_id": "classify_room",
    "embedding_dim": 4,
    "objects": [
        {
            "id": "couch_1", "category": "couch",
            "centroid": [0.0, 3.0, 0.4], "lwh": [2.0, 0.9, 0.8],
            "attributes": {"color": "brown"},
            "states": {"tidiness": "neat"},
        },
        {
            "id": "table_1", "category": "table",
            "centroid": [3.0, 4.0, 0.35], "lwh": [0.69, 0.3, 0.17],
            "embedding": _E[1],
        },
        {
            "id": "bin_1", "category": "trash bin",
            "centroid": [-1.0, 1.0, 0.3], "lwh": [0.4, 0.4, 0.6],
        },
    ],
}

LABEL_EMBEDDINGS_DOC = {
    "dim": 4,
    "entries": [
        {"label": "brown", "vector": _E[0]},
        {"label": "black", "vector": _E[1]},
        {"label": "red", "vector": _E[2]},
        {"label": "open", "vector": _E[0]},
        {"label": "closed", "vector": _E[3]},
    ],
}


@pytest.fixture
def room_scene() -> Scene:
    return load_scene(json.dumps(ROOM_BUNDLE))


@pytest.fixture
def room_situation() -> AgentSituation:
    return AgentSituation(
        tuple(SITUATION_DOC["position"]),
        tuple(SITUATION_DOC["heading"]),
        SITUATION_DOC["description"],
    )


@pytest.fixture
def book_table_scene() -> Scene:
    return load_scene(json.dumps(BOOK_TABLE_BUNDLE))


@pytest.fixture
def classify_scene() -> Scene:
    return load_scene(json.dumps(CLASSIFY_BUNDLE))


def final_answer_turn(answer: str) -> str:
    return (
        "Thought: I can answer from my situation directly.\n"
        "Action: Final Answer\n"
        f"Action Input: {answer}"
    )


def program_turn(source: str) -> str:
    return (
        "Thought: I need to look around.\n"
        "Action: Program\n"
        "Action Input:\n"
        "```Python\n"
        f"{source}"
        "```"
    )


BEHIND_PROGRAM = """\
object_set = scene()
object_behind_set = relate_agent(object_set=object_set, relation="behind")
object_behind_by_distance = sort_by_distance(object_behind_set)
category_behind_by_distance = [obj.category for obj in object_behind_by_distance][:3]
print(f"Objects directly behind me: {category_behind_by_distance}")
"""

BROKEN_PROGRAM = """\
object_set = scene()
target = find(object_set, "chair")
print(target)
"""

SKILL_TAGS = (
    "common-sense",
    "embodied activity",
    "navigation",
    "multi-hop reasoning",
    "calculation",
    "relation",
    "visual concepts",
)

# (question, gold answers, reply the scripted model gives after its program)
_SUITE_ROWS = [
    ("What is behind me directly?", ["coffee table"], "coffee table"),
    ("What could I sit on besides the chairs?", ["couch"], "couch"),
    ("Which direction should I go to reach the couch?", ["back"], "behind"),
    ("How many chairs are in the room?", ["2"], "two"),
    ("What shape is the coffee table?", ["rectangle"], "rectangular"),
    ("Is there a lamp in the room?", ["yes"], "true"),
    ("What is the soft thing on the couch?", ["pillow"], "pillow"),
    ("How many windows do I see?", ["2"], "2"),
    ("What should I turn on to read at night?", ["lamp"], "lamp"),
    ("Which piece of furniture is closest behind me?", ["coffee table"], "coffee table"),
    ("Can I reach the couch from here?", ["no"], "false"),
    ("What is in front of me?", ["chair"], "a chair"),
    ("How many tables are there including the coffee table?", ["3"], "three"),
    ("What do the windows let in?", ["light"], "light"),
    ("Where is the pillow?", ["couch"], "on the couch"),
    ("What direction is the second window from me?", ["right"], "right"),
    ("What category of object appears most often?", ["chair"], "chair"),
    ("If I walk forward, what will I hit first?", ["chair"], "chair"),
    ("What is under the pillow?", ["couch"], "couch"),
    ("Do the lamps match?", ["yes"], "yes"),
]


def build_bench_suite(root: Path) -> dict[str, Path]:
    """Write a complete 20-question benchmark fixture below `root`.

    Every question carries skill tags (all seven appear across the suite)
    and a per-question script whose final answer soft-matches the gold one.
    """
    root = root.resolve()  # config paths must survive any working directory
    scene_dir = root / "scenes"
    scene_dir.mkdir(parents=True, exist_ok=True)
    (scene_dir / "fixture_room.json").write_text(json.dumps(ROOM_BUNDLE), encoding="utf-8")
    situation_path = root / "situation.json"
    situation_path.write_text(json.dumps(SITUATION_DOC), encoding="utf-8")

    questions_path = root / "questions.jsonl"
    scripts: dict[str, list[str]] = {}
    with open(questions_path, "w", encoding="utf-8") as f:
        for i, (question, answers, reply) in enumerate(_SUITE_ROWS):
            qid = f"q{i + 1:02d}"
            tags = [SKILL_TAGS[i % 7], SKILL_TAGS[(i + 3) % 7]]
            f.write(
                json.dumps(
                    {
                        "qid": qid,
                        "scene_id": "fixture_room",
                        "situation_ref": "situation.json",
                        "question": question,
                        "answers": answers,
                        "question_types": tags,
                    }
                )
                + "\n"
            )
            scripts[qid] = [program_turn(BEHIND_PROGRAM), final_answer_turn(reply)]

    script_path = root / "scripts.json"
    script_path.write_text(json.dumps(scripts, indent=1), encoding="utf-8")

    config_path = root / "run.cfg"
    config_path.write_text(
        "# synthetic desk benchmark\n"
        f"scene_dir = {scene_dir}\n"
        f"questions_file = {questions_path}\n"
        f"script_file = {script_path}\n"
        "backend = scripted\n"
        "max_iterations = 3\n"
        f"output_dir = {root / 'out'}\n",
        encoding="utf-8",
    )
    return {
        "root": root,
        "scene_dir": scene_dir,
        "questions": questions_path,
        "scripts": script_path,
        "config": config_path,
        "situation": situation_path,
    }
