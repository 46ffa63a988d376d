import json
from pathlib import Path

import pytest

from conftest import (
    BOOK_TABLE_BUNDLE,
    ROOM_BUNDLE,
    SITUATION_DOC,
    build_bench_suite,
    final_answer_turn,
    program_turn,
    BEHIND_PROGRAM,
    BROKEN_PROGRAM,
)
from scenereason.cli import main


@pytest.fixture
def room_files(tmp_path):
    scene = tmp_path / "room.json"
    scene.write_text(json.dumps(ROOM_BUNDLE), encoding="utf-8")
    situation = tmp_path / "situation.json"
    situation.write_text(json.dumps(SITUATION_DOC), encoding="utf-8")
    return {"scene": scene, "situation": situation, "root": tmp_path}


def write_script(path: Path, turns) -> Path:
    path.write_text(json.dumps(turns), encoding="utf-8")
    return path


# -- validate -----------------------------------------------------------------

def test_validate_ok(room_files, capsys):
    assert main(["validate", str(room_files["scene"])]) == 0
    assert "11 objects" in capsys.readouterr().out


def test_validate_duplicate_id(tmp_path, capsys):
    bad = dict(ROOM_BUNDLE, objects=ROOM_BUNDLE["objects"] + [ROOM_BUNDLE["objects"][0]])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad), encoding="utf-8")
    assert main(["validate", str(path)]) == 1
    assert "chair_1" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2


# -- ask ---------------------------------------------------------------------

def test_ask_prints_answer(room_files, capsys):
    script = write_script(
        room_files["root"] / "script.json",
        [program_turn(BEHIND_PROGRAM), final_answer_turn("coffee table")],
    )
    out_file = room_files["root"] / "session.json"
    code = main([
        "ask",
        "--scene", str(room_files["scene"]),
        "--situation", str(room_files["situation"]),
        "--question", "What is behind me directly?",
        "--backend", "scripted",
        "--script", str(script),
        "--out", str(out_file),
    ])
    assert code == 0
    assert capsys.readouterr().out.strip() == "coffee table"
    payload = json.loads(out_file.read_text(encoding="utf-8"))
    assert payload["answer"] == "coffee table"
    assert payload["program_passed"] is True
    assert payload["llm_calls"] == 2
    assert payload["transcript"][0]["role"] == "system"


def test_ask_summarization_path_still_succeeds(room_files, capsys):
    script = write_script(
        room_files["root"] / "script.json",
        [program_turn(BROKEN_PROGRAM), final_answer_turn("couch")],
    )
    code = main([
        "ask",
        "--scene", str(room_files["scene"]),
        "--situation", str(room_files["situation"]),
        "--question", "What?",
        "--backend", "scripted",
        "--script", str(script),
        "--max-iterations", "1",
    ])
    assert code == 0
    assert capsys.readouterr().out.strip() == "couch"


def test_ask_unreachable_http_backend_is_exit_3(room_files, tmp_path):
    config = tmp_path / "run.cfg"
    config.write_text(
        "backend = http\nbase_url = http://127.0.0.1:9/v1\nretries = 0\ntimeout = 2\n",
        encoding="utf-8",
    )
    code = main([
        "--config", str(config),
        "ask",
        "--scene", str(room_files["scene"]),
        "--situation", str(room_files["situation"]),
        "--question", "What?",
    ])
    assert code == 3


# -- bench ---------------------------------------------------------------------

def test_bench_end_to_end(tmp_path, capsys):
    suite = build_bench_suite(tmp_path)
    out_file = tmp_path / "predictions.jsonl"
    code = main(["--config", str(suite["config"]), "bench", "--out", str(out_file)])
    assert code == 0
    lines = out_file.read_text(encoding="utf-8").strip().split("\n")
    assert len(lines) == 20
    records = [json.loads(line) for line in lines]
    assert all(r["program_passed"] for r in records)
    console = capsys.readouterr().out
    assert "pass rate: 100.00%" in console
    assert "mean rounds:" in console


def test_bench_deterministic_and_parallel_identical(tmp_path):
    suite = build_bench_suite(tmp_path)
    outputs = []
    for tag, parallelism in (("a", 1), ("b", 1), ("c", 4)):
        out_file = tmp_path / f"pred_{tag}.jsonl"
        code = main([
            "--config", str(suite["config"]),
            "bench", "--out", str(out_file),
            "--parallelism", str(parallelism),
        ])
        assert code == 0
        outputs.append(out_file.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_bench_empty_questions(tmp_path, capsys):
    suite = build_bench_suite(tmp_path)
    suite["questions"].write_text("", encoding="utf-8")
    out_file = tmp_path / "empty.jsonl"
    code = main(["--config", str(suite["config"]), "bench", "--out", str(out_file)])
    assert code == 0
    assert out_file.read_text(encoding="utf-8") == ""


def test_bench_backend_failure_records_empty_answer(tmp_path):
    suite = build_bench_suite(tmp_path)
    # first question's script runs dry before the final answer
    scripts = json.loads(suite["scripts"].read_text(encoding="utf-8"))
    scripts["q01"] = [program_turn(BEHIND_PROGRAM)]
    suite["scripts"].write_text(json.dumps(scripts), encoding="utf-8")
    out_file = tmp_path / "pred.jsonl"
    assert main(["--config", str(suite["config"]), "bench", "--out", str(out_file)]) == 0
    records = [json.loads(l) for l in out_file.read_text().strip().split("\n")]
    assert records[0]["qid"] == "q01"
    assert records[0]["answer"] == ""
    assert len(records) == 20


# -- eval ------------------------------------------------------------------------

def test_eval_all_correct_with_breakdown(tmp_path, capsys):
    suite = build_bench_suite(tmp_path)
    pred_file = tmp_path / "pred.jsonl"
    assert main(["--config", str(suite["config"]), "bench", "--out", str(pred_file)]) == 0
    capsys.readouterr()
    out_dir = tmp_path / "report"
    code = main([
        "eval",
        "--pred", str(pred_file),
        "--gold", str(suite["questions"]),
        "--protocol", "soft",
        "--breakdown",
        "--out-dir", str(out_dir),
    ])
    assert code == 0
    console = capsys.readouterr().out
    assert "accuracy: 100.00%" in console
    assert (out_dir / "report.txt").exists()
    assert (out_dir / "report.tsv").exists()
    assert (out_dir / "report.png").exists()
    tsv = (out_dir / "report.tsv").read_text(encoding="utf-8").strip().split("\n")
    assert tsv[0] == "question_type\ttotal\tcorrect\taccuracy"
    assert len(tsv) == 1 + 1 + 7  # header + overall + seven skill tags


def test_eval_strict_vs_soft_on_curated_pairs(tmp_path, capsys):
    pairs = [
        ("rectangle", "rectangular"),
        ("forward", "front"),
        ("up", "covered up"),
        ("TV", "picture, TV"),
        ("toilet", "sink, toilet"),
        ("red", "black, red"),
    ]
    gold_file = tmp_path / "gold.jsonl"
    pred_file = tmp_path / "pred.jsonl"
    with open(gold_file, "w", encoding="utf-8") as g, open(pred_file, "w", encoding="utf-8") as p:
        for i, (gt, pred) in enumerate(pairs):
            qid = f"q{i}"
            g.write(json.dumps({
                "qid": qid, "scene_id": "s", "situation_ref": "",
                "question": "?", "answers": [gt],
            }) + "\n")
            p.write(json.dumps({"qid": qid, "answer": pred}) + "\n")
    assert main(["eval", "--pred", str(pred_file), "--gold", str(gold_file),
                 "--protocol", "soft", "--out-dir", str(tmp_path)]) == 0
    assert "accuracy: 100.00%  (6/6)" in capsys.readouterr().out
    assert main(["eval", "--pred", str(pred_file), "--gold", str(gold_file),
                 "--protocol", "strict", "--out-dir", str(tmp_path)]) == 0
    assert "accuracy: 0.00%  (0/6)" in capsys.readouterr().out


def test_eval_unknown_qid_lists_offenders(tmp_path, capsys):
    gold_file = tmp_path / "gold.jsonl"
    gold_file.write_text(json.dumps({
        "qid": "a", "scene_id": "s", "situation_ref": "", "question": "?",
        "answers": ["x"],
    }) + "\n", encoding="utf-8")
    pred_file = tmp_path / "pred.jsonl"
    pred_file.write_text(json.dumps({"qid": "mystery", "answer": "x"}) + "\n",
                         encoding="utf-8")
    assert main(["eval", "--pred", str(pred_file), "--gold", str(gold_file)]) == 1
    assert "mystery" in capsys.readouterr().err


# -- ensemble ----------------------------------------------------------------------

def test_ensemble_merges_reply(tmp_path, capsys):
    pred_file = tmp_path / "pred.jsonl"
    pred_file.write_text(json.dumps({"qid": "q1", "answer": "left front"}) + "\n",
                         encoding="utf-8")
    topk_file = tmp_path / "topk.jsonl"
    topk_file.write_text(json.dumps({
        "qid": "q1",
        "entries": [["left", 0.89], ["forward", 0.10], ["front", 0.02],
                     ["door", 0.01], ["right", 0.01]],
    }) + "\n", encoding="utf-8")
    script = write_script(tmp_path / "script.json",
                          ["Reasonable answers: left front forward"])
    out_file = tmp_path / "merged.jsonl"
    code = main([
        "ensemble",
        "--pred", str(pred_file),
        "--topk", str(topk_file),
        "--out", str(out_file),
        "--backend", "scripted",
        "--script", str(script),
    ])
    assert code == 0
    merged = [json.loads(l) for l in out_file.read_text().strip().split("\n")]
    assert merged == [{"qid": "q1", "answer": "left front forward"}]


def test_ensemble_passthrough_when_topk_missing(tmp_path):
    pred_file = tmp_path / "pred.jsonl"
    pred_file.write_text(
        json.dumps({"qid": "q1", "answer": "left"}) + "\n"
        + json.dumps({"qid": "q2", "answer": "couch"}) + "\n",
        encoding="utf-8",
    )
    topk_file = tmp_path / "topk.jsonl"
    topk_file.write_text(json.dumps({"qid": "q1", "entries": [["left", 0.9]]}) + "\n",
                         encoding="utf-8")
    script = write_script(tmp_path / "script.json", ["Reasonable answers: left"])
    out_file = tmp_path / "merged.jsonl"
    code = main([
        "ensemble", "--pred", str(pred_file), "--topk", str(topk_file),
        "--out", str(out_file), "--backend", "scripted", "--script", str(script),
    ])
    assert code == 0
    merged = {r["qid"]: r["answer"] for r in
              (json.loads(l) for l in out_file.read_text().strip().split("\n"))}
    assert merged == {"q1": "left", "q2": "couch"}


def test_ensemble_passthrough_on_empty_entry(tmp_path):
    pred_file = tmp_path / "pred.jsonl"
    pred_file.write_text(json.dumps({"qid": "q1", "answer": "left"}) + "\n",
                         encoding="utf-8")
    topk_file = tmp_path / "topk.jsonl"
    topk_file.write_text(json.dumps({"qid": "q1", "entries": []}) + "\n",
                         encoding="utf-8")
    script = write_script(tmp_path / "script.json", ["unused"])
    out_file = tmp_path / "merged.jsonl"
    code = main([
        "ensemble", "--pred", str(pred_file), "--topk", str(topk_file),
        "--out", str(out_file), "--backend", "scripted", "--script", str(script),
    ])
    assert code == 0
    merged = [json.loads(l) for l in out_file.read_text().strip().split("\n")]
    assert merged == [{"qid": "q1", "answer": "left"}]


# -- relations ---------------------------------------------------------------------

def test_relations_pairwise_prints_on(tmp_path, capsys):
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps(BOOK_TABLE_BUNDLE), encoding="utf-8")
    situation = tmp_path / "situation.json"
    situation.write_text(json.dumps(SITUATION_DOC), encoding="utf-8")
    code = main([
        "relations", "--scene", str(scene), "--situation", str(situation),
        "--object", "book_1", "--reference", "table_1",
    ])
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert "on" in lines


def test_relations_unknown_object(room_files):
    code = main([
        "relations", "--scene", str(room_files["scene"]),
        "--situation", str(room_files["situation"]), "--object", "ghost",
    ])
    assert code == 1


def test_relations_agent_colocated_object(tmp_path, capsys):
    bundle = {
        "scene_id": "s",
        "objects": [{"id": "here", "category": "box",
                     "centroid": [0.0, 0.0, 0.0], "lwh": [0.2, 0.2, 0.2]}],
    }
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps(bundle), encoding="utf-8")
    situation = tmp_path / "situation.json"
    situation.write_text(json.dumps(SITUATION_DOC), encoding="utf-8")
    code = main([
        "relations", "--scene", str(scene), "--situation", str(situation),
        "--object", "here",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "within reach" in out
    for label in ("left", "right", "front", "back", "o'clock"):
        assert label not in out


# -- reclassify ---------------------------------------------------------------------

def test_reclassify_command(tmp_path, capsys):
    bundle = {
        "scene_id": "s",
        "embedding_dim": 2,
        "objects": [
            {"id": "t1", "category": "table", "centroid": [0, 0, 0.4],
             "lwh": [1, 1, 0.8], "embedding": [1.0, 0.0]},
        ],
    }
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps(bundle), encoding="utf-8")
    mapping = tmp_path / "map.tsv"
    mapping.write_text("table\ttable\n", encoding="utf-8")
    references = tmp_path / "refs.json"
    references.write_text(json.dumps({
        "dim": 2,
        "groups": {"table": [
            {"label": "coffee table", "vector": [1.0, 0.0]},
            {"label": "dining table", "vector": [0.0, 1.0]},
        ]},
    }), encoding="utf-8")
    out_file = tmp_path / "new_scene.json"
    code = main([
        "reclassify", "--scene", str(scene), "--mapping", str(mapping),
        "--references", str(references), "--out", str(out_file), "--k", "1",
    ])
    assert code == 0
    assert "rewrote 1 of 1" in capsys.readouterr().out
    doc = json.loads(out_file.read_text(encoding="utf-8"))
    assert doc["objects"][0]["category"] == "coffee table"
