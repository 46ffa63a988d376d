"""Command line surface: validate, ask, bench, eval, ensemble, relations,
and the reclassify preprocessing step.

Exit codes: 0 success, 1 domain error, 2 I/O error, 3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .agent import (
    ChatMessage,
    SessionConfig,
    load_prompt_assets,
    run_session,
)
from .api import (
    ApiContext,
    ApiError,
    load_category_mapping,
    load_knn_references,
    load_label_embeddings,
    reclassify_categories,
)
from .backends import (
    AuthError,
    BackendUnavailable,
    HttpBackend,
    HttpBackendConfig,
    ScriptedBackend,
)
from .config import ConfigError, RunConfig, load_config
from .evaluation import (
    EvalError,
    SynonymTable,
    build_ensemble_prompt,
    load_predictions,
    load_topk,
    parse_ensemble_response,
    score,
)
from .relations import RelationError, point_distance, vertical_relation
from .report import write_report_files
from .scene import SceneError, load_questions, load_scene_file, load_situation_file

log = logging.getLogger("scenereason")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2
EXIT_BACKEND = 3


class DomainError(Exception):
    pass


def _load_scripts(path: Path):
    """Script file: a JSON list of turns (shared, replayed per session) or a
    {qid: [turns]} map with optional "*" fallback."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if isinstance(doc, list):
        if not all(isinstance(t, str) for t in doc):
            raise DomainError(f"{path}: script list must contain strings")
        return doc
    if isinstance(doc, dict):
        for qid, turns in doc.items():
            if not isinstance(turns, list) or not all(isinstance(t, str) for t in turns):
                raise DomainError(f"{path}: script for {qid!r} must be a list of strings")
        return doc
    raise DomainError(f"{path}: script file must be a JSON list or object")


def _script_turns(scripts, qid: str | None):
    if isinstance(scripts, list):
        return scripts
    if qid is not None and qid in scripts:
        return scripts[qid]
    if "*" in scripts:
        return scripts["*"]
    raise DomainError(f"script file has no turns for question {qid!r}")


def _make_backend(cfg: RunConfig, scripts, qid: str | None):
    if cfg.backend == "scripted":
        if scripts is None:
            raise DomainError("scripted backend needs script_file in the config")
        return ScriptedBackend(_script_turns(scripts, qid))
    if not cfg.base_url:
        raise DomainError("http backend needs base_url in the config")
    return HttpBackend(
        HttpBackendConfig(
            base_url=cfg.base_url,
            model=cfg.model,
            temperature=cfg.temperature,
            timeout=cfg.timeout,
            retries=cfg.retries,
            api_key_env=cfg.api_key_env,
        )
    )


def _session_config(cfg: RunConfig) -> SessionConfig:
    label_embeddings = (
        load_label_embeddings(cfg.label_embeddings) if cfg.label_embeddings else None
    )
    knn_references = (
        load_knn_references(cfg.knn_references) if cfg.knn_references else None
    )
    assets = load_prompt_assets(cfg.prompt_assets) if cfg.prompt_assets else None
    return SessionConfig(
        max_iterations=cfg.max_iterations,
        limits=cfg.limits,
        relations=cfg.relations,
        label_embeddings=label_embeddings,
        knn_references=knn_references,
        assets=assets,
    )


def _merge_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for key in ("backend", "base_url", "model"):
        value = getattr(args, key.replace("-", "_"), None)
        if value:
            setattr(cfg, key, value)
    if getattr(args, "script", None):
        cfg.script_file = Path(args.script)
    if getattr(args, "max_iterations", None):
        cfg.max_iterations = args.max_iterations
    if getattr(args, "parallelism", None):
        cfg.parallelism = args.parallelism
    return cfg


def _result_record(qid: str, result) -> dict:
    return {
        "qid": qid,
        "answer": result.final_answer,
        "iterations": result.iterations,
        "program_passed": result.program_passed,
    }


# -- commands -----------------------------------------------------------------

def cmd_validate(args) -> int:
    scene = load_scene_file(args.scene)
    print(f"OK: scene {scene.scene_id!r} with {len(scene.objects)} objects")
    return EXIT_OK


def cmd_ask(args) -> int:
    cfg = _merge_config(args)
    scene = load_scene_file(args.scene)
    situation = load_situation_file(args.situation)
    scripts = _load_scripts(cfg.script_file) if cfg.script_file else None
    backend = _make_backend(cfg, scripts, qid=None)
    result = run_session(args.question, scene, situation, backend, _session_config(cfg))
    if args.out:
        payload = {
            "question": args.question,
            "answer": result.final_answer,
            "iterations": result.iterations,
            "program_passed": result.program_passed,
            "llm_calls": result.llm_calls,
            "transcript": [
                {"role": m.role, "content": m.content} for m in result.transcript
            ],
        }
        Path(args.out).write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        log.info("wrote transcript to %s", args.out)
    print(result.final_answer)
    return EXIT_OK


def _run_one_question(record, cfg, scripts, session_cfg, scene_cache):
    scene_path = cfg.scene_dir / f"{record.scene_id}.json"
    key = str(scene_path)
    if key not in scene_cache:
        scene_cache[key] = load_scene_file(scene_path)
    scene = scene_cache[key]
    ref = Path(record.situation_ref)
    if not ref.is_absolute():
        ref = cfg.questions_file.parent / ref
    situation = load_situation_file(ref)
    backend = _make_backend(cfg, scripts, qid=record.qid)
    try:
        result = run_session(record.question, scene, situation, backend, session_cfg)
        return _result_record(record.qid, result)
    except BackendUnavailable as exc:
        log.warning("question %s: backend failure: %s", record.qid, exc)
        return {"qid": record.qid, "answer": "", "iterations": 0, "program_passed": False}


def cmd_bench(args) -> int:
    cfg = _merge_config(args)
    if cfg.questions_file is None or cfg.scene_dir is None:
        raise DomainError("bench needs questions_file and scene_dir in the config")
    questions = load_questions(cfg.questions_file)
    scripts = _load_scripts(cfg.script_file) if cfg.script_file else None
    session_cfg = _session_config(cfg)
    out_path = Path(args.out) if args.out else cfg.output_dir / "predictions.jsonl"
    out_path.parent.mkdir(parents=True, exist_ok=True)

    scene_cache: dict = {}
    # preload scenes serially so the worker pool shares immutable values
    for record in questions:
        path = cfg.scene_dir / f"{record.scene_id}.json"
        if str(path) not in scene_cache:
            scene_cache[str(path)] = load_scene_file(path)

    if cfg.parallelism > 1 and len(questions) > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            records = list(
                pool.map(
                    lambda q: _run_one_question(q, cfg, scripts, session_cfg, scene_cache),
                    questions,
                )
            )
    else:
        records = [
            _run_one_question(q, cfg, scripts, session_cfg, scene_cache)
            for q in questions
        ]

    with open(out_path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")

    total = len(records)
    if total:
        passed = sum(1 for r in records if r["program_passed"])
        rounds = sum(r["iterations"] for r in records) / total
        print(f"questions: {total}")
        print(f"pass rate: {100.0 * passed / total:.2f}%")
        print(f"mean rounds: {rounds:.2f}")
    else:
        print("questions: 0")
    print(f"predictions written to {out_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _merge_config(args)
    predictions = load_predictions(args.pred)
    gold = load_questions(args.gold)
    table = SynonymTable.load(cfg.synonym_table) if cfg.synonym_table else None
    report = score(predictions, gold, protocol=args.protocol, table=table)
    out_dir = Path(args.out_dir) if args.out_dir else cfg.output_dir
    written = write_report_files(
        report,
        out_dir,
        stem=args.stem,
        protocol=args.protocol,
        figure=not args.no_figure,
    )
    print(f"accuracy: {report.accuracy * 100.0:.2f}%  ({report.correct}/{report.total})")
    if args.breakdown and report.per_type:
        for tag in sorted(report.per_type):
            bucket = report.per_type[tag]
            print(f"  {tag}: {bucket.accuracy * 100.0:.2f}%  ({bucket.correct}/{bucket.total})")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = _merge_config(args)
    predictions = load_predictions(args.pred)
    topk = load_topk(args.topk)
    questions = {}
    if args.gold:
        questions = {rec.qid: rec.question for rec in load_questions(args.gold)}
    template = (
        Path(args.template).read_text(encoding="utf-8") if args.template else None
    )
    scripts = _load_scripts(cfg.script_file) if cfg.script_file else None
    shared_backend = None
    if cfg.backend == "scripted" and isinstance(scripts, list):
        shared_backend = ScriptedBackend(scripts)
    elif cfg.backend == "http":
        shared_backend = _make_backend(cfg, scripts, qid=None)

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    merged = []
    for qid, answer in predictions.items():
        entry = topk.get(qid)
        if entry is None:
            log.warning("question %s: no top-k entry; keeping the session answer", qid)
            merged.append({"qid": qid, "answer": answer})
            continue
        if not entry.entries:
            log.warning("question %s: empty top-k entry; keeping the session answer", qid)
            merged.append({"qid": qid, "answer": answer})
            continue
        prompt = build_ensemble_prompt(
            questions.get(qid, ""), answer, entry, template
        )
        backend = shared_backend or _make_backend(cfg, scripts, qid=qid)
        reply = backend.complete([ChatMessage("user", prompt)])
        merged.append({"qid": qid, "answer": parse_ensemble_response(reply)})
    with open(out_path, "w", encoding="utf-8") as f:
        for rec in merged:
            f.write(json.dumps(rec) + "\n")
    print(f"merged predictions written to {out_path}")
    return EXIT_OK


def cmd_relations(args) -> int:
    cfg = _merge_config(args)
    scene = load_scene_file(args.scene)
    situation = load_situation_file(args.situation)
    try:
        target = scene.by_id(args.object)
    except KeyError:
        raise DomainError(f"unknown object id {args.object!r}") from None
    ctx = ApiContext(scene=scene, situation=situation, cfg=cfg.relations)
    everything = ctx.api_scene()

    if args.reference:
        try:
            reference = scene.by_id(args.reference)
        except KeyError:
            raise DomainError(f"unknown object id {args.reference!r}") from None
        print(f"{target.id} ({target.category}) vs {reference.id} ({reference.category})")
        print(f"distance: {point_distance(target.centroid, reference.centroid):.3f} m")
        vertical = vertical_relation(target, reference, cfg.relations)
        if vertical:
            print(vertical)
        for label in ("within reach", "around", "closest", "farthest"):
            if target in ctx.api_relate(everything, reference, label):
                print(label)
        for label in ctx.api_query_relation(target, reference):
            print(label)
        return EXIT_OK

    print(f"{target.id} ({target.category}) relative to the agent")
    print(f"distance: {point_distance(target.centroid, situation.position):.3f} m")
    for label in ("within reach", "around", "closest", "farthest"):
        if target in ctx.api_relate_agent(everything, label):
            print(label)
    for label in ctx.api_query_relation_agent(target):
        print(label)
    for label in ctx.api_query_relation_agent(target, ["o'clock"]):
        print(label)
    return EXIT_OK


def cmd_reclassify(args) -> int:
    scene = load_scene_file(args.scene)
    mapping = load_category_mapping(args.mapping)
    references = load_knn_references(args.references)
    new_scene, changed = reclassify_categories(scene, mapping, references, k=args.k)
    out_path = Path(args.out)
    out_path.write_text(
        json.dumps(new_scene.to_bundle(), indent=2) + "\n", encoding="utf-8"
    )
    print(f"rewrote {changed} of {len(scene.objects)} categories -> {out_path}")
    return EXIT_OK


# -- argument parsing -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenereason",
        description="Situated question answering over 3D scene bundles.",
    )
    parser.add_argument("--config", help="run configuration file (key = value lines)")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scene bundle")
    p.add_argument("scene")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("--scene", required=True)
    p.add_argument("--situation", required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--out", help="write the transcript JSON here")
    p.add_argument("--backend", choices=("scripted", "http"))
    p.add_argument("--script", help="scripted backend turns (JSON)")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("bench", help="run every question in the questions file")
    p.add_argument("--out", help="predictions file (default <output_dir>/predictions.jsonl)")
    p.add_argument("--backend", choices=("scripted", "http"))
    p.add_argument("--script", help="scripted backend turns (JSON)")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--parallelism", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="score a predictions file")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True, help="questions file with answers")
    p.add_argument("--protocol", choices=("soft", "strict"), default="soft")
    p.add_argument("--breakdown", action="store_true", help="print per-type accuracy")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--stem", default="report")
    p.add_argument("--no-figure", dest="no_figure", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ensemble", help="merge predictions with top-k candidates")
    p.add_argument("--pred", required=True)
    p.add_argument("--topk", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gold", help="questions file (for question text in prompts)")
    p.add_argument("--template", help="override the ensemble prompt template")
    p.add_argument("--backend", choices=("scripted", "http"))
    p.add_argument("--script")
    p.add_argument("--base-url", dest="base_url")
    p.add_argument("--model")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("relations", help="inspect relation labels for one object")
    p.add_argument("--scene", required=True)
    p.add_argument("--situation", required=True)
    p.add_argument("--object", required=True)
    p.add_argument("--reference")
    p.set_defaults(func=cmd_relations)

    p = sub.add_parser(
        "reclassify",
        help="rewrite bundle categories via the high-level gate + KNN references",
    )
    p.add_argument("--scene", required=True)
    p.add_argument("--mapping", required=True, help="raw -> high-level class table")
    p.add_argument("--references", required=True, help="KNN reference bank (JSON)")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_reclassify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (AuthError, BackendUnavailable) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (SceneError, RelationError, ApiError, EvalError, ConfigError,
            DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
