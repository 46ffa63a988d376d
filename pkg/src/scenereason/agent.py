"""The plan/program/retry loop over an abstract chat backend.

One session answers one question: the model is prompted with the task
definition, response format, API documentation and in-context examples,
then iterates: emit a program, see its output (or its error, via the
rectify re-prompt), and finally commit to an answer.  When the iteration
budget runs out the summarization prompt forces a best-effort answer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .api import ApiContext
from .backends import LlmBackend
from .relations import RelationConfig
from .scene import AgentSituation, Scene, summarize_scene
from .script import ExecLimits, ParseError, execute, parse


class AssetError(Exception):
    pass


class MissingAsset(AssetError):
    pass


class ParseFailure(Exception):
    """The model's response does not follow the Action/Action Input format."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class ProgramAction:
    source: str


@dataclass(frozen=True)
class FinalAnswer:
    text: str


AgentAction = ProgramAction | FinalAnswer


ERROR_PLACEHOLDER = "|ERROR INFORMATION|"

_REQUIRED_FILES = (
    "task_definition.txt",
    "format_spec.txt",
    "api_doc.txt",
    "rectify_error.txt",
    "rectify_parse.txt",
    "summarize.txt",
)


@dataclass(frozen=True)
class PromptAssets:
    task_definition: str
    format_spec: str
    api_doc: str
    rectify_error: str
    rectify_parse: str
    summarize: str
    examples: tuple[ChatMessage, ...] = ()


def load_prompt_assets(directory: str | Path | None = None) -> PromptAssets:
    """Load the asset bundle from a directory, or the packaged defaults."""
    root = (
        Path(directory)
        if directory is not None
        else resources.files("scenereason") / "assets" / "prompts"
    )
    texts = {}
    for name in _REQUIRED_FILES:
        entry = root / name
        try:
            texts[name[:-4]] = entry.read_text(encoding="utf-8").rstrip("\n")
        except (FileNotFoundError, OSError):
            raise MissingAsset(f"prompt asset {name!r} not found in {root}") from None
    examples_dir = root / "examples"
    try:
        entries = sorted(examples_dir.iterdir(), key=lambda e: e.name)
    except (FileNotFoundError, OSError):
        raise MissingAsset(f"prompt asset directory 'examples' not found in {root}") from None
    examples = []
    for entry in entries:
        if not entry.name.endswith(".txt"):
            continue
        if entry.name.endswith("_user.txt"):
            role = "user"
        elif entry.name.endswith("_assistant.txt"):
            role = "assistant"
        else:
            raise AssetError(
                f"example file {entry.name!r} must end in _user.txt or _assistant.txt"
            )
        examples.append(ChatMessage(role, entry.read_text(encoding="utf-8").rstrip("\n")))
    for i, msg in enumerate(examples):
        expected = "user" if i % 2 == 0 else "assistant"
        if msg.role != expected:
            raise AssetError("example files must alternate user/assistant, starting with user")
    if examples and examples[-1].role != "assistant":
        raise AssetError("example files must end with an assistant turn")
    return PromptAssets(examples=tuple(examples), **texts)


def assemble_system_prompt(assets: PromptAssets) -> list[ChatMessage]:
    """System message (task + format + API doc) followed by the examples."""
    system = "\n\n".join(
        (assets.task_definition, assets.format_spec, assets.api_doc)
    )
    return [ChatMessage("system", system), *assets.examples]


def assemble_user_message(
    scene: Scene, situation: AgentSituation, question: str
) -> str:
    return (
        summarize_scene(scene)
        + "\nMy situation: "
        + situation.description
        + "\nQuestion: "
        + question
    )


_ACTION_RE = re.compile(r"^\s*Action:\s*(.*?)\s*$", re.MULTILINE)
_INPUT_RE = re.compile(r"^\s*Action Input:\s*(.*)$", re.MULTILINE)


def parse_agent_response(text: str) -> AgentAction:
    """Classify a model response as a program or a final answer."""
    actions = list(_ACTION_RE.finditer(text))
    if not actions:
        raise ParseFailure("missing 'Action:' line")
    action = actions[-1]
    value = action.group(1).strip().lower()
    tail = text[action.end():]
    if value == "final answer":
        matched = _INPUT_RE.search(tail)
        if matched is None:
            raise ParseFailure("missing 'Action Input:' line")
        candidates = [matched.group(1)] + tail[matched.end():].split("\n")
        for line in candidates:
            if line.strip():
                return FinalAnswer(line.strip())
        raise ParseFailure("empty final answer")
    if value == "program":
        return ProgramAction(_extract_fenced_program(tail))
    raise ParseFailure(f"unknown action {action.group(1).strip()!r}")


def _extract_fenced_program(tail: str) -> str:
    lines = tail.split("\n")
    open_idx = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("```"):
            info = stripped[3:].strip()
            if info == "" or info.lower() == "python":
                open_idx = i
                break
    if open_idx is None:
        raise ParseFailure("missing fenced code block after 'Action: Program'")
    body = []
    for line in lines[open_idx + 1:]:
        if line.strip() == "```":
            return "\n".join(body) + ("\n" if body else "")
        body.append(line)
    raise ParseFailure("unterminated code fence")


def best_effort_answer(text: str) -> str:
    """Answer extraction for summarization turns that may ignore the format."""
    last = None
    for matched in _INPUT_RE.finditer(text):
        last = matched
    if last is not None and last.group(1).strip():
        return last.group(1).strip()
    lines = [line.strip() for line in text.split("\n") if line.strip()]
    return lines[-1] if lines else ""


@dataclass(frozen=True)
class SessionConfig:
    max_iterations: int = 3
    limits: ExecLimits = field(default_factory=ExecLimits)
    relations: RelationConfig = field(default_factory=RelationConfig)
    label_embeddings: Mapping[str, tuple[float, ...]] | None = None
    knn_references: Mapping[str, Sequence] | None = None
    assets: PromptAssets | None = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class SessionResult:
    final_answer: str
    iterations: int
    program_passed: bool
    transcript: tuple[ChatMessage, ...]
    llm_calls: int


def run_session(
    question: str,
    scene: Scene,
    situation: AgentSituation,
    backend: LlmBackend,
    cfg: SessionConfig = SessionConfig(),
) -> SessionResult:
    """Run one question through the full loop.

    Only BackendUnavailable escapes; program failures and malformed
    responses become dialogue (rectify / re-format / summarize prompts).
    """
    assets = cfg.assets if cfg.assets is not None else load_prompt_assets()
    messages = assemble_system_prompt(assets)
    messages.append(
        ChatMessage("user", assemble_user_message(scene, situation, question))
    )
    ctx = ApiContext(
        scene=scene,
        situation=situation,
        cfg=cfg.relations,
        label_embeddings=cfg.label_embeddings,
        knn_references=cfg.knn_references,
    )

    state = {"iterations": 0, "llm_calls": 0, "program_passed": False}

    def complete() -> str:
        text = backend.complete(list(messages))
        state["llm_calls"] += 1
        messages.append(ChatMessage("assistant", text))
        return text

    def finish(answer: str) -> SessionResult:
        return SessionResult(
            final_answer=answer.strip(),
            iterations=state["iterations"],
            program_passed=state["program_passed"],
            transcript=tuple(messages),
            llm_calls=state["llm_calls"],
        )

    def summarize() -> SessionResult:
        messages.append(ChatMessage("user", assets.summarize))
        return finish(best_effort_answer(complete()))

    while True:
        text = complete()
        try:
            action = parse_agent_response(text)
        except ParseFailure:
            state["iterations"] += 1
            if state["iterations"] >= cfg.max_iterations:
                return summarize()
            messages.append(ChatMessage("user", assets.rectify_parse))
            continue
        if isinstance(action, FinalAnswer):
            return finish(action.text)
        if state["iterations"] >= cfg.max_iterations:
            # budget spent but the model produced yet another program
            return summarize()
        state["iterations"] += 1
        error_text = None
        try:
            program = parse(action.source)
        except ParseError as exc:
            error_text = str(exc)
        if error_text is None:
            outcome = execute(program, ctx, cfg.limits)
            if outcome.ok:
                state["program_passed"] = True
                messages.append(ChatMessage("user", "Observation: " + outcome.stdout))
                continue
            error_text = outcome.error.render()
        if state["iterations"] >= cfg.max_iterations:
            return summarize()
        messages.append(
            ChatMessage(
                "user", assets.rectify_error.replace(ERROR_PLACEHOLDER, error_text)
            )
        )
