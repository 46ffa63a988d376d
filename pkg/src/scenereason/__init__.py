"""Training-free situated question answering over 3D scene bundles.

A language model plans and writes small query programs; a sandboxed
interpreter runs them against an object-centric scene model; failed runs
are re-prompted with the error until the iteration budget is spent.
Answers are scored with a lenient soft-match protocol and can be merged
with an end-to-end model's top-k output.
"""

from .agent import (
    ChatMessage,
    FinalAnswer,
    ProgramAction,
    SessionConfig,
    SessionResult,
    run_session,
)
from .api import ApiContext, ObjectSet, cosine_classify, knn_classify
from .backends import (
    AuthError,
    BackendUnavailable,
    HttpBackendConfig,
    http_backend,
    scripted_backend,
)
from .evaluation import (
    EvalReport,
    SynonymTable,
    clean_answer,
    score,
    soft_match,
    strict_match,
)
from .relations import RelationConfig
from .scene import (
    AgentSituation,
    ObjectInstance,
    Scene,
    load_scene,
    summarize_scene,
    to_agent_frame,
)
from .script import ExecLimits, ExecutionOutcome, execute, parse, unparse

__version__ = "0.1.0"

__all__ = [
    "AgentSituation",
    "ApiContext",
    "AuthError",
    "BackendUnavailable",
    "ChatMessage",
    "EvalReport",
    "ExecLimits",
    "ExecutionOutcome",
    "FinalAnswer",
    "HttpBackendConfig",
    "ObjectInstance",
    "ObjectSet",
    "ProgramAction",
    "RelationConfig",
    "Scene",
    "SessionConfig",
    "SessionResult",
    "SynonymTable",
    "clean_answer",
    "cosine_classify",
    "execute",
    "http_backend",
    "knn_classify",
    "load_scene",
    "parse",
    "run_session",
    "score",
    "scripted_backend",
    "soft_match",
    "strict_match",
    "summarize_scene",
    "to_agent_frame",
    "unparse",
]
