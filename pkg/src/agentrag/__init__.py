"""Training-free multi-agent retrieval-augmented question answering."""

from .orchestrator import Engine, EngineConfig, RunTranscript, run
from .state import GraphState, PlanExecState, PlanState, QAAnswerState, RagState, StepTaskState

__all__ = [
    "Engine",
    "EngineConfig",
    "GraphState",
    "PlanExecState",
    "PlanState",
    "QAAnswerState",
    "RagState",
    "RunTranscript",
    "StepTaskState",
    "run",
]

__version__ = "0.1.0"
