"""Exception hierarchy shared across the engine."""


class AgentRagError(Exception):
    pass


class ConfigError(AgentRagError):
    pass


class StateError(AgentRagError):
    """Raised when an orchestration step would break a state invariant."""


class TemplateError(AgentRagError):
    pass


class ParseFailure(AgentRagError):
    def __init__(self, agent: str, message: str, raw: str = ""):
        super().__init__(f"{agent}: {message}")
        self.agent = agent
        self.raw = raw


class RequestValidationError(AgentRagError, ValueError):
    pass


class BackendError(AgentRagError):
    pass


class BackendTimeout(BackendError):
    pass


class RateLimited(BackendError):
    pass


class NoScriptMatch(BackendError):
    pass


class CassetteMiss(BackendError):
    def __init__(self, prompt_sha256: str):
        super().__init__(f"no cassette entry for prompt {prompt_sha256}")
        self.prompt_sha256 = prompt_sha256


class EmbeddingError(AgentRagError):
    pass


class NormalizationError(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


class BuildError(AgentRagError):
    pass


class IndexFormatError(AgentRagError):
    pass


class RunAborted(AgentRagError):
    """The run could not finish; ``transcript`` holds everything recorded so far."""

    def __init__(self, message: str, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class CorpusFormatError(AgentRagError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}, line {lineno}: {message}")
        self.lineno = lineno
