class EngineError(Exception):
    """Base class for all errors raised by the engine."""


class InvalidCategory(EngineError):
    """A finite category presentation violates the category axioms."""


class SiteError(EngineError):
    """A site, cover, sieve or chain is malformed or unusable."""


class HeterogeneousDiagram(EngineError):
    """A diagram mixes value categories."""


class InsufficientDepth(EngineError):
    """A tower computation cannot be carried out within the working depth."""


class InvalidDocument(EngineError):
    """A serialized document failed validation.

    `pointer` is a JSON-pointer-style path to the offending node.
    """

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer}: {message}")
