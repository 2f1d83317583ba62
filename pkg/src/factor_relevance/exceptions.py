"""Exception hierarchy shared by parsers, the engine, the CLI and the service."""


class FactorRelevanceError(Exception):
    """Base class for every error raised by this package."""


class ParseError(FactorRelevanceError, ValueError):
    """A document could not be parsed.

    Carries the 1-based ``line`` and ``column`` of the offending token and,
    when known, a description of what the parser ``expected`` there.
    """

    def __init__(self, message, line=None, column=None, expected=None, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        self.source = source
        super().__init__(self._format())

    def _format(self):
        where = ""
        if self.line is not None:
            where = f"{self.line}:{self.column}: " if self.column is not None else f"{self.line}: "
        if self.source:
            where = f"{self.source}:{where}"
        msg = f"{where}{self.message}"
        if self.expected:
            msg += f" (expected {self.expected})"
        return msg


class ValidationError(FactorRelevanceError, ValueError):
    """Structurally valid input that breaks a semantic invariant."""


class UnmappedAttributeError(ValidationError):
    def __init__(self, attributes):
        self.attributes = tuple(attributes)
        super().__init__("attributes without a factor: " + ", ".join(self.attributes))


class EmptyScopeError(FactorRelevanceError, ValueError):
    """An explanation was requested over zero rules."""


class NoActivationError(EmptyScopeError):
    """No rule fires for the given patient record."""

    def __init__(self, patient_id):
        self.patient_id = patient_id
        super().__init__(f"no rule activated for patient {patient_id!r}")
