"""Exception hierarchy shared by every pipeline stage."""
from typing import Optional


class BlabError(Exception):
    """Base exception for the reporter"""
    pass


class ConfigError(BlabError):
    """Configuration could not be loaded or is inconsistent"""
    pass


class LocatedError(BlabError):
    """Error tied to a line (and optionally a column) of an input artifact"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 source: Optional[str] = None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(self.render())

    def render(self) -> str:
        """Format as `file:line: message` (or a subset when unknown)"""
        prefix = []
        if self.source:
            prefix.append(self.source)
        if self.line is not None:
            prefix.append(str(self.line))
            if self.column is not None:
                prefix.append(str(self.column))
        if prefix:
            return f"{':'.join(prefix)}: {self.message}"
        return self.message


# Warehouse
class InvalidRecord(BlabError):
    """An observation violates its type invariants"""
    pass


# Ingestion
class UnknownParser(BlabError):
    """No parser is registered under the requested id"""
    pass


class ParseError(BlabError):
    """No record could be recovered from a source document"""

    def __init__(self, message: str, reason: str = "malformed"):
        self.reason = reason
        super().__init__(message)


class SourceFetchError(BlabError):
    """A connector could not fetch its endpoint"""
    pass


# Selection
class InvalidIntent(BlabError):
    """An intent message lacks required attributes or has bad values"""
    pass


class NotationError(LocatedError):
    """Malformed intent notation"""
    pass


# Structuring
class CatalogError(LocatedError):
    """Malformed ordering catalog"""
    pass


class NoApplicableOrdering(BlabError):
    """No catalog entry covers any predicate of the message set"""
    pass


class MessageTooLarge(BlabError):
    """A single message cannot fit in a segment"""

    def __init__(self, message: str, estimate: int = 0, limit: int = 0):
        self.estimate = estimate
        self.limit = limit
        super().__init__(message)


# Lexicalization
class GrammarError(LocatedError):
    """Grammar file violation"""
    pass


class MissingTemplate(BlabError):
    """The grammar has no template for a predicate"""
    pass


class MissingAttribute(BlabError):
    """A template references an attribute the message does not carry"""
    pass


class MissingLexiconEntry(BlabError):
    """An agreement token has no gender facts for its slot"""
    pass


# Referring expressions
class RegistryError(LocatedError):
    """Entity registry file violation"""
    pass


class UnknownEntity(BlabError):
    """An entity tag names an id missing from the registry"""
    pass


# Realization
class OverBudget(BlabError):
    """A polished tweet exceeds the character limit"""
    pass


class ValidationFailed(BlabError):
    """Generated text hit the blocklist"""

    def __init__(self, term: str, position: int, text: str = ""):
        self.term = term
        self.position = position
        self.text = text
        super().__init__(f"blocked term {term!r} at position {position}")


# Summarization
class EmptyBody(BlabError):
    """An article body has no sentence"""
    pass


class UnsplittableToken(BlabError):
    """A single word is longer than a tweet can hold"""
    pass


class BindingUnavailable(BlabError):
    """A summarizer binding cannot be reached"""
    pass


class SummaryInvariantError(BlabError):
    """A summarizer binding returned a summary that is not faithful to its source"""
    pass


# Publishing
class ClientError(BlabError):
    """Base exception for publishing client errors"""
    kind = "rejected"


class ClientAuthError(ClientError):
    """Authentication errors"""
    kind = "auth"


class ClientRateLimitError(ClientError):
    """Rate limit exceeded errors"""
    kind = "rate_limit"


class ClientNetworkError(ClientError):
    """Connection, timeout and server-side errors"""
    kind = "network"


class ClientRejectedError(ClientError):
    """The service refused the post"""
    kind = "rejected"
