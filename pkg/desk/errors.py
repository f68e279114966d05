# desk/errors.py
"""
Exception hierarchy for the desk simulator.

Three families matter to callers:
  - ConfigError: the run cannot start (exit code 2).
  - DataError: corpus / log problems found while loading (exit code 3).
  - everything else is raised per article or per metric and is either turned
    into a Skipped outcome or reported as an undefined value.
"""


class DeskError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(DeskError, ValueError):
    pass


class DataError(DeskError, ValueError):
    pass


# --- core domain ---

class CalendarExhausted(DeskError, LookupError):
    def __init__(self, day, k, available):
        super().__init__(f"need {k} trading day(s) after {day}, calendar has {available}")
        self.day = day
        self.k = k
        self.available = available


class InvalidRecord(DataError):
    pass


# --- llm gateway ---

class GatewayError(DeskError, RuntimeError):
    def __init__(self, backend, message):
        super().__init__(f"[{backend}] {message}")
        self.backend = backend


class BackendUnavailable(GatewayError):
    pass


class RateLimited(GatewayError):
    pass


class EmptyResponse(GatewayError):
    pass


# --- prompts ---

class MissingSlot(DeskError, KeyError):
    def __init__(self, slot, role):
        super().__init__(slot)
        self.slot = slot
        self.role = role

    def __str__(self):
        return f"template '{self.role}' needs slot '{self.slot}' bound to non-empty text"


# --- agent output parsing ---

class ParseError(DeskError, ValueError):
    def __init__(self, message, raw):
        super().__init__(message)
        self.raw = raw


class UnparsableAction(ParseError):
    pass


class UnparsableVerdict(ParseError):
    pass


class ArticleSkipped(DeskError):
    """One pipeline step failed; the article is excluded from every denominator."""

    def __init__(self, stage, cause, calls=()):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
        self.calls = tuple(calls)


# --- market data ---

class AmbiguousLabel(DeskError, ValueError):
    def __init__(self, ticker, trade_date, volume):
        super().__init__(f"{ticker} {trade_date}: buy == sell == {volume} with institutional activity")
        self.ticker = ticker
        self.trade_date = trade_date


class MissingLabel(DeskError, LookupError):
    pass


class MissingPrice(DeskError, LookupError):
    pass


# --- metrics ---

class EmptyInput(DeskError, ValueError):
    pass


class DisjointLogs(DeskError, ValueError):
    pass


# --- logs ---

class SchemaMismatch(DataError):
    def __init__(self, path, found, expected):
        super().__init__(f"{path}: schema_version {found!r}, expected {expected!r}")
        self.path = path


class ReplayPreconditionError(DataError):
    pass
