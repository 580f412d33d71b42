"""Exception types raised across the package."""


class BuzzError(Exception):
    """Base class for every error raised by buzzcheck."""


# ingest
class ParseError(BuzzError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class MissingColumn(ParseError):
    def __init__(self, name: str):
        super().__init__(f"missing column {name!r}")
        self.name = name


class BadDate(ParseError):
    pass


class EmptySplit(BuzzError):
    def __init__(self, side: str):
        super().__init__(f"{side} split has no rows")
        self.side = side


# pageviews
class ProfileNotFound(BuzzError):
    pass


class TransportError(BuzzError):
    pass


class CacheMiss(BuzzError):
    pass


class InsufficientHistory(BuzzError):
    pass


# features / estimation
class BadOdds(BuzzError):
    pass


class NonPositiveInput(BuzzError):
    pass


class RankDeficient(BuzzError):
    pass


class NotEnoughRows(BuzzError):
    pass


class SingleCluster(BuzzError):
    pass


# clean
class DegenerateSpread(BuzzError):
    pass


class UnknownMatchId(BuzzError):
    pass


# backtest / significance / report
class MissingFeature(BuzzError):
    pass


class EmptyUniverse(BuzzError):
    pass


class ZeroInvestment(BuzzError):
    """Raised when a ledger staked nothing; ``summary`` still carries the counts."""

    def __init__(self, summary=None):
        super().__init__("no stake was placed; ROI is undefined")
        self.summary = summary


class UniverseTooSmall(BuzzError):
    pass


class UnknownLayout(BuzzError):
    pass


class EmptySeries(BuzzError):
    pass
