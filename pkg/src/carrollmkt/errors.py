"""Exception hierarchy shared by all carrollmkt modules."""


class CarrollError(Exception):
    """Base class for every error raised by this package."""


# --- structure errors ---

class StructureError(CarrollError):
    pass


class DuplicateId(StructureError):
    pass


class UnknownEndpoint(StructureError):
    pass


class NonAtomicSource(StructureError):
    pass


class SelfReference(StructureError):
    pass


class OutcomeSpaceTooLarge(StructureError):
    pass


# --- market errors ---

class MarketError(CarrollError):
    pass


class DegenerateSecurity(MarketError):
    pass


class InsufficientCash(MarketError):
    pass


class InsufficientHoldings(MarketError):
    pass


class TargetOutOfRange(MarketError):
    pass


class UnknownTrader(MarketError):
    pass


class InfeasibleOutcome(MarketError):
    pass


class MarketClosed(MarketError):
    pass


# --- live-mutation errors ---

class MutationError(CarrollError):
    pass


class InvalidEdge(MutationError):
    pass


class NotATree(MutationError):
    pass


# --- segmentation errors ---

class SegmentationError(CarrollError):
    pass


class MTooSmall(SegmentationError):
    pass


class CrossPartSecurity(SegmentationError):
    pass


class NoCycle(SegmentationError):
    pass


class ScriptError(SegmentationError):
    pass


# --- restake / attack-lab errors ---

class LeverageError(CarrollError):
    pass


class NoAPosition(LeverageError):
    pass


class NotANandTriple(LeverageError):
    pass


class BurnUnderfunded(LeverageError):
    pass


# --- scenario errors ---

class ParseError(CarrollError):
    """Raised on scenario parse failure; carries (line, message) pairs."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [(0, errors)]
        self.errors = list(errors)
        super().__init__("; ".join(f"line {ln}: {msg}" for ln, msg in self.errors))
