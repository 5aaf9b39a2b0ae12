"""Exception hierarchy shared by every stegoscope module."""


class StegoscopeError(Exception):
    pass


class OddWidth(StegoscopeError, ValueError):
    pass


class CompositionOverflow(StegoscopeError, ValueError):
    pass


class InsufficientCapacity(StegoscopeError):
    def __init__(self, needed, available):
        super().__init__(f"insufficient capacity ({available} available): {needed} bits requested")
        self.needed = needed
        self.available = available


class MalformedHeader(StegoscopeError):
    pass


class BadMagic(StegoscopeError, ValueError):
    pass


class TruncatedData(StegoscopeError, ValueError):
    pass


class UnsupportedMaxval(StegoscopeError, ValueError):
    pass


class VersionMismatch(StegoscopeError, ValueError):
    pass


class ShapeMismatch(StegoscopeError, ValueError):
    pass


class DegenerateBatch(StegoscopeError, ValueError):
    pass


class NonFiniteGradient(StegoscopeError, FloatingPointError):
    pass


class NonFiniteLoss(StegoscopeError, FloatingPointError):
    pass


class BadConfig(StegoscopeError, ValueError):
    pass


class EmptyCorpus(StegoscopeError, ValueError):
    pass


class EmptySplit(StegoscopeError, ValueError):
    pass


class EmptyInput(StegoscopeError, ValueError):
    pass


class EmptyMask(StegoscopeError, ValueError):
    pass


class ZeroVariance(StegoscopeError, ValueError):
    pass


class TooFewPoints(StegoscopeError, ValueError):
    pass


class DegenerateVariance(StegoscopeError, ValueError):
    pass


class LengthMismatch(StegoscopeError, ValueError):
    pass


class BadDF(StegoscopeError, ValueError):
    pass
