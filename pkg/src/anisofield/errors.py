"""Shared exception types."""


class Refusal(RuntimeError):
    """A hypothesis of the underlying result is violated (or the discretization
    is too coarse to be meaningful); we refuse rather than return a wrong number."""


class ModelRejected(RuntimeError):
    """Covariance factorization failed after maximal jitter, or the model is degenerate."""


class ZeroHit(RuntimeError):
    """A path modulus fell below the zero tolerance: the polar-set event at machine scale."""


class PhaseJumpTooLarge(RuntimeError):
    """An adjacent phase increment came too close to pi; the grid is under-resolved."""
