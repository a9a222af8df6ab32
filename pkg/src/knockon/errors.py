"""Exception types shared across the package."""

from __future__ import annotations


class KnockonError(Exception):
    """Base class for all package-specific errors."""


class MissingHeader(KnockonError):
    """A CSV stream did not start with the expected header row."""


class EmptyInput(KnockonError):
    """An operation that requires at least one record received none."""


class InsufficientData(KnockonError):
    """Not enough samples to fit a distribution."""


class MissingSpec(KnockonError):
    """A tuple's action has no entry in the supplied spec mapping."""

    def __init__(self, action_id: str):
        super().__init__(f"no action spec supplied for action_id {action_id!r}")
        self.action_id = action_id


class EmptyCorpus(KnockonError):
    """Feature encoding received no sequences."""


class ShapeMismatch(KnockonError):
    """An array does not have the shape a model expects."""


class NonFiniteGradient(KnockonError):
    """A backward pass produced NaN or infinite gradients."""


class NonFiniteLoss(KnockonError):
    """Training aborted because the loss became NaN or infinite.

    Carries the partial checkpoint so the diverged state can be inspected.
    """

    def __init__(self, epoch: int, checkpoint=None):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
        self.checkpoint = checkpoint


class MissingNormalization(KnockonError):
    """A checkpoint has no normalization parameters to denormalize with."""


class DegenerateK(KnockonError):
    """The noise floor k is zero or negative; the weighted score is undefined."""


class InvalidSpec(KnockonError):
    """A generator line spec violates its invariants."""


class IdMismatch(KnockonError):
    """Ground truth and classification cover different sequence ids."""
