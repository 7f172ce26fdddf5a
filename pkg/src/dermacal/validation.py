"""Array validation helpers shared by the numerical modules.

Color values travel as float arrays whose last axis holds the three
components; these helpers normalize inputs to that convention and raise
errors that name the offending channel.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, ValidationError

_CHANNELS = ("r", "g", "b")
_LAB_CHANNELS = ("L*", "a*", "b*")


def as_triplets(values, name="color"):
    """Coerce to a float64 array with a trailing axis of size 3.

    Raises ``ValidationError`` on a wrong trailing dimension and
    ``DomainError`` on non-finite entries.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] != 3:
        raise ValidationError(
            f"{name} values must have a trailing axis of size 3, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DomainError(f"{name} contains a non-finite value at index {tuple(bad)}")
    return arr


def check_channel_range(arr, low, high, name, channels=_CHANNELS):
    """Require every component of ``arr`` to lie in [low, high].

    The error message names the first offending channel, matching the
    channel order of the trailing axis.
    """
    outside = (arr < low) | (arr > high)
    if np.any(outside):
        idx = tuple(np.argwhere(outside)[0])
        channel = channels[idx[-1]]
        raise DomainError(
            f"{name} channel '{channel}' out of range [{low}, {high}]: "
            f"got {arr[idx]!r} at index {idx}"
        )
    return arr


def check_non_negative(arr, name, channels=_CHANNELS):
    """Require every component of ``arr`` to be >= 0."""
    negative = arr < 0
    if np.any(negative):
        idx = tuple(np.argwhere(negative)[0])
        channel = channels[idx[-1]]
        raise DomainError(
            f"{name} channel '{channel}' must be non-negative: got {arr[idx]!r} at index {idx}"
        )
    return arr


def as_lab(values, name="lab"):
    """Coerce CIELAB triples; finite components only, L* soft-bounded later."""
    return as_triplets(values, name=name)


def as_matrix(values, shape, name):
    """Coerce to a float64 array of an exact shape."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def lab_channel_name(index):
    """Channel label for the trailing Lab axis."""
    return _LAB_CHANNELS[index]
