"""Perception backends: ground-truth oracle, deterministic color tracker, remote client."""

from .base import BackendError, MaskSession, PerceptionBackend, SessionInitError, StepContext
from .color import ColorBackend, ColorTrackSession, TAU_COLOR_DEFAULT, TAU_IOU_DEFAULT
from .oracle import OracleBackend
from .remote import RemoteBackend

__all__ = [
    "BackendError",
    "ColorBackend",
    "ColorTrackSession",
    "MaskSession",
    "OracleBackend",
    "PerceptionBackend",
    "RemoteBackend",
    "SessionInitError",
    "StepContext",
    "TAU_COLOR_DEFAULT",
    "TAU_IOU_DEFAULT",
]
