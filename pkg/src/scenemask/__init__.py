"""Task-relevant scene recomposition for robust visuomotor policies.

The pipeline segments the task-relevant content of each frame (gripper
fingers plus prompted objects), tracks it over time, and recomposes it onto a
fixed virtual background. Policies trained and run behind the same transform
never see the parts of the scene that change between deployments.
"""

from .compositor import BackgroundSpec, compose_frame, make_background, union_masks
from .core import (
    GRIP_CLOSED,
    GRIP_OPEN,
    VARIANTS,
    ActionVector,
    BinaryMask,
    BoundingBox,
    EntitySummary,
    Episode,
    EpisodeStep,
    Frame,
    HorizonConfig,
    Keypoint,
    PromptSet,
    ScenemaskError,
    ValidationError,
)
from .pipeline import (
    BackendConfig,
    FrameTransformer,
    PipelineConfig,
    transform_dataset,
    transform_episode,
)

__version__ = "0.1.0"

__all__ = [
    "ActionVector",
    "BackendConfig",
    "BackgroundSpec",
    "BinaryMask",
    "BoundingBox",
    "EntitySummary",
    "Episode",
    "EpisodeStep",
    "Frame",
    "FrameTransformer",
    "GRIP_CLOSED",
    "GRIP_OPEN",
    "HorizonConfig",
    "Keypoint",
    "PipelineConfig",
    "PromptSet",
    "ScenemaskError",
    "ValidationError",
    "VARIANTS",
    "__version__",
    "compose_frame",
    "make_background",
    "transform_dataset",
    "transform_episode",
    "union_masks",
]
