"""Deterministic language grounding: a small prompt grammar plus a spatial resolver.

Grammar (case-insensitive, articles and politeness fillers ignored):

    PROMPT := TARGET
            | TARGET "on the left" | TARGET "on the right"
            | TARGET "that is" ("closer to" | "farther from") "the" COLOR SHAPE
    TARGET := COLOR SHAPE

COLOR is one of the shared 12-color vocabulary; SHAPE is cube, cross, or blob.
Resolution is over entity summaries (id, shape, color, pixel centroid) and is
total and deterministic: ties break by lower centroid y, then lower id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .colors import COLOR_NAMES
from .core import EntitySummary, ScenemaskError

SHAPES = ("cube", "cross", "blob")
RELATIONS = ("left", "right", "closer", "farther")
FILLER_WORDS = frozenset({"the", "a", "an", "please", "push"})

GRIPPER_PHRASE = "gripper fingers"


class PromptParseError(ScenemaskError):
    """Prompt text does not match the grammar; carries the offending token index."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (token {position})")
        self.position = position


class ResolutionError(ScenemaskError):
    """Base class for resolver failures."""


class TargetNotFoundError(ResolutionError):
    """No entity matches the prompt's color and shape."""


class AmbiguousTargetError(ResolutionError):
    """Several entities match a prompt that has no disambiguating relation."""


class ReferenceResolutionError(ResolutionError):
    """The relational reference matches zero or several entities."""


@dataclass(frozen=True)
class PromptQuery:
    """Parsed prompt: target color/shape plus an optional spatial relation."""

    color: str
    shape: str
    relation: str | None = None
    ref_color: str | None = None
    ref_shape: str | None = None

    def __post_init__(self) -> None:
        if self.relation is not None and self.relation not in RELATIONS:
            raise PromptParseError(f"unknown relation {self.relation!r}", 0)
        if self.relation in ("closer", "farther") and (self.ref_color is None or self.ref_shape is None):
            raise PromptParseError("relational prompt needs a reference color and shape", 0)


def _tokens(text: str) -> list[tuple[str, int]]:
    """Lowercased tokens with their index in the raw token stream, fillers dropped."""
    raw = text.lower().split()
    return [(tok, i) for i, tok in enumerate(raw) if tok not in FILLER_WORDS]


def _expect_target(toks: list[tuple[str, int]], at: int, what: str) -> tuple[str, str, int]:
    if at >= len(toks):
        raise PromptParseError(f"expected a color to start the {what}", toks[-1][1] + 1 if toks else 0)
    color, pos = toks[at]
    if color not in COLOR_NAMES:
        raise PromptParseError(f"expected a color, got {color!r}", pos)
    if at + 1 >= len(toks):
        raise PromptParseError(f"expected a shape after {color!r}", pos + 1)
    shape, pos = toks[at + 1]
    if shape not in SHAPES:
        raise PromptParseError(f"expected a shape, got {shape!r}", pos)
    return color, shape, at + 2


def parse_prompt(text: str) -> PromptQuery:
    """Parse a target expression, raising PromptParseError on any deviation."""
    toks = _tokens(text)
    if not toks:
        raise PromptParseError("empty prompt", 0)
    color, shape, at = _expect_target(toks, 0, "target")
    if at == len(toks):
        return PromptQuery(color=color, shape=shape)

    words = [t for t, _ in toks[at:]]
    if words == ["on", "left"]:
        return PromptQuery(color=color, shape=shape, relation="left")
    if words == ["on", "right"]:
        return PromptQuery(color=color, shape=shape, relation="right")
    if len(words) >= 2 and words[0] == "that" and words[1] == "is":
        rel_at = at + 2
        if rel_at >= len(toks):
            raise PromptParseError("expected a relation after 'that is'", toks[-1][1] + 1)
        rel, pos = toks[rel_at]
        if rel == "closer":
            linker = "to"
        elif rel == "farther":
            linker = "from"
        else:
            raise PromptParseError(f"expected 'closer' or 'farther', got {rel!r}", pos)
        if rel_at + 1 >= len(toks) or toks[rel_at + 1][0] != linker:
            raise PromptParseError(f"expected {linker!r} after {rel!r}", pos + 1)
        ref_color, ref_shape, end = _expect_target(toks, rel_at + 2, "reference")
        if end != len(toks):
            raise PromptParseError(f"unexpected trailing token {toks[end][0]!r}", toks[end][1])
        return PromptQuery(color=color, shape=shape, relation=rel, ref_color=ref_color, ref_shape=ref_shape)
    raise PromptParseError(f"unexpected token {toks[at][0]!r}", toks[at][1])


def parse_task_prompt(text: str) -> tuple[bool, PromptQuery | None]:
    """Split a task prompt into (wants gripper fingers, optional object query).

    Accepted forms: "gripper fingers", "gripper fingers and <TARGET...>",
    or a bare target expression.
    """
    lowered = " ".join(text.lower().split())
    if lowered == GRIPPER_PHRASE:
        return True, None
    prefix = GRIPPER_PHRASE + " and "
    if lowered.startswith(prefix):
        return True, parse_prompt(lowered[len(prefix):])
    return False, parse_prompt(lowered)


def _id_sort_key(entity_id: str):
    # Numeric ids order numerically so region id 10 sorts after 2.
    return (0, int(entity_id), "") if entity_id.isdigit() else (1, 0, entity_id)


def _tie_key(e: EntitySummary):
    return (e.centroid[1], _id_sort_key(e.entity_id))


def resolve(query: PromptQuery, entities: list[EntitySummary] | tuple[EntitySummary, ...]) -> EntitySummary:
    """Pick the entity a prompt denotes, or raise a ResolutionError.

    - no relation: the target description must match exactly one entity
    - on the left / right: smallest / largest centroid x among matches
    - closer to / farther from: smallest / largest Euclidean centroid distance
      to the unique reference entity (the reference itself is never a candidate)
    Ties break by lower centroid y, then lower id.
    """
    candidates = [e for e in entities if e.color == query.color and e.shape == query.shape]
    reference = None
    if query.relation in ("closer", "farther"):
        refs = [e for e in entities if e.color == query.ref_color and e.shape == query.ref_shape]
        if len(refs) != 1:
            raise ReferenceResolutionError(
                f"reference '{query.ref_color} {query.ref_shape}' matches {len(refs)} entities, need exactly 1"
            )
        reference = refs[0]
        candidates = [e for e in candidates if e.entity_id != reference.entity_id]

    if not candidates:
        raise TargetNotFoundError(f"no entity matches '{query.color} {query.shape}'")

    if query.relation is None:
        if len(candidates) > 1:
            ids = sorted(e.entity_id for e in candidates)
            raise AmbiguousTargetError(
                f"'{query.color} {query.shape}' matches {len(candidates)} entities ({', '.join(ids)}); "
                "add a spatial relation"
            )
        return candidates[0]

    if query.relation == "left":
        return min(candidates, key=lambda e: (e.centroid[0], _tie_key(e)))
    if query.relation == "right":
        return min(candidates, key=lambda e: (-e.centroid[0], _tie_key(e)))

    assert reference is not None

    def dist(e: EntitySummary) -> float:
        return math.dist(e.centroid, reference.centroid)

    if query.relation == "closer":
        return min(candidates, key=lambda e: (dist(e), _tie_key(e)))
    return min(candidates, key=lambda e: (-dist(e), _tie_key(e)))


def resolve_prompt(text: str, entities: list[EntitySummary] | tuple[EntitySummary, ...]) -> EntitySummary:
    """parse_prompt followed by resolve."""
    return resolve(parse_prompt(text), entities)
