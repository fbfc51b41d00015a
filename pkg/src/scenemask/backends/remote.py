"""HTTP client for a remote grounding/segmentation service.

Wire protocol (JSON over HTTP POST; images are base64 PNG):

    /detect             {image, prompt}             -> {box: [x0,y0,x1,y1]} | {not_found: true}
    /segment/init       {image, boxes, keypoints}   -> {session_id, masks: {track_id: png}}
    /segment/propagate  {session_id, image}         -> {masks: {track_id: png}}
    /select             {image, annotations, prompt}-> {ids: [...]}

Masks are 1-bit PNGs, white = inside. The server keys box tracks "box_<i>" in
request order and keypoint tracks by their label; the client remaps box keys
to the caller's track ids. Region proposal runs locally (the protocol has no
proposal route). The ARRO_REMOTE_ENDPOINT environment variable overrides the
configured endpoint. Responses are validated before any session state changes,
so a malformed reply never corrupts a session.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from dataclasses import dataclass, field

import requests

from ..core import (
    REMOTE_ENDPOINT_ENV,
    BinaryMask,
    BoundingBox,
    Frame,
    Keypoint,
    ValidationError,
)
from ..episode_io import EpisodeFormatError, decode_mask_png, encode_frame_png
from ..regions import RegionAnnotation, propose_regions
from .base import BackendError, SessionInitError, StepContext

DEFAULT_TIMEOUT = 10.0


def _encode_image(frame: Frame) -> str:
    return base64.b64encode(encode_frame_png(frame)).decode("ascii")


def _decode_mask(b64: str, width: int, height: int, track_id: str) -> BinaryMask:
    try:
        mask = decode_mask_png(base64.b64decode(b64, validate=True))
    except (ValueError, EpisodeFormatError, OSError) as exc:
        raise BackendError(f"mask for track {track_id!r} is not a valid 1-bit PNG: {exc}") from exc
    if (mask.height, mask.width) != (height, width):
        raise BackendError(
            f"mask for track {track_id!r} is {mask.width}x{mask.height}, frame is {width}x{height}"
        )
    return mask


def resolve_endpoint(configured: str | None) -> str:
    """Configured endpoint, unless ARRO_REMOTE_ENDPOINT overrides it."""
    env = os.environ.get(REMOTE_ENDPOINT_ENV)
    if env:
        return env.rstrip("/")
    if not configured:
        raise BackendError(
            f"no remote endpoint configured and {REMOTE_ENDPOINT_ENV} is not set"
        )
    return configured.rstrip("/")


class _Transport:
    def __init__(self, endpoint: str, timeout: float):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def post(self, path: str, payload: dict) -> dict:
        url = self.endpoint + path
        body = json.dumps(payload, sort_keys=True).encode("utf-8")
        digest = hashlib.sha256(body).hexdigest()[:12]
        try:
            rsp = requests.post(
                url,
                data=body,
                headers={"Content-Type": "application/json"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise BackendError(f"POST {path} (payload {digest}) failed: {exc}") from exc
        if rsp.status_code != 200:
            raise BackendError(
                f"POST {path} (payload {digest}) returned HTTP {rsp.status_code}"
            )
        try:
            data = rsp.json()
        except ValueError as exc:
            raise BackendError(f"POST {path} (payload {digest}) returned invalid JSON") from exc
        if not isinstance(data, dict):
            raise BackendError(f"POST {path} (payload {digest}) returned a non-object body")
        return data


@dataclass
class RemoteSession:
    """Client side of one server-held segmentation session."""

    transport: _Transport
    session_id: str
    width: int
    height: int
    key_to_track: dict[str, str]
    init_masks: dict[str, BinaryMask]
    frame_index: int = 1

    @property
    def track_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.key_to_track.values()))

    def propagate(self, frame: Frame, ctx: StepContext | None = None) -> dict[str, BinaryMask]:
        if (frame.height, frame.width) != (self.height, self.width):
            raise ValidationError(
                f"frame is {frame.width}x{frame.height}, session expects {self.width}x{self.height}"
            )
        data = self.transport.post(
            "/segment/propagate",
            {"session_id": self.session_id, "image": _encode_image(frame)},
        )
        out = _parse_masks(data, self.key_to_track, self.width, self.height)
        self.frame_index += 1
        return out


def _parse_masks(
    data: dict, key_to_track: dict[str, str], width: int, height: int
) -> dict[str, BinaryMask]:
    masks = data.get("masks")
    if not isinstance(masks, dict):
        raise BackendError("response has no 'masks' object")
    if set(masks) != set(key_to_track):
        raise BackendError(
            f"response tracks {sorted(masks)} do not match session tracks {sorted(key_to_track)}"
        )
    out: dict[str, BinaryMask] = {}
    for key, b64 in masks.items():
        track_id = key_to_track[key]
        if not isinstance(b64, str):
            raise BackendError(f"mask for track {track_id!r} is not a string")
        out[track_id] = _decode_mask(b64, width, height, track_id)
    return out


class RemoteBackend:
    """Grounding and segmentation delegated to an HTTP service."""

    name = "remote"

    def __init__(self, endpoint: str | None = None, timeout: float = DEFAULT_TIMEOUT):
        self.transport = _Transport(resolve_endpoint(endpoint), timeout)

    def detect(self, frame: Frame, prompt: str, ctx: StepContext | None = None) -> BoundingBox | None:
        data = self.transport.post(
            "/detect", {"image": _encode_image(frame), "prompt": prompt}
        )
        if data.get("not_found") is True:
            return None
        box = data.get("box")
        if not isinstance(box, list) or len(box) != 4:
            raise BackendError(f"/detect returned neither a box nor not_found: {data}")
        try:
            bb = BoundingBox(*(int(v) for v in box))
            bb.check_within(frame.width, frame.height)
        except (TypeError, ValueError) as exc:
            raise BackendError(f"/detect returned an invalid box {box}: {exc}") from exc
        return bb

    def propose(self, frame: Frame, ctx: StepContext | None = None) -> list[RegionAnnotation]:
        return propose_regions(frame)

    def select(
        self,
        frame: Frame,
        annotations: list[RegionAnnotation],
        task_prompt: str,
        ctx: StepContext | None = None,
    ) -> list[int]:
        payload = {
            "image": _encode_image(frame),
            "annotations": [
                {
                    "id": a.region_id,
                    "centroid": [a.centroid[0], a.centroid[1]],
                    "mean_color": list(a.mean_color),
                }
                for a in annotations
            ],
            "prompt": task_prompt,
        }
        data = self.transport.post("/select", payload)
        ids = data.get("ids")
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise BackendError(f"/select returned invalid ids: {data}")
        known = {a.region_id for a in annotations}
        bad = [i for i in ids if i not in known]
        if bad:
            raise BackendError(f"/select returned unknown region ids {bad}")
        return list(ids)

    def init_session(
        self,
        frame: Frame,
        boxes: list[tuple[str, BoundingBox]],
        keypoints: list[Keypoint],
        ctx: StepContext | None = None,
    ) -> RemoteSession:
        payload = {
            "image": _encode_image(frame),
            "boxes": [[b.x0, b.y0, b.x1, b.y1] for _, b in boxes],
            "keypoints": [[kp.x, kp.y, kp.label] for kp in keypoints],
        }
        data = self.transport.post("/segment/init", payload)
        session_id = data.get("session_id")
        if not isinstance(session_id, str) or not session_id:
            raise SessionInitError(f"/segment/init returned no session_id: {data}")
        key_to_track = {f"box_{i}": track_id for i, (track_id, _) in enumerate(boxes)}
        key_to_track.update({kp.label: kp.label for kp in keypoints})
        if len(key_to_track) != len(boxes) + len(keypoints):
            raise SessionInitError("box and keypoint track keys collide")
        try:
            init_masks = _parse_masks(data, key_to_track, frame.width, frame.height)
        except BackendError as exc:
            raise SessionInitError(str(exc)) from exc
        return RemoteSession(
            transport=self.transport,
            session_id=session_id,
            width=frame.width,
            height=frame.height,
            key_to_track=key_to_track,
            init_masks=init_masks,
        )
