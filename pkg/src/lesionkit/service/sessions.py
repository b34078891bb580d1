"""In-memory interactive sessions: click history, undo, wire summaries."""

from __future__ import annotations

import base64
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..clicks import PREDICTION_THRESHOLD, Predictor
from ..data.types import (
    ATTRIBUTE_GROUPS,
    ATTRIBUTE_NAMES,
    GROUP_SLICES,
    NUM_CATEGORIES,
    LesionMask,
    StructuredReport,
    Volume,
    decode_report,
)
from ..errors import BoundsError, NotFoundError, SchemaError
from ..metrics import dsc
from ..refine import NEGATIVE, POSITIVE, PointPrompt
from .rle import encode_mask

AXES = {"axial": 0, "coronal": 1, "sagittal": 2}


@dataclass
class ServedCase:
    """A case as served: ground truth is optional (absent for uploads)."""

    id: str
    volume: Volume
    lesion_type: str = ""
    gt_mask: LesionMask | None = None
    gt_report: StructuredReport | None = None

    @property
    def has_ground_truth(self) -> bool:
        return self.gt_mask is not None


def _uniform_probs() -> np.ndarray:
    probs = np.zeros(NUM_CATEGORIES, dtype=np.float64)
    for name in ATTRIBUTE_NAMES:
        sl = GROUP_SLICES[name]
        probs[sl] = 1.0 / (sl.stop - sl.start)
    return probs


@dataclass
class _Snapshot:
    clicks: list[PointPrompt]
    mask_prob: np.ndarray | None
    report_probs: np.ndarray
    iou_pred: float | None


@dataclass
class Session:
    session_id: str
    case: ServedCase
    clicks: list[PointPrompt] = field(default_factory=list)
    mask_prob: np.ndarray | None = None
    report_probs: np.ndarray = field(default_factory=_uniform_probs)
    iou_pred: float | None = None
    history: list[_Snapshot] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def binary_mask(self) -> np.ndarray:
        if self.mask_prob is None:
            return np.zeros(self.case.volume.shape, dtype=np.uint8)
        return (self.mask_prob >= PREDICTION_THRESHOLD).astype(np.uint8)

    def summary(self) -> dict:
        report = decode_report(self.report_probs)
        probs = {
            name: [float(v) for v in self.report_probs[GROUP_SLICES[name]]]
            for name in ATTRIBUTE_NAMES
        }
        payload = {
            "session_id": self.session_id,
            "case_id": self.case.id,
            "volume_shape": list(self.case.volume.shape),
            "spacing": [float(s) for s in self.case.volume.spacing],
            "n_clicks": len(self.clicks),
            "clicks": [c.as_dict() for c in self.clicks],
            "mask_rle": encode_mask(self.binary_mask()),
            "report": report.as_dict(),
            "probs": probs,
            "iou_pred": self.iou_pred,
            "has_ground_truth": self.case.has_ground_truth,
            "can_undo": len(self.history) > 0,
            "dsc": None,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }
        if self.case.has_ground_truth and self.mask_prob is not None:
            payload["dsc"] = dsc(self.binary_mask(), self.case.gt_mask.data)
        return payload


class SessionService:
    """Owns the model, the served cases, and all live sessions.

    Per-session locks serialize clicks within a session; the store lock guards
    create/lookup. Idle sessions past the TTL are evicted lazily.
    """

    def __init__(
        self,
        model: Predictor,
        cases: list[ServedCase] | None = None,
        idle_ttl_seconds: float | None = None,
    ):
        self.model = model
        self.cases: dict[str, ServedCase] = {c.id: c for c in (cases or [])}
        self.idle_ttl = idle_ttl_seconds
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()

    # -- case registry -------------------------------------------------------
    def list_cases(self) -> list[dict]:
        return [
            {
                "id": c.id,
                "lesion_type": c.lesion_type,
                "volume_shape": list(c.volume.shape),
                "spacing": [float(s) for s in c.volume.spacing],
                "has_ground_truth": c.has_ground_truth,
            }
            for c in self.cases.values()
        ]

    # -- session lifecycle -----------------------------------------------------
    def _evict_idle(self) -> None:
        if self.idle_ttl is None:
            return
        now = time.time()
        stale = [sid for sid, s in self._sessions.items() if now - s.updated_at > self.idle_ttl]
        for sid in stale:
            del self._sessions[sid]

    def create_session(self, case_id: str | None = None, upload: dict | None = None) -> dict:
        if (case_id is None) == (upload is None):
            raise SchemaError("provide exactly one of case_id or upload")
        if case_id is not None:
            case = self.cases.get(case_id)
            if case is None:
                raise NotFoundError(f"unknown case id {case_id!r}")
        else:
            case = _parse_upload(upload)
        session = Session(session_id=uuid.uuid4().hex, case=case)
        with self._store_lock:
            self._evict_idle()
            self._sessions[session.session_id] = session
        return session.summary()

    def get_session(self, session_id: str) -> Session:
        with self._store_lock:
            self._evict_idle()
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return session

    def summary(self, session_id: str) -> dict:
        return self.get_session(session_id).summary()

    # -- interactions -----------------------------------------------------------
    def apply_click(self, session_id: str, coord, label: str) -> dict:
        session = self.get_session(session_id)
        shape = session.case.volume.shape
        coord = tuple(int(c) for c in coord)
        if len(coord) != 3 or any(c < 0 or c >= s for c, s in zip(coord, shape)):
            raise BoundsError(f"click coord {coord} outside volume shape {shape}")
        if label not in (POSITIVE, NEGATIVE):
            raise SchemaError(f"label must be positive or negative, got {label!r}")

        with session.lock:
            session.history.append(
                _Snapshot(
                    clicks=list(session.clicks),
                    mask_prob=session.mask_prob,
                    report_probs=session.report_probs,
                    iou_pred=session.iou_pred,
                )
            )
            prev_mask = session.mask_prob
            session.clicks.append(PointPrompt(coord=coord, label=label, source="user"))
            # seed by click index: identical click sequences replay bit-for-bit
            mask_prob, report_probs, iou_pred = self.model.predict(
                session.case.volume.data,
                list(session.clicks),
                prev_mask=prev_mask,
                seed=len(session.clicks) - 1,
            )
            session.mask_prob = mask_prob
            session.report_probs = np.asarray(report_probs, dtype=np.float64)
            session.iou_pred = float(iou_pred)
            session.updated_at = time.time()
            return session.summary()

    def undo(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            if not session.history:
                return {**session.summary(), "undone": False, "message": "nothing to undo"}
            snap = session.history.pop()
            session.clicks = snap.clicks
            session.mask_prob = snap.mask_prob
            session.report_probs = snap.report_probs
            session.iou_pred = snap.iou_pred
            session.updated_at = time.time()
            return {**session.summary(), "undone": True}

    # -- slices --------------------------------------------------------------
    def get_slice(self, session_id: str, axis: str, index: int) -> dict:
        session = self.get_session(session_id)
        if axis not in AXES:
            raise SchemaError(f"axis must be one of {sorted(AXES)}, got {axis!r}")
        ax = AXES[axis]
        shape = session.case.volume.shape
        if index < 0 or index >= shape[ax]:
            raise BoundsError(f"slice index {index} out of range [0, {shape[ax]}) on {axis}")

        vol = session.case.volume.data
        mask = session.binary_mask()
        intensity = np.take(vol, index, axis=ax).astype(np.float64)
        lo, hi = float(vol.min()), float(vol.max())
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        intensity8 = np.clip((intensity - lo) * scale, 0, 255).astype(np.uint8)
        mask_slice = np.take(mask, index, axis=ax)

        clicks_on_slice = [
            {**c.as_dict(), "click_index": i}
            for i, c in enumerate(session.clicks)
            if c.coord[ax] == index
        ]
        return {
            "axis": axis,
            "index": index,
            "height": int(intensity8.shape[0]),
            "width": int(intensity8.shape[1]),
            "intensity_b64": base64.b64encode(intensity8.tobytes()).decode("ascii"),
            "window": [lo, hi],
            "mask_rle": encode_mask(mask_slice),
            "clicks": clicks_on_slice,
        }

    # -- optional persistence ---------------------------------------------------
    def save_snapshot(self, path: str | Path) -> Path:
        path = Path(path)
        payload = []
        with self._store_lock:
            for s in self._sessions.values():
                payload.append(
                    {
                        "session_id": s.session_id,
                        "case_id": s.case.id,
                        "clicks": [c.as_dict() for c in s.clicks],
                        "mask_prob_b64": _array_b64(s.mask_prob),
                        "mask_shape": list(s.mask_prob.shape) if s.mask_prob is not None else None,
                        "report_probs": [float(v) for v in s.report_probs],
                        "iou_pred": s.iou_pred,
                        "created_at": s.created_at,
                        "updated_at": s.updated_at,
                    }
                )
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload))
        return path

    def load_snapshot(self, path: str | Path) -> int:
        payload = json.loads(Path(path).read_text())
        restored = 0
        with self._store_lock:
            for entry in payload:
                case = self.cases.get(entry["case_id"])
                if case is None:
                    continue
                session = Session(session_id=entry["session_id"], case=case)
                session.clicks = [
                    PointPrompt(tuple(c["coord"]), c["label"], c.get("source", "user"))
                    for c in entry["clicks"]
                ]
                if entry["mask_prob_b64"] is not None:
                    raw = base64.b64decode(entry["mask_prob_b64"])
                    session.mask_prob = np.frombuffer(raw, dtype=np.float32).reshape(
                        entry["mask_shape"]
                    )
                session.report_probs = np.asarray(entry["report_probs"], dtype=np.float64)
                session.iou_pred = entry["iou_pred"]
                session.created_at = entry["created_at"]
                session.updated_at = entry["updated_at"]
                self._sessions[session.session_id] = session
                restored += 1
        return restored


def _array_b64(arr: np.ndarray | None) -> str | None:
    if arr is None:
        return None
    return base64.b64encode(np.ascontiguousarray(arr, dtype=np.float32).tobytes()).decode("ascii")


def _parse_upload(upload: dict) -> ServedCase:
    try:
        shape = tuple(int(v) for v in upload["shape"])
        spacing = tuple(float(v) for v in upload.get("spacing", (1.0, 1.0, 1.0)))
        raw = base64.b64decode(upload["volume_b64"])
        data = np.frombuffer(raw, dtype=np.float32).reshape(shape).copy()
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed volume upload: {exc}") from exc
    case_id = str(upload.get("id", f"upload-{uuid.uuid4().hex[:8]}"))
    return ServedCase(id=case_id, volume=Volume(data, spacing))


def served_cases_from(cases) -> list[ServedCase]:
    """Adapt full Case objects (with ground truth) into served cases."""
    return [
        ServedCase(
            id=c.id,
            volume=c.volume,
            lesion_type=c.lesion_type,
            gt_mask=c.mask,
            gt_report=c.report,
        )
        for c in cases
    ]
