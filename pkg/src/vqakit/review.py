"""HTTP review service for the human filtering and correction step.

Serves the AwaitingReview queue with short exclusive leases (so two
curators never hold the same item), applies decisions with optimistic
concurrency on the candidate revision, and exposes funnel stats plus an
export of the approved pool. Every accepted decision is an event in the
store's append-only log before the request is acknowledged.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import FileResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import DataError
from .evalqa import FILTER_FLAGS, check_approvable, funnel_report
from .stats import type_distribution
from .store import CandidateStore

DEFAULT_LEASE_TTL = 300.0
MAX_BATCH = 100

DECISION_ACTIONS = ("approve", "reject", "edit_negative", "edit_feedback")


class Decision(BaseModel):
    candidate_id: str
    action: str
    payload: str | None = None
    reviewer: str
    base_revision: int


class LeaseTable:
    """In-memory exclusive leases with a TTL; not persisted (leases expire)."""

    def __init__(self, ttl: float):
        self.ttl = ttl
        self._leases: dict[str, tuple[str, float]] = {}
        self._lock = threading.Lock()

    def claim(self, candidate_id: str, owner: str) -> bool:
        now = time.monotonic()
        with self._lock:
            held = self._leases.get(candidate_id)
            if held is not None and held[1] > now and held[0] != owner:
                return False
            self._leases[candidate_id] = (owner, now + self.ttl)
            return True

    def release(self, candidate_id: str) -> None:
        with self._lock:
            self._leases.pop(candidate_id, None)


def _item_view(candidate) -> dict:
    return {
        "candidate_id": candidate.candidate_id,
        "image_id": candidate.base.image.id,
        "image_url": f"/api/image/{candidate.base.image.id}",
        "question": candidate.base.question,
        "question_type": candidate.base.question_type,
        "ground_truth": candidate.base.answer,
        "negative": candidate.negative_answer,
        "feedback": candidate.feedback,
        "filter_flags": sorted(candidate.filter_flags),
        "revision": candidate.revision,
    }


def create_app(
    store: CandidateStore,
    image_root: str | Path | None = None,
    token: str | None = None,
    lease_ttl: float = DEFAULT_LEASE_TTL,
    ui_dist: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="vqakit review")
    leases = LeaseTable(lease_ttl)
    image_root = Path(image_root) if image_root else None

    def check_token(request: Request) -> None:
        if token is not None and request.headers.get("X-Auth-Token") != token:
            raise HTTPException(status_code=401, detail="missing or wrong auth token")

    @app.get("/api/queue")
    def queue(
        request: Request,
        cursor: str = "",
        n: int = Query(default=10, ge=1, le=MAX_BATCH),
        reviewer: str = "anonymous",
        _=Depends(check_token),
    ) -> dict:
        pending = store.candidates(status="AwaitingReview")
        if cursor:
            known = {c.candidate_id for c in store.candidates()}
            if cursor not in known:
                raise HTTPException(status_code=400, detail=f"invalid cursor {cursor!r}")
            pending = [c for c in pending if c.candidate_id > cursor]
        items = []
        for candidate in pending:
            if len(items) >= n:
                break
            if leases.claim(candidate.candidate_id, reviewer):
                items.append(_item_view(candidate))
        next_cursor = items[-1]["candidate_id"] if items else ""
        return {"items": items, "cursor": next_cursor}

    @app.post("/api/decision")
    def decide(decision: Decision, request: Request, _=Depends(check_token)) -> dict:
        if decision.action not in DECISION_ACTIONS:
            raise HTTPException(status_code=400, detail=f"unknown action {decision.action!r}")
        candidate = store.get(decision.candidate_id)
        if candidate is None:
            raise HTTPException(status_code=404, detail=f"no candidate {decision.candidate_id}")
        if candidate.status != "AwaitingReview":
            raise HTTPException(status_code=409, detail=f"candidate is {candidate.status}, not reviewable")
        if decision.base_revision != candidate.revision:
            raise HTTPException(
                status_code=409,
                detail=f"stale revision {decision.base_revision}, current is {candidate.revision}",
            )
        if decision.action.startswith("edit_"):
            if not (decision.payload or "").strip():
                raise HTTPException(status_code=400, detail="edit actions need a non-empty payload")
            payload = {"text": decision.payload}
        else:
            payload = {}
        if decision.action == "approve":
            try:
                check_approvable(candidate)
            except DataError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        try:
            store.append(decision.action, decision.candidate_id, payload, reviewer=decision.reviewer)
        except DataError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        if decision.action in ("approve", "reject"):
            leases.release(decision.candidate_id)
        return {"item": _item_view(store.get(decision.candidate_id))}

    @app.get("/api/stats")
    def stats(request: Request, _=Depends(check_token)) -> dict:
        candidates = store.candidates()
        statuses: dict[str, int] = {}
        flags = {flag: 0 for flag in FILTER_FLAGS}
        for candidate in candidates:
            statuses[candidate.status] = statuses.get(candidate.status, 0) + 1
            for flag in candidate.filter_flags:
                if flag in flags:
                    flags[flag] += 1
        return {
            "funnel": funnel_report(candidates).to_dict(),
            "statuses": statuses,
            "flags": flags,
            "types": type_distribution(c.base.question_type for c in candidates),
            "total": len(candidates),
        }

    @app.get("/api/image/{image_id}")
    def image(image_id: str, request: Request, _=Depends(check_token)):
        if image_root is None:
            raise HTTPException(status_code=404, detail="no image root configured")
        uri = None
        for candidate in store.candidates():
            if candidate.base.image.id == image_id:
                uri = candidate.base.image.uri
                break
        if uri is None:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        path = (image_root / uri).resolve()
        if image_root.resolve() not in path.parents and path != image_root.resolve():
            raise HTTPException(status_code=400, detail="image path escapes the image root")
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"image file missing: {uri}")
        return FileResponse(path)

    @app.get("/api/export")
    def export(request: Request, _=Depends(check_token)) -> PlainTextResponse:
        rows = [c.to_dict() for c in store.candidates(status="Approved")]
        body = "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows)
        return PlainTextResponse(body, media_type="application/jsonl")

    if ui_dist is not None and Path(ui_dist).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dist), html=True), name="ui")

    return app


def serve(
    data_dir: str | Path,
    port: int = 8080,
    host: str = "127.0.0.1",
    image_root: str | Path | None = None,
    token: str | None = None,
    ui_dist: str | Path | None = None,
) -> None:
    import uvicorn

    store = CandidateStore(data_dir)
    app = create_app(store, image_root=image_root, token=token, ui_dist=ui_dist)
    uvicorn.run(app, host=host, port=port, log_level="warning")
