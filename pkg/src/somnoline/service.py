"""Authenticated HTTP front end: uploads, status, callbacks, downloads, admin.

Upload lifecycle: received -> splitting -> split -> processing -> ready, with
``failed`` reachable from anywhere. The splitter's split-complete callback
walks received through processing (registering one night record per split
night); each process-complete marks a night ready, and the recording becomes
ready when every night is. Callbacks are idempotent so redelivered worker
jobs can signal twice without harm. Records are persisted as one JSON file
per recording under the storage root; that file is the source of truth.
"""
from __future__ import annotations

import hashlib
import io
import json
import secrets
import threading
import time
import uuid
import zipfile
from dataclasses import dataclass, field
from pathlib import PurePosixPath

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .edf import parse_nights_manifest
from .errors import SomnolineError
from .queueing import KIND_SPLIT, DurableQueue, JobMessage
from .workers import Storage, bundle_ref

STATES = ("received", "splitting", "split", "processing", "ready")
ROLE_TECHNOLOGIST = "technologist"
ROLE_ADMIN = "admin"

_BUNDLE_FILES = {
    "scoring": ("night.edf", "labels.csv"),
    "ml": ("night.edf", "hypnodensity.csv", "gray_mask.csv"),
}


class IllegalTransition(SomnolineError):
    """Upload state machine rejected a callback."""


class UnknownRecording(SomnolineError):
    pass


# --- users and sessions ------------------------------------------------------

def hash_secret(secret: str, salt: bytes) -> str:
    return hashlib.pbkdf2_hmac("sha256", secret.encode(), salt, 100_000).hex()


@dataclass(frozen=True)
class User:
    username: str
    center_id: str
    role: str
    salt_hex: str
    secret_hash: str


def make_user(username: str, secret: str, center_id: str, role: str = ROLE_TECHNOLOGIST) -> dict:
    salt = secrets.token_bytes(16)
    return {
        "username": username,
        "center_id": center_id,
        "role": role,
        "salt": salt.hex(),
        "secret_hash": hash_secret(secret, salt),
    }


class UserStore:
    def __init__(self, users: list[User]):
        self._users = {u.username: u for u in users}

    @classmethod
    def from_file(cls, path) -> "UserStore":
        docs = json.loads(open(path).read())
        return cls(
            [
                User(
                    username=d["username"],
                    center_id=d["center_id"],
                    role=d["role"],
                    salt_hex=d["salt"],
                    secret_hash=d["secret_hash"],
                )
                for d in docs
            ]
        )

    def verify(self, username: str, secret: str) -> User | None:
        user = self._users.get(username)
        if user is None:
            return None
        computed = hash_secret(secret, bytes.fromhex(user.salt_hex))
        if secrets.compare_digest(computed, user.secret_hash):
            return user
        return None


class SessionStore:
    def __init__(self, ttl_s: float = 12 * 3600.0):
        self.ttl_s = ttl_s
        self._sessions: dict[str, tuple[User, float]] = {}
        self._lock = threading.Lock()

    def create(self, user: User) -> str:
        token = secrets.token_urlsafe(32)
        with self._lock:
            self._sessions[token] = (user, time.time() + self.ttl_s)
        return token

    def resolve(self, token: str) -> User | None:
        with self._lock:
            entry = self._sessions.get(token)
            if entry is None:
                return None
            user, expires = entry
            if time.time() >= expires:
                del self._sessions[token]
                return None
            return user


# --- upload records ----------------------------------------------------------

@dataclass
class UploadRecord:
    recording_id: str
    center_id: str
    uploader: str
    size_bytes: int
    state: str = "received"
    filename: str = ""
    nights: list[dict] = field(default_factory=list)
    timestamps: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "center_id": self.center_id,
            "uploader": self.uploader,
            "size_bytes": self.size_bytes,
            "state": self.state,
            "filename": self.filename,
            "nights": self.nights,
            "timestamps": self.timestamps,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "UploadRecord":
        return cls(**doc)


class RecordingRegistry:
    """Persistent upload-record store; transitions serialize per recording."""

    def __init__(self, storage: Storage):
        self.storage = storage
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, recording_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(recording_id, threading.Lock())

    def _ref(self, recording_id: str) -> str:
        return f"meta/{recording_id}.json"

    def _save(self, record: UploadRecord) -> None:
        self.storage.write_text(self._ref(record.recording_id), json.dumps(record.to_json()))

    def create(self, record: UploadRecord) -> None:
        record.timestamps[record.state] = time.time()
        self._save(record)

    def get(self, recording_id: str) -> UploadRecord:
        ref = self._ref(recording_id)
        if not self.storage.exists(ref):
            raise UnknownRecording(f"recording {recording_id!r} not found")
        return UploadRecord.from_json(json.loads(self.storage.read_text(ref)))

    def list_all(self) -> list[UploadRecord]:
        meta = self.storage.root / "meta"
        if not meta.is_dir():
            return []
        records = []
        for path in sorted(meta.glob("*.json")):
            records.append(UploadRecord.from_json(json.loads(path.read_text())))
        return records

    def _advance(self, record: UploadRecord, target: str) -> None:
        if target == "failed":
            record.state = "failed"
            record.timestamps["failed"] = time.time()
            return
        order = STATES.index
        if order(target) != order(record.state) + 1:
            raise IllegalTransition(
                f"cannot move {record.recording_id} from {record.state} to {target}"
            )
        record.state = target
        record.timestamps[target] = time.time()

    def apply_split_complete(self, recording_id: str, nights: int) -> UploadRecord:
        with self._lock_for(recording_id):
            record = self.get(recording_id)
            if record.state in ("processing", "ready"):
                if len(record.nights) != nights:
                    raise IllegalTransition(
                        f"duplicate split-complete disagrees on night count "
                        f"({len(record.nights)} vs {nights})"
                    )
                return record  # idempotent duplicate
            if record.state != "received":
                raise IllegalTransition(
                    f"split-complete arrived in state {record.state}"
                )
            self._advance(record, "splitting")
            self._advance(record, "split")
            record.nights = [{"index": i, "state": "processing"} for i in range(nights)]
            self._advance(record, "processing")
            self._save(record)
            return record

    def apply_process_complete(self, recording_id: str, night_index: int) -> UploadRecord:
        with self._lock_for(recording_id):
            record = self.get(recording_id)
            if record.state not in ("processing", "ready"):
                raise IllegalTransition(
                    f"process-complete arrived in state {record.state}"
                )
            for night in record.nights:
                if night["index"] == night_index:
                    night["state"] = "ready"
                    break
            else:
                raise UnknownRecording(
                    f"recording {recording_id!r} has no night {night_index}"
                )
            if record.state == "processing" and all(
                n["state"] == "ready" for n in record.nights
            ):
                self._advance(record, "ready")
            self._save(record)
            return record

    def mark_failed(self, recording_id: str) -> None:
        with self._lock_for(recording_id):
            record = self.get(recording_id)
            self._advance(record, "failed")
            self._save(record)


# --- HTTP application --------------------------------------------------------

class LoginBody(BaseModel):
    username: str
    secret: str


class SplitCompleteBody(BaseModel):
    recording_id: str
    nights: int


class ProcessCompleteBody(BaseModel):
    recording_id: str
    night_index: int


def create_app(
    *,
    storage: Storage,
    registry: RecordingRegistry,
    users: UserStore,
    sessions: SessionStore,
    q_split: DurableQueue,
    q_process: DurableQueue,
    internal_secret: str,
) -> FastAPI:
    app = FastAPI(title="somnoline")

    def current_user(authorization: str | None = Header(default=None)) -> User:
        if not authorization or not authorization.startswith("Bearer "):
            raise HTTPException(401, "missing bearer token")
        user = sessions.resolve(authorization.removeprefix("Bearer ").strip())
        if user is None:
            raise HTTPException(401, "invalid or expired token")
        return user

    def admin_user(user: User = Depends(current_user)) -> User:
        if user.role != ROLE_ADMIN:
            raise HTTPException(403, "admin role required")
        return user

    def check_internal(secret: str | None) -> None:
        if secret != internal_secret:
            raise HTTPException(403, "bad internal secret")

    def visible_record(recording_id: str, user: User) -> UploadRecord:
        try:
            record = registry.get(recording_id)
        except UnknownRecording:
            raise HTTPException(404, "recording not found") from None
        if user.role != ROLE_ADMIN and record.center_id != user.center_id:
            raise HTTPException(403, "recording belongs to another center")
        return record

    @app.exception_handler(SomnolineError)
    async def somnoline_error(_, exc: SomnolineError):
        status = 409 if isinstance(exc, IllegalTransition) else 400
        if isinstance(exc, UnknownRecording):
            status = 404
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.post("/auth/login")
    def login(body: LoginBody):
        user = users.verify(body.username, body.secret)
        if user is None:
            raise HTTPException(401, "invalid credentials")
        token = sessions.create(user)
        return {"token": token, "role": user.role, "center_id": user.center_id}

    @app.post("/recordings", status_code=201)
    async def upload_recording(
        request: Request,
        user: User = Depends(current_user),
        x_filename: str | None = Header(default=None),
        x_nights_manifest: str | None = Header(default=None),
    ):
        recording_id = uuid.uuid4().hex[:12]
        ref = f"uploads/{recording_id}.edf"
        target = storage.path(ref)
        target.parent.mkdir(parents=True, exist_ok=True)
        size = 0
        tmp = target.with_suffix(".part")
        with open(tmp, "wb") as sink:
            async for chunk in request.stream():
                sink.write(chunk)
                size += len(chunk)
        if size == 0:
            tmp.unlink()
            raise HTTPException(400, "empty upload")
        tmp.replace(target)
        if x_nights_manifest:
            parse_nights_manifest(x_nights_manifest)  # validate before storing
            storage.write_text(ref + ".nights.json", x_nights_manifest)

        registry.create(
            UploadRecord(
                recording_id=recording_id,
                center_id=user.center_id,
                uploader=user.username,
                size_bytes=size,
                filename=x_filename or "",
            )
        )
        q_split.enqueue(
            JobMessage(job_id=f"split:{recording_id}", kind=KIND_SPLIT, recording_ref=ref)
        )
        return {"recording_id": recording_id}

    @app.get("/recordings")
    def list_recordings(user: User = Depends(current_user)):
        records = [
            r.to_json()
            for r in registry.list_all()
            if user.role == ROLE_ADMIN or r.center_id == user.center_id
        ]
        return {"recordings": records}

    @app.get("/recordings/{recording_id}")
    def get_status(recording_id: str, user: User = Depends(current_user)):
        return visible_record(recording_id, user).to_json()

    @app.get("/recordings/{recording_id}/nights/{night_index}/{bundle}")
    def download_bundle(
        recording_id: str,
        night_index: int,
        bundle: str,
        user: User = Depends(current_user),
    ):
        if bundle not in _BUNDLE_FILES:
            raise HTTPException(404, "bundle must be 'scoring' or 'ml'")
        record = visible_record(recording_id, user)
        night = next((n for n in record.nights if n["index"] == night_index), None)
        if night is None:
            raise HTTPException(404, "no such night")
        if night["state"] != "ready":
            raise HTTPException(409, "night not ready")
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as archive:
            for name in _BUNDLE_FILES[bundle]:
                ref = bundle_ref(recording_id, night_index, bundle, name)
                archive.writestr(f"{recording_id}_night_{night_index}/{name}",
                                 storage.read_bytes(ref))
        filename = f"{recording_id}_night_{night_index}_{bundle}.zip"
        return Response(
            content=buffer.getvalue(),
            media_type="application/zip",
            headers={"Content-Disposition": f'attachment; filename="{filename}"'},
        )

    @app.get("/admin/uploads")
    def admin_list(center: str | None = None, user: User = Depends(admin_user)):
        records = registry.list_all()
        if center is not None:
            records = [r for r in records if r.center_id == center]
        return {"recordings": [r.to_json() for r in records]}

    @app.get("/queues/stats")
    def queue_stats(user: User = Depends(admin_user)):
        split_stats = q_split.stats()
        process_stats = q_process.stats()
        return {
            "split": split_stats.__dict__,
            "process": process_stats.__dict__,
        }

    @app.post("/internal/split-complete")
    def split_complete(
        body: SplitCompleteBody,
        x_internal_secret: str | None = Header(default=None),
    ):
        check_internal(x_internal_secret)
        record = registry.apply_split_complete(body.recording_id, body.nights)
        return {"state": record.state}

    @app.post("/internal/process-complete")
    def process_complete(
        body: ProcessCompleteBody,
        x_internal_secret: str | None = Header(default=None),
    ):
        check_internal(x_internal_secret)
        record = registry.apply_process_complete(body.recording_id, body.night_index)
        return {"state": record.state}

    return app


def build_service(config) -> tuple[FastAPI, Storage, DurableQueue, DurableQueue]:
    """Wire the app from an AppConfig; shared by `serve` and tests."""
    storage = Storage(config.service.storage_root)
    registry = RecordingRegistry(storage)
    users = UserStore.from_file(config.service.user_file)
    sessions = SessionStore(ttl_s=config.service.token_ttl_s)
    q_split = DurableQueue(config.queue.split_log, max_attempts=config.queue.max_attempts)
    q_process = DurableQueue(config.queue.process_log, max_attempts=config.queue.max_attempts)
    app = create_app(
        storage=storage,
        registry=registry,
        users=users,
        sessions=sessions,
        q_split=q_split,
        q_process=q_process,
        internal_secret=config.service.internal_secret,
    )
    return app, storage, q_split, q_process
