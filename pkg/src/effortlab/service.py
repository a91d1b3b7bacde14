"""Listening-test HTTP service: playlists, one-shot audio, durable responses,
and score reporting consistent with offline scoring."""

from __future__ import annotations

import hashlib
import json
import os
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response

from .scoring import (
    QualificationStatus,
    Trial,
    TrialResponse,
    aggregate,
    qualify,
    reports_to_csv,
)

MAX_TEST_TRIALS = 720
N_REFERENCE_TRIALS = 10
DEVICES = ("earbuds", "headphones", "speakers")
GROUPING = ("system", "voice", "masker", "snr_db")


@dataclass
class Session:
    session_id: str
    listener_id: str
    device: str
    playlist: list[str]
    cursor: int = 0

    @property
    def done(self) -> bool:
        return self.cursor >= len(self.playlist)

    @property
    def current_trial(self) -> Optional[str]:
        return None if self.done else self.playlist[self.cursor]


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class TestService:
    """State machine behind the HTTP surface; replayable from its JSONL log."""

    def __init__(self, trials: dict[str, Trial], audio_dir, log_path, seed: int = 0,
                 n_reference: int = N_REFERENCE_TRIALS, max_test_trials: int = MAX_TEST_TRIALS):
        self.trials = trials
        self.audio_paths = {t: Path(audio_dir) / f"{t}.wav" for t in trials}
        self.log_path = Path(log_path)
        self.seed = seed
        self.n_reference = n_reference
        self.max_test_trials = max_test_trials
        self.sessions: dict[str, Session] = {}
        self.listener_utterances: dict[str, set] = {}
        self.listener_sessions: dict[str, int] = {}
        self.responses: list[TrialResponse] = []
        self.audio_tokens: dict[str, str] = {}  # token -> trial_id, cleared on use
        self._lock = threading.Lock()
        if self.log_path.exists():
            self._replay()

    # -- persistence ---------------------------------------------------------

    def _append(self, record: dict) -> None:
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")
            f.flush()
            os.fsync(f.fileno())

    def _replay(self) -> None:
        with open(self.log_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                if record["event"] == "session":
                    self._register_session(
                        Session(
                            session_id=record["session_id"],
                            listener_id=record["listener_id"],
                            device=record["device"],
                            playlist=record["playlist"],
                        )
                    )
                elif record["event"] == "response":
                    session = self.sessions[record["session_id"]]
                    self.responses.append(
                        TrialResponse(
                            trial_id=record["trial_id"],
                            listener_id=record["listener_id"],
                            transcript=record["transcript"],
                            audio_device=record["device"],
                            timestamp=record["timestamp"],
                        )
                    )
                    session.cursor += 1

    def _register_session(self, session: Session) -> None:
        self.sessions[session.session_id] = session
        used = self.listener_utterances.setdefault(session.listener_id, set())
        for trial_id in session.playlist:
            used.add(self._utterance(trial_id))
        self.listener_sessions[session.listener_id] = (
            self.listener_sessions.get(session.listener_id, 0) + 1
        )

    def _utterance(self, trial_id: str) -> str:
        return self.trials[trial_id].utterance_id or trial_id.rsplit("_", 1)[0]

    # -- operations ----------------------------------------------------------

    def create_session(self, listener_id: str, device: str) -> Session:
        if device not in DEVICES:
            raise ApiError(400, "bad_device", f"device must be one of {DEVICES}")
        with self._lock:
            used = self.listener_utterances.get(listener_id, set())
            test_pool = [
                t for t in sorted(self.trials)
                if not self.trials[t].is_reference_trial and self._utterance(t) not in used
            ]
            ref_pool = [
                t for t in sorted(self.trials)
                if self.trials[t].is_reference_trial and self._utterance(t) not in used
            ]
            if not test_pool:
                raise ApiError(409, "pool_exhausted", "no unseen test trials remain for listener")
            if len(ref_pool) < self.n_reference:
                raise ApiError(
                    409, "pool_exhausted",
                    f"need {self.n_reference} unseen reference trials, have {len(ref_pool)}",
                )
            n_session = self.listener_sessions.get(listener_id, 0)
            digest = hashlib.sha256(f"{self.seed}:{listener_id}:{n_session}".encode()).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            # Reference trials are mandatory and fixed in count, so their
            # utterances are reserved first; test trials fill the rest.
            # One trial per utterance within the playlist as well.
            rng.shuffle(ref_pool)
            chosen_ref, seen = [], set(used)
            for trial_id in ref_pool:
                utt = self._utterance(trial_id)
                if utt in seen:
                    continue
                seen.add(utt)
                chosen_ref.append(trial_id)
                if len(chosen_ref) >= self.n_reference:
                    break
            if len(chosen_ref) < self.n_reference:
                raise ApiError(
                    409, "pool_exhausted",
                    "not enough reference trials with unseen utterances",
                )
            rng.shuffle(test_pool)
            chosen_test = []
            for trial_id in test_pool:
                utt = self._utterance(trial_id)
                if utt in seen:
                    continue
                seen.add(utt)
                chosen_test.append(trial_id)
                if len(chosen_test) >= self.max_test_trials:
                    break
            if not chosen_test:
                raise ApiError(
                    409, "pool_exhausted",
                    "no unseen test-trial utterances remain for listener",
                )
            playlist = list(chosen_test)
            positions = sorted(
                rng.choice(len(playlist) + self.n_reference, size=self.n_reference,
                           replace=False).tolist()
            )
            for pos, ref_trial in zip(positions, chosen_ref):
                playlist.insert(min(pos, len(playlist)), ref_trial)
            session = Session(
                session_id=f"{listener_id}-{n_session}",
                listener_id=listener_id,
                device=device,
                playlist=playlist,
            )
            self._append(
                {
                    "event": "session",
                    "session_id": session.session_id,
                    "listener_id": listener_id,
                    "device": device,
                    "playlist": playlist,
                }
            )
            self._register_session(session)
            return session

    def next_trial(self, session_id: str) -> dict:
        session = self._session(session_id)
        if session.done:
            return {"done": True, "index": session.cursor, "total": len(session.playlist)}
        trial_id = session.current_trial
        token = secrets.token_urlsafe(16)
        with self._lock:
            self.audio_tokens[token] = trial_id
        return {
            "done": False,
            "trial_id": trial_id,
            "index": session.cursor,
            "total": len(session.playlist),
            "audio_url": f"/trials/{trial_id}/audio?token={token}",
        }

    def audio_bytes(self, trial_id: str, token: str) -> bytes:
        with self._lock:
            issued = self.audio_tokens.pop(token, None)
        if issued is None:
            raise ApiError(410, "token_used", "audio token missing or already used")
        if issued != trial_id:
            raise ApiError(403, "token_mismatch", "token was issued for a different trial")
        path = self.audio_paths[trial_id]
        return path.read_bytes()

    def submit_response(self, session_id: str, trial_id: str, transcript: str) -> dict:
        session = self._session(session_id)
        with self._lock:
            if session.done:
                raise ApiError(409, "session_done", "session already completed")
            if any(
                r.listener_id == session.listener_id and r.trial_id == trial_id
                for r in self.responses
            ):
                raise ApiError(409, "duplicate", "response already recorded for this trial")
            if trial_id != session.current_trial:
                raise ApiError(
                    409, "out_of_order",
                    f"expected trial {session.current_trial!r}, got {trial_id!r}",
                )
            response = TrialResponse(
                trial_id=trial_id,
                listener_id=session.listener_id,
                transcript=transcript,
                audio_device=session.device,
                timestamp=time.time(),
            )
            self._append(
                {
                    "event": "response",
                    "session_id": session_id,
                    "trial_id": trial_id,
                    "listener_id": session.listener_id,
                    "transcript": transcript,
                    "device": session.device,
                    "timestamp": response.timestamp,
                }
            )
            self.responses.append(response)
            session.cursor += 1
            return {"ok": True, "index": session.cursor, "total": len(session.playlist)}

    def results(self) -> dict:
        by_listener: dict[str, list[TrialResponse]] = {}
        for r in self.responses:
            by_listener.setdefault(r.listener_id, []).append(r)
        qualifications = {
            listener: qualify(resps, self.trials) for listener, resps in by_listener.items()
        }
        qualified_responses = [
            r for r in self.responses
            if qualifications[r.listener_id].status is QualificationStatus.QUALIFIED
        ]
        reports = aggregate(qualified_responses, self.trials, GROUPING, seed=self.seed)
        devices = {d: 0 for d in DEVICES}
        for listener, resps in by_listener.items():
            devices[resps[0].audio_device] += 1
        return {
            "listeners": {
                listener: {
                    "status": q.status.value,
                    "reference_wrr": q.reference_wrr,
                    "test_wrr": q.test_wrr,
                }
                for listener, q in sorted(qualifications.items())
            },
            "device_breakdown": devices,
            "reports": [
                {
                    "group": dict(zip(GROUPING, r.group)),
                    "n": r.n,
                    "mean_wrr": r.mean_wrr,
                    "ci95": r.ci95_half_width,
                }
                for r in reports
            ],
            "report_csv": reports_to_csv(reports, GROUPING),
        }

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "no_session", f"unknown session {session_id!r}")
        return session


def trials_from_batch_manifest(path) -> tuple[dict[str, Trial], Path]:
    """Load gen_stimuli output into Trial objects keyed by id."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        batch = json.load(f)
    trials = {}
    for row in batch["trials"]:
        trial = Trial(
            trial_id=row["trial_id"],
            reference_text=row["reference_text"],
            system=row["system"],
            voice=row.get("voice", ""),
            masker=row.get("masker", ""),
            snr_db=float(row.get("snr_db", 0.0)),
            is_reference_trial=bool(row.get("is_reference_trial", False)),
            utterance_id=row.get("utterance_id", ""),
        )
        trials[trial.trial_id] = trial
    return trials, path.parent


def create_app(manifest_path, log_path, seed: int = 0,
               n_reference: int = N_REFERENCE_TRIALS,
               max_test_trials: int = MAX_TEST_TRIALS) -> FastAPI:
    trials, audio_dir = trials_from_batch_manifest(manifest_path)
    audio_paths = {}
    with open(manifest_path, encoding="utf-8") as f:
        batch = json.load(f)
    service = TestService(trials, audio_dir, log_path, seed=seed,
                          n_reference=n_reference, max_test_trials=max_test_trials)
    for row in batch["trials"]:
        service.audio_paths[row["trial_id"]] = audio_dir / row["audio_path"]
    app = FastAPI(title="effortlab listening test")
    app.state.service = service

    @app.exception_handler(ApiError)
    async def handle_api_error(_, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.post("/sessions")
    async def create_session(body: dict):
        if "listener_id" not in body or "device" not in body:
            raise ApiError(400, "bad_request", "listener_id and device are required")
        session = service.create_session(body["listener_id"], body["device"])
        return {
            "session_id": session.session_id,
            "listener_id": session.listener_id,
            "n_trials": len(session.playlist),
        }

    @app.get("/sessions/{session_id}/next")
    async def next_trial(session_id: str):
        return service.next_trial(session_id)

    @app.get("/trials/{trial_id}/audio")
    async def audio(trial_id: str, token: str = ""):
        data = service.audio_bytes(trial_id, token)
        return Response(content=data, media_type="audio/wav")

    @app.post("/sessions/{session_id}/responses")
    async def submit(session_id: str, body: dict):
        if "trial_id" not in body or "transcript" not in body:
            raise ApiError(400, "bad_request", "trial_id and transcript are required")
        return service.submit_response(session_id, body["trial_id"], body["transcript"])

    @app.get("/results")
    async def results():
        return service.results()

    return app
