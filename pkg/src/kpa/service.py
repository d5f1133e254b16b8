"""HTTP job service: analysis runs, drill-down, and the revise/re-match loop.

Jobs persist as one directory each (config, dataset snapshot, immutable
version documents); analyses run on a bounded worker pool, one running
analysis or rematch per job at a time.
"""

from __future__ import annotations

import json
import shutil
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DataError, KpaError, TransportError
from .extraction import KeyPointCandidate
from .ingest import first_sentence, filter_comments, load_dataset, token_count
from .pipeline import (
    AnalysisResult,
    GroupResult,
    config_from_values,
    emit_report,
    parse_report,
    resolve_scorers,
    run_analysis,
)
from .scoring import CachingScorer
from .selection import KeyPointResult, final_match

STATUSES = ("pending", "running", "done", "failed")
_ALLOWED_TRANSITIONS = {
    "pending": {"running", "failed"},
    "running": {"done", "failed"},
    "done": set(),
    "failed": set(),
}

USER_KP_PREFIX = "kp_user_"


class ApiError(KpaError):
    """Error carrying an HTTP status and a wire code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code


def _not_found(message: str) -> ApiError:
    return ApiError(404, "not_found", message)


class JobStore:
    """Directory-backed job persistence; one subdirectory per job."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if self.root.exists() and not self.root.is_dir():
            raise ConfigError(f"job store {self.root} is not a directory")
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _job_dir(self, job_id: str) -> Path:
        path = self.root / job_id
        if not path.is_dir():
            raise KeyError(job_id)
        return path

    def _write_atomic(self, path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)

    def _write_meta(self, job_dir: Path, meta: dict) -> None:
        self._write_atomic(job_dir / "job.json", json.dumps(meta, sort_keys=True, indent=2))

    def create(self, dataset_text: str, config_values: dict) -> str:
        job_id = uuid.uuid4().hex[:12]
        job_dir = self.root / job_id
        job_dir.mkdir()
        (job_dir / "versions").mkdir()
        (job_dir / "dataset.jsonl").write_text(dataset_text, encoding="utf-8")
        self._write_atomic(job_dir / "revisions.json", "[]")
        meta = {
            "id": job_id,
            "status": "pending",
            "versions": 0,
            "error": None,
            "config": config_values,
        }
        self._write_meta(job_dir, meta)
        return job_id

    def delete(self, job_id: str) -> None:
        shutil.rmtree(self._job_dir(job_id))

    def job_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "job.json").is_file())

    def load_meta(self, job_id: str) -> dict:
        return json.loads((self._job_dir(job_id) / "job.json").read_text(encoding="utf-8"))

    def set_status(self, job_id: str, status: str, error: Optional[dict] = None) -> None:
        if status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        with self._lock:
            job_dir = self._job_dir(job_id)
            meta = self.load_meta(job_id)
            if status not in _ALLOWED_TRANSITIONS[meta["status"]]:
                raise ValueError(f"cannot move job {job_id} from {meta['status']} to {status}")
            meta["status"] = status
            meta["error"] = error
            self._write_meta(job_dir, meta)

    def dataset_path(self, job_id: str) -> Path:
        return self._job_dir(job_id) / "dataset.jsonl"

    def table_path(self, job_id: str) -> Path:
        return self._job_dir(job_id) / "table.json"

    def append_version(self, job_id: str, document: str) -> int:
        with self._lock:
            job_dir = self._job_dir(job_id)
            meta = self.load_meta(job_id)
            version = meta["versions"]
            self._write_atomic(job_dir / "versions" / f"{version}.json", document)
            meta["versions"] = version + 1
            self._write_meta(job_dir, meta)
            return version

    def read_version(self, job_id: str, version: int) -> bytes:
        path = self._job_dir(job_id) / "versions" / f"{version}.json"
        if version < 0 or not path.is_file():
            raise KeyError(version)
        return path.read_bytes()

    def revisions(self, job_id: str) -> list[dict]:
        return json.loads((self._job_dir(job_id) / "revisions.json").read_text(encoding="utf-8"))

    def save_revisions(self, job_id: str, revisions: list[dict]) -> None:
        self._write_atomic(
            self._job_dir(job_id) / "revisions.json",
            json.dumps(revisions, sort_keys=True, indent=2),
        )


class AnalysisService:
    """Job lifecycle on top of a JobStore plus a bounded worker pool."""

    def __init__(self, store: JobStore, workers: int = 2):
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        self.store = store
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self._job_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._scorers: dict[str, tuple] = {}
        self._recover()

    def _recover(self) -> None:
        for job_id in self.store.job_ids():
            status = self.store.load_meta(job_id)["status"]
            if status in ("pending", "running"):
                self.store.set_status(
                    job_id,
                    "failed",
                    {"code": "interrupted", "message": "service restarted before completion"},
                )

    def shutdown(self) -> None:
        self.pool.shutdown(wait=True)

    def _lock_for(self, job_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._job_locks.setdefault(job_id, threading.Lock())

    # -- creation and execution ------------------------------------------

    def create_job(self, payload: dict) -> str:
        if not isinstance(payload, dict):
            raise ApiError(400, "bad_request", "body must be an object")
        config_values = payload.get("config")
        if not isinstance(config_values, dict):
            raise ApiError(400, "invalid_config", "config object required")
        records = payload.get("dataset")
        dataset_path = payload.get("dataset_path")
        if (records is None) == (dataset_path is None):
            raise ApiError(400, "bad_request", "provide exactly one of dataset, dataset_path")
        try:
            cfg = config_from_values(dict(config_values))
        except ConfigError as exc:
            raise ApiError(400, "invalid_config", str(exc)) from None

        if records is not None:
            if not isinstance(records, list) or not all(isinstance(r, dict) for r in records):
                raise ApiError(400, "invalid_data", "dataset must be a list of records")
            dataset_text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
        else:
            try:
                dataset_text = Path(dataset_path).read_text(encoding="utf-8")
            except OSError as exc:
                raise ApiError(400, "invalid_data", f"cannot read dataset: {exc}") from None

        table_text = None
        if cfg.scorer.startswith("table:"):
            try:
                table_text = Path(cfg.scorer[len("table:") :]).read_text(encoding="utf-8")
            except OSError as exc:
                raise ApiError(400, "invalid_config", f"cannot read score table: {exc}") from None

        job_id = self.store.create(dataset_text, dict(config_values))
        try:
            if table_text is not None:
                table_path = self.store.table_path(job_id)
                table_path.write_text(table_text, encoding="utf-8")
                meta = self.store.load_meta(job_id)
                meta["config"]["scorer"] = f"table:{table_path}"
                self.store._write_meta(self.store._job_dir(job_id), meta)
            load_dataset(self.store.dataset_path(job_id), cfg.domain)
        except DataError as exc:
            self.store.delete(job_id)
            raise ApiError(400, "invalid_data", str(exc)) from None
        except Exception:
            self.store.delete(job_id)
            raise
        self.pool.submit(self._run_job, job_id)
        return job_id

    def _job_scorers(self, job_id: str, cfg, dataset) -> tuple:
        if job_id not in self._scorers:
            match_scorer, quality_scorer = resolve_scorers(cfg.scorer, dataset.comments)
            self._scorers[job_id] = (CachingScorer(match_scorer), quality_scorer)
        return self._scorers[job_id]

    def _run_job(self, job_id: str) -> None:
        with self._lock_for(job_id):
            try:
                self.store.set_status(job_id, "running")
            except (ValueError, KeyError):
                return
            try:
                meta = self.store.load_meta(job_id)
                cfg = config_from_values(meta["config"])
                dataset = load_dataset(self.store.dataset_path(job_id), cfg.domain)
                match_scorer, quality_scorer = self._job_scorers(job_id, cfg, dataset)
                result = run_analysis(dataset, cfg, match_scorer, quality_scorer)
                self.store.append_version(job_id, emit_report(result, "structured"))
                self.store.set_status(job_id, "done")
            except KpaError as exc:
                self.store.set_status(job_id, "failed", _error_body(exc))
            except Exception as exc:
                self.store.set_status(
                    job_id, "failed", {"code": "internal", "message": str(exc)}
                )

    # -- read views -------------------------------------------------------

    def _meta_or_404(self, job_id: str) -> dict:
        try:
            return self.store.load_meta(job_id)
        except KeyError:
            raise _not_found(f"unknown job {job_id}") from None

    def job_view(self, job_id: str) -> dict:
        meta = self._meta_or_404(job_id)
        return {
            "job_id": meta["id"],
            "status": meta["status"],
            "versions": meta["versions"],
            "error": meta["error"],
            "domain": meta["config"].get("domain"),
            "pending_revisions": len(self.store.revisions(job_id)),
        }

    def list_jobs(self) -> list[dict]:
        return [self.job_view(job_id) for job_id in self.store.job_ids()]

    def _require_done(self, job_id: str) -> dict:
        meta = self._meta_or_404(job_id)
        if meta["status"] != "done":
            raise ApiError(409, "not_ready", f"job {job_id} is {meta['status']}")
        return meta

    def version_bytes(self, job_id: str, version: int) -> bytes:
        self._meta_or_404(job_id)
        try:
            return self.store.read_version(job_id, version)
        except KeyError:
            raise _not_found(f"job {job_id} has no version {version}") from None

    def _version_doc(self, job_id: str, version: int) -> dict:
        return json.loads(self.version_bytes(job_id, version))

    def keypoints_view(self, job_id: str, version: int) -> dict:
        self._require_done(job_id)
        doc = self._version_doc(job_id, version)
        groups = []
        for g in doc["groups"]:
            groups.append(
                {
                    "topic": g["topic"],
                    "stance": g["stance"],
                    "comment_count": g["comment_count"],
                    "coverage": g["coverage"],
                    "key_points": [
                        {k: kp[k] for k in kp if k != "matched"} for kp in g["key_points"]
                    ],
                    "unmatched": g["unmatched"],
                }
            )
        return {"job_id": job_id, "version": version, "groups": groups}

    def drilldown(self, job_id: str, version: int, kp_id: str, page: int, size: int) -> dict:
        if page < 1:
            raise ApiError(400, "bad_request", "page must be >= 1")
        if not 1 <= size <= 200:
            raise ApiError(400, "bad_request", "size must lie in [1, 200]")
        self._require_done(job_id)
        doc = self._version_doc(job_id, version)
        for g in doc["groups"]:
            for kp in g["key_points"]:
                if kp["id"] == kp_id:
                    items = kp["matched"]
                    start = (page - 1) * size
                    return {
                        "job_id": job_id,
                        "version": version,
                        "kp_id": kp_id,
                        "page": page,
                        "size": size,
                        "total": len(items),
                        "items": items[start : start + size],
                    }
        raise _not_found(f"version {version} has no key point {kp_id}")

    # -- revisions and rematch ---------------------------------------------

    def _latest_doc(self, job_id: str, meta: dict) -> dict:
        return self._version_doc(job_id, meta["versions"] - 1)

    def _next_revision_id(self, revisions: list[dict]) -> str:
        return f"r{len(revisions) + 1}"

    def revise_key_point(self, job_id: str, kp_id: str, payload: dict) -> dict:
        meta = self._require_done(job_id)
        doc = self._latest_doc(job_id, meta)
        known = {kp["id"] for g in doc["groups"] for kp in g["key_points"]}
        if kp_id not in known:
            raise _not_found(f"no key point {kp_id} in the latest version")
        if not isinstance(payload, dict):
            raise ApiError(400, "bad_request", "body must be an object")
        if payload.get("deleted") is True:
            draft = {"op": "delete", "kp_id": kp_id}
        elif "text" in payload:
            text = payload["text"]
            if not isinstance(text, str) or not text.strip():
                raise ApiError(400, "invalid_data", "revised text must be non-empty")
            draft = {"op": "rename", "kp_id": kp_id, "text": text.strip()}
        else:
            raise ApiError(400, "bad_request", 'body must carry "text" or {"deleted": true}')
        revisions = [r for r in self.store.revisions(job_id) if r.get("kp_id") != kp_id]
        draft["id"] = self._next_revision_id(self.store.revisions(job_id))
        revisions.append(draft)
        self.store.save_revisions(job_id, revisions)
        return {"revision_id": draft["id"], "pending_revisions": len(revisions)}

    def add_key_point(self, job_id: str, payload: dict) -> dict:
        meta = self._require_done(job_id)
        doc = self._latest_doc(job_id, meta)
        if not isinstance(payload, dict):
            raise ApiError(400, "bad_request", "body must be an object")
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ApiError(400, "invalid_data", "key point text must be non-empty")
        groups = doc["groups"]
        topic = payload.get("topic")
        stance = payload.get("stance")
        if topic is None:
            if len(groups) != 1:
                raise ApiError(400, "bad_request", "topic required for multi-topic jobs")
            group = groups[0]
        else:
            matching = [
                g for g in groups if g["topic"] == topic and g["stance"] == stance
            ]
            if not matching:
                raise _not_found(f"no group for topic {topic!r}, stance {stance!r}")
            group = matching[0]
        revisions = self.store.revisions(job_id)
        used = {kp["id"] for g in groups for kp in g["key_points"]}
        used.update(r["kp_id"] for r in revisions if r["op"] == "add")
        n = 1
        while f"{USER_KP_PREFIX}{n}" in used:
            n += 1
        draft = {
            "op": "add",
            "kp_id": f"{USER_KP_PREFIX}{n}",
            "text": text.strip(),
            "topic": group["topic"],
            "stance": group["stance"],
            "id": self._next_revision_id(revisions),
        }
        revisions.append(draft)
        self.store.save_revisions(job_id, revisions)
        return {
            "revision_id": draft["id"],
            "kp_id": draft["kp_id"],
            "pending_revisions": len(revisions),
        }

    def _revised_key_points(
        self, group: GroupResult, revisions: list[dict]
    ) -> list[KeyPointResult]:
        kps = list(group.key_points)
        for rev in revisions:
            if rev["op"] == "rename":
                for i, kp in enumerate(kps):
                    if kp.key_point.id == rev["kp_id"]:
                        candidate = replace(
                            kp.key_point,
                            text=rev["text"],
                            token_count=token_count(rev["text"]),
                        )
                        kps[i] = replace(kp, key_point=candidate)
            elif rev["op"] == "delete":
                kps = [kp for kp in kps if kp.key_point.id != rev["kp_id"]]
            elif rev["op"] == "add":
                if rev["topic"] == group.topic and rev["stance"] == group.stance:
                    candidate = KeyPointCandidate(
                        id=rev["kp_id"],
                        source_comment_id="user",
                        text=rev["text"],
                        token_count=token_count(rev["text"]),
                        quality=1.0,
                    )
                    kps.append(
                        KeyPointResult(
                            key_point=candidate,
                            matched=(),
                            comment_total=group.comment_count,
                        )
                    )
        return kps

    def rematch(self, job_id: str) -> int:
        meta = self._require_done(job_id)
        revisions = self.store.revisions(job_id)
        if not revisions:
            raise ApiError(409, "no_revisions", "no pending revisions to re-match")
        lock = self._lock_for(job_id)
        if not lock.acquire(blocking=False):
            raise ApiError(409, "busy", f"job {job_id} is already running")
        try:
            cfg = config_from_values(meta["config"])
            dataset = load_dataset(self.store.dataset_path(job_id), cfg.domain)
            match_scorer, quality_scorer = self._job_scorers(job_id, cfg, dataset)
            latest = parse_report(
                self.store.read_version(job_id, meta["versions"] - 1).decode("utf-8")
            )
            comments = list(dataset.comments)
            if cfg.filter.first_sentence_only:
                comments = [
                    replace(c, analysis_text=first_sentence(c.raw_text)) for c in comments
                ]
            analyzed = filter_comments(comments, cfg.filter, quality_scorer)
            by_group: dict[tuple, list] = {}
            for comment in analyzed:
                key = (comment.topic_id, comment.stance if cfg.per_stance else None)
                by_group.setdefault(key, []).append(comment)
            new_groups = []
            for group in latest.groups:
                group_comments = by_group.get((group.topic, group.stance), [])
                kps = self._revised_key_points(group, revisions)
                if not kps:
                    new_groups.append(
                        replace(
                            group,
                            key_points=(),
                            assignments={c.id: None for c in group_comments},
                            unmatched=tuple(c.id for c in group_comments),
                        )
                    )
                    continue
                fm = final_match(group_comments, kps, cfg.policy, match_scorer, group.topic)
                new_groups.append(
                    replace(
                        group,
                        key_points=fm.results,
                        assignments=fm.assignments,
                        unmatched=fm.unmatched,
                    )
                )
            result = AnalysisResult(
                dataset_name=latest.dataset_name,
                domain=latest.domain,
                config=latest.config,
                input_comments=latest.input_comments,
                analyzed_comments=latest.analyzed_comments,
                groups=tuple(new_groups),
            )
            version = self.store.append_version(job_id, emit_report(result, "structured"))
            self.store.save_revisions(job_id, [])
            return version
        except KpaError as exc:
            if isinstance(exc, ApiError):
                raise
            raise _api_error_from(exc) from None
        finally:
            lock.release()


def _error_body(exc: KpaError) -> dict:
    if isinstance(exc, ConfigError):
        code = "invalid_config"
    elif isinstance(exc, DataError):
        code = "invalid_data"
    elif isinstance(exc, TransportError):
        code = "scorer_unreachable"
    else:
        code = "scorer_error"
    return {"code": code, "message": str(exc)}


def _api_error_from(exc: KpaError) -> ApiError:
    body = _error_body(exc)
    status = 400 if body["code"] in ("invalid_config", "invalid_data") else 502
    return ApiError(status, body["code"], body["message"])


def create_app(store_dir: str | Path, workers: int = 2):
    """FastAPI application over a job store directory."""
    from fastapi import Body, FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response

    service = AnalysisService(JobStore(store_dir), workers=workers)
    app = FastAPI(title="kpa service")
    app.state.service = service

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"code": exc.code, "message": str(exc)}
        )

    @app.exception_handler(KpaError)
    async def _kpa_error(request: Request, exc: KpaError):
        api = _api_error_from(exc)
        return JSONResponse(status_code=api.status, content={"code": api.code, "message": str(api)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400, content={"code": "bad_request", "message": str(exc)}
        )

    @app.on_event("shutdown")
    def _shutdown() -> None:
        service.shutdown()

    @app.post("/v1/jobs", status_code=201)
    def create_job(payload: dict = Body(...)):
        return {"job_id": service.create_job(payload)}

    @app.get("/v1/jobs")
    def list_jobs():
        return {"jobs": service.list_jobs()}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str):
        return service.job_view(job_id)

    @app.get("/v1/jobs/{job_id}/versions/{version}")
    def get_version(job_id: str, version: int):
        return Response(
            content=service.version_bytes(job_id, version), media_type="application/json"
        )

    @app.get("/v1/jobs/{job_id}/versions/{version}/keypoints")
    def get_keypoints(job_id: str, version: int):
        return service.keypoints_view(job_id, version)

    @app.get("/v1/jobs/{job_id}/versions/{version}/keypoints/{kp_id}/comments")
    def get_comments(job_id: str, version: int, kp_id: str, page: int = 1, size: int = 10):
        return service.drilldown(job_id, version, kp_id, page, size)

    @app.patch("/v1/jobs/{job_id}/keypoints/{kp_id}")
    def patch_keypoint(job_id: str, kp_id: str, payload: dict = Body(...)):
        return service.revise_key_point(job_id, kp_id, payload)

    @app.post("/v1/jobs/{job_id}/keypoints", status_code=201)
    def post_keypoint(job_id: str, payload: dict = Body(...)):
        return service.add_key_point(job_id, payload)

    @app.post("/v1/jobs/{job_id}/rematch")
    def post_rematch(job_id: str):
        return {"version": service.rematch(job_id)}

    return app
