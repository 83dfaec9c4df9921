"""HTTP facade over the pipeline: async job submission (202 + polling),
artifact retrieval as static assets, and interpolation requests.

Jobs persist as `jobs/<id>/job.json`; a single FIFO worker thread
executes them, so restarting the process restores every terminal job's
view and marks mid-run jobs failed."""

from __future__ import annotations

import base64
import binascii
import io
import queue
import threading
import uuid
import os

import numpy as np
from fastapi import FastAPI
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from . import pipeline as pl
from .core import Config, load_latent
from .errors import SketchVisionError

SUBMIT_KINDS = ("sketch_to_3d", "sketchify", "roundtrip")

_CONTENT_TYPES = {".png": "image/png", ".json": "application/json",
                  ".bin": "application/octet-stream", ".csv": "text/csv"}


class JobRequest(BaseModel):
    kind: str
    image_b64: str | None = None
    seed: int = 0


class InterpolateRequest(BaseModel):
    latent_a_job: str
    latent_b_job: str
    n: int = 6
    seed: int = 0


def job_view(job: pl.PipelineJob) -> dict:
    done_stages = [a["stage"] for a in job.artifacts]
    stages = [{"stage": s, "done": s in done_stages}
              for s in pl.STAGES.get(job.kind, [])]
    artifacts = {
        a["stage"]: [f"/assets/{job.job_id}/{p}" for p in a["paths"]]
        for a in job.artifacts
    }
    return {
        "job_id": job.job_id, "kind": job.kind, "status": job.status,
        "stages": stages, "artifacts": artifacts, "error": job.error,
    }


def _decode_png(b64: str, max_upload: int) -> bytes:
    if b64 is None:
        raise ValueError("image_b64 is required")
    # cheap size bound before decoding
    if len(b64) * 3 // 4 > max_upload:
        raise OverflowError("upload too large")
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as e:
        raise ValueError(f"invalid base64: {e}") from e
    if len(raw) > max_upload:
        raise OverflowError("upload too large")
    return raw


def _load_png_image(raw: bytes, channels: int) -> np.ndarray:
    import tempfile

    with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as f:
        f.write(raw)
        path = f.name
    try:
        from .core import load_image

        return load_image(path, channels)
    finally:
        os.unlink(path)


class Worker:
    """Single background thread executing jobs FIFO."""

    def __init__(self, jobs_root, registry: pl.BackendRegistry, config: Config):
        self.jobs_root = jobs_root
        self.registry = registry
        self.config = config
        self.queue: queue.Queue = queue.Queue()
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self._stop = False

    def start(self):
        self.thread.start()

    def stop(self):
        self._stop = True
        self.queue.put(None)

    def submit(self, job_id: str):
        self.queue.put(job_id)

    def _loop(self):
        while not self._stop:
            job_id = self.queue.get()
            if job_id is None:
                break
            try:
                self._execute(job_id)
            except Exception:
                try:
                    job = pl.load_job(self.jobs_root, job_id)
                    job.status = "failed"
                    job.error = job.error or "internal worker error"
                    pl.save_job(job, self.jobs_root)
                except Exception:
                    pass

    def _execute(self, job_id: str):
        job = pl.load_job(self.jobs_root, job_id)
        d = pl.job_dir(self.jobs_root, job_id)
        seed = int(job.inputs.get("seed", 0))
        if job.kind == "interpolate":
            za = load_latent(os.path.join(d, job.inputs["latent_a"]))
            zb = load_latent(os.path.join(d, job.inputs["latent_b"]))
            pl.run_interpolate_job(za, zb, int(job.inputs["n"]), self.registry,
                                   self.config, self.jobs_root, job_id, seed)
        else:
            from .core import load_image

            channels = 3 if job.kind == "sketchify" else 1
            img = load_image(os.path.join(d, job.inputs["input"]), channels)
            runner = {"sketchify": pl.run_sketchify_job,
                      "sketch_to_3d": pl.run_sketch_to_3d,
                      "roundtrip": pl.run_roundtrip}[job.kind]
            runner(img, self.registry, self.config, self.jobs_root, job_id, seed)


def recover_jobs(jobs_root) -> list[str]:
    """Mark mid-run jobs failed; return queued job ids to re-enqueue."""
    requeue = []
    if not os.path.isdir(jobs_root):
        return requeue
    for job_id in sorted(os.listdir(jobs_root)):
        try:
            job = pl.load_job(jobs_root, job_id)
        except (FileNotFoundError, NotADirectoryError):
            continue
        if job.status == "running":
            job.status = "failed"
            job.error = "service restarted while job was running"
            pl.save_job(job, jobs_root)
        elif job.status == "queued":
            requeue.append(job_id)
    return requeue


def create_app(jobs_root, registry: pl.BackendRegistry | None = None,
               config: Config | None = None, max_upload: int = 8 * 1024 * 1024,
               start_worker: bool = True) -> FastAPI:
    os.makedirs(jobs_root, exist_ok=True)
    registry = registry or pl.BackendRegistry()
    config = config or Config()
    app = FastAPI(title="sketchvision")
    worker = Worker(jobs_root, registry, config)
    app.state.worker = worker

    for job_id in recover_jobs(jobs_root):
        worker.submit(job_id)
    if start_worker:
        worker.start()

    def error(status: int, message: str):
        return JSONResponse({"detail": message}, status_code=status)

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.post("/api/jobs", status_code=202)
    def submit_job(req: JobRequest):
        if req.kind == "interpolate":
            return error(400, "use POST /api/interpolate for interpolation jobs")
        if req.kind not in SUBMIT_KINDS:
            return error(400, f"invalid kind {req.kind!r}")
        try:
            raw = _decode_png(req.image_b64, max_upload)
        except OverflowError:
            return error(413, "upload exceeds size cap")
        except ValueError as e:
            return error(400, str(e))
        try:
            channels = 3 if req.kind == "sketchify" else 1
            img = _load_png_image(raw, channels)
        except (SketchVisionError, ValueError) as e:
            return error(422, f"undecodable image: {e}")
        job_id = uuid.uuid4().hex[:12]
        d = pl.job_dir(jobs_root, job_id)
        os.makedirs(d, exist_ok=True)
        from .core import save_image

        save_image(img, os.path.join(d, "input.png"))
        job = pl.PipelineJob(job_id=job_id, kind=req.kind,
                             inputs={"input": "input.png", "seed": req.seed})
        import time

        job.created_at = time.time()
        pl.save_job(job, jobs_root)
        worker.submit(job_id)
        return job_view(job)

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        try:
            job = pl.load_job(jobs_root, job_id)
        except FileNotFoundError:
            return error(404, "unknown job id")
        return job_view(job)

    @app.get("/api/jobs")
    def list_jobs():
        views = []
        if os.path.isdir(jobs_root):
            for jid in sorted(os.listdir(jobs_root)):
                try:
                    views.append(job_view(pl.load_job(jobs_root, jid)))
                except (FileNotFoundError, NotADirectoryError):
                    continue
        return {"jobs": views}

    @app.post("/api/interpolate", status_code=202)
    def interpolate_jobs(req: InterpolateRequest):
        if not (2 <= req.n <= 32):
            return error(400, "n must be in [2, 32]")
        sources = []
        for jid in (req.latent_a_job, req.latent_b_job):
            try:
                src = pl.load_job(jobs_root, jid)
            except FileNotFoundError:
                return error(404, f"unknown job id {jid!r}")
            if src.status != "done":
                return error(409, f"source job {jid!r} is not done")
            latent = next((a for a in src.artifacts if a["stage"] == "latent"), None)
            if latent is None:
                return error(409, f"source job {jid!r} has no latent artifact")
            sources.append(os.path.join(pl.job_dir(jobs_root, jid), latent["paths"][0]))
        job_id = uuid.uuid4().hex[:12]
        d = pl.job_dir(jobs_root, job_id)
        os.makedirs(d, exist_ok=True)
        import shutil
        import time

        shutil.copy(sources[0], os.path.join(d, "input_a.latent.json"))
        shutil.copy(sources[1], os.path.join(d, "input_b.latent.json"))
        job = pl.PipelineJob(job_id=job_id, kind="interpolate",
                             inputs={"latent_a": "input_a.latent.json",
                                     "latent_b": "input_b.latent.json",
                                     "n": req.n, "seed": req.seed},
                             created_at=time.time())
        pl.save_job(job, jobs_root)
        worker.submit(job_id)
        return job_view(job)

    @app.get("/assets/{job_id}/{path:path}")
    def asset(job_id: str, path: str):
        base = os.path.abspath(pl.job_dir(jobs_root, job_id))
        full = os.path.abspath(os.path.join(base, path))
        if not full.startswith(base + os.sep) or not os.path.isfile(full):
            return error(404, "no such asset")
        ext = os.path.splitext(full)[1]
        return FileResponse(full, media_type=_CONTENT_TYPES.get(ext, "application/octet-stream"))

    return app


def serve(jobs_root, registry=None, config=None, port: int = 8787,
          host: str = "127.0.0.1", max_upload: int = 8 * 1024 * 1024):
    import uvicorn

    app = create_app(jobs_root, registry, config, max_upload)
    uvicorn.run(app, host=host, port=port, log_level="warning")
