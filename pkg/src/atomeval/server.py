"""Annotation HTTP endpoints consumed by the browser UI.

A task is one (prompt, model, rewritten) image awaiting labels. Assignment
is deterministic: each annotator gets the lowest-id pending task they have
not yet annotated; a task stops being pending once the configured number
of distinct annotators have submitted. Submissions append to the same
store the human-labels loaders read, so a stored record is exactly what
the UI sent.

Endpoints (JSON bodies unless noted):
  GET  /api/tasks/next?annotator_id=X  -> {done, task?, progress}
  GET  /api/images/{task_id}           -> image bytes
  POST /api/annotations                -> {ok, progress} | 4xx {detail}
  GET  /api/progress                   -> progress summary
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .grammar import PromptSpec
from .human import (
    CHECKLIST,
    LEGACY,
    HumanAnnotation,
    append_annotation,
    load_annotations,
)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    prompt_id: str
    model_id: str
    rewritten: bool
    image_path: Path
    prompt_text: str
    atoms: tuple[dict, ...]  # (id, kind, surface) descriptors for the checklist
    mode: str  # checklist | legacy

    def payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "prompt_id": self.prompt_id,
            "model_id": self.model_id,
            "rewritten": self.rewritten,
            "mode": self.mode,
            "prompt_text": self.prompt_text,
            "image_url": f"/api/images/{self.task_id}",
            "atoms": list(self.atoms),
            "status": "pending",
        }


class SubmitPayload(BaseModel):
    task_id: str
    annotator_id: str
    quality: bool
    atom_labels: list[bool] | None = None
    alignment: bool | None = None


class TaskQueue:
    """In-memory task state over the append-only annotation store."""

    def __init__(self, prompts: Sequence[PromptSpec], images_root: Path,
                 store_path: Path, model_id: str, rewritten: bool,
                 annotators_per_image: int, mode: str):
        if annotators_per_image < 1:
            raise ValueError("annotators_per_image must be >= 1")
        if mode not in (CHECKLIST, LEGACY):
            raise ValueError(f"unknown mode {mode!r}")
        self.store_path = store_path
        self.annotators_per_image = annotators_per_image
        self.mode = mode
        self._lock = threading.Lock()
        self.tasks: list[AnnotationTask] = []
        self.by_id: dict[str, AnnotationTask] = {}
        suffix = "rw" if rewritten else "orig"
        for prompt in sorted(prompts, key=lambda p: (p.atomicity, p.id)):
            image = _find_image(images_root, prompt.id)
            if image is None:
                continue
            task = AnnotationTask(
                task_id=f"{prompt.id}__{model_id}__{suffix}",
                prompt_id=prompt.id,
                model_id=model_id,
                rewritten=rewritten,
                image_path=image,
                prompt_text=prompt.text,
                atoms=tuple({"id": a.id, "kind": a.kind, "surface": a.surface}
                            for a in prompt.atoms),
                mode=mode,
            )
            self.tasks.append(task)
            self.by_id[task.task_id] = task
        # annotators who already submitted, per task, rebuilt from the store
        self.submitted: dict[str, set[str]] = {t.task_id: set() for t in self.tasks}
        if store_path.exists():
            key_to_task = {(t.prompt_id, t.model_id, t.rewritten): t.task_id
                           for t in self.tasks}
            for a in load_annotations(store_path):
                task_id = key_to_task.get(a.image_key)
                if task_id is not None:
                    self.submitted[task_id].add(a.annotator_id)

    def next_task(self, annotator_id: str) -> AnnotationTask | None:
        with self._lock:
            for task in self.tasks:
                done_by = self.submitted[task.task_id]
                if annotator_id in done_by:
                    continue
                if len(done_by) >= self.annotators_per_image:
                    continue
                return task
        return None

    def submit(self, payload: SubmitPayload) -> None:
        task = self.by_id.get(payload.task_id)
        if task is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown task {payload.task_id!r}")
        if not payload.annotator_id:
            raise HTTPException(status_code=400, detail="annotator_id must be nonempty")
        if task.mode == CHECKLIST:
            if payload.atom_labels is None:
                raise HTTPException(status_code=400,
                                    detail="checklist task needs atom_labels")
            if len(payload.atom_labels) != len(task.atoms):
                raise HTTPException(
                    status_code=400,
                    detail=f"checklist length {len(payload.atom_labels)} does not "
                           f"match atom count {len(task.atoms)}")
            annotation = HumanAnnotation(
                prompt_id=task.prompt_id, model_id=task.model_id,
                rewritten=task.rewritten, annotator_id=payload.annotator_id,
                quality=payload.quality, timestamp=time.time(),
                atom_labels=tuple(payload.atom_labels),
            )
        else:
            if payload.alignment is None:
                raise HTTPException(status_code=400,
                                    detail="legacy task needs an alignment answer")
            annotation = HumanAnnotation(
                prompt_id=task.prompt_id, model_id=task.model_id,
                rewritten=task.rewritten, annotator_id=payload.annotator_id,
                quality=payload.quality, timestamp=time.time(),
                alignment=payload.alignment,
            )
        with self._lock:
            append_annotation(annotation, self.store_path)
            self.submitted[task.task_id].add(payload.annotator_id)

    def progress(self) -> dict:
        with self._lock:
            per_annotator: dict[str, int] = {}
            completed = 0
            for task in self.tasks:
                done_by = self.submitted[task.task_id]
                if len(done_by) >= self.annotators_per_image:
                    completed += 1
                for annotator in done_by:
                    per_annotator[annotator] = per_annotator.get(annotator, 0) + 1
            return {
                "total": len(self.tasks),
                "completed": completed,
                "annotators_per_image": self.annotators_per_image,
                "per_annotator": dict(sorted(per_annotator.items())),
            }


def _find_image(images_root: Path, prompt_id: str) -> Path | None:
    for ext in IMAGE_EXTENSIONS:
        candidate = images_root / f"{prompt_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def build_app(prompts: Sequence[PromptSpec], images_root: Path, store_path: Path,
              model_id: str, rewritten: bool = False,
              annotators_per_image: int = 1, mode: str = CHECKLIST,
              frontend_dir: Path | None = None) -> FastAPI:
    queue = TaskQueue(prompts, images_root, store_path, model_id, rewritten,
                      annotators_per_image, mode)
    app = FastAPI(title="atomeval annotation server")
    app.state.queue = queue

    @app.get("/api/tasks/next")
    def next_task(annotator_id: str) -> JSONResponse:
        if not annotator_id:
            raise HTTPException(status_code=400, detail="annotator_id must be nonempty")
        task = queue.next_task(annotator_id)
        body = {"done": task is None, "progress": queue.progress()}
        if task is not None:
            body["task"] = task.payload()
        return JSONResponse(body)

    @app.get("/api/images/{task_id}")
    def image(task_id: str) -> FileResponse:
        task = queue.by_id.get(task_id)
        if task is None:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        media_type = _MEDIA_TYPES.get(task.image_path.suffix.lower(), "application/octet-stream")
        return FileResponse(task.image_path, media_type=media_type)

    @app.post("/api/annotations")
    def submit(payload: SubmitPayload) -> JSONResponse:
        queue.submit(payload)
        return JSONResponse({"ok": True, "progress": queue.progress()})

    @app.get("/api/progress")
    def progress() -> JSONResponse:
        return JSONResponse(queue.progress())

    if frontend_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")
    return app
