"""HTTP inference service for the doodle client.

Endpoints:
    GET  /health        -> "ok"
    GET  /model/info    -> {config, parameter_count, model_id}
    GET  /samples       -> [{id, class_id, class_name}]
    GET  /samples/{id}  -> sample with base64 PNG rasters (incl. ground truth)
    POST /segment       -> SegmentRequest -> SegmentResponse

The model is immutable once loaded; a bounded semaphore caps concurrent
inferences (default 2), further requests queue. Rasters travel as base64
PNG inside JSON. Requests larger than 8 MiB are rejected with 413.
"""

from __future__ import annotations

import base64
import hashlib
import io
import threading
import time
import traceback
import uuid
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from PIL import Image
from pydantic import BaseModel

from .autograd import Tensor, no_grad
from .checkpoint import load_checkpoint
from .data.preprocess import encode_arrays, resize_and_gray
from .data.synthetic import CLASS_NAMES, generate_record
from .model import count_parameters

MAX_BODY_BYTES = 8 * 1024 * 1024
DEMO_SAMPLE_SEED = 2024


class SegmentRequest(BaseModel):
    image: str                      # base64 PNG, 8-bit grayscale
    doodle: str                     # base64 PNG, non-zero = prompt
    class_id: int
    threshold: Optional[float] = None


class SegmentResponse(BaseModel):
    mask: str                       # base64 PNG, binary
    prob: str                       # base64 PNG, probabilities scaled 0-255
    inference_ms: float
    model_id: str


def png_to_array(b64: str, what: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except Exception:
        raise HTTPException(status_code=400, detail=f"{what}: not a decodable base64 PNG")


def array_to_png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _demo_samples(side: int, per_class: int = 2) -> dict[str, dict]:
    # scribbles need room; /segment resizes to the model side anyway
    side = max(side, 64)
    samples = {}
    for cid in range(len(CLASS_NAMES)):
        for i in range(per_class):
            rec, _ = generate_record(cid, i, side, seed=DEMO_SAMPLE_SEED)
            samples[rec.id] = {
                "id": rec.id, "class_id": cid, "class_name": CLASS_NAMES[cid],
                "image": rec.image, "doodle": rec.doodle, "mask": rec.mask * 255,
            }
    return samples


def create_app(checkpoint_path=None, model=None, class_names=None,
               model_id: str = "", max_workers: int = 2,
               demo_samples: bool = True, ui_dir=None) -> FastAPI:
    if model is None:
        if checkpoint_path is None:
            raise ValueError("create_app needs a checkpoint path or a model")
        model, header = load_checkpoint(checkpoint_path)
        class_names = header.get("provenance", {}).get("class_names") or list(CLASS_NAMES)
        model_id = hashlib.sha256(open(checkpoint_path, "rb").read()).hexdigest()[:16]
    class_names = list(class_names or CLASS_NAMES)
    if not model_id:
        state = model.state()
        digest = hashlib.sha256()
        for name in sorted(state):
            digest.update(name.encode())
            digest.update(np.ascontiguousarray(state[name], dtype="<f4").tobytes())
        model_id = digest.hexdigest()[:16]

    side = model.cfg.input_side
    app = FastAPI(title="doodleseg inference service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    gate = threading.Semaphore(max_workers)
    samples = _demo_samples(side) if demo_samples else {}

    @app.middleware("http")
    async def cap_body_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_BODY_BYTES:
            return JSONResponse({"detail": "payload too large"}, status_code=413)
        body = await request.body()
        if len(body) > MAX_BODY_BYTES:
            return JSONResponse({"detail": "payload too large"}, status_code=413)
        return await call_next(request)

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex[:12]
        print(f"[doodleseg:{error_id}] {request.url.path}: "
              f"{''.join(traceback.format_exception(exc)).strip()}", flush=True)
        return JSONResponse({"detail": f"internal error (id {error_id})"},
                            status_code=500)

    @app.get("/health", response_class=PlainTextResponse)
    def health() -> str:
        return "ok"

    @app.get("/model/info")
    def model_info() -> dict:
        return {"config": model.cfg.to_dict(),
                "parameter_count": count_parameters(model),
                "model_id": model_id,
                "class_names": class_names,
                "input_side": side}

    @app.get("/samples")
    def list_samples() -> list[dict]:
        return [{"id": s["id"], "class_id": s["class_id"],
                 "class_name": s["class_name"]} for s in samples.values()]

    @app.get("/samples/{sample_id}")
    def get_sample(sample_id: str) -> dict:
        s = samples.get(sample_id)
        if s is None:
            raise HTTPException(status_code=404, detail=f"unknown sample {sample_id!r}")
        return {"id": s["id"], "class_id": s["class_id"],
                "class_name": s["class_name"],
                "image": array_to_png_b64(s["image"]),
                "doodle": array_to_png_b64(s["doodle"]),
                "mask": array_to_png_b64(s["mask"])}

    @app.post("/segment", response_model=SegmentResponse)
    def segment(req: SegmentRequest) -> SegmentResponse:
        if not 0 <= req.class_id < len(class_names):
            raise HTTPException(status_code=422,
                                detail=f"class_id {req.class_id} out of range "
                                       f"[0, {len(class_names)})")
        threshold = 0.5 if req.threshold is None else float(req.threshold)
        if not 0.0 < threshold < 1.0:
            raise HTTPException(status_code=422,
                                detail=f"threshold {threshold} not in (0, 1)")
        image = png_to_array(req.image, "image")
        doodle = png_to_array(req.doodle, "doodle")
        if image.shape != doodle.shape:
            raise HTTPException(status_code=400,
                                detail=f"image {image.shape} and doodle "
                                       f"{doodle.shape} dims differ")

        start = time.perf_counter()
        net_image = resize_and_gray(image, side)
        net_doodle = resize_and_gray(doodle, side, labels=True)
        img_f, doo_f = encode_arrays(net_image, net_doodle, req.class_id,
                                     len(class_names))
        with gate, no_grad():
            probs = model.forward(Tensor(img_f[None, ..., None]),
                                  Tensor(doo_f[None, ..., None])).data[0, ..., 0]
        prob8 = np.round(probs * 255).astype(np.uint8)
        if image.shape != prob8.shape:
            # map back to the request's native resolution
            prob8 = np.asarray(
                Image.fromarray(prob8, mode="L").resize(
                    (image.shape[1], image.shape[0]), Image.BILINEAR),
                dtype=np.uint8)
        mask8 = np.where(prob8 >= round(threshold * 255), 255, 0).astype(np.uint8)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        return SegmentResponse(mask=array_to_png_b64(mask8),
                               prob=array_to_png_b64(prob8),
                               inference_ms=round(elapsed_ms, 3),
                               model_id=model_id)

    if ui_dir is not None:
        # same-origin static client; API routes above take precedence
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
