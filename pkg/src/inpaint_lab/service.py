"""HTTP inference service: POST /inpaint and GET /health.

Transport is base64-encoded PNG inside JSON. Unmasked pixels of the response
are bit-identical to the request image: composition happens on 8-bit arrays.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from .errors import ResolutionError
from .imaging import ImageTensor, normalize, to_uint8
from .networks import compute_receptive_field, forward_generate
from .trainer import load_checkpoint
from .networks import build_generator, generator_spec_from_json

MAX_SIDE = 4096  # larger inputs are refused with 413
MASK_THRESHOLD = 128


class InpaintRequest(BaseModel):
    image: str
    mask: str
    options: dict = {}


class ApiError(Exception):
    def __init__(self, status: int, field: str, message: str):
        self.status = status
        self.field = field
        self.message = message
        super().__init__(message)


@dataclass
class ModelBundle:
    generator: object
    model_id: str
    levels: int
    receptive_field: int


def load_bundle(checkpoint_path) -> ModelBundle:
    payload = load_checkpoint(checkpoint_path)
    spec = generator_spec_from_json(payload["generator_spec"])
    generator = build_generator(spec)
    generator.load_state_dict(payload["generator"])
    generator.eval()
    import os

    return ModelBundle(
        generator=generator,
        model_id=os.path.splitext(os.path.basename(str(checkpoint_path)))[0],
        levels=spec.levels,
        receptive_field=compute_receptive_field(spec).size,
    )


def _decode_png(field: str, b64: str, mode: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception:
        raise ApiError(400, field, "not valid base64 data")
    try:
        with Image.open(io.BytesIO(raw)) as im:
            arr = np.asarray(im.convert(mode))
    except Exception:
        raise ApiError(400, field, "not a decodable PNG image")
    return arr


def complete_arrays(generator, image_u8: np.ndarray, mask_bool: np.ndarray) -> np.ndarray:
    """Generate into the mask; unmasked bytes are copied from the input."""
    signed = normalize(ImageTensor(image_u8.astype(np.float32), "raw")).values
    mask_f = mask_bool.astype(np.float32)[:, :, None]
    input4 = np.concatenate([signed * (1.0 - mask_f), mask_f], axis=2)
    generated = forward_generate(generator, input4[None])[0]
    gen_u8 = to_uint8(ImageTensor(generated, "signed"))
    return np.where(mask_bool[:, :, None], gen_u8, image_u8)


def create_app(bundle: ModelBundle) -> FastAPI:
    app = FastAPI(title="inpaint-lab service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def _api_error(request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": {"field": exc.field, "message": exc.message}},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": {"message": str(exc.errors())}})

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_id": bundle.model_id,
            "levels": bundle.levels,
            "receptive_field": bundle.receptive_field,
        }

    @app.post("/inpaint")
    def inpaint(req: InpaintRequest):
        image = _decode_png("image", req.image, "RGB")
        mask_arr = _decode_png("mask", req.mask, "L")
        h, w = image.shape[:2]
        if max(h, w) > MAX_SIDE or max(mask_arr.shape) > MAX_SIDE:
            raise ApiError(413, "image", f"size {w}x{h} exceeds the {MAX_SIDE}px limit")
        if mask_arr.shape != (h, w):
            raise ApiError(
                400, "mask",
                f"mask is {mask_arr.shape[1]}x{mask_arr.shape[0]} but image is {w}x{h}",
            )
        mask_bool = mask_arr >= MASK_THRESHOLD
        try:
            out = complete_arrays(bundle.generator, image, mask_bool)
        except ResolutionError as exc:
            raise ApiError(400, "image", str(exc))
        buf = io.BytesIO()
        Image.fromarray(out).save(buf, format="PNG")
        return {"image": base64.b64encode(buf.getvalue()).decode("ascii")}

    return app
