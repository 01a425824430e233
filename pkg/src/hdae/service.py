"""HTTP inference service: encode, reconstruct, edit, mix, interpolate.

Sessions hold immutable encoded images; every edit is functional. Generation
requests pass through a bounded queue with one in-flight generation, since
inference saturates the compute device.
"""

import io
import secrets
import threading
import time
from dataclasses import dataclass, field

import torch
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from . import editing as ed
from .codes import EncodedImage
from .data import image_to_tensor, tensor_to_image
from .latent import encode, decode_code, interpolate as interp_op, style_mix, InterpolationPath
from .nets import Autoencoder, config_hash
from .schedule import NoiseSchedule, StepPlan, make_linear_schedule, make_step_plan

MAX_UPLOAD_BYTES = 8 * 1024 * 1024
DEFAULT_QUEUE_DEPTH = 8


@dataclass
class Session:
    id: str
    encoded: EncodedImage
    created_at: float
    thumbnail_png: bytes


@dataclass
class ServiceBundle:
    """Everything the endpoints need, loaded once at startup."""

    model: Autoencoder
    schedule: NoiseSchedule = None
    plan: StepPlan = None
    attributes: list = field(default_factory=list)  # AttributeDirection
    session_ttl: float = 3600.0
    queue_depth: int = DEFAULT_QUEUE_DEPTH

    def __post_init__(self):
        if self.schedule is None:
            self.schedule = make_linear_schedule(1000)
        if self.plan is None:
            self.plan = make_step_plan(self.schedule.T, min(100, self.schedule.T))
        self.model.eval()

    def attribute(self, name):
        for a in self.attributes:
            if a.name == name:
                return a
        return None


class _GenerationGate:
    """Single in-flight generation with a bounded waiting queue."""

    def __init__(self, depth: int):
        self.depth = depth
        self.lock = threading.Lock()
        self.run_lock = threading.Lock()
        self.waiting = 0

    def __enter__(self):
        with self.lock:
            if self.waiting >= self.depth:
                raise QueueFullError()
            self.waiting += 1
        self.run_lock.acquire()
        return self

    def __exit__(self, *exc):
        self.run_lock.release()
        with self.lock:
            self.waiting -= 1
        return False


class QueueFullError(Exception):
    pass


class EditBody(BaseModel):
    session_id: str
    attribute: str
    alpha: float
    k: int


class MixBody(BaseModel):
    session_a: str
    session_b: str
    split: int


class InterpolateBody(BaseModel):
    session_a: str
    session_b: str
    lambdas: list
    xT_weight: float


class ReconstructBody(BaseModel):
    session_id: str


def _png_bytes(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def create_app(bundle: ServiceBundle) -> FastAPI:
    app = FastAPI(title="hierarchical latent editing service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
        expose_headers=["X-Logit-Before", "X-Logit-After"])

    sessions: dict = {}
    sess_lock = threading.Lock()
    gate = _GenerationGate(bundle.queue_depth)
    cfg = bundle.model.cfg
    L, d = cfg.L, cfg.d
    flat_len = cfg.flat_code_len()

    def get_session(sid: str):
        now = time.time()
        with sess_lock:
            expired = [k for k, s in sessions.items()
                       if now - s.created_at > bundle.session_ttl]
            for k in expired:
                del sessions[k]
            return sessions.get(sid)

    def error(status: int, detail: str):
        return JSONResponse(status_code=status, content={"detail": detail})

    def render_code(code, xT) -> bytes:
        with gate:
            img = decode_code(bundle.model, code, xT, bundle.plan, bundle.schedule)
        return _png_bytes(tensor_to_image(img))

    @app.exception_handler(QueueFullError)
    async def queue_full(_req, _exc):
        return error(503, "generation queue full")

    @app.post("/api/encode")
    async def api_encode(request: Request):
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            return error(413, "upload too large")
        try:
            img = Image.open(io.BytesIO(body))
            x0 = image_to_tensor(img, cfg.image_size)
        except Exception:
            return error(400, "body is not a decodable image")
        with gate:
            enc = encode(bundle.model, x0, bundle.plan, bundle.schedule)
        sid = secrets.token_hex(8)
        thumb = _png_bytes(tensor_to_image(x0))
        with sess_lock:
            sessions[sid] = Session(id=sid, encoded=enc, created_at=time.time(),
                                    thumbnail_png=thumb)
        return {"session_id": sid, "L": L, "d": d, "flat_len": flat_len}

    @app.post("/api/reconstruct")
    def api_reconstruct(body: ReconstructBody):
        sess = get_session(body.session_id)
        if sess is None:
            return error(404, "unknown session")
        png = render_code(sess.encoded.code, sess.encoded.xT)
        return Response(content=png, media_type="image/png")

    @app.post("/api/edit")
    def api_edit(body: EditBody):
        sess = get_session(body.session_id)
        if sess is None:
            return error(404, "unknown session")
        direction = bundle.attribute(body.attribute)
        if direction is None:
            return error(422, f"unknown attribute {body.attribute!r}")
        if not 0 <= body.k <= direction.n.size:
            return error(422, f"k must lie in [0, {direction.n.size}]")
        truncated = ed.truncate_direction(direction, body.k)
        code = sess.encoded.code
        before = direction.logit(code)
        edited = ed.manipulate(code, truncated, body.alpha)
        after = direction.logit(edited)
        png = render_code(edited, sess.encoded.xT)
        return Response(content=png, media_type="image/png", headers={
            "X-Logit-Before": repr(before), "X-Logit-After": repr(after)})

    @app.post("/api/mix")
    def api_mix(body: MixBody):
        sa, sb = get_session(body.session_a), get_session(body.session_b)
        if sa is None or sb is None:
            return error(404, "unknown session")
        if not 0 <= body.split <= sa.encoded.code.L:
            return error(422, f"split must lie in [0, {sa.encoded.code.L}]")
        mixed = style_mix(sa.encoded.code, sb.encoded.code, body.split)
        png = render_code(mixed, sa.encoded.xT)
        return Response(content=png, media_type="image/png")

    @app.post("/api/interpolate")
    def api_interpolate(body: InterpolateBody):
        sa, sb = get_session(body.session_a), get_session(body.session_b)
        if sa is None or sb is None:
            return error(404, "unknown session")
        try:
            path = InterpolationPath(lambdas=tuple(body.lambdas),
                                     xT_weight=body.xT_weight)
            code, xT = interp_op(sa.encoded, sb.encoded, path)
        except ValueError as e:
            return error(422, str(e))
        png = render_code(code, xT)
        return Response(content=png, media_type="image/png")

    @app.get("/api/attributes")
    def api_attributes():
        out = []
        for a in bundle.attributes:
            mass, argmax = ed.level_attribution(a)
            out.append({"name": a.name, "level_mass": mass.tolist(),
                        "argmax_level": argmax, "train_accuracy": a.train_accuracy})
        return out

    @app.get("/api/code/{sid}")
    def api_code(sid: str):
        sess = get_session(sid)
        if sess is None:
            return error(404, "unknown session")
        return Response(content=sess.encoded.code.to_json(config_hash(cfg)),
                        media_type="application/json")

    @app.get("/api/health")
    def api_health():
        return {"status": "ok", "model_hash": config_hash(cfg), "L": L, "d": d}

    return app
