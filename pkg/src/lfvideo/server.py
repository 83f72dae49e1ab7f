"""HTTP service exposing sequences, views, refocus rendering, and tracking.

All imaging math runs server-side; the browser viewer is a thin client that
only displays the PNGs and parameters returned here.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import PlaneSweepConfig
from .disparity import variance_argmin_disparity
from .lightfield import AngularCoord
from .render import RefocusParams, TrackState, click_to_focus, refocus, track_point
from .synthdata import SequenceBundle, read_sequence


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class LoadedSequence:
    """A sequence plus lazily computed per-frame disparities."""

    def __init__(self, name: str, bundle: SequenceBundle):
        self.name = name
        self.bundle = bundle
        self._disparity_cache: dict[int, np.ndarray] = {}

    def light_field(self, t: int):
        if not 0 <= t < self.bundle.frames:
            raise ApiError(400, f"frame {t} outside [0, {self.bundle.frames - 1}]")
        lf = self.bundle.light_fields[t]
        if lf is None:
            raise ApiError(404, f"frame {t} has no light field")
        return lf

    def disparity(self, t: int) -> np.ndarray:
        """Stored pipeline/ground-truth disparity, else a plane-sweep argmin."""
        if not 0 <= t < self.bundle.frames:
            raise ApiError(400, f"frame {t} outside [0, {self.bundle.frames - 1}]")
        if t in self._disparity_cache:
            return self._disparity_cache[t]
        d = self.bundle.extras.get(f"disp/{t:05d}")
        if d is None and self.bundle.gt_disparity is not None:
            d = self.bundle.gt_disparity[t]
        if d is None:
            lf = self.bundle.light_fields[t]
            if lf is None:
                raise ApiError(404, f"frame {t} has neither a disparity map nor a light field")
            lo, hi = self.bundle.d_range or (-2.0, 2.0)
            d = variance_argmin_disparity(lf, PlaneSweepConfig(16, lo, hi)).values
        d = np.asarray(d, dtype=np.float64)
        self._disparity_cache[t] = d
        return d

    def d_range(self) -> tuple[float, float]:
        if self.bundle.d_range is not None:
            return self.bundle.d_range
        return (-2.0, 2.0)


def _png(img: np.ndarray) -> Response:
    from PIL import Image

    arr = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    u8 = np.round(arr.transpose(1, 2, 0) * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8).save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png")


class ClickBody(BaseModel):
    seq: str
    t: int
    x: float
    y: float


class TrackBody(BaseModel):
    seq: str
    t0: int
    x: float
    y: float


def create_app(sequences: dict[str, SequenceBundle | str | Path],
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="light-field video service")
    loaded: dict[str, LoadedSequence] = {}
    for name, src in sequences.items():
        bundle = src if isinstance(src, SequenceBundle) else read_sequence(src)
        loaded[name] = LoadedSequence(name, bundle)

    def get_seq(name: str) -> LoadedSequence:
        if name not in loaded:
            raise ApiError(404, f"unknown sequence {name!r}")
        return loaded[name]

    @app.exception_handler(ApiError)
    async def on_api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"error": "bad_request" if exc.status < 500 else "server_error",
                                     "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "bad_request", "message": str(exc.errors()[:1])})

    @app.get("/api/sequences")
    def list_sequences():
        return {"sequences": sorted(loaded)}

    @app.get("/api/meta")
    def meta(seq: str):
        s = get_seq(seq)
        b = s.bundle
        lo, hi = s.d_range()
        return {
            "seq": seq,
            "frames": b.frames,
            "H": b.spatial_dims[0],
            "W": b.spatial_dims[1],
            "A": b.angular_resolution,
            "keyframe_stride": b.keyframe_stride,
            "d_min": lo,
            "d_max": hi,
            "frames_with_light_fields": b.frames_with_light_fields(),
        }

    @app.get("/api/view")
    def view(seq: str, t: int, u: int = 0, v: int = 0):
        s = get_seq(seq)
        lf = s.light_field(t)
        coord = AngularCoord(u, v)
        if not coord.bounded(lf.angular_resolution):
            raise ApiError(400, f"view ({u}, {v}) outside the {lf.angular_resolution}x"
                                f"{lf.angular_resolution} grid")
        return _png(lf.view(coord))

    @app.get("/api/refocus")
    def refocus_endpoint(seq: str, t: int, s: float = 0.0, r: float = 0.0):
        seq_obj = get_seq(seq)
        lf = seq_obj.light_field(t)
        lo, hi = seq_obj.d_range()
        params = RefocusParams(focus_disparity=s, aperture_radius=r, frame=t)
        try:
            params.validate(lf.angular_resolution, lo, hi)
            img = refocus(lf, params)
        except ValueError as exc:
            raise ApiError(400, str(exc))
        return _png(img)

    @app.post("/api/click")
    def click(body: ClickBody):
        s = get_seq(body.seq)
        d = s.disparity(body.t)
        try:
            focus = click_to_focus(body.x, body.y, d)
        except ValueError as exc:
            raise ApiError(400, str(exc))
        return {"s": focus}

    @app.post("/api/track")
    def track(body: TrackBody):
        s = get_seq(body.seq)
        b = s.bundle
        if not 0 <= body.t0 < b.frames:
            raise ApiError(400, f"t0 {body.t0} outside [0, {b.frames - 1}]")
        frames = [b.video[t].image for t in range(body.t0, b.frames)]
        try:
            states = track_point(frames, TrackState(x=body.x, y=body.y))
        except ValueError as exc:
            raise ApiError(400, str(exc))
        points = []
        for st in states:
            t = body.t0 + st.frame
            try:
                focus = click_to_focus(st.x, st.y, s.disparity(t))
            except ApiError:
                focus = None
            points.append({"t": t, "x": st.x, "y": st.y, "s": focus,
                           "lost": st.lost, "confidence": st.confidence})
        return {"points": points, "lost": any(st.lost for st in states)}

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(sequence_paths: dict[str, str | Path], port: int = 8080,
          host: str = "127.0.0.1", ui_dir: str | Path | None = None) -> None:
    """Load the sequences and run the HTTP service (blocking)."""
    import uvicorn

    app = create_app(sequence_paths, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
