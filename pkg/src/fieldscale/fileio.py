"""Bit-exact file formats: binary PPM/PGM images, the FRM1 four-plane
frame container, darknet-style label files, float dumps and flat
key-value configuration.

Parsers raise the structured errors below instead of crashing, whatever
the input bytes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boxes import DetectionBox
from .classiccv import HsvThresholds
from .frames import Frame4
from .geometry import CameraIntrinsics, CameraPose, CameraRig, GroundPoint
from .scalemap import ScaleEncoding


class MalformedHeader(Exception):
    pass


class TruncatedData(Exception):
    pass


class BadMagic(Exception):
    pass


class SizeMismatch(Exception):
    pass


class ParseError(Exception):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(Exception):
    pass


class MissingKey(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class BadUnit(ConfigError):
    """A config value could not be read in its documented unit."""


# ---------------------------------------------------------------- images

_MAX_DIM = 1 << 16


def _read_pnm(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    if not data.startswith(magic):
        raise MalformedHeader(f"expected {magic!r} header")
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise MalformedHeader("truncated header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise MalformedHeader("unterminated comment")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise MalformedHeader(f"unexpected byte {c!r} in header")
    width, height, maxval = fields
    if maxval != 255:
        raise MalformedHeader(f"unsupported maxval {maxval}")
    if not (0 < width <= _MAX_DIM and 0 < height <= _MAX_DIM):
        raise MalformedHeader(f"unreasonable dimensions {width}x{height}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedHeader("missing whitespace after maxval")
    pos += 1
    n = width * height * channels
    body = data[pos : pos + n]
    if len(body) < n:
        raise TruncatedData(f"expected {n} pixel bytes, found {len(body)}")
    arr = np.frombuffer(body, dtype=np.uint8)
    if channels == 1:
        return arr.reshape(height, width).copy()
    return arr.reshape(height, width, channels).copy()


def read_ppm(path) -> np.ndarray:
    """Binary P6 image as an (H, W, 3) uint8 array."""
    return _read_pnm(Path(path).read_bytes(), b"P6", 3)


def write_ppm(path, image: np.ndarray) -> None:
    image = np.ascontiguousarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("image must be (H, W, 3)")
    h, w = image.shape[:2]
    _atomic_write(path, b"P6\n%d %d\n255\n" % (w, h) + image.tobytes())


def read_pgm(path) -> np.ndarray:
    """Binary P5 image as an (H, W) uint8 array."""
    return _read_pnm(Path(path).read_bytes(), b"P5", 1)


def write_pgm(path, plane: np.ndarray) -> None:
    plane = np.ascontiguousarray(plane, dtype=np.uint8)
    if plane.ndim != 2:
        raise ValueError("plane must be (H, W)")
    h, w = plane.shape
    _atomic_write(path, b"P5\n%d %d\n255\n" % (w, h) + plane.tobytes())


# ---------------------------------------------------------------- frames

_FRM_MAGIC = b"FRM1"


def read_frame(path) -> Frame4:
    """FRM1 container: magic, LE u32 width/height, four planes row-major."""
    data = Path(path).read_bytes()
    if data[:4] != _FRM_MAGIC:
        raise BadMagic(f"not an FRM1 file: {data[:4]!r}")
    if len(data) < 12:
        raise TruncatedData("missing dimension words")
    w, h = struct.unpack_from("<II", data, 4)
    if not (0 < w <= _MAX_DIM and 0 < h <= _MAX_DIM):
        raise SizeMismatch(f"unreasonable dimensions {w}x{h}")
    n = 4 * w * h
    if len(data) - 12 != n:
        raise SizeMismatch(f"expected {n} plane bytes, found {len(data) - 12}")
    planes = np.frombuffer(data, dtype=np.uint8, count=n, offset=12).reshape(4, h, w)
    return Frame4(planes.copy())


def write_frame(path, frame: Frame4) -> None:
    header = _FRM_MAGIC + struct.pack("<II", frame.width, frame.height)
    _atomic_write(path, header + np.ascontiguousarray(frame.planes).tobytes())


def write_frame_pair(ppm_path, pgm_path, frame: Frame4) -> None:
    """Export a frame as a PPM (color) plus PGM (scale plane) pair."""
    from .frames import split

    rgb, s = split(frame)
    write_ppm(ppm_path, rgb)
    write_pgm(pgm_path, s)


def read_frame_pair(ppm_path, pgm_path) -> Frame4:
    from .frames import fuse

    return fuse(read_ppm(ppm_path), read_pgm(pgm_path))


# ----------------------------------------------------------- float dumps


def write_float_dump(path, values: np.ndarray) -> None:
    """Raw LE float32 row-major dump prefixed by LE u32 width, height."""
    values = np.ascontiguousarray(values, dtype="<f4")
    h, w = values.shape
    _atomic_write(path, struct.pack("<II", w, h) + values.tobytes())


def read_float_dump(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise TruncatedData("missing dimension words")
    w, h = struct.unpack_from("<II", data, 0)
    if not (0 < w <= _MAX_DIM and 0 < h <= _MAX_DIM):
        raise SizeMismatch(f"unreasonable dimensions {w}x{h}")
    n = w * h * 4
    if len(data) - 8 != n:
        raise SizeMismatch(f"expected {n} bytes, found {len(data) - 8}")
    return np.frombuffer(data, dtype="<f4", count=w * h, offset=8).reshape(h, w).astype(np.float64)


# ---------------------------------------------------------------- labels


def read_labels(path) -> list[DetectionBox]:
    """Darknet-style label lines: ``class cx cy w h [confidence]``.

    Ground-truth files omit the confidence column.  Lines that do not
    yield a valid box raise :class:`ParseError` with their line number.
    """
    boxes = []
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise ParseError(lineno, f"expected 5 or 6 fields, got {len(parts)}")
        try:
            class_id = int(parts[0])
            values = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
        if any(not math.isfinite(v) for v in values):
            raise ParseError(lineno, "non-finite field")
        conf = values[4] if len(values) == 5 else 1.0
        box = DetectionBox(class_id, values[0], values[1], values[2], values[3], conf)
        try:
            box.validate()
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from exc
        boxes.append(box)
    return boxes


def write_labels(path, boxes, with_confidence: bool = False) -> None:
    lines = []
    for b in boxes:
        fields = [str(b.class_id)] + [f"{v:.6f}" for v in (b.cx, b.cy, b.w, b.h)]
        if with_confidence:
            fields.append(f"{b.confidence:.6f}")
        lines.append(" ".join(fields))
    _atomic_write(path, ("\n".join(lines) + "\n" if lines else "").encode())


# ---------------------------------------------------------------- config

_RIG_KEYS = (
    "fx",
    "fy",
    "cx",
    "cy",
    "width",
    "height",
    "k1",
    "k2",
    "cam_height_m",
    "pitch_deg",
    "roll_deg",
    "yaw_deg",
)

# Optional keys and their defaults; units are px for radii/strides, meters
# for widths/ranges, degrees for hue, fractions elsewhere.
_PIPELINE_DEFAULTS = {
    "h_lo": 80.0,
    "h_hi": 160.0,
    "s_lo": 0.25,
    "s_hi": 1.0,
    "v_lo": 0.15,
    "v_hi": 1.0,
    "line_width_m": 0.05,
    "margin": 1.1,
    "kernel_radius": 1.0,
    "iterations": 1.0,
    "max_range_m": 1.0,
    "query_x": 0.0,
    "query_y": 0.0,
    "stride": 32.0,
    "s_min": 0.001,
    "s_max": 0.05,
    "sentinel": 255.0,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything the pipeline CLI needs: rig, color filter and knobs."""

    rig: CameraRig
    thresholds: HsvThresholds
    line_width_m: float
    margin: float
    kernel_radius: int
    iterations: int
    max_range_m: float
    query: GroundPoint
    stride: int
    encoding: ScaleEncoding


def parse_keyvalues(path) -> dict[str, list[str]]:
    """Flat ``key = value...`` lines; '#' starts a comment."""
    out: dict[str, list[str]] = {}
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        tokens = value.replace('"', " ").split()
        if not key or not tokens:
            raise ParseError(lineno, "empty key or value")
        out[key] = tokens
    return out


def _float_of(kv: dict, key: str) -> float:
    try:
        val = float(kv[key][0])
    except (ValueError, IndexError) as exc:
        raise BadUnit(f"{key}: {exc}") from exc
    if not math.isfinite(val):
        raise BadUnit(f"{key}: non-finite value")
    return val


def rig_from_keyvalues(kv: dict) -> CameraRig:
    for key in _RIG_KEYS:
        if key not in kv:
            raise MissingKey(key)
    try:
        intr = CameraIntrinsics(
            fx=_float_of(kv, "fx"),
            fy=_float_of(kv, "fy"),
            cx=_float_of(kv, "cx"),
            cy=_float_of(kv, "cy"),
            width=int(_float_of(kv, "width")),
            height=int(_float_of(kv, "height")),
            k1=_float_of(kv, "k1"),
            k2=_float_of(kv, "k2"),
        )
        pose = CameraPose(
            height=_float_of(kv, "cam_height_m"),
            pitch=math.radians(_float_of(kv, "pitch_deg")),
            roll=math.radians(_float_of(kv, "roll_deg")),
            yaw=math.radians(_float_of(kv, "yaw_deg")),
        )
    except ValueError as exc:
        raise BadUnit(str(exc)) from exc
    return CameraRig(intr, pose)


def read_config(path) -> RunConfig:
    """Rig plus pipeline parameters from a flat key-value file.

    Intrinsics and pose never default; unknown keys are rejected so typos
    cannot silently fall back to defaults.
    """
    kv = parse_keyvalues(path)
    for key in kv:
        if key not in _RIG_KEYS and key not in _PIPELINE_DEFAULTS:
            raise UnknownKey(key)
    rig = rig_from_keyvalues(kv)
    vals = dict(_PIPELINE_DEFAULTS)
    for key in _PIPELINE_DEFAULTS:
        if key in kv:
            vals[key] = _float_of(kv, key)
    try:
        thresholds = HsvThresholds(
            h_lo=vals["h_lo"],
            h_hi=vals["h_hi"],
            s_lo=vals["s_lo"],
            s_hi=vals["s_hi"],
            v_lo=vals["v_lo"],
            v_hi=vals["v_hi"],
        )
        encoding = ScaleEncoding(
            s_min=vals["s_min"], s_max=vals["s_max"], sentinel_value=int(vals["sentinel"])
        )
    except ValueError as exc:
        raise BadUnit(str(exc)) from exc
    if vals["line_width_m"] <= 0:
        raise BadUnit("line_width_m must be positive")
    if vals["stride"] < 1:
        raise BadUnit("stride must be >= 1")
    return RunConfig(
        rig=rig,
        thresholds=thresholds,
        line_width_m=vals["line_width_m"],
        margin=vals["margin"],
        kernel_radius=int(vals["kernel_radius"]),
        iterations=int(vals["iterations"]),
        max_range_m=vals["max_range_m"],
        query=GroundPoint(vals["query_x"], vals["query_y"]),
        stride=int(vals["stride"]),
        encoding=encoding,
    )


def write_config(path, cfg: RunConfig) -> None:
    intr, pose = cfg.rig.intrinsics, cfg.rig.pose
    th, enc = cfg.thresholds, cfg.encoding
    pairs = [
        ("fx", intr.fx),
        ("fy", intr.fy),
        ("cx", intr.cx),
        ("cy", intr.cy),
        ("width", intr.width),
        ("height", intr.height),
        ("k1", intr.k1),
        ("k2", intr.k2),
        ("cam_height_m", pose.height),
        ("pitch_deg", math.degrees(pose.pitch)),
        ("roll_deg", math.degrees(pose.roll)),
        ("yaw_deg", math.degrees(pose.yaw)),
        ("h_lo", th.h_lo),
        ("h_hi", th.h_hi),
        ("s_lo", th.s_lo),
        ("s_hi", th.s_hi),
        ("v_lo", th.v_lo),
        ("v_hi", th.v_hi),
        ("line_width_m", cfg.line_width_m),
        ("margin", cfg.margin),
        ("kernel_radius", cfg.kernel_radius),
        ("iterations", cfg.iterations),
        ("max_range_m", cfg.max_range_m),
        ("query_x", cfg.query.x),
        ("query_y", cfg.query.y),
        ("stride", cfg.stride),
        ("s_min", enc.s_min),
        ("s_max", enc.s_max),
        ("sentinel", enc.sentinel_value),
    ]
    body = "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in pairs)
    _atomic_write(path, body.encode())


# ---------------------------------------------------------------- util


def _atomic_write(path, data: bytes) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    half-written file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
