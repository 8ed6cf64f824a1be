"""File formats: binary PGM/PPM images, landmark CSV and DFLD1 displacement fields.

Every writer goes through :func:`atomic_write`, so a failed write never
leaves a partial file behind.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import BadMagic, IoFailure, MalformedHeader, ParseError, SizeMismatch, UnsupportedFormat
from .evaluation import as_landmarks
from .imaging import as_field, as_image

FIELD_MAGIC = "DFLD1"
_LUMA = np.array([0.299, 0.587, 0.114])


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_bytes(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return path.read_bytes()


def _header_tokens(buf: bytes, count: int):
    """Pull whitespace-separated header tokens, skipping ``#`` comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos:pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos:pos + 1] == b"#":
            while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise MalformedHeader("header ended early")
        tokens.append(buf[start:pos])
    if pos >= n or not buf[pos:pos + 1].isspace():
        raise MalformedHeader("missing whitespace after header")
    return tokens, pos + 1


def load_image(path) -> np.ndarray:
    """Read an 8-bit binary PGM (P5) or PPM (P6) as a float image in [0, 1].

    Color is reduced to luminance ``0.299 R + 0.587 G + 0.114 B``.
    """
    buf = _read_bytes(path)
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"{path}: only binary P5/P6 images are supported")
    try:
        tokens, offset = _header_tokens(buf[2:], 3)
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        if isinstance(exc, MalformedHeader):
            raise
        raise MalformedHeader(f"{path}: non-numeric header field") from exc
    offset += 2
    if width < 1 or height < 1 or maxval < 1:
        raise MalformedHeader(f"{path}: bad dimensions or maxval")
    if maxval > 255:
        raise UnsupportedFormat(f"{path}: only 8-bit images are supported (maxval {maxval})")
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    payload = buf[offset:offset + need]
    if len(payload) < need:
        raise MalformedHeader(f"{path}: payload has {len(payload)} bytes, expected {need}")
    pix = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / maxval
    if channels == 3:
        return pix.reshape(height, width, 3) @ _LUMA
    return pix.reshape(height, width)


def image_to_bytes(img) -> bytes:
    img = as_image(img)
    h, w = img.shape
    vals = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + vals.tobytes()


def save_image(img, path) -> None:
    """Write a P5 PGM; intensities are clamped to [0, 1] and rounded half up."""
    atomic_write(path, image_to_bytes(img))


def landmarks_to_text(points) -> str:
    pts = as_landmarks(points)
    rows = ["x,y"] + [f"{float(x)!r},{float(y)!r}" for x, y in pts]
    return "\n".join(rows) + "\n"


def save_landmarks(points, path) -> None:
    atomic_write(path, landmarks_to_text(points).encode("ascii"))


def parse_landmarks(text: str) -> np.ndarray:
    points = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.replace(" ", "").lower() == "x,y":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 'x,y', got {line!r}")
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-numeric value in {line!r}") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise ParseError(lineno, f"non-finite value in {line!r}")
        points.append((x, y))
    return np.array(points, dtype=np.float64).reshape(-1, 2)


def load_landmarks(path) -> np.ndarray:
    """Read ``x,y`` rows (optional ``x,y`` header) in file order."""
    buf = _read_bytes(path)
    try:
        text = buf.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError(1, "file is not text") from None
    return parse_landmarks(text)


def field_to_bytes(field) -> bytes:
    field = as_field(field)
    h, w = field.shape[:2]
    header = f"{FIELD_MAGIC} {w} {h}\n".encode("ascii")
    return header + field.astype("<f4").tobytes()


def save_field(field, path) -> None:
    """DFLD1: ``"DFLD1 <w> <h>\\n"`` then row-major little-endian float32 (dx, dy)."""
    atomic_write(path, field_to_bytes(field))


def load_field(path) -> np.ndarray:
    buf = _read_bytes(path)
    end = buf.find(b"\n")
    head = buf[:end if end >= 0 else 64].decode("ascii", errors="replace").split()
    if not head or head[0] != FIELD_MAGIC:
        raise BadMagic(f"{path}: not a {FIELD_MAGIC} file")
    if end < 0 or len(head) != 3:
        raise SizeMismatch(f"{path}: malformed {FIELD_MAGIC} header")
    try:
        width, height = int(head[1]), int(head[2])
    except ValueError:
        raise SizeMismatch(f"{path}: non-numeric field size") from None
    if width < 1 or height < 1:
        raise SizeMismatch(f"{path}: bad field size {width}x{height}")
    payload = buf[end + 1:]
    if len(payload) != width * height * 8:
        raise SizeMismatch(f"{path}: payload has {len(payload)} bytes, expected {width * height * 8}")
    vec = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2)
    return vec.astype(np.float64)
