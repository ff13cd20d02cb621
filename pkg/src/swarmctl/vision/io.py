"""Binary PGM (P5) frames and the detection CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

DETECTION_HEADER = ("frame_idx", "x", "y", "confidence", "source")


class PGMError(ValueError):
    pass


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    """8-bit frames use maxval 255, 16-bit frames maxval 65535 (big-endian)."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise PGMError("PGM frames must be 2-D")
    if img.dtype == np.uint8:
        maxval, data = 255, img.tobytes()
    elif img.dtype == np.uint16:
        maxval, data = 65535, img.astype(">u2").tobytes()
    else:
        raise PGMError(f"unsupported dtype {img.dtype}; use uint8 or uint16")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data)


def _tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    out, i = [], 0
    while len(out) < count:
        while i < len(buf) and buf[i:i + 1].isspace():
            i += 1
        if buf[i:i + 1] == b"#":
            while i < len(buf) and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(buf) and not buf[j:j + 1].isspace():
            j += 1
        if j == i:
            raise PGMError("truncated PGM header")
        out.append(buf[i:j])
        i = j
    return out, i + 1  # exactly one whitespace byte ends the header


def read_pgm(path: str | Path) -> np.ndarray:
    buf = Path(path).read_bytes()
    toks, off = _tokens(buf, 4)
    if toks[0] != b"P5":
        raise PGMError(f"{path}: not a binary PGM (magic {toks[0]!r})")
    try:
        w, h, maxval = int(toks[1]), int(toks[2]), int(toks[3])
    except ValueError:
        raise PGMError(f"{path}: malformed header") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise PGMError(f"{path}: bad dimensions or maxval")
    dtype = np.dtype("u1") if maxval < 256 else np.dtype(">u2")
    need = w * h * dtype.itemsize
    if len(buf) - off < need:
        raise PGMError(f"{path}: expected {need} data bytes, found {len(buf) - off}")
    img = np.frombuffer(buf, dtype=dtype, count=w * h, offset=off).reshape(h, w)
    return img.astype(np.uint8 if maxval < 256 else np.uint16)


@dataclass(frozen=True)
class Detection:
    frame_idx: int
    x: float
    y: float
    confidence: float
    source: str

    def __post_init__(self):
        if self.source not in ("detect", "track"):
            raise ValueError(f"source must be 'detect' or 'track', got {self.source!r}")


def save_detections(path: str | Path, rows: Iterable[Detection]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_HEADER)
        for r in rows:
            w.writerow([r.frame_idx, repr(r.x), repr(r.y), repr(r.confidence), r.source])


def load_detections(path: str | Path) -> list[Detection]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DETECTION_HEADER:
            raise ValueError(f"{path}:1: header mismatch, got {header!r}")
        out = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                out.append(Detection(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3]), rec[4]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out
