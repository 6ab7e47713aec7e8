"""Plain binary image formats: PPM (P6), PGM (P5), and PFM.

All writers are byte-deterministic: fixed quantization, fixed headers, and
little-endian PFM with the conventional negative scale and bottom-to-top row
order. Invalid depths are stored as 0 (depths are strictly positive).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .pyramid import DepthMap


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path: str | Path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) image in [0, 1] as binary PPM, maxval 255."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3), got {rgb.shape}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(_quantize(rgb).tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM into an (H, W, 3) float array in [0, 1]."""
    magic, (w, h), maxval, data = _read_netpbm(path, b"P6")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3)
    return img.astype(np.float64) / maxval


def write_pgm(path: str | Path, gray: np.ndarray) -> None:
    """Write an (H, W) plane in [0, 1] as binary PGM, maxval 255."""
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError(f"expected (H, W), got {gray.shape}")
    h, w = gray.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(_quantize(gray).tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM into an (H, W) float array in [0, 1]."""
    magic, (w, h), maxval, data = _read_netpbm(path, b"P5")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h).reshape(h, w)
    return img.astype(np.float64) / maxval


def _read_netpbm(path, expected_magic):
    raw = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != expected_magic:
        raise ValueError(f"expected {expected_magic.decode()} file, got {fields[0]!r}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    return fields[0], (w, h), maxval, raw[pos + 1 :]


def write_pfm(path: str | Path, depth: DepthMap) -> None:
    """Write a depth map as grayscale PFM (little-endian, scale -1.0).

    Rows are stored bottom-to-top per the format convention; invalid pixels
    are stored as 0.
    """
    values = np.where(depth.valid, depth.values, 0.0).astype("<f4")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(values[::-1].tobytes())


def read_pfm(path: str | Path) -> DepthMap:
    """Read a grayscale PFM; zeros become invalid depths."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"Pf":
        raise ValueError(f"expected grayscale PFM, got {parts[0]!r}")
    w, h = (int(x) for x in parts[1].split())
    scale = float(parts[2])
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(parts[3], dtype=dtype, count=w * h).reshape(h, w)[::-1]
    values = data.astype(np.float64)
    return DepthMap(values=np.where(values > 0, values, np.nan))
