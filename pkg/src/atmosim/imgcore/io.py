"""Image and array file formats.

PNG (8- or 16-bit, via Pillow) for display images, PFM (little-endian
float32) for kernels and flow planes, and a small container format for
structured array bundles: a fixed magic, a JSON header describing named
arrays, then their raw float32 payloads in order.  Float64 arrays narrow to
float32 on disk by design; callers that need bit-exact round trips of
double-precision state serialize through JSON instead.
"""

from __future__ import annotations

import json
import struct

import numpy as np
from PIL import Image as PILImage

from .image import as_image

_MAGIC = b"ATSC\x01\n"


def save_png(path, x: np.ndarray, bit_depth: int = 8) -> None:
    """Write an image in [0, 1] as an 8- or 16-bit PNG.

    16-bit output is grayscale only.  Values are clipped to [0, 1] before
    quantization.
    """
    x = as_image(x)
    x = np.clip(x, 0.0, 1.0)
    if bit_depth == 8:
        q = np.round(x * 255.0).astype(np.uint8)
        img = PILImage.fromarray(q, mode="L" if q.ndim == 2 else "RGB")
    elif bit_depth == 16:
        if x.ndim != 2:
            raise ValueError("16-bit PNG supports grayscale only")
        q = np.round(x * 65535.0).astype(np.uint16)
        img = PILImage.fromarray(q.astype(np.int32), mode="I").convert("I;16")
    else:
        raise ValueError("bit_depth must be 8 or 16")
    img.save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Read a PNG into a float64 image in [0, 1]."""
    img = PILImage.open(path)
    if img.mode in ("I;16", "I;16B", "I;16L"):
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode == "I":
        arr = np.asarray(img, dtype=np.float64) / 65535.0
    elif img.mode == "L":
        arr = np.asarray(img, dtype=np.float64) / 255.0
    else:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def save_pfm(path, x: np.ndarray) -> None:
    """Write a float array as little-endian PFM (Pf grayscale, PF color)."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim == 2:
        header = b"Pf\n"
    elif x.ndim == 3 and x.shape[2] == 3:
        header = b"PF\n"
    else:
        raise ValueError(f"PFM supports (H, W) or (H, W, 3), got {x.shape}")
    with open(path, "wb") as f:
        f.write(header)
        f.write(f"{x.shape[1]} {x.shape[0]}\n".encode("ascii"))
        f.write(b"-1.0\n")  # negative scale marks little-endian
        f.write(np.flipud(x).astype("<f4").tobytes())


def load_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        kind = f.readline().strip()
        if kind not in (b"Pf", b"PF"):
            raise ValueError(f"not a PFM file: {kind!r}")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        count = w * h * (3 if kind == b"PF" else 1)
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(count * 4), dtype=dtype).astype(np.float64)
    shape = (h, w, 3) if kind == b"PF" else (h, w)
    return np.flipud(data.reshape(shape)).copy()


def write_container(path, header: dict, arrays: dict) -> None:
    """Write named float32 arrays after a JSON header.

    The header must be JSON-serializable; array shapes and order are recorded
    under the reserved key "__arrays__".
    """
    meta = dict(header)
    meta["__arrays__"] = [
        {"name": name, "shape": list(np.asarray(a).shape)} for name, a in arrays.items()
    ]
    hjson = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<Q", len(hjson)))
        f.write(hjson)
        for a in arrays.values():
            f.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def read_container(path):
    """Read a container file; returns (header, dict of float64 arrays)."""
    with open(path, "rb") as f:
        magic = f.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not a container file (bad magic)")
        (hlen,) = struct.unpack("<Q", f.read(8))
        meta = json.loads(f.read(hlen).decode("utf-8"))
        entries = meta.pop("__arrays__")
        arrays = {}
        for ent in entries:
            n = int(np.prod(ent["shape"])) if ent["shape"] else 1
            buf = np.frombuffer(f.read(n * 4), dtype="<f4")
            if buf.size != n:
                raise ValueError(f"truncated payload for array {ent['name']!r}")
            arrays[ent["name"]] = buf.astype(np.float64).reshape(ent["shape"])
    return meta, arrays
