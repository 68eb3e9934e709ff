"""File formats: PFM images, JSON sidecars and configs, optional PNG previews."""
from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np

_PFM_HEADER = re.compile(rb"^(PF|Pf)\s+(\d+)\s+(\d+)\s+(-?[0-9.eE+-]+)\s", re.DOTALL)

# Rec. 709 luma weights for colour PFM input
_LUMA = np.array([0.2126, 0.7152, 0.0722])


class ImageFormatError(ValueError):
    pass


def write_pfm(path, image) -> None:
    """Write a 2-D float image as little-endian greyscale PFM (rows stored bottom to top)."""
    img = np.asarray(image, dtype="<f4")
    if img.ndim != 2:
        raise ImageFormatError("write_pfm expects a 2-D image")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a PFM file; colour images are converted to luminance."""
    data = Path(path).read_bytes()
    # header is three whitespace-separated tokens lines; parse the first 3 lines
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise ImageFormatError(f"{path}: truncated PFM header")
    kind = parts[0].strip()
    if kind not in (b"PF", b"Pf"):
        raise ImageFormatError(f"{path}: not a PFM file")
    try:
        w, h = (int(v) for v in parts[1].split())
        scale = float(parts[2].strip())
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PFM header") from exc
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    payload = parts[3]
    if len(payload) < 4 * count:
        raise ImageFormatError(f"{path}: expected {count} samples, file is short")
    arr = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64)
    arr = arr.reshape(h, w, channels)[::-1]
    if channels == 3:
        arr = arr @ _LUMA
    else:
        arr = arr[:, :, 0]
    arr = np.ascontiguousarray(arr)
    if not np.all(np.isfinite(arr)):
        raise ImageFormatError(f"{path}: non-finite samples")
    return arr


def read_image(path) -> np.ndarray:
    """Load a radiance map from PFM or ``.npy``."""
    suffix = Path(path).suffix.lower()
    if suffix == ".npy":
        arr = np.load(path)
        if arr.ndim == 3:
            arr = arr[..., :3] @ _LUMA
        return np.asarray(arr, dtype=float)
    return read_pfm(path)


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    Path(path).write_text(text + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_csv_rows(path, rows: list[dict], fieldnames: list[str] | None = None) -> None:
    import csv

    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})


def write_png_preview(path, radiance, mu: float, reference: float | None = None) -> bool:
    """Write an 8-bit mu-tone-mapped preview; returns False if Pillow is missing."""
    try:
        from PIL import Image
    except ImportError:
        return False
    from .metrics import NORMALIZATION_QUANTILE, mu_tonemap

    x = np.asarray(radiance, dtype=float)
    if reference is None:
        reference = float(np.percentile(x, NORMALIZATION_QUANTILE)) or 1.0
    tm = mu_tonemap(x / reference, mu)
    Image.fromarray(np.round(tm * 255).astype(np.uint8), mode="L").save(path)
    return True


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
