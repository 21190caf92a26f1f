"""Offline feature extraction: frame images -> engine-format feature files.

The deterministic embedder resizes a grayscale image to a k x k patch
(k*k >= dim), zero-means and L2-normalizes the flattened pixels, and
truncates to the requested dimension. "Detections" are the image quadrants
whose pixel variance clears a threshold, so flat regions yield no boxes.
This stands in for a detector+encoder checkpoint; swapping one in only has
to reproduce the two functions at the top.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
from PIL import Image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class ExtractionError(RuntimeError):
    pass


def embed_image(image: Image.Image, dim: int) -> np.ndarray:
    """Deterministic dim-length embedding of an image."""
    side = math.isqrt(dim - 1) + 1
    gray = image.convert("L").resize((side, side), Image.BILINEAR)
    flat = np.asarray(gray, dtype=np.float64).reshape(-1)[:dim]
    flat = flat - flat.mean()
    norm = np.linalg.norm(flat)
    return flat / norm if norm > 0 else np.zeros(dim)


def detect_regions(image: Image.Image, variance_threshold: float = 8.0):
    """Quadrants with enough pixel variance, as (bbox, crop) pairs."""
    width, height = image.size
    half_w, half_h = width // 2, height // 2
    boxes = [
        (0, 0, half_w, half_h),
        (half_w, 0, width, half_h),
        (0, half_h, half_w, height),
        (half_w, half_h, width, height),
    ]
    regions = []
    for box in boxes:
        if box[0] >= box[2] or box[1] >= box[3]:
            continue
        crop = image.crop(box)
        if float(np.asarray(crop.convert("L"), dtype=np.float64).std()) >= variance_threshold:
            regions.append((tuple(float(v) for v in box), crop))
    return regions


def _image_files(directory: str | Path) -> list[Path]:
    files = sorted(
        p for p in Path(directory).iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not files:
        raise ExtractionError(f"no image files in {directory}")
    return files


def extract_anchors(
    anchors_dir: str | Path, dim: int, entity_type: str = "person"
) -> dict:
    """Anchor registry document from one image per entity (file stem = id)."""
    anchors = []
    for path in _image_files(anchors_dir):
        with Image.open(path) as image:
            feature = embed_image(image, dim)
        if not np.linalg.norm(feature) > 0:
            raise ExtractionError(f"anchor image {path.name} is flat (zero-norm embedding)")
        anchors.append(
            {
                "entity_id": path.stem,
                "name": path.stem,
                "entity_type": entity_type,
                "feature": [float(v) for v in feature],
            }
        )
    return {"feature_dim": dim, "anchors": anchors}


def extract_features(
    frames_dir: str | Path,
    anchors_doc: dict,
    p: float,
    out_path: str | Path,
    dim: int | None = None,
) -> Path:
    """One feature record per frame image, at timestamps index * p.

    Frame images are taken in sorted filename order. The embedding dimension
    must match the anchor registry's declared dimension.
    """
    if p <= 0:
        raise ExtractionError(f"sampling period must be > 0, got {p}")
    registry_dim = int(anchors_doc["feature_dim"])
    dim = registry_dim if dim is None else dim
    if dim != registry_dim:
        raise ExtractionError(
            f"extraction dimension {dim} does not match anchor registry dimension {registry_dim}"
        )
    out_path = Path(out_path)
    records = []
    for index, path in enumerate(_image_files(frames_dir)):
        with Image.open(path) as image:
            detections = [
                {
                    "bbox": list(bbox),
                    "feature": [float(v) for v in embed_image(crop, dim)],
                }
                for bbox, crop in detect_regions(image)
            ]
            frame_feature = embed_image(image, dim)
        records.append(
            {
                "frame_index": index,
                "timestamp_s": index * p,
                "frame_feature": [float(v) for v in frame_feature]
                if np.linalg.norm(frame_feature) > 0
                else None,
                "detections": detections,
            }
        )
    out_path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return out_path
