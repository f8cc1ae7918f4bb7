"""The HCS1 serving loop.

The engine writes one JSON handshake line ``{n, n0, sigma, seed, mode}``
and reads back a single HCS1 stream (little-endian): magic ``HCS1``, u8
kind (0 labels / 1 posteriors / 2 mixed), u32 N, u32 classes, u32 frame
count, u64 seed, and for kind 2 a u32 count of the leading posterior
frames.  A label frame is N x u16, a posterior frame N x classes x f32.

Gaussian noise is added in normalized image space, before any
model-specific preprocessing; the certification guarantee is stated for
exactly the space the noise lives in, so a model smoothed against noise
applied elsewhere in its input pipeline would be certified for the wrong
perturbation set.  Every frame uses a fresh noise draw from a
counter-based generator (Philox), and the posterior frames precede the
label frames in the draw sequence, so selection and test samples never
share a noise realization.  Equal handshakes produce byte-identical
streams.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"HCS1"
KIND_LABELS = 0
KIND_POSTERIORS = 1
KIND_MIXED = 2

_HEADER = struct.Struct("<4sBIIIQ")
_U32 = struct.Struct("<I")


@dataclass
class Handshake:
    n: int
    n0: int
    sigma: float
    seed: int
    mode: str = "both"

    @classmethod
    def from_line(cls, line: str) -> "Handshake":
        try:
            doc = json.loads(line)
            return cls(n=int(doc["n"]), n0=int(doc["n0"]),
                       sigma=float(doc["sigma"]), seed=int(doc["seed"]),
                       mode=str(doc.get("mode", "both")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed handshake {line!r}: {exc}") from None

    def validate(self) -> None:
        if self.n < 1 or self.n0 < 1:
            raise ValueError(f"n={self.n} and n0={self.n0} must be >= 1")
        if self.sigma < 0:
            raise ValueError(f"sigma={self.sigma} must be >= 0")
        if self.mode not in ("both", "labels", "posteriors"):
            raise ValueError(f"mode {self.mode!r} not both|labels|posteriors")


def _posterior_frame_bytes(probs: np.ndarray) -> bytes:
    return probs.astype("<f4").tobytes()


def _label_frame_bytes(probs: np.ndarray) -> bytes:
    return np.argmax(probs, axis=1).astype("<u2").tobytes()


def serve(model, image: np.ndarray, handshake: Handshake, out) -> dict:
    """Emit one HCS1 stream answering ``handshake``; returns a summary.

    ``image`` is a float (H, W, C) array in normalized space.  The reply
    kind follows the requested mode: "both" sends n0 posterior frames then
    n label frames (kind 2), "labels" and "posteriors" send n0 + n frames
    of the single kind.
    """
    handshake.validate()
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3:
        raise ValueError(f"image must be (H, W, C), got shape {image.shape}")
    image = image.astype(np.float64)

    probe = model.posteriors(image)
    components, class_count = probe.shape
    if components != image.shape[0] * image.shape[1]:
        raise ValueError(
            f"model emitted {components} components for an "
            f"{image.shape[0]}x{image.shape[1]} image")

    rng = np.random.Generator(np.random.Philox(key=np.uint64(handshake.seed)))

    def frames(count):
        for _ in range(count):
            noise = rng.normal(0.0, handshake.sigma, size=image.shape)
            yield model.posteriors(image + noise)

    mode = handshake.mode
    total = handshake.n0 + handshake.n
    if mode == "both":
        out.write(_HEADER.pack(MAGIC, KIND_MIXED, components, class_count,
                               total, handshake.seed))
        out.write(_U32.pack(handshake.n0))
        emitted = 0
        for i, probs in enumerate(frames(total)):
            if i < handshake.n0:
                out.write(_posterior_frame_bytes(probs))
            else:
                out.write(_label_frame_bytes(probs))
            emitted += 1
    else:
        kind = KIND_LABELS if mode == "labels" else KIND_POSTERIORS
        out.write(_HEADER.pack(MAGIC, kind, components, class_count,
                               total, handshake.seed))
        emitted = 0
        for probs in frames(total):
            if mode == "labels":
                out.write(_label_frame_bytes(probs))
            else:
                out.write(_posterior_frame_bytes(probs))
            emitted += 1
    out.flush()
    return {"components": components, "class_count": class_count,
            "frames": emitted, "mode": mode}


def load_image(path: str) -> np.ndarray:
    """Load a (H, W, C) float image in normalized [0, 1] space.

    ``.npy`` arrays are taken as-is (already normalized); common raster
    formats are decoded with Pillow and scaled by their bit depth.
    """
    if str(path).endswith(".npy"):
        return np.load(path)
    from PIL import Image
    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    scale = 65535.0 if arr.max() > 255 else 255.0
    return arr / scale
