"""Segmentation backends.

A model maps a float image of shape (H, W, C) to per-pixel class
posteriors of shape (H*W, classes).  Two weight-free stubs cover protocol
testing; TorchScript modules are supported for real models but need the
optional torch dependency.
"""

from __future__ import annotations

import numpy as np


class ConstantModel:
    """Returns a fixed label map regardless of the input (noise-invariant)."""

    def __init__(self, labels: np.ndarray, class_count: int | None = None):
        self.labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        self.class_count = int(class_count if class_count is not None
                               else self.labels.max() + 1)

    def posteriors(self, image: np.ndarray) -> np.ndarray:
        out = np.zeros((self.labels.size, self.class_count), dtype=np.float64)
        out[np.arange(self.labels.size), self.labels] = 1.0
        return out


class ArgmaxModel:
    """Treats the image channels as class scores: posterior = softmax over
    channels, label = argmax.  With added input noise this behaves like a
    model whose decision fluctuates wherever channel scores are close."""

    def __init__(self, temperature: float = 1.0):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.temperature = float(temperature)

    def posteriors(self, image: np.ndarray) -> np.ndarray:
        scores = image.reshape(-1, image.shape[-1]) / self.temperature
        scores = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(scores)
        return e / e.sum(axis=1, keepdims=True)


class TorchscriptModel:
    """Run a TorchScript module: input (1, C, H, W) float32, output either
    (1, classes, H, W) logits or (classes, H, W)."""

    def __init__(self, path: str, device: str = "cpu"):
        try:
            import torch
        except ImportError as exc:  # pragma: no cover
            raise RuntimeError(
                "TorchScript backends need the optional torch dependency") from exc
        self._torch = torch
        self.device = device
        self.module = torch.jit.load(path, map_location=device)
        self.module.eval()

    def posteriors(self, image: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(
                image.transpose(2, 0, 1)[None])).float().to(self.device)
            logits = self.module(x)
            if logits.dim() == 4:
                logits = logits[0]
            probs = torch.softmax(logits, dim=0)
            flat = probs.reshape(probs.shape[0], -1).T
            return flat.cpu().numpy().astype(np.float64)


def load_model(spec: str, image: np.ndarray):
    """Build a backend from its CLI descriptor.

    ``constant[:label]`` and ``argmax[:temperature]`` are the weight-free
    stubs; ``torchscript:<path>[,device]`` loads real weights.
    """
    name, _, arg = spec.partition(":")
    if name == "constant":
        label = int(arg) if arg else 0
        h, w = image.shape[:2]
        labels = np.full(h * w, label, dtype=np.int64)
        classes = max(label + 1, image.shape[-1] if image.ndim == 3 else 2)
        return ConstantModel(labels, class_count=classes)
    if name == "argmax":
        return ArgmaxModel(temperature=float(arg) if arg else 1.0)
    if name == "torchscript":
        path, _, device = arg.partition(",")
        return TorchscriptModel(path, device=device or "cpu")
    raise ValueError(f"unknown model spec {spec!r}")
