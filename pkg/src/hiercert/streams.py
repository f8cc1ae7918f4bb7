"""HCS1 sample-stream format and the external-process protocol.

Layout (little-endian)::

    magic   4 bytes  b"HCS1"
    kind    u8       0 = labels, 1 = posteriors, 2 = mixed
    N       u32      components per frame
    classes u32      leaf class count
    frames  u32      total frame count
    seed    u64      producer seed (provenance)
    [posteriors u32] only for kind 2: number of leading posterior frames

followed by the frames: a label frame is N x u16 class ids, a posterior
frame is N x classes x f32.  A kind-2 stream carries its posterior frames
first and label frames after, which is the layout an external model
process replies with when the engine requests ``mode="both"``.

Process protocol: the engine spawns the model command, writes one JSON
handshake line ``{"n": .., "n0": .., "sigma": .., "seed": .., "mode": ..}``
to its stdin, and reads a single HCS1 stream from its stdout.  ``mode`` is
a request ("both", "labels" or "posteriors"); the stream header declares
what was actually delivered and the engine adapts to it.
"""

from __future__ import annotations

import io
import json
import shlex
import struct
import subprocess
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DomainError,
    InsufficientSamplesError,
    LabelOutOfRangeError,
    ProcessHandshakeError,
    StreamError,
)
from .sampler import LABELS, POSTERIORS, SampleSource

MAGIC = b"HCS1"
KIND_LABELS = 0
KIND_POSTERIORS = 1
KIND_MIXED = 2

_HEADER = struct.Struct("<4sBIIIQ")
_U32 = struct.Struct("<I")


def _read_exact(fh, nbytes: int, what: str) -> bytes:
    chunks = []
    remaining = nbytes
    while remaining > 0:
        chunk = fh.read(remaining)
        if not chunk:
            raise InsufficientSamplesError(
                f"stream ended while reading {what} ({remaining} of {nbytes} bytes missing)")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class StreamHeader:
    __slots__ = ("kind", "component_count", "class_count", "frame_count",
                 "producer_seed", "posterior_count")

    def __init__(self, kind, component_count, class_count, frame_count,
                 producer_seed, posterior_count):
        self.kind = kind
        self.component_count = component_count
        self.class_count = class_count
        self.frame_count = frame_count
        self.producer_seed = producer_seed
        self.posterior_count = posterior_count


def read_header(fh) -> StreamHeader:
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise BadMagicError(f"truncated header: got {len(raw)} bytes")
    magic, kind, n, classes, frames, seed = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if kind not in (KIND_LABELS, KIND_POSTERIORS, KIND_MIXED):
        raise BadMagicError(f"unknown stream kind {kind}")
    if n == 0 or classes == 0:
        raise BadMagicError("header declares zero components or classes")
    posterior_count = 0
    if kind == KIND_MIXED:
        raw2 = fh.read(_U32.size)
        if len(raw2) < _U32.size:
            raise BadMagicError("truncated mixed-stream header")
        (posterior_count,) = _U32.unpack(raw2)
        if posterior_count > frames:
            raise BadMagicError(
                f"mixed stream claims {posterior_count} posterior frames "
                f"of {frames} total")
    elif kind == KIND_POSTERIORS:
        posterior_count = frames
    return StreamHeader(kind, n, classes, frames, seed, posterior_count)


def write_header(fh, kind: int, component_count: int, class_count: int,
                 frame_count: int, producer_seed: int = 0,
                 posterior_count: int | None = None) -> None:
    fh.write(_HEADER.pack(MAGIC, kind, component_count, class_count,
                          frame_count, producer_seed))
    if kind == KIND_MIXED:
        if posterior_count is None:
            raise DomainError("mixed streams need an explicit posterior_count")
        fh.write(_U32.pack(posterior_count))


def write_label_frame(fh, labels) -> None:
    arr = np.asarray(labels)
    if arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max:
        raise DomainError("labels do not fit in u16")
    fh.write(arr.astype("<u2").tobytes())


def write_posterior_frame(fh, posteriors) -> None:
    fh.write(np.asarray(posteriors).astype("<f4").tobytes())


def write_stream(target, *, class_count: int, label_frames=None,
                 posterior_frames=None, producer_seed: int = 0) -> None:
    """Serialize frames to ``target`` (path or binary file object).

    Posterior frames only -> kind 1, label frames only -> kind 0, both ->
    kind 2 with the posterior frames leading.
    """
    own = isinstance(target, (str, Path))
    fh = open(target, "wb") if own else target
    try:
        n_post = 0 if posterior_frames is None else len(posterior_frames)
        n_lab = 0 if label_frames is None else len(label_frames)
        if n_post and n_lab:
            kind = KIND_MIXED
            n = np.asarray(posterior_frames[0]).shape[0]
        elif n_post:
            kind = KIND_POSTERIORS
            n = np.asarray(posterior_frames[0]).shape[0]
        elif n_lab:
            kind = KIND_LABELS
            n = np.asarray(label_frames[0]).shape[0]
        else:
            raise DomainError("no frames to write")
        write_header(fh, kind, n, class_count, n_post + n_lab, producer_seed,
                     posterior_count=n_post if kind == KIND_MIXED else None)
        for frame in posterior_frames if n_post else ():
            write_posterior_frame(fh, frame)
        for frame in label_frames if n_lab else ():
            write_label_frame(fh, frame)
    finally:
        if own:
            fh.close()


class StreamSource(SampleSource):
    """Sample source backed by one HCS1 stream (file or pipe)."""

    def __init__(self, fh, *, owns=True, detail: str = ""):
        self._fh = fh
        self._owns = owns
        self._detail = detail
        self.header = read_header(fh)
        self.component_count = self.header.component_count
        self.class_count = self.header.class_count
        if self.header.kind == KIND_LABELS:
            self.capabilities = frozenset({LABELS})
        else:
            self.capabilities = frozenset({LABELS, POSTERIORS})
        self._read_frames = 0

    # frame bookkeeping ------------------------------------------------------

    def _remaining(self) -> int:
        return self.header.frame_count - self._read_frames

    def _in_posterior_region(self) -> bool:
        return self._read_frames < self.header.posterior_count

    def _read_posterior_frames(self, count: int) -> np.ndarray:
        n, c = self.component_count, self.class_count
        raw = _read_exact(self._fh, count * n * c * 4, "posterior frames")
        self._read_frames += count
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return arr.reshape(count, n, c)

    def _read_label_frames(self, count: int) -> np.ndarray:
        n = self.component_count
        raw = _read_exact(self._fh, count * n * 2, "label frames")
        self._read_frames += count
        arr = np.frombuffer(raw, dtype="<u2").astype(np.int64)
        arr = arr.reshape(count, n)
        if arr.size and arr.max() >= self.class_count:
            raise LabelOutOfRangeError(
                f"stream label {arr.max()} >= class_count {self.class_count}")
        return arr

    # SampleSource interface ---------------------------------------------------

    def next_posteriors(self, count: int) -> np.ndarray:
        if POSTERIORS not in self.capabilities:
            return super().next_posteriors(count)
        avail = self.header.posterior_count - self._read_frames
        if count > avail:
            raise InsufficientSamplesError(
                f"requested {count} posterior frames, {max(avail, 0)} left "
                "(streams are never reused or wrapped)")
        return self._read_posterior_frames(count)

    def next_labels(self, count: int) -> np.ndarray:
        if count > self._remaining():
            raise InsufficientSamplesError(
                f"requested {count} label frames, {self._remaining()} left "
                "(streams are never reused or wrapped)")
        if self.header.kind == KIND_LABELS:
            return self._read_label_frames(count)
        if self.header.kind == KIND_POSTERIORS:
            # hard labels are the per-frame argmax (lowest id wins ties)
            return np.argmax(self._read_posterior_frames(count), axis=2)
        if self._in_posterior_region():
            raise InsufficientSamplesError(
                f"{self.header.posterior_count - self._read_frames} posterior "
                "frames are still pending; mixed streams must be consumed in order")
        return self._read_label_frames(count)

    def fingerprint(self) -> dict:
        fp = super().fingerprint()
        fp.update({
            "stream_kind": int(self.header.kind),
            "frame_count": int(self.header.frame_count),
            "producer_seed": int(self.header.producer_seed),
        })
        if self._detail:
            fp["detail"] = self._detail
        return fp

    def close(self) -> None:
        if self._owns and self._fh is not None:
            self._fh.close()
            self._fh = None


def open_stream(path) -> StreamSource:
    """Open an HCS1 stream file."""
    if isinstance(path, (str, Path)):
        fh = open(path, "rb")
        try:
            return StreamSource(fh, owns=True, detail=str(path))
        except Exception:
            fh.close()
            raise
    return StreamSource(path, owns=False)


class ProcessSource(StreamSource):
    """Spawn an external model command and read its HCS1 reply."""

    def __init__(self, command, *, n: int, n0: int, sigma: float, seed: int,
                 mode: str = "both"):
        if isinstance(command, str):
            argv = shlex.split(command)
        else:
            argv = list(command)
        if not argv:
            raise ProcessHandshakeError("empty model command")
        self._argv = argv
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as exc:
            raise ProcessHandshakeError(f"cannot start {argv[0]!r}: {exc}") from None
        handshake = json.dumps({"n": int(n), "n0": int(n0), "sigma": float(sigma),
                                "seed": int(seed), "mode": str(mode)})
        try:
            self._proc.stdin.write(handshake.encode() + b"\n")
            self._proc.stdin.flush()
            self._proc.stdin.close()
            super().__init__(self._proc.stdout, owns=False,
                             detail=shlex.join(argv))
        except (BrokenPipeError, StreamError) as exc:
            code = self._proc.poll()
            self._proc.kill()
            self._proc.wait()
            raise ProcessHandshakeError(
                f"model process {argv[0]!r} failed during handshake "
                f"(exit={code}): {exc}") from None
        self._handshake = handshake

    def fingerprint(self) -> dict:
        fp = super().fingerprint()
        fp["handshake"] = json.loads(self._handshake)
        return fp

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.poll() is None:
                self._proc.kill()
            self._proc.wait()
            self._proc.stdout.close()
            self._proc = None


def open_process(command, *, n: int, n0: int, sigma: float, seed: int,
                 mode: str = "both") -> ProcessSource:
    return ProcessSource(command, n=n, n0=n0, sigma=sigma, seed=seed, mode=mode)


def stream_from_bytes(data: bytes) -> StreamSource:
    return StreamSource(io.BytesIO(data), owns=True, detail="<memory>")
