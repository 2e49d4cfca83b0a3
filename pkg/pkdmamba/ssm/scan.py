"""
Linear recurrences h_k = a_k ⊙ h_{k-1} + b_k as scans over affine maps.

Each step is the map h ↦ a⊙h + b. Composing "first then second" gives

    combine((a1, b1), (a2, b2)) = (a2⊙a1, a2⊙b1 + b2)

which is associative, so the recurrence can be evaluated as a prefix scan. The
parallel path runs a Kogge-Stone scan inside fixed power-of-two chunks and then
carries the state across chunks left to right, so the floating-point grouping
only depends on the chunk size, never on the worker count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ParameterError, ShapeError
from ..extensions import map_ordered, worker_count

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 64


@dataclass(frozen=True)
class AffineElem:
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def identity(cls, shape) -> AffineElem:
        return cls(np.ones(shape), np.zeros(shape))

    def apply(self, h: np.ndarray) -> np.ndarray:
        return self.a * h + self.b


def combine(first: AffineElem, second: AffineElem) -> AffineElem:
    return AffineElem(second.a * first.a, second.a * first.b + second.b)


def _stack(elems: Sequence[AffineElem]) -> tuple[np.ndarray, np.ndarray]:
    a = np.stack([np.broadcast_to(np.asarray(e.a, dtype=np.float64), np.shape(e.b)) for e in elems])
    b = np.stack([np.asarray(e.b, dtype=np.float64) for e in elems])
    return a, b


def scan_sequential(elems: Sequence[AffineElem], h0) -> list[np.ndarray]:
    h = np.asarray(h0, dtype=np.float64)
    states = []
    for elem in elems:
        h = elem.a * h + elem.b
        states.append(h)
    return states


def scan_parallel(elems: Sequence[AffineElem], h0, chunk: int = DEFAULT_CHUNK) -> list[np.ndarray]:
    if not elems:
        return []
    a, b = _stack(elems)
    h = linear_scan(a, b, np.asarray(h0, dtype=np.float64), axis=0, method="parallel", chunk=chunk)
    return list(h)


def _chunk_prefix(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive Kogge-Stone scan along axis 1 of [n_chunks, chunk, ...]."""
    a = a.copy()
    b = b.copy()
    length = a.shape[1]
    offset = 1
    while offset < length:
        a_prev = a[:, :-offset]
        b_prev = b[:, :-offset]
        a_cur = a[:, offset:]
        b_new = a_cur * b_prev + b[:, offset:]
        a_new = a_cur * a_prev
        a[:, offset:] = a_new
        b[:, offset:] = b_new
        offset *= 2
    return a, b


def _sequential(a: np.ndarray, b: np.ndarray, h0: np.ndarray) -> np.ndarray:
    out = np.empty_like(b)
    h = h0
    for k in range(b.shape[0]):
        h = a[k] * h + b[k]
        out[k] = h
    return out


def _parallel(a: np.ndarray, b: np.ndarray, h0: np.ndarray, chunk: int) -> np.ndarray:
    steps = b.shape[0]
    chunk = min(chunk, 1 << max(steps - 1, 0).bit_length())
    n_chunks = -(-steps // chunk)
    pad = n_chunks * chunk - steps
    if pad:
        a = np.concatenate([a, np.ones((pad,) + a.shape[1:], dtype=a.dtype)])
        b = np.concatenate([b, np.zeros((pad,) + b.shape[1:], dtype=b.dtype)])
    a = a.reshape((n_chunks, chunk) + a.shape[1:])
    b = b.reshape((n_chunks, chunk) + b.shape[1:])

    workers = worker_count()
    if workers > 1 and n_chunks > 1:
        bounds = np.linspace(0, n_chunks, min(workers, n_chunks) + 1).astype(int)
        parts = map_ordered(lambda ij: _chunk_prefix(a[ij[0]:ij[1]], b[ij[0]:ij[1]]), zip(bounds[:-1], bounds[1:]))
        pa = np.concatenate([p[0] for p in parts])
        pb = np.concatenate([p[1] for p in parts])
    else:
        pa, pb = _chunk_prefix(a, b)

    out = np.empty_like(pb)
    h = h0
    for c in range(n_chunks):
        out[c] = pa[c] * h + pb[c]
        h = out[c, -1]
    return out.reshape((n_chunks * chunk,) + out.shape[2:])[:steps]


def linear_scan(a, b, h0=None, axis: int = 0, method: str = "parallel", chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """All states of h_k = a_k⊙h_{k-1} + b_k along ``axis``; ``a`` broadcasts against ``b``."""
    b = np.asarray(b)
    dtype = b.dtype if b.dtype.kind == "f" else np.float64
    b = b.astype(dtype, copy=False)
    try:
        a = np.broadcast_to(np.asarray(a, dtype=dtype), b.shape)
    except ValueError as exc:
        raise ShapeError(f"scan multipliers {np.shape(a)} do not broadcast to {b.shape}") from exc
    if chunk < 1 or chunk & (chunk - 1):
        raise ParameterError(f"chunk must be a power of two, got {chunk}")
    a = np.moveaxis(a, axis, 0)
    b = np.moveaxis(b, axis, 0)
    state_shape = b.shape[1:]
    if h0 is None:
        h0 = np.zeros(state_shape, dtype=dtype)
    else:
        h0 = np.broadcast_to(np.asarray(h0, dtype=dtype), state_shape)
    if b.shape[0] == 0:
        return np.moveaxis(b.copy(), 0, axis)
    if method == "sequential":
        out = _sequential(a, b, h0)
    elif method == "parallel":
        out = _parallel(a, b, h0, chunk)
    else:
        raise ParameterError(f"unknown scan method {method!r}")
    return np.moveaxis(out, 0, axis)
