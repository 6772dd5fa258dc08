"""Kernel backend dispatch.

Two interchangeable backends implement the hot loops:

* ``numba_impl`` — ahead-of-time jitted with ``@njit(cache=True)``; the
  default when numba imports cleanly.
* ``numpy_impl`` — pure numpy / Python reference with bit-identical output.

The environment variable ``TDBENCH_KERNELS`` picks the backend: ``auto``
(default), ``numba`` or ``numpy``.  ``auto`` prefers the compiled backend and
silently falls back; asking for ``numba`` explicitly raises if it cannot
load.  Tests and the kernel benchmark can switch at runtime through
:func:`set_backend`.

This module is also the public face of the kernels: call sites use the
wrappers below, which add input validation and the host-side preprocessing
shared by both backends (grid binning for clustering, popcount tables for
octree traversal).
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import ConfigError

ENV_VAR = "TDBENCH_KERNELS"
_CHOICES = ("auto", "numba", "numpy")

_active = None
_forced: str | None = None

_GRID_LIMIT = (1 << 20) - 2  # grid index magnitude the 21-bit cell hash allows


def _resolve():
    global _active
    choice = _forced or os.environ.get(ENV_VAR, "auto").lower()
    if choice not in _CHOICES:
        raise ConfigError(
            f"{ENV_VAR} must be one of {_CHOICES}, got {choice!r}"
        )
    if choice in ("auto", "numba"):
        try:
            from . import numba_impl as impl
        except ImportError as exc:
            if choice == "numba":
                raise ConfigError(f"numba backend requested but unavailable: {exc}")
            from . import numpy_impl as impl
    else:
        from . import numpy_impl as impl
    _active = impl
    return impl


def impl():
    """The active backend module (resolved once, then cached)."""
    return _active if _active is not None else _resolve()


def backend_name() -> str:
    return impl().BACKEND_NAME


def set_backend(name: str | None) -> None:
    """Force a backend (``"numba"``/``"numpy"``) or reset to env selection."""
    global _forced, _active
    if name is not None and name not in _CHOICES:
        raise ConfigError(f"backend must be one of {_CHOICES}, got {name!r}")
    _forced = name
    _active = None


# ---------------------------------------------------------------------------
# Thin delegating wrappers (documented in the backend modules).
# ---------------------------------------------------------------------------


def morton_encode3(ux, uy, uz):
    return impl().morton_encode3(
        np.ascontiguousarray(ux, dtype=np.int64),
        np.ascontiguousarray(uy, dtype=np.int64),
        np.ascontiguousarray(uz, dtype=np.int64),
    )


def morton_decode3(codes):
    return impl().morton_decode3(np.ascontiguousarray(codes, dtype=np.int64))


def bounds3(xyz):
    xyz = np.ascontiguousarray(xyz)
    if xyz.dtype not in (np.float32, np.float64):
        xyz = xyz.astype(np.float64)
    return impl().bounds3(xyz.reshape(-1, 3))


def quantize_floor(xyz, origin, scale):
    xyz = np.ascontiguousarray(xyz)
    if xyz.dtype not in (np.float32, np.float64):
        xyz = xyz.astype(np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    return impl().quantize_floor(xyz.reshape(-1, 3), origin, float(scale))


def quantize_rint(xyz, origin, step, nbins):
    xyz = np.ascontiguousarray(xyz)
    if xyz.dtype not in (np.float32, np.float64):
        xyz = xyz.astype(np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    step = np.ascontiguousarray(step, dtype=np.float64)
    return impl().quantize_rint(xyz.reshape(-1, 3), origin, step, int(nbins))


def dequantize_scaled(kx, ky, kz, origin, step):
    return impl().dequantize_scaled(
        np.ascontiguousarray(kx, dtype=np.int64),
        np.ascontiguousarray(ky, dtype=np.int64),
        np.ascontiguousarray(kz, dtype=np.int64),
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(step, dtype=np.float64),
    )


def quantize_floor_morton(xyz, origin, scale):
    xyz = np.ascontiguousarray(xyz)
    if xyz.dtype not in (np.float32, np.float64):
        xyz = xyz.astype(np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    codes, umax = impl().quantize_floor_morton(
        xyz.reshape(-1, 3), origin, float(scale)
    )
    return codes, int(umax)


def quantize_rint_morton(xyz, origin, step, nbins):
    xyz = np.ascontiguousarray(xyz)
    if xyz.dtype not in (np.float32, np.float64):
        xyz = xyz.astype(np.float64)
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    step = np.ascontiguousarray(step, dtype=np.float64)
    return impl().quantize_rint_morton(xyz.reshape(-1, 3), origin, step, int(nbins))


def morton_dequantize(codes, origin, step):
    return impl().morton_dequantize(
        np.ascontiguousarray(codes, dtype=np.int64),
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(step, dtype=np.float64),
    )


def unpack_dequantize(buf, width, count, origin, step):
    """Unpack ``count`` interleaved x,y,z values of ``width`` bits each and
    dequantize them to an (N, 3) float64 array in one pass.

    The bit stream is reinterpreted as little-endian 64-bit words (native
    byte order assumed little-endian), zero-padded so the kernels can read
    one word past any value.
    """
    if count == 0:
        return np.zeros((0, 3), dtype=np.float64)
    if not 1 <= width <= 57:
        raise ValueError(f"unpack width must be in [1, 57], got {width}")
    buf = np.ascontiguousarray(buf, dtype=np.uint8)
    if len(buf) * 8 < 3 * count * width:
        raise ValueError("bit-packed stream truncated")
    padded = np.zeros(((len(buf) + 7) // 8 + 2) * 8, dtype=np.uint8)
    padded[: len(buf)] = buf
    words = padded.view(np.uint64)
    return impl().unpack_dequantize(
        words,
        int(width),
        int(count),
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(step, dtype=np.float64),
    )


def pack_fixed(values, width):
    return impl().pack_fixed(np.ascontiguousarray(values, dtype=np.int64), width)


def unpack_fixed(buf, width, count):
    return impl().unpack_fixed(np.ascontiguousarray(buf, dtype=np.uint8), width, count)


def delta_varint_encode(codes):
    return impl().delta_varint_encode(np.ascontiguousarray(codes, dtype=np.int64))


def delta_varint_decode(buf, count):
    return impl().delta_varint_decode(np.ascontiguousarray(buf, dtype=np.uint8), count)


def occ_encode(occ, level_sizes):
    return impl().occ_encode(
        np.ascontiguousarray(occ, dtype=np.uint8),
        np.ascontiguousarray(level_sizes, dtype=np.int64),
    )


def occ_decode_codes(buf, depth, n_leaves):
    return impl().occ_decode_codes(
        np.ascontiguousarray(buf, dtype=np.uint8), depth, n_leaves
    )


def rc_bytes_encode(data):
    return impl().rc_bytes_encode(np.ascontiguousarray(data, dtype=np.uint8))


def rc_bytes_decode(buf, count):
    return impl().rc_bytes_decode(np.ascontiguousarray(buf, dtype=np.uint8), count)


def raycast_boxes(origin, dirs, boxes):
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 7)
    return impl().raycast_boxes(origin, dirs, boxes)


def iou3d_matrix(boxes_a, boxes_b):
    boxes_a = np.ascontiguousarray(boxes_a, dtype=np.float64).reshape(-1, 7)
    boxes_b = np.ascontiguousarray(boxes_b, dtype=np.float64).reshape(-1, 7)
    return impl().iou3d_matrix(boxes_a, boxes_b)


def iou3d_single(box_a, box_b) -> float:
    box_a = np.ascontiguousarray(box_a, dtype=np.float64)
    box_b = np.ascontiguousarray(box_b, dtype=np.float64)
    return float(impl().iou3d_single(box_a, box_b))


def cluster_labels(xy, radius: float):
    """Cluster points by xy distance ≤ ``radius`` (single linkage).

    Host side bins points into a grid whose cell diagonal is strictly below
    ``radius`` (cell side ≈ radius/√2) and hands the sorted cell structure
    to the backend's union-find core.  Returns int64 labels, numbered by
    each cluster's first point in input order.
    """
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    if xy.ndim != 2 or xy.shape[1] != 2:
        raise ConfigError(f"cluster input must be (N, 2), got {xy.shape}")
    if not radius > 0.0:
        raise ConfigError(f"cluster radius must be > 0, got {radius}")
    n = len(xy)
    if n == 0:
        return np.zeros(0, dtype=np.int64)

    cell = radius * 0.7071067  # strictly below 1/sqrt(2): diagonal < radius
    grid = np.floor(xy / cell).astype(np.int64)
    if np.abs(grid).max() > _GRID_LIMIT:
        raise ConfigError("cluster coordinates too large for the given radius")
    offset = 1 << 20
    keys = ((grid[:, 0] + offset) << 21) | (grid[:, 1] + offset)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    cell_keys, cell_starts = np.unique(sorted_keys, return_index=True)
    cell_counts = np.diff(np.append(cell_starts, n))
    return impl().cluster_core(
        xy,
        order.astype(np.int64),
        cell_keys.astype(np.int64),
        cell_starts.astype(np.int64),
        cell_counts.astype(np.int64),
        float(radius),
    )
