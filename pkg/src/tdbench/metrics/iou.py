"""Exact 3D IoU of oriented boxes.

The bird's-eye footprint overlap is computed by Sutherland–Hodgman convex
polygon clipping and the z extent by interval intersection, so the result
is exact up to floating point — no sampling involved.
"""

from __future__ import annotations

from ..geometry import Box3D
from .. import kernels

__all__ = ["iou3d"]


def iou3d(box_a: Box3D, box_b: Box3D) -> float:
    """Intersection-over-union of two oriented 3D boxes, in [0, 1]."""
    return kernels.iou3d_single(box_a.as_vector(), box_b.as_vector())
