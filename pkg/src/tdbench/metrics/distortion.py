"""Point-to-point geometric distortion between two clouds."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import FrameDataError
from ..frameio import PointCloud

__all__ = ["d1_distortion"]


def _directed_rmse(src: np.ndarray, dst_tree: cKDTree) -> float:
    dists, _ = dst_tree.query(src, k=1)
    return float(np.sqrt(np.mean(np.square(dists))))


def d1_distortion(original: PointCloud, reconstructed: PointCloud) -> float:
    """Symmetric point-to-point RMSE (the max of the two directed RMSEs).

    Each directed term is the root-mean-square nearest-neighbour distance
    from one cloud to the other.  Empty clouds have no defined distortion.
    """
    a = np.asarray(original.xyz, dtype=np.float64)
    b = np.asarray(reconstructed.xyz, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise FrameDataError("d1 distortion is undefined for an empty point cloud")

    tree_a = cKDTree(a)
    tree_b = cKDTree(b)
    return max(_directed_rmse(a, tree_b), _directed_rmse(b, tree_a))
