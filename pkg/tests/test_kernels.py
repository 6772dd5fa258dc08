"""Kernel backends: numba and numpy must agree bit-for-bit."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tdbench import kernels
from tdbench.errors import ConfigError


def both_backends(fn):
    """Run ``fn`` under each backend; return {backend: result}."""
    results = {}
    for backend in ("numpy", "numba"):
        kernels.set_backend(backend)
        try:
            results[backend] = fn()
        finally:
            kernels.set_backend(None)
    return results


def _assert_equal(a, b):
    if isinstance(a, tuple):
        assert isinstance(b, tuple) and len(a) == len(b)
        for x, y in zip(a, b):
            _assert_equal(x, y)
    elif isinstance(a, (bytes, bytearray)):
        assert bytes(a) == bytes(b)
    elif isinstance(a, np.ndarray):
        assert a.dtype == b.dtype and np.array_equal(a, b)
    else:
        assert a == b


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="module")
def xyz(rng):
    return rng.uniform(-80.0, 80.0, size=(5000, 3))


def test_backend_selection_roundtrip():
    kernels.set_backend("numpy")
    assert kernels.backend_name() == "numpy"
    kernels.set_backend("numba")
    assert kernels.backend_name() == "numba"
    kernels.set_backend(None)
    with pytest.raises(ConfigError):
        kernels.set_backend("fortran")


def test_morton_roundtrip_and_parity(rng):
    u = rng.integers(0, 1 << 20, size=(3, 4096), dtype=np.int64)
    results = both_backends(lambda: kernels.morton_encode3(u[0], u[1], u[2]))
    _assert_equal(results["numpy"], results["numba"])
    codes = results["numpy"]
    decoded = both_backends(lambda: kernels.morton_decode3(codes))
    _assert_equal(decoded["numpy"], decoded["numba"])
    dx, dy, dz = decoded["numpy"]
    assert np.array_equal(dx, u[0]) and np.array_equal(dy, u[1]) and np.array_equal(dz, u[2])


def test_morton_orders_by_interleaved_bits():
    codes = kernels.morton_encode3(
        np.array([0, 1, 0, 0]), np.array([0, 0, 1, 0]), np.array([0, 0, 0, 1])
    )
    # x occupies the lowest interleaved bit, then y, then z.
    assert codes.tolist() == [0, 1, 2, 4]


def test_bounds_parity(xyz):
    results = both_backends(lambda: kernels.bounds3(xyz))
    _assert_equal(results["numpy"], results["numba"])
    lo, hi = results["numpy"]
    assert np.allclose(lo, xyz.min(axis=0)) and np.allclose(hi, xyz.max(axis=0))


def test_quantize_floor_parity_and_fused_equivalence(xyz):
    origin = xyz.min(axis=0)
    scale = 12.5

    results = both_backends(lambda: kernels.quantize_floor(xyz, origin, scale))
    _assert_equal(results["numpy"], results["numba"])

    fused = both_backends(lambda: kernels.quantize_floor_morton(xyz, origin, scale))
    _assert_equal(fused["numpy"], fused["numba"])
    codes, umax = fused["numpy"]
    ux, uy, uz = results["numpy"]
    assert np.array_equal(codes, kernels.morton_encode3(ux, uy, uz))
    assert umax == max(ux.max(), uy.max(), uz.max())


def test_quantize_rint_parity_and_fused_equivalence(xyz):
    origin = xyz.min(axis=0)
    step = np.array([0.03, 0.05, 0.07])
    nbins = 1 << 11

    plain = both_backends(lambda: kernels.quantize_rint(xyz, origin, step, nbins))
    _assert_equal(plain["numpy"], plain["numba"])

    fused = both_backends(lambda: kernels.quantize_rint_morton(xyz, origin, step, nbins))
    _assert_equal(fused["numpy"], fused["numba"])


def test_dequantize_parity_and_morton_fusion(xyz):
    origin = xyz.min(axis=0)
    step = np.array([0.05, 0.05, 0.05])
    ux, uy, uz = kernels.quantize_rint(xyz, origin, step, 1 << 12)
    codes = kernels.morton_encode3(ux, uy, uz)

    plain = both_backends(lambda: kernels.dequantize_scaled(ux, uy, uz, origin, step))
    _assert_equal(plain["numpy"], plain["numba"])

    fused = both_backends(lambda: kernels.morton_dequantize(codes, origin, step))
    _assert_equal(fused["numpy"], fused["numba"])
    assert np.array_equal(fused["numpy"], plain["numpy"])


def test_pack_unpack_fixed_parity(rng):
    for width in (1, 7, 11, 16, 33, 57):
        values = rng.integers(0, 1 << width, size=801, dtype=np.int64)
        packed = both_backends(lambda: kernels.pack_fixed(values, width))
        _assert_equal(packed["numpy"], packed["numba"])
        unpacked = both_backends(
            lambda: kernels.unpack_fixed(
                np.frombuffer(bytes(packed["numpy"]), dtype=np.uint8), width, len(values)
            )
        )
        _assert_equal(unpacked["numpy"], unpacked["numba"])
        assert np.array_equal(unpacked["numpy"], values)


def test_unpack_dequantize_matches_two_step(rng):
    width = 11
    n = 500
    values = rng.integers(0, 1 << width, size=3 * n, dtype=np.int64)
    packed = kernels.pack_fixed(values, width)
    origin = np.array([-10.0, 5.0, 0.25])
    step = np.array([0.031, 0.017, 0.093])

    fused = both_backends(
        lambda: kernels.unpack_dequantize(
            np.frombuffer(bytes(packed), dtype=np.uint8), width, n, origin, step
        )
    )
    _assert_equal(fused["numpy"], fused["numba"])

    kx, ky, kz = values[0::3], values[1::3], values[2::3]
    two_step = kernels.dequantize_scaled(kx, ky, kz, origin, step)
    assert np.array_equal(fused["numpy"], two_step)


def test_delta_varint_roundtrip_parity(rng):
    codes = np.sort(rng.integers(0, 1 << 60, size=3000, dtype=np.int64))
    encoded = both_backends(lambda: kernels.delta_varint_encode(codes))
    _assert_equal(encoded["numpy"], encoded["numba"])
    buf = np.frombuffer(bytes(encoded["numpy"]), dtype=np.uint8)
    decoded = both_backends(lambda: kernels.delta_varint_decode(buf, len(codes)))
    _assert_equal(decoded["numpy"], decoded["numba"])
    assert np.array_equal(decoded["numpy"], codes)


def test_range_coder_bytes_roundtrip_parity(rng):
    data = rng.integers(0, 256, size=4096, dtype=np.uint8).astype(np.uint8)
    encoded = both_backends(lambda: kernels.rc_bytes_encode(data))
    _assert_equal(encoded["numpy"], encoded["numba"])
    buf = np.frombuffer(bytes(encoded["numpy"]), dtype=np.uint8)
    decoded = both_backends(lambda: kernels.rc_bytes_decode(buf, len(data)))
    _assert_equal(decoded["numpy"], decoded["numba"])
    assert np.array_equal(decoded["numpy"], data)


def _occupancy_stream(codes, depth):
    """Independent builder: level-ordered child-occupancy bytes of a code set."""
    occ_bytes = []
    level_sizes = []
    for level in range(depth):
        parents = codes >> (3 * (depth - level))
        child = (codes >> (3 * (depth - level - 1))) & 7
        uniq, inverse = np.unique(parents, return_inverse=True)
        level_occ = np.zeros(len(uniq), dtype=np.uint8)
        np.bitwise_or.at(level_occ, inverse, (1 << child).astype(np.uint8))
        occ_bytes.append(level_occ)
        level_sizes.append(len(uniq))
    return np.concatenate(occ_bytes), np.asarray(level_sizes, dtype=np.int64)


def test_occupancy_coder_roundtrip_parity(rng):
    depth = 6
    codes = np.unique(rng.integers(0, 1 << (3 * depth), size=2500, dtype=np.int64))
    occ, level_sizes = _occupancy_stream(codes, depth)

    encoded = both_backends(lambda: kernels.occ_encode(occ, level_sizes))
    _assert_equal(encoded["numpy"], encoded["numba"])
    buf = np.frombuffer(bytes(encoded["numpy"]), dtype=np.uint8)
    decoded = both_backends(lambda: kernels.occ_decode_codes(buf, depth, len(codes)))
    _assert_equal(decoded["numpy"], decoded["numba"])
    assert np.array_equal(decoded["numpy"], codes)


def test_raycast_matches_brute_force(rng):
    origin = np.array([0.0, 0.0, 1.8])
    n_rays = 400
    theta = rng.uniform(0, 2 * np.pi, n_rays)
    elev = rng.uniform(-0.45, 0.05, n_rays)
    dirs = np.column_stack(
        [np.cos(elev) * np.cos(theta), np.cos(elev) * np.sin(theta), np.sin(elev)]
    )
    boxes = np.column_stack(
        [
            rng.uniform(-30, 30, 12),
            rng.uniform(-30, 30, 12),
            rng.uniform(0.5, 1.5, 12),
            rng.uniform(2, 5, 12),
            rng.uniform(1, 2, 12),
            rng.uniform(1, 2, 12),
            rng.uniform(-np.pi, np.pi, 12),
        ]
    )

    results = both_backends(lambda: kernels.raycast_boxes(origin, dirs, boxes))
    _assert_equal(results["numpy"], results["numba"])
    t_hit, box_idx = results["numpy"]

    # Brute force: slab test in each box's local frame.  A hit needs the
    # entry parameter strictly positive (origins inside a box don't count).
    t_ref = np.full(n_rays, np.inf)
    idx_ref = np.full(n_rays, -1, dtype=box_idx.dtype)
    for b, (cx, cy, cz, lg, wd, hg, yaw) in enumerate(boxes):
        c, s = np.cos(yaw), np.sin(yaw)
        ox, oy, oz = origin[0] - cx, origin[1] - cy, origin[2] - cz
        o_local = np.array([c * ox + s * oy, -s * ox + c * oy, oz])
        d_local = np.column_stack(
            [
                c * dirs[:, 0] + s * dirs[:, 1],
                -s * dirs[:, 0] + c * dirs[:, 1],
                dirs[:, 2],
            ]
        )
        half = np.array([lg / 2, wd / 2, hg / 2])
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-half - o_local) / d_local
            t2 = (half - o_local) / d_local
        t_near = np.nanmax(np.minimum(t1, t2), axis=1)
        t_far = np.nanmin(np.maximum(t1, t2), axis=1)
        hit = (t_near <= t_far) & (t_near > 1e-12)
        better = hit & (t_near < t_ref)
        t_ref = np.where(better, t_near, t_ref)
        idx_ref = np.where(better, b, idx_ref)

    finite = np.isfinite(t_ref) | np.isfinite(t_hit)
    assert np.array_equal(idx_ref, box_idx)
    assert np.allclose(t_ref[finite], t_hit[finite], rtol=1e-9, atol=1e-9)


def test_iou3d_matrix_matches_single(rng):
    def rand_boxes(n):
        return np.column_stack(
            [
                rng.uniform(-5, 5, n),
                rng.uniform(-5, 5, n),
                rng.uniform(-1, 1, n),
                rng.uniform(1, 5, n),
                rng.uniform(1, 3, n),
                rng.uniform(1, 3, n),
                rng.uniform(-np.pi, np.pi, n),
            ]
        )

    a, b = rand_boxes(9), rand_boxes(7)
    results = both_backends(lambda: kernels.iou3d_matrix(a, b))
    _assert_equal(results["numpy"], results["numba"])
    matrix = results["numpy"]
    for i in (0, 4, 8):
        for j in (0, 3, 6):
            assert matrix[i, j] == pytest.approx(
                kernels.iou3d_single(a[i], b[j]), abs=1e-12
            )


def _cluster_oracle(xy, radius):
    """Brute-force single linkage: BFS over the radius graph."""
    n = len(xy)
    d2 = ((xy[:, None, :] - xy[None, :, :]) ** 2).sum(-1)
    adjacent = d2 <= radius * radius
    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for start in range(n):
        if labels[start] != -1:
            continue
        stack = [start]
        labels[start] = next_label
        while stack:
            u = stack.pop()
            for v in np.nonzero(adjacent[u] & (labels == -1))[0]:
                labels[v] = next_label
                stack.append(v)
        next_label += 1
    return labels


def test_cluster_labels_match_brute_force(rng):
    for trial in range(8):
        n = int(rng.integers(2, 400))
        xy = rng.uniform(-20, 20, size=(n, 2))
        radius = float(rng.uniform(0.3, 3.0))
        results = both_backends(lambda: kernels.cluster_labels(xy, radius))
        _assert_equal(results["numpy"], results["numba"])
        got = results["numpy"]
        want = _cluster_oracle(xy, radius)
        assert np.array_equal(got, want), f"trial {trial}: partition mismatch"


def test_cluster_labels_numbered_by_first_appearance():
    xy = np.array([[0.0, 0.0], [10.0, 0.0], [0.1, 0.0], [10.1, 0.0], [20.0, 0.0]])
    labels = kernels.cluster_labels(xy, 0.5)
    assert labels.tolist() == [0, 1, 0, 1, 2]


@settings(max_examples=60, deadline=None)
@given(
    width=st.integers(min_value=1, max_value=57),
    values=st.lists(st.integers(min_value=0, max_value=(1 << 57) - 1), min_size=0, max_size=200),
)
def test_pack_fixed_roundtrip_property(width, values):
    arr = np.asarray([v & ((1 << width) - 1) for v in values], dtype=np.int64)
    packed = kernels.pack_fixed(arr, width)
    buf = np.frombuffer(bytes(packed), dtype=np.uint8)
    assert np.array_equal(kernels.unpack_fixed(buf, width, len(arr)), arr)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=(1 << 62) - 1), min_size=0, max_size=300)
)
def test_delta_varint_roundtrip_property(codes):
    arr = np.sort(np.asarray(codes, dtype=np.int64))
    encoded = kernels.delta_varint_encode(arr)
    buf = np.frombuffer(bytes(encoded), dtype=np.uint8)
    assert np.array_equal(kernels.delta_varint_decode(buf, len(arr)), arr)
