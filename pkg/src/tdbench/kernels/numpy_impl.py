"""Pure-numpy (plus plain Python) kernel implementations.

This is the fallback backend: every function here has a compiled twin in
``numba_impl`` with the same name, signature and bit-exact output.  Hot loops
that do not vectorize (the adaptive range coder, union-find) run as plain
Python here, so this backend is noticeably slower on large inputs but has no
dependencies beyond numpy and is the executable reference for parity tests.

All entropy-coder arithmetic uses Python ints with explicit 32/64-bit
masking, which makes the semantics exact and easy to audit.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "numpy"

# ---------------------------------------------------------------------------
# Morton (z-order) codes: 21 bits per axis interleaved into one int64.
# (Three 21-bit axes top out at bit 62, so signed 64-bit holds every code;
# int64 keeps numba's type unification simple in the compiled twin.)
# ---------------------------------------------------------------------------


def _part1by2_vec(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.int64)
    v = (v | (v << 32)) & 0x1F00000000FFFF
    v = (v | (v << 16)) & 0x1F0000FF0000FF
    v = (v | (v << 8)) & 0x100F00F00F00F00F
    v = (v | (v << 4)) & 0x10C30C30C30C30C3
    v = (v | (v << 2)) & 0x1249249249249249
    return v


def _compact1by2_vec(v: np.ndarray) -> np.ndarray:
    v = v & 0x1249249249249249
    v = (v ^ (v >> 2)) & 0x10C30C30C30C30C3
    v = (v ^ (v >> 4)) & 0x100F00F00F00F00F
    v = (v ^ (v >> 8)) & 0x1F0000FF0000FF
    v = (v ^ (v >> 16)) & 0x1F00000000FFFF
    v = (v ^ (v >> 32)) & 0x1FFFFF
    return v


def morton_encode3(ux: np.ndarray, uy: np.ndarray, uz: np.ndarray) -> np.ndarray:
    """Interleave three ≤21-bit non-negative axes into int64 Morton codes."""
    return (
        _part1by2_vec(ux)
        | (_part1by2_vec(uy) << 1)
        | (_part1by2_vec(uz) << 2)
    )


def morton_decode3(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split int64 Morton codes back into their three integer axes."""
    codes = codes.astype(np.int64)
    return (
        _compact1by2_vec(codes),
        _compact1by2_vec(codes >> 1),
        _compact1by2_vec(codes >> 2),
    )


# ---------------------------------------------------------------------------
# Bounding boxes and uniform quantization.
# ---------------------------------------------------------------------------


def bounds3(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Per-axis (min, max) of an ``(N, 3)`` array plus an all-finite flag.

    Axes containing a NaN report NaN bounds; infinities show up in the
    min/max directly.  Either case clears the finite flag.
    """
    mn = xyz.min(axis=0).astype(np.float64)
    mx = xyz.max(axis=0).astype(np.float64)
    finite = bool(np.isfinite(mn).all() and np.isfinite(mx).all())
    return mn, mx, finite


def quantize_floor(xyz: np.ndarray, origin: np.ndarray, scale: float) -> np.ndarray:
    """``floor((xyz - origin) * scale)`` per axis as int64 (voxel indices)."""
    xyz64 = xyz.astype(np.float64, copy=False)
    return np.floor((xyz64 - origin[None, :]) * scale).astype(np.int64)


def quantize_rint(
    xyz: np.ndarray, origin: np.ndarray, step: np.ndarray, nbins: int
) -> np.ndarray:
    """Round ``(xyz - origin) / step`` to the nearest bin in [0, nbins].

    Axes with a non-positive step (degenerate extent) quantize to bin 0.
    """
    xyz64 = xyz.astype(np.float64, copy=False)
    k = np.zeros(xyz.shape, dtype=np.int64)
    for axis in range(3):
        if step[axis] > 0.0:
            inv = 1.0 / step[axis]
            k[:, axis] = np.clip(
                np.rint((xyz64[:, axis] - origin[axis]) * inv), 0, nbins
            ).astype(np.int64)
    return k


def dequantize_scaled(
    kx: np.ndarray,
    ky: np.ndarray,
    kz: np.ndarray,
    origin: np.ndarray,
    step: np.ndarray,
) -> np.ndarray:
    """``origin[a] + k * step[a]`` per axis, assembled as an (N, 3) float64."""
    out = np.empty((len(kx), 3), dtype=np.float64)
    out[:, 0] = origin[0] + kx * step[0]
    out[:, 1] = origin[1] + ky * step[1]
    out[:, 2] = origin[2] + kz * step[2]
    return out


def quantize_floor_morton(
    xyz: np.ndarray, origin: np.ndarray, scale: float
) -> tuple[np.ndarray, int]:
    """Fused :func:`quantize_floor` + Morton interleave.

    Also returns the largest per-axis index so callers can check grid depth
    before trusting the 21-bit-per-axis Morton codes.
    """
    k = quantize_floor(xyz, origin, scale)
    umax = int(k.max()) if len(k) else 0
    return morton_encode3(k[:, 0], k[:, 1], k[:, 2]), umax


def quantize_rint_morton(
    xyz: np.ndarray, origin: np.ndarray, step: np.ndarray, nbins: int
) -> np.ndarray:
    """Fused :func:`quantize_rint` + Morton interleave (one code per point)."""
    k = quantize_rint(xyz, origin, step, nbins)
    return morton_encode3(k[:, 0], k[:, 1], k[:, 2])


def morton_dequantize(
    codes: np.ndarray, origin: np.ndarray, step: np.ndarray
) -> np.ndarray:
    """Fused Morton de-interleave + :func:`dequantize_scaled`."""
    kx, ky, kz = morton_decode3(codes)
    return dequantize_scaled(kx, ky, kz, origin, step)


def unpack_dequantize(
    words: np.ndarray, width: int, count: int, origin: np.ndarray, step: np.ndarray
) -> np.ndarray:
    """Fused bit unpack + dequantize over a zero-padded uint64 word stream."""
    bit = np.arange(3 * count, dtype=np.int64) * width
    widx = bit >> 6
    sh = bit & 63
    lo = words[widx] >> sh.astype(np.uint64)
    straddle = sh + width > 64
    hi = np.where(
        straddle, words[widx + 1] << (np.uint64(64) - sh.astype(np.uint64) & 63), 0
    )
    mask = np.uint64((np.int64(1) << width) - 1)
    k = ((lo | hi) & mask).astype(np.int64).reshape(count, 3)
    return dequantize_scaled(k[:, 0], k[:, 1], k[:, 2], origin, step)


# ---------------------------------------------------------------------------
# Fixed-width bit packing (values laid LSB-first in a little-endian bit
# stream) and delta-coded LEB128 varints over sorted code sequences.
# ---------------------------------------------------------------------------


def pack_fixed(values: np.ndarray, width: int) -> np.ndarray:
    """Pack each value into ``width`` low bits, zero-padded to whole bytes."""
    if len(values) == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width, dtype=np.int64)
    bits = ((values.astype(np.int64)[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little")


def unpack_fixed(buf: np.ndarray, width: int, count: int) -> np.ndarray:
    """Inverse of :func:`pack_fixed`; raises ValueError if ``buf`` is short."""
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    total = width * count
    if len(buf) * 8 < total:
        raise ValueError("bit-packed stream truncated")
    if width <= 16:
        # Any value spans at most 3 bytes (7-bit offset + 16-bit value);
        # a zero-padded copy makes the 3-byte window always readable.
        padded = np.zeros(len(buf) + 2, dtype=np.uint8)
        padded[: len(buf)] = buf
        bit = np.arange(count, dtype=np.int64) * width
        j = bit >> 3
        window = (
            padded[j].astype(np.int64)
            | (padded[j + 1].astype(np.int64) << 8)
            | (padded[j + 2].astype(np.int64) << 16)
        )
        mask = (np.int64(1) << width) - 1
        return (window >> (bit & 7)) & mask
    bits = (
        np.unpackbits(buf, count=total, bitorder="little")
        .reshape(count, width)
        .astype(np.int64)
    )
    weights = np.int64(1) << np.arange(width, dtype=np.int64)
    return bits @ weights


def delta_varint_encode(codes: np.ndarray) -> np.ndarray:
    """Delta-code a non-decreasing int64 sequence as concatenated varints.

    The first value is stored verbatim, every later value as its difference
    from the predecessor; each number is a base-128 varint, low group first,
    high bit marking continuation.
    """
    n = len(codes)
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    v = np.empty(n, dtype=np.int64)
    v[0] = codes[0]
    np.subtract(codes[1:], codes[:-1], out=v[1:])
    nbytes = (
        np.int64(1)
        + (v > 0x7F)
        + (v > 0x3FFF)
        + (v > 0x1FFFFF)
        + (v > 0xFFFFFFF)
        + (v > 0x7FFFFFFFF)
        + (v > 0x3FFFFFFFFFF)
        + (v > 0x1FFFFFFFFFFFF)
        + (v > 0xFFFFFFFFFFFFFF)
    ).astype(np.int64)
    ends = np.cumsum(nbytes)
    starts = ends - nbytes
    out = np.zeros(int(ends[-1]), dtype=np.uint8)
    for j in range(9):
        m = nbytes > j
        if not m.any():
            break
        group = ((v[m] >> (7 * j)) & 0x7F).astype(np.uint8)
        cont = (nbytes[m] > j + 1).astype(np.uint8)
        out[starts[m] + j] = group | (cont << 7)
    return out


def delta_varint_decode(buf: np.ndarray, count: int) -> np.ndarray:
    """Decode ``count`` delta varints and return the running (prefix) sums.

    Raises ValueError when the stream is truncated, carries trailing bytes,
    or a single varint spans more than nine bytes.
    """
    if count == 0:
        if len(buf) != 0:
            raise ValueError("trailing bytes after varint stream")
        return np.zeros(0, dtype=np.int64)
    b = buf.astype(np.int64)
    is_end = (b & 0x80) == 0
    if len(b) == 0 or int(is_end.sum()) != count or not is_end[-1]:
        raise ValueError("varint stream truncated or has trailing bytes")
    value_id = np.zeros(len(b), dtype=np.int64)
    value_id[1:] = np.cumsum(is_end)[:-1]
    end_pos = np.flatnonzero(is_end)
    starts = np.empty(count, dtype=np.int64)
    starts[0] = 0
    starts[1:] = end_pos[:-1] + 1
    rank = np.arange(len(b), dtype=np.int64) - starts[value_id]
    if int(rank.max()) > 8:
        raise ValueError("varint exceeds the signed 64-bit range")
    contrib = (b & 0x7F) << (7 * rank)
    deltas = np.zeros(count, dtype=np.int64)
    np.add.at(deltas, value_id, contrib)
    return np.cumsum(deltas)


# ---------------------------------------------------------------------------
# Adaptive binary range coder (carry-less, byte-oriented renormalization).
#
# State: 33-bit `low` accumulator with a cached byte + pending-0xFF counter,
# 32-bit `range`.  Probabilities are 12-bit and adapt with shift-5 updates.
# Encoder output begins with one zero byte; the decoder primes its 32-bit
# window from the first five bytes.
# ---------------------------------------------------------------------------

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


class _RangeEncoder:
    __slots__ = ("low", "rng", "cache", "cache_size", "out")

    def __init__(self) -> None:
        self.low = 0
        self.rng = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, probs: list[int], idx: int, bit: int) -> None:
        p = probs[idx]
        bound = (self.rng >> PROB_BITS) * p
        if bit == 0:
            self.rng = bound
            probs[idx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
        else:
            self.low += bound
            self.rng -= bound
            probs[idx] = p - (p >> ADAPT_SHIFT)
        while self.rng < _TOP:
            self._shift_low()
            self.rng = (self.rng << 8) & _MASK32

    def _shift_low(self) -> None:
        if self.low < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            self.out.append((self.cache + carry) & 0xFF)
            for _ in range(self.cache_size - 1):
                self.out.append((0xFF + carry) & 0xFF)
            self.cache = (self.low >> 24) & 0xFF
            self.cache_size = 0
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def flush(self) -> np.ndarray:
        for _ in range(5):
            self._shift_low()
        return np.frombuffer(bytes(self.out), dtype=np.uint8)


class _RangeDecoder:
    __slots__ = ("data", "pos", "rng", "code")

    def __init__(self, data: np.ndarray) -> None:
        self.data = data.tolist()
        self.pos = 0
        self.rng = _MASK32
        self.code = 0
        for _ in range(5):
            self.code = ((self.code << 8) | self._next_byte()) & _MASK32

    def _next_byte(self) -> int:
        if self.pos < len(self.data):
            b = self.data[self.pos]
        else:
            b = 0
        self.pos += 1
        return b

    def decode(self, probs: list[int], idx: int) -> int:
        p = probs[idx]
        bound = (self.rng >> PROB_BITS) * p
        if self.code < bound:
            bit = 0
            self.rng = bound
            probs[idx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
        else:
            bit = 1
            self.code -= bound
            self.rng -= bound
            probs[idx] = p - (p >> ADAPT_SHIFT)
        while self.rng < _TOP:
            self.rng = (self.rng << 8) & _MASK32
            self.code = ((self.code << 8) | self._next_byte()) & _MASK32
        return bit


# Occupancy-byte coding: one context per (tree-level parity, number of set
# bits among the already-coded lower bit positions), 16 contexts total.


def occ_encode(occ: np.ndarray, level_sizes: np.ndarray) -> np.ndarray:
    """Entropy-code a level-ordered stream of occupancy bytes."""
    probs = [PROB_INIT] * 16
    enc = _RangeEncoder()
    data = occ.tolist()
    pos = 0
    for level, n in enumerate(level_sizes.tolist()):
        base = (level & 1) * 8
        for i in range(pos, pos + n):
            byte = data[i]
            count = 0
            for j in range(8):
                bit = (byte >> j) & 1
                enc.encode(probs, base + count, bit)
                count += bit
        pos += n
    return enc.flush()


# Popcount / set-bit-position tables shared with the octree host code.
POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)
BITPOS8 = np.full((256, 8), -1, dtype=np.int64)
for _b in range(256):
    _positions = [_j for _j in range(8) if _b >> _j & 1]
    BITPOS8[_b, : len(_positions)] = _positions
del _b, _positions


def occ_decode_codes(buf: np.ndarray, depth: int, n_leaves: int) -> np.ndarray:
    """Decode an occupancy stream straight into sorted leaf Morton codes.

    Level sizes are re-derived from the decoded bytes' popcounts.  Raises
    ValueError if a decoded byte is zero (a node must have children) or any
    level outgrows ``n_leaves`` (every node has at least one leaf below it).
    """
    probs = [PROB_INIT] * 16
    dec = _RangeDecoder(buf)
    prefixes = np.zeros(1, dtype=np.int64)
    for level in range(depth):
        base = (level & 1) * 8
        n = len(prefixes)
        level_bytes = np.empty(n, dtype=np.uint8)
        for i in range(n):
            byte = 0
            count = 0
            for j in range(8):
                bit = dec.decode(probs, base + count)
                byte |= bit << j
                count += bit
            if byte == 0:
                raise ValueError("empty occupancy byte in stream")
            level_bytes[i] = byte
        counts = POPCOUNT8[level_bytes]
        if counts.sum() > n_leaves:
            raise ValueError("occupancy stream implies too many nodes")
        base_codes = np.repeat(prefixes << 3, counts)
        octants = BITPOS8[level_bytes]
        prefixes = base_codes + octants[octants >= 0]
    return prefixes


# Byte-stream coding via a 256-leaf binary context tree (used for the
# range-coded varint payload mode).


def rc_bytes_encode(data: np.ndarray) -> np.ndarray:
    probs = [PROB_INIT] * 256
    enc = _RangeEncoder()
    for byte in data.tolist():
        ctx = 1
        for i in range(7, -1, -1):
            bit = (byte >> i) & 1
            enc.encode(probs, ctx, bit)
            ctx = (ctx << 1) | bit
        # ctx is only ever used as an index *before* the 8th update, so it
        # stays below 256 while indexing; the final value is discarded.
    return enc.flush()


def rc_bytes_decode(buf: np.ndarray, count: int) -> np.ndarray:
    probs = [PROB_INIT] * 256
    dec = _RangeDecoder(buf)
    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        ctx = 1
        for _ in range(8):
            bit = dec.decode(probs, ctx)
            ctx = (ctx << 1) | bit
        out[i] = ctx & 0xFF
    return out


# ---------------------------------------------------------------------------
# Ray casting against oriented boxes (slab method in each box's frame).
# ---------------------------------------------------------------------------


def raycast_boxes(
    origin: np.ndarray, dirs: np.ndarray, boxes: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest positive-`t` intersection of each ray with any box.

    Returns ``(t, index)`` where misses carry ``t = inf`` and ``index = -1``.
    Rays are vectorized; boxes are visited in order, so equal-`t` ties go to
    the lower box index (matching the compiled twin's sequential scan).
    """
    n = len(dirs)
    best_t = np.full(n, np.inf, dtype=np.float64)
    best_idx = np.full(n, -1, dtype=np.int32)
    ox, oy, oz = (float(origin[0]), float(origin[1]), float(origin[2]))
    eps = 1e-12

    for b in range(len(boxes)):
        cx, cy, cz, length, width, height, yaw = (float(v) for v in boxes[b])
        c = math.cos(yaw)
        s = math.sin(yaw)
        rel_x = ox - cx
        rel_y = oy - cy
        # Ray origin and direction in the box frame.
        lox = c * rel_x + s * rel_y
        loy = -s * rel_x + c * rel_y
        loz = oz - cz
        ldx = c * dirs[:, 0] + s * dirs[:, 1]
        ldy = -s * dirs[:, 0] + c * dirs[:, 1]
        ldz = dirs[:, 2]

        tmin = np.full(n, -np.inf)
        tmax = np.full(n, np.inf)
        alive = np.ones(n, dtype=bool)
        for lo, ld, half in (
            (lox, ldx, 0.5 * length),
            (loy, ldy, 0.5 * width),
            (loz, ldz, 0.5 * height),
        ):
            parallel = np.abs(ld) < eps
            alive &= ~(parallel & (np.abs(lo) > half))
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = (-half - lo) / ld
                t1 = (half - lo) / ld
            near = np.minimum(t0, t1)
            far = np.maximum(t0, t1)
            tmin = np.where(~parallel, np.maximum(tmin, near), tmin)
            tmax = np.where(~parallel, np.minimum(tmax, far), tmax)

        hit = alive & (tmin <= tmax) & (tmax > eps) & (tmin > eps)
        closer = hit & (tmin < best_t)
        best_t[closer] = tmin[closer]
        best_idx[closer] = b
    return best_t, best_idx


# ---------------------------------------------------------------------------
# Grid-hashed single-linkage clustering (union-find over neighbor cells).
# ---------------------------------------------------------------------------


def _uf_find(parent: np.ndarray, i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        parent[i], i = root, parent[i]
    return root


def _uf_union(parent: np.ndarray, a: int, b: int) -> None:
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra != rb:
        if rb < ra:
            ra, rb = rb, ra
        parent[rb] = ra


def cluster_core(
    xy: np.ndarray,
    order: np.ndarray,
    cell_keys: np.ndarray,
    cell_starts: np.ndarray,
    cell_counts: np.ndarray,
    radius: float,
) -> np.ndarray:
    """Label points whose xy distance is ≤ radius into connected clusters.

    The caller pre-bins points into grid cells of side ``radius`` (``order``
    sorts points by cell; ``cell_keys`` are the sorted unique cell hashes).
    Only same-cell and forward-neighbor cell pairs are scanned, so each pair
    is examined once.  Labels are canonical: cluster ids increase with the
    first member's original point index.
    """
    n = len(xy)
    parent = np.arange(n, dtype=np.int64)
    r2 = radius * radius
    x = xy[:, 0]
    y = xy[:, 1]
    # Cells are sized so the cell diagonal is strictly below the radius:
    # same-cell points always link, and a cell pair needs at most one
    # linking edge, found anywhere in the pair's distance matrix.
    # Forward half of the 5x5 neighborhood.
    neighbor_offsets = tuple(
        (dx, dy)
        for dx in range(0, 3)
        for dy in range(-2, 3)
        if not (dx == 0 and dy <= 0)
    )

    for ci in range(len(cell_keys)):
        i0 = int(cell_starts[ci])
        i1 = i0 + int(cell_counts[ci])
        first = int(order[i0])
        for a_pos in range(i0 + 1, i1):
            _uf_union(parent, first, int(order[a_pos]))

    for ci in range(len(cell_keys)):
        key = int(cell_keys[ci])
        kx = key >> 21
        ky = key & ((1 << 21) - 1)
        i0 = int(cell_starts[ci])
        i1 = i0 + int(cell_counts[ci])
        pts_i = order[i0:i1]
        for dx, dy in neighbor_offsets:
            nkey = ((kx + dx) << 21) | (ky + dy)
            cj = int(np.searchsorted(cell_keys, nkey))
            if cj >= len(cell_keys) or cell_keys[cj] != nkey:
                continue
            j0 = int(cell_starts[cj])
            j1 = j0 + int(cell_counts[cj])
            if _uf_find(parent, int(order[i0])) == _uf_find(
                parent, int(order[j0])
            ):
                continue
            pts_j = order[j0:j1]
            dx2 = x[pts_i][:, None] - x[pts_j][None, :]
            dy2 = y[pts_i][:, None] - y[pts_j][None, :]
            close = (dx2 * dx2 + dy2 * dy2) <= r2
            hits = np.nonzero(close)
            if len(hits[0]):
                a_loc, b_loc = hits[0][0], hits[1][0]
                _uf_union(parent, int(pts_i[a_loc]), int(pts_j[b_loc]))

    labels = np.empty(n, dtype=np.int64)
    root_label = np.full(n, -1, dtype=np.int64)
    next_label = 0
    for i in range(n):
        root = _uf_find(parent, i)
        if root_label[root] < 0:
            root_label[root] = next_label
            next_label += 1
        labels[i] = root_label[root]
    return labels


# ---------------------------------------------------------------------------
# Oriented 3D IoU: convex polygon clipping in BEV times z-interval overlap.
# ---------------------------------------------------------------------------


def _box_corners_bev(box) -> list[tuple[float, float]]:
    cx, cy, _, length, width, _, yaw = (float(v) for v in box)
    c = math.cos(yaw)
    s = math.sin(yaw)
    hl = 0.5 * length
    hw = 0.5 * width
    corners = []
    for lx, ly in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)):
        corners.append((cx + c * lx - s * ly, cy + s * lx + c * ly))
    return corners


def _clip_polygon(
    poly: list[tuple[float, float]], a: tuple[float, float], b: tuple[float, float]
) -> list[tuple[float, float]]:
    """Keep the part of ``poly`` left of directed edge a->b (Sutherland-Hodgman)."""
    ex = b[0] - a[0]
    ey = b[1] - a[1]
    out: list[tuple[float, float]] = []
    m = len(poly)
    for i in range(m):
        px, py = poly[i]
        qx, qy = poly[(i + 1) % m]
        p_side = ex * (py - a[1]) - ey * (px - a[0])
        q_side = ex * (qy - a[1]) - ey * (qx - a[0])
        if p_side >= 0.0:
            out.append((px, py))
            if q_side < 0.0:
                t = p_side / (p_side - q_side)
                out.append((px + t * (qx - px), py + t * (qy - py)))
        elif q_side >= 0.0:
            t = p_side / (p_side - q_side)
            out.append((px + t * (qx - px), py + t * (qy - py)))
    return out


def _polygon_area(poly: list[tuple[float, float]]) -> float:
    area = 0.0
    m = len(poly)
    for i in range(m):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % m]
        area += x0 * y1 - x1 * y0
    return 0.5 * abs(area)


def iou3d_single(box_a, box_b) -> float:
    """IoU of two oriented boxes; exact for convex footprints.

    Arguments are put in a canonical (lexicographic) order first, which makes
    the result bitwise symmetric; bitwise-identical boxes return exactly 1.
    """
    swap = False
    identical = True
    for i in range(7):
        if float(box_b[i]) < float(box_a[i]):
            swap = True
            identical = False
            break
        if float(box_b[i]) > float(box_a[i]):
            identical = False
            break
    if identical:
        return 1.0
    if swap:
        box_a, box_b = box_b, box_a

    az0 = float(box_a[2]) - 0.5 * float(box_a[5])
    az1 = float(box_a[2]) + 0.5 * float(box_a[5])
    bz0 = float(box_b[2]) - 0.5 * float(box_b[5])
    bz1 = float(box_b[2]) + 0.5 * float(box_b[5])
    z_overlap = min(az1, bz1) - max(az0, bz0)
    if z_overlap <= 0.0:
        return 0.0

    poly = _box_corners_bev(box_a)
    clip = _box_corners_bev(box_b)
    for i in range(4):
        if not poly:
            break
        poly = _clip_polygon(poly, clip[i], clip[(i + 1) % 4])
    if not poly:
        return 0.0
    inter_area = _polygon_area(poly)
    inter_vol = inter_area * z_overlap
    vol_a = float(box_a[3]) * float(box_a[4]) * float(box_a[5])
    vol_b = float(box_b[3]) * float(box_b[4]) * float(box_b[5])
    union = vol_a + vol_b - inter_vol
    if union <= 0.0:
        return 0.0
    iou = inter_vol / union
    return 1.0 if iou > 1.0 else iou


def iou3d_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    out = np.zeros((len(boxes_a), len(boxes_b)), dtype=np.float64)
    for i in range(len(boxes_a)):
        for j in range(len(boxes_b)):
            out[i, j] = iou3d_single(boxes_a[i], boxes_b[j])
    return out
