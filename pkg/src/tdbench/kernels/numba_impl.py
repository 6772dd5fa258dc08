"""Compiled kernel implementations (numba twins of ``numpy_impl``).

Every public function matches its pure-numpy counterpart bit for bit: same
names, same dtypes, same outputs.  Integer state in the entropy coders is
kept in int64 scalars with explicit masking so the arithmetic is identical
to the Python-int reference.  Floating-point kernels use the same expression
order as the reference and rely on numba's default strict FP semantics
(no fastmath, no FMA contraction), which parity tests assert exactly.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

BACKEND_NAME = "numba"

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF

# ---------------------------------------------------------------------------
# Morton codes.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _part1by2(v):
    v = (v | (v << 32)) & 0x1F00000000FFFF
    v = (v | (v << 16)) & 0x1F0000FF0000FF
    v = (v | (v << 8)) & 0x100F00F00F00F00F
    v = (v | (v << 4)) & 0x10C30C30C30C30C3
    v = (v | (v << 2)) & 0x1249249249249249
    return v


@njit(cache=True)
def _compact1by2(v):
    v = v & 0x1249249249249249
    v = (v ^ (v >> 2)) & 0x10C30C30C30C30C3
    v = (v ^ (v >> 4)) & 0x100F00F00F00F00F
    v = (v ^ (v >> 8)) & 0x1F0000FF0000FF
    v = (v ^ (v >> 16)) & 0x1F00000000FFFF
    v = (v ^ (v >> 32)) & 0x1FFFFF
    return v


@njit(cache=True)
def morton_encode3(ux, uy, uz):
    n = ux.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = (
            _part1by2(ux[i]) | (_part1by2(uy[i]) << 1) | (_part1by2(uz[i]) << 2)
        )
    return out


@njit(cache=True)
def morton_decode3(codes):
    n = codes.shape[0]
    ux = np.empty(n, dtype=np.int64)
    uy = np.empty(n, dtype=np.int64)
    uz = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = codes[i]
        ux[i] = _compact1by2(c)
        uy[i] = _compact1by2(c >> 1)
        uz[i] = _compact1by2(c >> 2)
    return ux, uy, uz


# ---------------------------------------------------------------------------
# Bounding boxes and uniform quantization.
# ---------------------------------------------------------------------------


@njit(cache=True)
def bounds3(xyz):
    n = xyz.shape[0]
    mn = np.full(3, np.inf, dtype=np.float64)
    mx = np.full(3, -np.inf, dtype=np.float64)
    has_nan = np.zeros(3, dtype=np.bool_)
    for i in range(n):
        for a in range(3):
            v = np.float64(xyz[i, a])
            if math.isnan(v):
                has_nan[a] = True
            else:
                if v < mn[a]:
                    mn[a] = v
                if v > mx[a]:
                    mx[a] = v
    finite = True
    for a in range(3):
        if has_nan[a]:
            mn[a] = np.nan
            mx[a] = np.nan
        if not (math.isfinite(mn[a]) and math.isfinite(mx[a])):
            finite = False
    return mn, mx, finite


@njit(cache=True)
def quantize_floor(xyz, origin, scale):
    n = xyz.shape[0]
    out = np.empty((n, 3), dtype=np.int64)
    for i in range(n):
        for a in range(3):
            out[i, a] = np.int64(
                np.floor((np.float64(xyz[i, a]) - origin[a]) * scale)
            )
    return out


@njit(cache=True)
def quantize_rint(xyz, origin, step, nbins):
    n = xyz.shape[0]
    out = np.zeros((n, 3), dtype=np.int64)
    for a in range(3):
        if step[a] > 0.0:
            inv = 1.0 / step[a]
            for i in range(n):
                r = np.rint((np.float64(xyz[i, a]) - origin[a]) * inv)
                if r < 0.0:
                    r = 0.0
                elif r > nbins:
                    r = np.float64(nbins)
                out[i, a] = np.int64(r)
    return out


@njit(cache=True)
def dequantize_scaled(kx, ky, kz, origin, step):
    n = kx.shape[0]
    out = np.empty((n, 3), dtype=np.float64)
    for i in range(n):
        out[i, 0] = origin[0] + kx[i] * step[0]
        out[i, 1] = origin[1] + ky[i] * step[1]
        out[i, 2] = origin[2] + kz[i] * step[2]
    return out


@njit(cache=True)
def quantize_floor_morton(xyz, origin, scale):
    n = xyz.shape[0]
    out = np.empty(n, dtype=np.int64)
    umax = np.int64(0)
    for i in range(n):
        ux = np.int64(np.floor((np.float64(xyz[i, 0]) - origin[0]) * scale))
        uy = np.int64(np.floor((np.float64(xyz[i, 1]) - origin[1]) * scale))
        uz = np.int64(np.floor((np.float64(xyz[i, 2]) - origin[2]) * scale))
        if ux > umax:
            umax = ux
        if uy > umax:
            umax = uy
        if uz > umax:
            umax = uz
        out[i] = _part1by2(ux) | (_part1by2(uy) << 1) | (_part1by2(uz) << 2)
    return out, umax


@njit(cache=True)
def quantize_rint_morton(xyz, origin, step, nbins):
    n = xyz.shape[0]
    out = np.empty(n, dtype=np.int64)
    inv = np.zeros(3, dtype=np.float64)
    for a in range(3):
        if step[a] > 0.0:
            inv[a] = 1.0 / step[a]
    for i in range(n):
        code = np.int64(0)
        for a in range(3):
            k = np.int64(0)
            if step[a] > 0.0:
                r = np.rint((np.float64(xyz[i, a]) - origin[a]) * inv[a])
                if r < 0.0:
                    r = 0.0
                elif r > nbins:
                    r = np.float64(nbins)
                k = np.int64(r)
            code |= _part1by2(k) << a
        out[i] = code
    return out


@njit(cache=True)
def morton_dequantize(codes, origin, step):
    n = codes.shape[0]
    out = np.empty((n, 3), dtype=np.float64)
    for i in range(n):
        c = codes[i]
        out[i, 0] = origin[0] + _compact1by2(c) * step[0]
        out[i, 1] = origin[1] + _compact1by2(c >> 1) * step[1]
        out[i, 2] = origin[2] + _compact1by2(c >> 2) * step[2]
    return out


@njit(cache=True)
def unpack_dequantize(words, width, count, origin, step):
    # words: the bit-packed x,y,z stream reinterpreted as little-endian
    # uint64 words, zero-padded so reading one word past any value is safe.
    out = np.empty((count, 3), dtype=np.float64)
    mask = np.uint64((np.int64(1) << width) - 1)
    for i in range(count):
        for a in range(3):
            bit = (3 * i + a) * width
            widx = bit >> 6
            sh = bit & 63
            v = words[widx] >> np.uint64(sh)
            if sh + width > 64:
                v |= words[widx + 1] << np.uint64(64 - sh)
            out[i, a] = origin[a] + np.int64(v & mask) * step[a]
    return out


# ---------------------------------------------------------------------------
# Fixed-width bit packing (LSB-first) and delta-coded varints.
# ---------------------------------------------------------------------------


@njit(cache=True)
def pack_fixed(values, width):
    n = values.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    total = n * width
    out = np.zeros((total + 7) // 8, dtype=np.uint8)
    acc = np.int64(0)
    fill = 0
    pos = 0
    for i in range(n):
        acc |= values[i] << fill
        fill += width
        while fill >= 8:
            out[pos] = acc & 0xFF
            pos += 1
            acc >>= 8
            fill -= 8
    if fill > 0:
        out[pos] = acc & 0xFF
    return out


@njit(cache=True)
def unpack_fixed(buf, width, count):
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    total = width * count
    nbuf = buf.shape[0]
    if nbuf * 8 < total:
        raise ValueError("bit-packed stream truncated")
    out = np.empty(count, dtype=np.int64)
    mask = (np.int64(1) << width) - 1
    if width <= 16:
        # Any value spans at most 3 bytes (7-bit offset + 16-bit value);
        # a zero-padded copy makes the 3-byte window always readable.
        padded = np.zeros(nbuf + 2, dtype=np.uint8)
        padded[:nbuf] = buf
        for i in range(count):
            bit = i * width
            j = bit >> 3
            window = (
                np.int64(padded[j])
                | (np.int64(padded[j + 1]) << 8)
                | (np.int64(padded[j + 2]) << 16)
            )
            out[i] = (window >> (bit & 7)) & mask
        return out
    acc = np.int64(0)
    fill = 0
    pos = 0
    for i in range(count):
        while fill < width:
            acc |= np.int64(buf[pos]) << fill
            pos += 1
            fill += 8
        out[i] = acc & mask
        acc >>= width
        fill -= width
    return out


@njit(cache=True)
def delta_varint_encode(codes):
    n = codes.shape[0]
    out = np.empty(10 * n + 16, dtype=np.uint8)
    pos = 0
    prev = np.int64(0)
    for i in range(n):
        d = codes[i] - prev
        prev = codes[i]
        while d >= 0x80:
            out[pos] = (d & 0x7F) | 0x80
            pos += 1
            d >>= 7
        out[pos] = d
        pos += 1
    return out[:pos].copy()


@njit(cache=True)
def delta_varint_decode(buf, count):
    out = np.empty(count, dtype=np.int64)
    nbuf = buf.shape[0]
    pos = 0
    prev = np.int64(0)
    for i in range(count):
        value = np.int64(0)
        shift = 0
        while True:
            if pos >= nbuf:
                raise ValueError("varint stream truncated")
            byte = np.int64(buf[pos])
            pos += 1
            value |= (byte & 0x7F) << shift
            if byte < 0x80:
                break
            shift += 7
            if shift > 56:
                raise ValueError("varint exceeds the signed 64-bit range")
        prev = prev + value
        out[i] = prev
    if pos != nbuf:
        raise ValueError("trailing bytes after varint stream")
    return out


# ---------------------------------------------------------------------------
# Adaptive binary range coder.
#
# Both directions keep their state (low/range/cache for the encoder,
# code/range for the decoder) in local scalars so the hot loops compile to
# register arithmetic; the working set is just the context table and the
# byte stream.
# ---------------------------------------------------------------------------


@njit(cache=True)
def occ_encode(occ, level_sizes):
    probs = np.full(16, PROB_INIT, dtype=np.uint16)
    out = np.empty(8 * occ.shape[0] + 64, dtype=np.uint8)
    low = 0
    rng = _MASK32
    cache = 0
    csize = 1
    opos = 0
    pos = 0
    for level in range(level_sizes.shape[0]):
        base = (level & 1) * 8
        n = level_sizes[level]
        for i in range(pos, pos + n):
            byte = np.int64(occ[i])
            count = 0
            for j in range(8):
                bit = (byte >> j) & 1
                idx = base + count
                p = np.int64(probs[idx])
                bound = (rng >> PROB_BITS) * p
                if bit == 0:
                    rng = bound
                    probs[idx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
                else:
                    low += bound
                    rng -= bound
                    probs[idx] = p - (p >> ADAPT_SHIFT)
                while rng < _TOP:
                    if low < 0xFF000000 or low > _MASK32:
                        carry = low >> 32
                        out[opos] = (cache + carry) & 0xFF
                        opos += 1
                        for _ in range(csize - 1):
                            out[opos] = (0xFF + carry) & 0xFF
                            opos += 1
                        cache = (low >> 24) & 0xFF
                        csize = 0
                    csize += 1
                    low = (low & 0x00FFFFFF) << 8
                    rng = (rng << 8) & _MASK32
                count += bit
        pos += n
    for _ in range(5):
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            out[opos] = (cache + carry) & 0xFF
            opos += 1
            for _ in range(csize - 1):
                out[opos] = (0xFF + carry) & 0xFF
                opos += 1
            cache = (low >> 24) & 0xFF
            csize = 0
        csize += 1
        low = (low & 0x00FFFFFF) << 8
    return out[:opos].copy()


@njit(cache=True)
def occ_decode_codes(buf, depth, n_leaves):
    # Decoder state lives in scalars so the hot loop stays in registers.
    probs = np.full(16, PROB_INIT, dtype=np.uint16)
    nbuf = buf.shape[0]
    code = 0
    rng = _MASK32
    read = 0
    for _ in range(5):
        nxt = np.int64(buf[read]) if read < nbuf else np.int64(0)
        read += 1
        code = ((code << 8) | nxt) & _MASK32

    prefixes = np.zeros(1, dtype=np.int64)
    scratch = np.empty(max(n_leaves, 1), dtype=np.int64)
    for level in range(depth):
        base = (level & 1) * 8
        n = prefixes.shape[0]
        pos = 0
        for i in range(n):
            byte = 0
            count = 0
            for j in range(8):
                idx = base + count
                p = np.int64(probs[idx])
                bound = (rng >> PROB_BITS) * p
                if code < bound:
                    bit = 0
                    rng = bound
                    probs[idx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
                else:
                    bit = 1
                    code -= bound
                    rng -= bound
                    probs[idx] = p - (p >> ADAPT_SHIFT)
                while rng < _TOP:
                    rng = (rng << 8) & _MASK32
                    nxt = np.int64(buf[read]) if read < nbuf else np.int64(0)
                    read += 1
                    code = ((code << 8) | nxt) & _MASK32
                byte |= bit << j
                count += bit
            if byte == 0:
                raise ValueError("empty occupancy byte in stream")
            if pos + count > n_leaves:
                raise ValueError("occupancy stream implies too many nodes")
            parent = prefixes[i] << 3
            for j in range(8):
                if (byte >> j) & 1:
                    scratch[pos] = parent | j
                    pos += 1
        prefixes = scratch[:pos].copy()
    return prefixes


@njit(cache=True)
def rc_bytes_encode(data):
    probs = np.full(256, PROB_INIT, dtype=np.uint16)
    out = np.empty(8 * data.shape[0] + 64, dtype=np.uint8)
    low = 0
    rng = _MASK32
    cache = 0
    csize = 1
    opos = 0
    for i in range(data.shape[0]):
        byte = np.int64(data[i])
        ctx = 1
        for k in range(7, -1, -1):
            bit = (byte >> k) & 1
            p = np.int64(probs[ctx])
            bound = (rng >> PROB_BITS) * p
            if bit == 0:
                rng = bound
                probs[ctx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
            else:
                low += bound
                rng -= bound
                probs[ctx] = p - (p >> ADAPT_SHIFT)
            while rng < _TOP:
                if low < 0xFF000000 or low > _MASK32:
                    carry = low >> 32
                    out[opos] = (cache + carry) & 0xFF
                    opos += 1
                    for _ in range(csize - 1):
                        out[opos] = (0xFF + carry) & 0xFF
                        opos += 1
                    cache = (low >> 24) & 0xFF
                    csize = 0
                csize += 1
                low = (low & 0x00FFFFFF) << 8
                rng = (rng << 8) & _MASK32
            ctx = (ctx << 1) | bit
    for _ in range(5):
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            out[opos] = (cache + carry) & 0xFF
            opos += 1
            for _ in range(csize - 1):
                out[opos] = (0xFF + carry) & 0xFF
                opos += 1
            cache = (low >> 24) & 0xFF
            csize = 0
        csize += 1
        low = (low & 0x00FFFFFF) << 8
    return out[:opos].copy()


@njit(cache=True)
def rc_bytes_decode(buf, count):
    probs = np.full(256, PROB_INIT, dtype=np.uint16)
    nbuf = buf.shape[0]
    code = 0
    rng = _MASK32
    read = 0
    for _ in range(5):
        nxt = np.int64(buf[read]) if read < nbuf else np.int64(0)
        read += 1
        code = ((code << 8) | nxt) & _MASK32

    out = np.empty(count, dtype=np.uint8)
    for i in range(count):
        ctx = 1
        for _ in range(8):
            p = np.int64(probs[ctx])
            bound = (rng >> PROB_BITS) * p
            if code < bound:
                bit = 0
                rng = bound
                probs[ctx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
            else:
                bit = 1
                code -= bound
                rng -= bound
                probs[ctx] = p - (p >> ADAPT_SHIFT)
            while rng < _TOP:
                rng = (rng << 8) & _MASK32
                nxt = np.int64(buf[read]) if read < nbuf else np.int64(0)
                read += 1
                code = ((code << 8) | nxt) & _MASK32
            ctx = (ctx << 1) | bit
        out[i] = ctx & 0xFF
    return out


# ---------------------------------------------------------------------------
# Ray casting (slab method, same expression order as the reference).
# ---------------------------------------------------------------------------


@njit(cache=True)
def raycast_boxes(origin, dirs, boxes):
    n = dirs.shape[0]
    best_t = np.full(n, np.inf, dtype=np.float64)
    best_idx = np.full(n, -1, dtype=np.int32)
    ox = origin[0]
    oy = origin[1]
    oz = origin[2]
    eps = 1e-12

    for b in range(boxes.shape[0]):
        cx = boxes[b, 0]
        cy = boxes[b, 1]
        cz = boxes[b, 2]
        half_l = 0.5 * boxes[b, 3]
        half_w = 0.5 * boxes[b, 4]
        half_h = 0.5 * boxes[b, 5]
        yaw = boxes[b, 6]
        c = math.cos(yaw)
        s = math.sin(yaw)
        rel_x = ox - cx
        rel_y = oy - cy
        lox = c * rel_x + s * rel_y
        loy = -s * rel_x + c * rel_y
        loz = oz - cz

        for r in range(n):
            ldx = c * dirs[r, 0] + s * dirs[r, 1]
            ldy = -s * dirs[r, 0] + c * dirs[r, 1]
            ldz = dirs[r, 2]

            tmin = -np.inf
            tmax = np.inf
            alive = True
            for axis in range(3):
                if axis == 0:
                    lo = lox
                    ld = ldx
                    half = half_l
                elif axis == 1:
                    lo = loy
                    ld = ldy
                    half = half_w
                else:
                    lo = loz
                    ld = ldz
                    half = half_h
                if abs(ld) < eps:
                    if abs(lo) > half:
                        alive = False
                        break
                else:
                    t0 = (-half - lo) / ld
                    t1 = (half - lo) / ld
                    near = min(t0, t1)
                    far = max(t0, t1)
                    if near > tmin:
                        tmin = near
                    if far < tmax:
                        tmax = far
            if alive and tmin <= tmax and tmax > eps and tmin > eps:
                if tmin < best_t[r]:
                    best_t[r] = tmin
                    best_idx[r] = b
    return best_t, best_idx


# ---------------------------------------------------------------------------
# Grid-hashed single-linkage clustering.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _uf_find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def _uf_union(parent, a, b):
    ra = _uf_find(parent, a)
    rb = _uf_find(parent, b)
    if ra != rb:
        if rb < ra:
            ra, rb = rb, ra
        parent[rb] = ra


@njit(cache=True)
def cluster_core(xy, order, cell_keys, cell_starts, cell_counts, radius):
    # Cells are sized so the cell diagonal is strictly below ``radius``
    # (see the host-side prep): same-cell points always link, so each cell
    # collapses to one component without distance checks, and a cell pair
    # needs at most one linking edge — scans stop at the first hit unless
    # the pair's components are already merged.
    n = xy.shape[0]
    parent = np.arange(n, dtype=np.int64)
    r2 = radius * radius
    n_cells = cell_keys.shape[0]

    for ci in range(n_cells):
        i0 = cell_starts[ci]
        i1 = i0 + cell_counts[ci]
        first = order[i0]
        for a_pos in range(i0 + 1, i1):
            _uf_union(parent, first, order[a_pos])

    for ci in range(n_cells):
        key = cell_keys[ci]
        kx = key >> 21
        ky = key & ((1 << 21) - 1)
        i0 = cell_starts[ci]
        i1 = i0 + cell_counts[ci]
        for dx in range(0, 3):
            for dy in range(-2, 3):
                if dx == 0 and dy <= 0:
                    continue  # forward half of the 5x5 neighborhood
                nkey = ((kx + dx) << 21) | (ky + dy)
                cj = np.searchsorted(cell_keys, nkey)
                if cj >= n_cells or cell_keys[cj] != nkey:
                    continue
                j0 = cell_starts[cj]
                j1 = j0 + cell_counts[cj]
                if _uf_find(parent, order[i0]) == _uf_find(parent, order[j0]):
                    continue
                linked = False
                for a_pos in range(i0, i1):
                    a = order[a_pos]
                    for b_pos in range(j0, j1):
                        b = order[b_pos]
                        ddx = xy[a, 0] - xy[b, 0]
                        ddy = xy[a, 1] - xy[b, 1]
                        if ddx * ddx + ddy * ddy <= r2:
                            _uf_union(parent, a, b)
                            linked = True
                            break
                    if linked:
                        break

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
# Oriented 3D IoU.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _iou3d_single(box_a, box_b):
    # Canonical argument order (lexicographic) makes the result bitwise
    # symmetric; bitwise-identical boxes return exactly 1.
    swap = False
    identical = True
    for i in range(7):
        if box_b[i] < box_a[i]:
            swap = True
            identical = False
            break
        if box_b[i] > box_a[i]:
            identical = False
            break
    if identical:
        return 1.0
    if swap:
        tmp = box_a
        box_a = box_b
        box_b = tmp

    az0 = box_a[2] - 0.5 * box_a[5]
    az1 = box_a[2] + 0.5 * box_a[5]
    bz0 = box_b[2] - 0.5 * box_b[5]
    bz1 = box_b[2] + 0.5 * box_b[5]
    z_overlap = min(az1, bz1) - max(az0, bz0)
    if z_overlap <= 0.0:
        return 0.0

    # Footprint corners of both boxes, counter-clockwise.
    px = np.empty(16, dtype=np.float64)
    py = np.empty(16, dtype=np.float64)
    qx = np.empty(16, dtype=np.float64)
    qy = np.empty(16, dtype=np.float64)
    cxa = np.empty(4, dtype=np.float64)
    cya = np.empty(4, dtype=np.float64)
    cxb = np.empty(4, dtype=np.float64)
    cyb = np.empty(4, dtype=np.float64)

    for which in range(2):
        if which == 0:
            box = box_a
            outx = cxa
            outy = cya
        else:
            box = box_b
            outx = cxb
            outy = cyb
        c = math.cos(box[6])
        s = math.sin(box[6])
        hl = 0.5 * box[3]
        hw = 0.5 * box[4]
        for k in range(4):
            if k == 0:
                lx = hl
                ly = hw
            elif k == 1:
                lx = -hl
                ly = hw
            elif k == 2:
                lx = -hl
                ly = -hw
            else:
                lx = hl
                ly = -hw
            outx[k] = box[0] + c * lx - s * ly
            outy[k] = box[1] + s * lx + c * ly

    m = 4
    for k in range(4):
        px[k] = cxa[k]
        py[k] = cya[k]

    for e in range(4):
        if m == 0:
            break
        ax = cxb[e]
        ay = cyb[e]
        bx = cxb[(e + 1) % 4]
        by = cyb[(e + 1) % 4]
        ex = bx - ax
        ey = by - ay
        out_m = 0
        for i in range(m):
            pxi = px[i]
            pyi = py[i]
            pxj = px[(i + 1) % m]
            pyj = py[(i + 1) % m]
            p_side = ex * (pyi - ay) - ey * (pxi - ax)
            q_side = ex * (pyj - ay) - ey * (pxj - ax)
            if p_side >= 0.0:
                qx[out_m] = pxi
                qy[out_m] = pyi
                out_m += 1
                if q_side < 0.0:
                    t = p_side / (p_side - q_side)
                    qx[out_m] = pxi + t * (pxj - pxi)
                    qy[out_m] = pyi + t * (pyj - pyi)
                    out_m += 1
            elif q_side >= 0.0:
                t = p_side / (p_side - q_side)
                qx[out_m] = pxi + t * (pxj - pxi)
                qy[out_m] = pyi + t * (pyj - pyi)
                out_m += 1
        m = out_m
        for i in range(m):
            px[i] = qx[i]
            py[i] = qy[i]

    if m == 0:
        return 0.0
    area = 0.0
    for i in range(m):
        x0 = px[i]
        y0 = py[i]
        x1 = px[(i + 1) % m]
        y1 = py[(i + 1) % m]
        area += x0 * y1 - x1 * y0
    inter_area = 0.5 * abs(area)
    inter_vol = inter_area * z_overlap
    vol_a = box_a[3] * box_a[4] * box_a[5]
    vol_b = box_b[3] * box_b[4] * box_b[5]
    union = vol_a + vol_b - inter_vol
    if union <= 0.0:
        return 0.0
    iou = inter_vol / union
    if iou > 1.0:
        iou = 1.0
    return iou


@njit(cache=True)
def iou3d_matrix(boxes_a, boxes_b):
    out = np.zeros((boxes_a.shape[0], boxes_b.shape[0]), dtype=np.float64)
    for i in range(boxes_a.shape[0]):
        for j in range(boxes_b.shape[0]):
            out[i, j] = _iou3d_single(boxes_a[i], boxes_b[j])
    return out


def iou3d_single(box_a, box_b) -> float:
    """Scalar convenience wrapper matching the reference implementation."""
    return float(
        _iou3d_single(
            np.asarray(box_a, dtype=np.float64), np.asarray(box_b, dtype=np.float64)
        )
    )
