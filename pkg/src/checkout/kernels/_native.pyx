# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Each function mirrors its _fallback twin bit-for-bit."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.uint8_t u8
ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64

cdef extern from "math.h":
    double INFINITY


def median_stack(const u8[:, :, ::1] stack):
    cdef Py_ssize_t n = stack.shape[0], h = stack.shape[1], w = stack.shape[2]
    cdef int need = <int>((n - 1) // 2) + 1
    out_arr = np.empty((h, w), dtype=np.uint8)
    counts_arr = np.zeros((w, 256), dtype=np.int32)
    cdef u8[:, ::1] out = out_arr
    cdef i32[:, ::1] counts = counts_arr
    cdef Py_ssize_t i, j, t
    cdef int b, acc
    for i in range(h):
        for t in range(n):
            for j in range(w):
                counts[j, stack[t, i, j]] += 1
        for j in range(w):
            acc = 0
            for b in range(256):
                acc += counts[j, b]
                if acc >= need:
                    out[i, j] = <u8>b
                    break
        for t in range(n):
            for j in range(w):
                counts[j, stack[t, i, j]] = 0
    return out_arr


cdef _prefix_sum(const u8[:, ::1] mask):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    s_arr = np.zeros((h + 1, w + 1), dtype=np.int64)
    cdef i64[:, ::1] s = s_arr
    cdef Py_ssize_t i, j
    for i in range(h):
        for j in range(w):
            s[i + 1, j + 1] = (<i64>(mask[i, j] != 0)) + s[i, j + 1] + s[i + 1, j] - s[i, j]
    return s_arr


def erode(const u8[:, ::1] mask, int radius):
    if radius <= 0:
        return np.asarray(mask).copy()
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    cdef i64 full = <i64>(2 * radius + 1) * (2 * radius + 1)
    s_arr = _prefix_sum(mask)
    cdef i64[:, ::1] s = s_arr
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef u8[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(radius, h - radius):
        for j in range(radius, w - radius):
            if (s[i + radius + 1, j + radius + 1] - s[i - radius, j + radius + 1]
                    - s[i + radius + 1, j - radius] + s[i - radius, j - radius]) == full:
                out[i, j] = 1
    return out_arr


def dilate(const u8[:, ::1] mask, int radius):
    if radius <= 0:
        return np.asarray(mask).copy()
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    s_arr = _prefix_sum(mask)
    cdef i64[:, ::1] s = s_arr
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef u8[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, lo_i, hi_i, lo_j, hi_j
    for i in range(h):
        lo_i = i - radius
        if lo_i < 0:
            lo_i = 0
        hi_i = i + radius + 1
        if hi_i > h:
            hi_i = h
        for j in range(w):
            lo_j = j - radius
            if lo_j < 0:
                lo_j = 0
            hi_j = j + radius + 1
            if hi_j > w:
                hi_j = w
            if (s[hi_i, hi_j] - s[lo_i, hi_j] - s[hi_i, lo_j] + s[lo_i, lo_j]) > 0:
                out[i, j] = 1
    return out_arr


def label_components(const u8[:, ::1] mask):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    queue_arr = np.empty(h * w, dtype=np.int64)
    cdef i32[:, ::1] labels = labels_arr
    cdef i64[::1] queue = queue_arr
    cdef Py_ssize_t i, j, qi, qn, ci, cj
    cdef i32 count = 0
    for i in range(h):
        for j in range(w):
            if mask[i, j] != 0 and labels[i, j] == 0:
                count += 1
                labels[i, j] = count
                queue[0] = i * w + j
                qi = 0
                qn = 1
                while qi < qn:
                    ci = queue[qi] // w
                    cj = queue[qi] % w
                    qi += 1
                    if ci > 0 and mask[ci - 1, cj] != 0 and labels[ci - 1, cj] == 0:
                        labels[ci - 1, cj] = count
                        queue[qn] = (ci - 1) * w + cj
                        qn += 1
                    if ci + 1 < h and mask[ci + 1, cj] != 0 and labels[ci + 1, cj] == 0:
                        labels[ci + 1, cj] = count
                        queue[qn] = (ci + 1) * w + cj
                        qn += 1
                    if cj > 0 and mask[ci, cj - 1] != 0 and labels[ci, cj - 1] == 0:
                        labels[ci, cj - 1] = count
                        queue[qn] = ci * w + cj - 1
                        qn += 1
                    if cj + 1 < w and mask[ci, cj + 1] != 0 and labels[ci, cj + 1] == 0:
                        labels[ci, cj + 1] = count
                        queue[qn] = ci * w + cj + 1
                        qn += 1
    return labels_arr, int(count)


def fill_holes(const u8[:, ::1] mask):
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    visited_arr = np.zeros((h, w), dtype=np.uint8)
    queue_arr = np.empty(h * w, dtype=np.int64)
    cdef u8[:, ::1] visited = visited_arr
    cdef i64[::1] queue = queue_arr
    cdef Py_ssize_t i, j, qi, qn, ci, cj
    qn = 0
    for i in range(h):
        for j in range(w):
            if (i == 0 or i == h - 1 or j == 0 or j == w - 1) and mask[i, j] == 0:
                if visited[i, j] == 0:
                    visited[i, j] = 1
                    queue[qn] = i * w + j
                    qn += 1
    qi = 0
    while qi < qn:
        ci = queue[qi] // w
        cj = queue[qi] % w
        qi += 1
        if ci > 0 and mask[ci - 1, cj] == 0 and visited[ci - 1, cj] == 0:
            visited[ci - 1, cj] = 1
            queue[qn] = (ci - 1) * w + cj
            qn += 1
        if ci + 1 < h and mask[ci + 1, cj] == 0 and visited[ci + 1, cj] == 0:
            visited[ci + 1, cj] = 1
            queue[qn] = (ci + 1) * w + cj
            qn += 1
        if cj > 0 and mask[ci, cj - 1] == 0 and visited[ci, cj - 1] == 0:
            visited[ci, cj - 1] = 1
            queue[qn] = ci * w + cj - 1
            qn += 1
        if cj + 1 < w and mask[ci, cj + 1] == 0 and visited[ci, cj + 1] == 0:
            visited[ci, cj + 1] = 1
            queue[qn] = ci * w + cj + 1
            qn += 1
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef u8[:, ::1] out = out_arr
    for i in range(h):
        for j in range(w):
            out[i, j] = 1 if (mask[i, j] != 0 or visited[i, j] == 0) else 0
    return out_arr


def iou_matrix(const f64[:, ::1] a, const f64[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef f64[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, aa, iw, ih, inter, union
    for i in range(n):
        ax1 = a[i, 0]
        ay1 = a[i, 1]
        ax2 = ax1 + a[i, 2]
        ay2 = ay1 + a[i, 3]
        aa = a[i, 2] * a[i, 3]
        for j in range(m):
            iw = min(ax2, b[j, 0] + b[j, 2]) - max(ax1, b[j, 0])
            if iw < 0.0:
                iw = 0.0
            ih = min(ay2, b[j, 1] + b[j, 3]) - max(ay1, b[j, 1])
            if ih < 0.0:
                ih = 0.0
            inter = iw * ih
            union = aa + b[j, 2] * b[j, 3] - inter
            if union > 0.0:
                out[i, j] = inter / union
    return out_arr


def nms_suppress(const f64[:, ::1] boxes, const i64[::1] classes,
                 const i64[::1] order, double iou_threshold):
    cdef Py_ssize_t n = order.shape[0]
    alive_arr = np.ones(n, dtype=np.uint8)
    keep_arr = np.empty(n, dtype=np.int64)
    cdef u8[::1] alive = alive_arr
    cdef i64[::1] keep = keep_arr
    cdef Py_ssize_t pos, pos2, nk = 0
    cdef i64 i, j
    cdef double x1i, y1i, x2i, y2i, ai, iw, ih, inter, union, iou
    for pos in range(n):
        if alive[pos] == 0:
            continue
        i = order[pos]
        keep[nk] = i
        nk += 1
        x1i = boxes[i, 0]
        y1i = boxes[i, 1]
        x2i = x1i + boxes[i, 2]
        y2i = y1i + boxes[i, 3]
        ai = boxes[i, 2] * boxes[i, 3]
        for pos2 in range(pos + 1, n):
            if alive[pos2] == 0:
                continue
            j = order[pos2]
            if classes[j] != classes[i]:
                continue
            iw = min(x2i, boxes[j, 0] + boxes[j, 2]) - max(x1i, boxes[j, 0])
            if iw < 0.0:
                iw = 0.0
            ih = min(y2i, boxes[j, 1] + boxes[j, 3]) - max(y1i, boxes[j, 1])
            if ih < 0.0:
                ih = 0.0
            inter = iw * ih
            union = ai + boxes[j, 2] * boxes[j, 3] - inter
            iou = inter / union if union > 0.0 else 0.0
            if iou > iou_threshold:
                alive[pos2] = 0
    return keep_arr[:nk].copy()


def assignment_col4row(const f64[:, ::1] cost):
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    u_arr = np.zeros(n + 1, dtype=np.float64)
    v_arr = np.zeros(m + 1, dtype=np.float64)
    row4col_arr = np.full(m + 1, n, dtype=np.int64)
    way_arr = np.zeros(m + 1, dtype=np.int64)
    minv_arr = np.empty(m, dtype=np.float64)
    used_arr = np.empty(m + 1, dtype=np.uint8)
    cdef f64[::1] u = u_arr
    cdef f64[::1] v = v_arr
    cdef i64[::1] row4col = row4col_arr
    cdef i64[::1] way = way_arr
    cdef f64[::1] minv = minv_arr
    cdef u8[::1] used = used_arr
    cdef Py_ssize_t i, j, j0, j1
    cdef i64 i0
    cdef double delta, cur, ui0
    for i in range(n):
        row4col[m] = i
        j0 = m
        for j in range(m):
            minv[j] = INFINITY
        for j in range(m + 1):
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = row4col[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = -1
            for j in range(m):
                if used[j] != 0:
                    continue
                cur = cost[i0, j] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(m + 1):
                if used[j] != 0:
                    u[row4col[j]] += delta
                    v[j] -= delta
                elif j < m:
                    minv[j] -= delta
            j0 = j1
            if row4col[j0] == n:
                break
        while j0 != m:
            j1 = way[j0]
            row4col[j0] = row4col[j1]
            j0 = j1
    col4row_arr = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] col4row = col4row_arr
    for j in range(m):
        if row4col[j] != n:
            col4row[row4col[j]] = j
    return col4row_arr, u_arr[:n].copy(), v_arr[:m].copy()


cdef _prefix_values(const u8[:, ::1] img):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    s_arr = np.zeros((h + 1, w + 1), dtype=np.int64)
    cdef i64[:, ::1] s = s_arr
    cdef Py_ssize_t i, j
    for i in range(h):
        for j in range(w):
            s[i + 1, j + 1] = (<i64>img[i, j]) + s[i, j + 1] + s[i + 1, j] - s[i, j]
    return s_arr


def box_blur_padded(const u8[:, ::1] padded, int k):
    cdef Py_ssize_t ph = padded.shape[0], pw = padded.shape[1]
    cdef Py_ssize_t h = ph - k + 1, w = pw - k + 1
    cdef i64 kk = <i64>k * k
    s_arr = _prefix_values(padded)
    cdef i64[:, ::1] s = s_arr
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef u8[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef i64 win
    for i in range(h):
        for j in range(w):
            win = s[i + k, j + k] - s[i, j + k] - s[i + k, j] + s[i, j]
            out[i, j] = <u8>((2 * win + kk) // (2 * kk))
    return out_arr
