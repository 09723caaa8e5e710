"""Pure numpy/scipy implementations of the hot kernels.

The compiled extension (_native.pyx) mirrors these bit-for-bit; the package
picks one backend at import time, see kernels/__init__.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def median_stack(stack: np.ndarray) -> np.ndarray:
    """Per-pixel lower median over axis 0 of a (n, h, w) uint8 stack."""
    n = stack.shape[0]
    mid = (n - 1) // 2
    return np.partition(stack, mid, axis=0)[mid]


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a (2r+1)^2 square element; outside pixels count as 0."""
    if radius <= 0:
        return mask.copy()
    k = 2 * radius + 1
    out = ndimage.binary_erosion(mask, structure=np.ones((k, k)), border_value=0)
    return out.astype(np.uint8)


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1)^2 square element."""
    if radius <= 0:
        return mask.copy()
    k = 2 * radius + 1
    out = ndimage.binary_dilation(mask, structure=np.ones((k, k)), border_value=0)
    return out.astype(np.uint8)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected component labeling. Returns (int32 labels, count)."""
    labels, count = ndimage.label(mask, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    return labels.astype(np.int32), int(count)


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Set every 0-region not 4-connected to the border."""
    out = ndimage.binary_fill_holes(
        mask, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]]
    )
    return out.astype(np.uint8)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (n,4) and (m,4) boxes in x,y,w,h form."""
    ax1, ay1 = a[:, 0, None], a[:, 1, None]
    ax2, ay2 = ax1 + a[:, 2, None], ay1 + a[:, 3, None]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]
    iw = np.maximum(0.0, np.minimum(ax2, bx2) - np.maximum(ax1, bx1))
    ih = np.maximum(0.0, np.minimum(ay2, by2) - np.maximum(ay1, by1))
    inter = iw * ih
    union = a[:, 2, None] * a[:, 3, None] + b[None, :, 2] * b[None, :, 3] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def nms_suppress(
    boxes: np.ndarray, classes: np.ndarray, order: np.ndarray, iou_threshold: float
) -> np.ndarray:
    """Greedy same-class suppression following `order`; returns kept indices in pick order."""
    x1 = boxes[:, 0]
    y1 = boxes[:, 1]
    x2 = boxes[:, 0] + boxes[:, 2]
    y2 = boxes[:, 1] + boxes[:, 3]
    areas = boxes[:, 2] * boxes[:, 3]

    alive = np.ones(order.shape[0], dtype=bool)
    keep = []
    for pos in range(order.shape[0]):
        if not alive[pos]:
            continue
        i = order[pos]
        keep.append(i)
        rest = np.nonzero(alive[pos + 1 :])[0] + pos + 1
        if rest.size == 0:
            continue
        j = order[rest]
        same = classes[j] == classes[i]
        if not np.any(same):
            continue
        js = j[same]
        iw = np.maximum(0.0, np.minimum(x2[i], x2[js]) - np.maximum(x1[i], x1[js]))
        ih = np.maximum(0.0, np.minimum(y2[i], y2[js]) - np.maximum(y1[i], y1[js]))
        inter = iw * ih
        union = areas[i] + areas[js] - inter
        iou = np.zeros_like(inter)
        np.divide(inter, union, out=iou, where=union > 0)
        alive[rest[same][iou > iou_threshold]] = False
    return np.asarray(keep, dtype=np.int64)


def assignment_col4row(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min-cost assignment of an n x m matrix with n <= m, all entries finite.

    Shortest augmenting path formulation with dual potentials. Returns
    (col4row, u, v) where col4row[i] is the column matched to row i and
    (u, v) are feasible potentials with equality on matched pairs.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    row4col = np.full(m + 1, n, dtype=np.int64)  # column m is the virtual start
    way = np.full(m, m, dtype=np.int64)  # predecessor column on the alternating path

    for i in range(n):
        row4col[m] = i
        j0 = m
        minv = np.full(m, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = row4col[j0]
            free = ~used[:m]
            cur = cost[i0, :] - u[i0] - v[:m]
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, np.inf)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            used_cols = np.nonzero(used)[0]
            u[row4col[used_cols]] += delta
            v[used_cols] -= delta
            minv[free] -= delta
            j0 = j1
            if row4col[j0] == n:
                break
        while j0 != m:
            j1 = way[j0]
            row4col[j0] = row4col[j1]
            j0 = j1

    col4row = np.full(n, -1, dtype=np.int64)
    for j in range(m):
        if row4col[j] != n:
            col4row[row4col[j]] = j
    return col4row, u[:n].copy(), v[:m].copy()


def box_blur_padded(padded: np.ndarray, k: int) -> np.ndarray:
    """k x k mean over a pre-padded uint8 grid, rounded to nearest (k odd)."""
    s = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(padded, axis=0, dtype=np.int64), axis=1, out=s[1:, 1:])
    win = s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]
    return ((2 * win + k * k) // (2 * k * k)).astype(np.uint8)
