"""Hot-loop kernels with a compiled fast path.

The compiled extension (`_native`, Cython) is preferred; the numpy/scipy
fallback (`_fallback`) is selected when the extension is missing or when
CHECKOUT_NO_NATIVE=1 is set. Both backends produce identical outputs;
`benchmarks/bench_kernels.py` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("CHECKOUT_NO_NATIVE"):
    from . import _fallback as _impl

    BACKEND = "fallback"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "fallback"


def available_backends() -> dict[str, object]:
    """Importable backend modules keyed by name (for tests and benchmarks)."""
    from . import _fallback

    out: dict[str, object] = {"fallback": _fallback}
    try:
        from . import _native  # type: ignore[attr-defined]

        out["native"] = _native
    except ImportError:
        pass
    return out


def _as_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.ascontiguousarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    if mask.dtype != np.uint8:
        mask = (mask != 0).astype(np.uint8)
    return mask


def median_stack(stack: np.ndarray, impl=None) -> np.ndarray:
    """Per-pixel lower median over axis 0 of a (n, h, w) uint8 stack."""
    stack = np.ascontiguousarray(stack)
    if stack.ndim != 3 or stack.shape[0] < 1:
        raise ValueError("stack must be (n, h, w) with n >= 1")
    if stack.dtype != np.uint8:
        raise ValueError("stack must be uint8")
    return (impl or _impl).median_stack(stack)


def erode(mask: np.ndarray, radius: int, impl=None) -> np.ndarray:
    return (impl or _impl).erode(_as_mask(mask), int(radius))


def dilate(mask: np.ndarray, radius: int, impl=None) -> np.ndarray:
    return (impl or _impl).dilate(_as_mask(mask), int(radius))


def label_components(mask: np.ndarray, impl=None) -> tuple[np.ndarray, int]:
    """4-connected labeling with labels 1..count in row-major first-pixel order."""
    labels, count = (impl or _impl).label_components(_as_mask(mask))
    if count > 1:
        flat = labels.ravel()
        nz = np.flatnonzero(flat)
        _, first = np.unique(flat[nz], return_index=True)
        lut = np.zeros(count + 1, dtype=np.int32)
        lut[flat[nz[np.sort(first)]]] = np.arange(1, count + 1, dtype=np.int32)
        labels = lut[labels]
    return labels, count


def fill_holes(mask: np.ndarray, impl=None) -> np.ndarray:
    return (impl or _impl).fill_holes(_as_mask(mask))


def iou_matrix(a: np.ndarray, b: np.ndarray, impl=None) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    return (impl or _impl).iou_matrix(a, b)


def nms_keep(
    boxes: np.ndarray,
    scores: np.ndarray,
    classes: np.ndarray,
    iou_threshold: float,
    impl=None,
) -> np.ndarray:
    """Greedy per-class NMS. Returns kept indices, highest score first,
    score ties broken by input order."""
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    classes = np.ascontiguousarray(classes, dtype=np.int64)
    order = np.argsort(-scores, kind="stable").astype(np.int64)
    return (impl or _impl).nms_suppress(boxes, classes, order, float(iou_threshold))


def _solve(cost: np.ndarray, impl) -> tuple[np.ndarray, np.ndarray, float, np.ndarray, np.ndarray, bool]:
    """One solver call; handles orientation. Returns (rows, cols, total, u, v, transposed)."""
    n, m = cost.shape
    transposed = n > m
    work = np.ascontiguousarray(cost.T if transposed else cost, dtype=np.float64)
    col4row, u, v = impl.assignment_col4row(work)
    if transposed:
        rows = col4row
        cols = np.arange(m, dtype=np.int64)
    else:
        rows = np.arange(n, dtype=np.int64)
        cols = col4row
    order = np.argsort(rows, kind="stable")
    rows, cols = rows[order], cols[order]
    total = float(cost[rows, cols].sum())
    return rows, cols, total, u, v, transposed


def _lex_refine(cost: np.ndarray, target: float, tol: float, impl) -> tuple[np.ndarray, np.ndarray]:
    """Among all assignments with total within tol of target, pick the one whose
    (row, col) pair list is lexicographically smallest. Cost must be finite."""
    n, m = cost.shape
    need = min(n, m)
    cols_left = list(range(m))
    out_rows: list[int] = []
    out_cols: list[int] = []
    remaining = target
    for r in range(n):
        if len(out_rows) == need:
            break
        rest_rows = list(range(r + 1, n))
        chosen = -1
        for c in cols_left:
            rest_cols = [x for x in cols_left if x != c]
            sub_need = need - len(out_rows) - 1
            sub_total = 0.0
            if sub_need > 0:
                sub = cost[np.ix_(rest_rows, rest_cols)]
                _, _, sub_total, _, _, _ = _solve(sub, impl)
            if abs(cost[r, c] + sub_total - remaining) <= tol:
                chosen = c
                break
        if chosen >= 0:
            out_rows.append(r)
            out_cols.append(chosen)
            remaining -= cost[r, chosen]
            cols_left.remove(chosen)
        else:
            # leaving r unassigned must itself be optimal (only possible when n > m)
            sub = cost[np.ix_(rest_rows, cols_left)]
            _, _, sub_total, _, _, _ = _solve(sub, impl)
            if abs(sub_total - remaining) > tol:
                raise AssertionError("tie refinement lost the optimum")
    return np.asarray(out_rows, dtype=np.int64), np.asarray(out_cols, dtype=np.int64)


def solve_assignment(cost: np.ndarray, impl=None) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-total-cost one-to-one assignment of a finite cost matrix.

    Returns (rows, cols) of length min(n, m), sorted by row. When several
    assignments share the minimal total, the lexicographically smallest
    (row, col) pair list is returned.
    """
    impl = impl or _impl
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be 2-D")
    n, m = cost.shape
    if n == 0 or m == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost entries must be finite")

    rows, cols, total, u, v, transposed = _solve(cost, impl)
    # Complementary slackness: every matched pair is tight. Any extra tight
    # cell signals a possible alternative optimum, so refine deterministically.
    tol = 1e-9 * max(1.0, float(np.abs(cost).max()))
    work = cost.T if transposed else cost
    reduced = work - u[:, None] - v[None, :]
    if int((np.abs(reduced) <= tol).sum()) > rows.shape[0]:
        rows, cols = _lex_refine(cost, total, tol * (min(n, m) + 1), impl)
    return rows, cols


def box_blur(img: np.ndarray, k: int, impl=None) -> np.ndarray:
    """k x k box mean with edge-repeat padding, rounded to nearest. k odd."""
    if k < 1 or k % 2 == 0:
        raise ValueError("kernel size must be odd and >= 1")
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError("image must be uint8")
    if k == 1:
        return img.copy()
    r = k // 2
    if img.ndim == 2:
        padded = np.ascontiguousarray(np.pad(img, r, mode="symmetric"))
        return (impl or _impl).box_blur_padded(padded, k)
    if img.ndim == 3:
        chans = [box_blur(np.ascontiguousarray(img[:, :, c]), k, impl) for c in range(img.shape[2])]
        return np.stack(chans, axis=2)
    raise ValueError("image must be 2-D or 3-D")
