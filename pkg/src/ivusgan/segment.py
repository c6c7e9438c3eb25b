"""Label-map post-processing and sub-pixel boundary extraction.

Pipeline: per-pixel channel argmax -> region binarization -> cleanup
(largest 4-connected component, holes filled) -> marching-squares
isocontour at level 0.5.  After cleanup the 0.5-level set of a mask is a
single simple closed curve, so the extractor returns one positively
oriented polygon (shoelace signed area > 0 in (x, y) = (col, row) coords).

Marching squares runs on the mask padded with a zero border (so regions
touching the image edge still close) with vertices at pixel-edge midpoints;
saddle cells are resolved by treating the cell centre as background, which
matches 4-connectivity of the foreground.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .tensor import Tensor

REGION_LUMEN = "lumen"
REGION_LUMEN_PLUS_PLAQUE = "lumen_plus_plaque"

_FOUR_CONN = ndimage.generate_binary_structure(2, 1)


class SegmentationError(ValueError):
    pass


def predict_labels(gen_output) -> np.ndarray:
    """Per-pixel argmax over 3 channels; ties go to the lower class index."""
    arr = gen_output.data if isinstance(gen_output, Tensor) else np.asarray(gen_output)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise SegmentationError(f"expected (3,H,W) class scores, got shape {arr.shape}")
    return np.argmax(arr, axis=0).astype(np.uint8)


def binarize(labels: np.ndarray, region: str) -> np.ndarray:
    if region == REGION_LUMEN:
        return labels == 0
    if region == REGION_LUMEN_PLUS_PLAQUE:
        return labels <= 1
    raise SegmentationError(
        f"unknown region {region!r} (use {REGION_LUMEN!r} or {REGION_LUMEN_PLUS_PLAQUE!r})"
    )


def cleanup(mask: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component and fill its holes.

    Empty in, empty out.  Idempotent.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros_like(mask)
    labeled, n = ndimage.label(mask, structure=_FOUR_CONN)
    if n > 1:
        counts = np.bincount(labeled.ravel())
        counts[0] = 0
        mask = labeled == int(np.argmax(counts))
    else:
        mask = labeled == 1
    return ndimage.binary_fill_holes(mask, structure=_FOUR_CONN)


# marching-squares case table: per 2x2 cell (corners TL,TR,BR,BL as bits
# 8,4,2,1) the list of segments between edge midpoints T,R,B,L.  Saddles
# (cases 5 and 10) cut both corners: foreground stays 4-connected.
_T, _R, _B, _L = 0, 1, 2, 3
_CASES = {
    0: [], 15: [],
    8: [(_L, _T)], 4: [(_T, _R)], 2: [(_R, _B)], 1: [(_B, _L)],
    12: [(_L, _R)], 6: [(_T, _B)], 3: [(_L, _R)], 9: [(_T, _B)],
    14: [(_L, _B)], 13: [(_B, _R)], 11: [(_T, _R)], 7: [(_L, _T)],
    10: [(_L, _T), (_R, _B)], 5: [(_T, _R), (_B, _L)],
}


def _edge_midpoint_key(r: int, c: int, edge: int):
    """Doubled-coordinate integer key of a cell-edge midpoint (exact)."""
    if edge == _T:
        return (2 * c + 1, 2 * r)
    if edge == _B:
        return (2 * c + 1, 2 * r + 2)
    if edge == _L:
        return (2 * c, 2 * r + 1)
    return (2 * c + 2, 2 * r + 1)


def extract_contour(mask: np.ndarray) -> np.ndarray:
    """Marching-squares 0.5-isocontour of a cleaned binary mask.

    Returns an (M, 2) closed polygon in (x, y) pixel coordinates, positively
    oriented.  Raises if the mask is empty or decomposes into more than one
    loop (i.e. was not cleaned).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise SegmentationError(f"mask must be 2-d, got shape {mask.shape}")
    if not mask.any():
        raise SegmentationError("no region: mask is empty")
    padded = np.pad(mask, 1).astype(np.int8)

    # directed adjacency between edge-midpoint keys
    adjacency: dict = {}
    tl = padded[:-1, :-1]
    tr = padded[:-1, 1:]
    br = padded[1:, 1:]
    bl = padded[1:, :-1]
    case = tl * 8 + tr * 4 + br * 2 + bl * 1
    cells = np.argwhere((case != 0) & (case != 15))
    for r, c in cells:
        for e1, e2 in _CASES[int(case[r, c])]:
            k1 = _edge_midpoint_key(r, c, e1)
            k2 = _edge_midpoint_key(r, c, e2)
            adjacency.setdefault(k1, []).append(k2)
            adjacency.setdefault(k2, []).append(k1)

    for key, nbrs in adjacency.items():
        if len(nbrs) != 2:
            raise SegmentationError("degenerate contour graph (mask not cleaned?)")

    start = min(adjacency)
    loop = [start]
    prev, cur = None, start
    while True:
        a, b = adjacency[cur]
        nxt = b if a == prev else a
        if nxt == start:
            break
        loop.append(nxt)
        prev, cur = cur, nxt
    if len(loop) != len(adjacency):
        raise SegmentationError(
            f"mask splits into multiple contour loops ({len(adjacency) - len(loop)} "
            "vertices unused); run cleanup first"
        )

    # doubled padded coords -> pixel coords of the original mask
    poly = np.asarray(loop, dtype=np.float64) / 2.0 - 1.0
    x, y = poly[:, 0], poly[:, 1]
    signed = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
    if signed < 0:
        poly = poly[::-1].copy()
    return poly


def lu_ma_boundaries(labels: np.ndarray):
    """(lumen contour, media-adventitia contour) from a 3-class label map."""
    lu = extract_contour(cleanup(binarize(labels, REGION_LUMEN)))
    ma = extract_contour(cleanup(binarize(labels, REGION_LUMEN_PLUS_PLAQUE)))
    return lu, ma


def contour_to_svg_path(contour: np.ndarray, decimals: int = 3) -> str:
    pts = " L ".join(f"{x:.{decimals}f} {y:.{decimals}f}" for x, y in contour)
    return f"M {pts} Z"


def write_contour(path, contour: np.ndarray) -> None:
    """Plain-text vertex list: '# x y' header then one 'x y' line per vertex."""
    with open(path, "w") as fh:
        fh.write("# x y (one vertex per line, closed polygon)\n")
        for x, y in contour:
            fh.write(f"{float(x)!r} {float(y)!r}\n")


def read_contour(path) -> np.ndarray:
    pts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            x, y = line.split()
            pts.append((float(x), float(y)))
    return np.asarray(pts, dtype=np.float64)
