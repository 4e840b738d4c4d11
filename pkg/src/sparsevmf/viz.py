"""Pixel-map rendering of sparse directional means and data: dimensions are
ordered by their support pattern, rows by cluster size, and each group of
dimensions sharing a support count gets its own hue."""

from __future__ import annotations

import colorsys
import csv
from dataclasses import dataclass

import numpy as np

from .em import MixtureParams

__all__ = [
    "DimensionOrdering",
    "order_dimensions",
    "order_rows",
    "data_row_order",
    "render_pixel_map",
    "save_ordering_csv",
]

PALETTE_VERSION = 1

# 12 fully saturated hues, 30 degrees apart.
PALETTE = [
    tuple(int(round(255 * c)) for c in colorsys.hsv_to_rgb(h / 12.0, 1.0, 0.9))
    for h in range(12)
]


@dataclass
class DimensionOrdering:
    perm: np.ndarray       # perm[p] = original dimension at position p
    group_of: np.ndarray   # group id per position (contiguous, by support count)
    n: np.ndarray          # support count per position


def order_rows(params_or_labels, alpha=None) -> np.ndarray:
    """Component order by alpha descending, ties by index.

    With a label vector (and the matching alpha), returns the data row
    permutation instead: rows grouped by cluster in that component order,
    original index order within a cluster."""
    arr = np.asarray(params_or_labels)
    if isinstance(params_or_labels, MixtureParams):
        alpha = params_or_labels.alpha
        return np.argsort(-alpha, kind="stable")
    if alpha is None:
        raise ValueError("labels require the matching alpha vector")
    comp_order = np.argsort(-np.asarray(alpha), kind="stable")
    return data_row_order(arr, comp_order)


def data_row_order(labels: np.ndarray, comp_order: np.ndarray) -> np.ndarray:
    rows = []
    for k in comp_order:
        rows.extend(np.nonzero(labels == k)[0].tolist())
    return np.array(rows, dtype=int)


def order_dimensions(params: MixtureParams, epsilon: float = 1e-8) -> DimensionOrdering:
    """Sort dimensions by (support count descending, binary column pattern
    lexicographic with components in alpha-descending order and 1 before 0,
    total absolute weight descending), stably."""
    means = params.means
    d = params.d
    row_order = order_rows(params)
    b = (np.abs(means) > epsilon).astype(int)
    n = b.sum(axis=0)
    weight = np.abs(means).sum(axis=0)
    b_ordered = b[row_order]

    def key(j):
        return (-n[j], tuple(-b_ordered[:, j]), -weight[j], j)

    perm = np.array(sorted(range(d), key=key), dtype=int)
    n_sorted = n[perm]
    group_of = np.zeros(d, dtype=int)
    gid = 0
    for p in range(1, d):
        if n_sorted[p] != n_sorted[p - 1]:
            gid += 1
        group_of[p] = gid
    return DimensionOrdering(perm=perm, group_of=group_of, n=n_sorted)


def render_pixel_map(matrix: np.ndarray, dim_ordering: DimensionOrdering,
                     row_perm: np.ndarray, out_path, mode: str = "means",
                     scale: int = 1) -> None:
    """Write a binary PPM (P6): one pixel per (row, dimension) after applying
    the permutations. Intensity is linear in |value| relative to the matrix
    maximum; zeros render white; hue cycles through the palette by dimension
    group."""
    if mode not in ("means", "data"):
        raise ValueError(f"unknown mode {mode!r}")
    matrix = np.asarray(matrix, dtype=float)
    m = matrix[np.ix_(np.asarray(row_perm), dim_ordering.perm)]
    rows, cols = m.shape
    maxabs = float(np.abs(m).max())
    img = np.full((rows, cols, 3), 255, dtype=np.uint8)
    if maxabs > 0:
        t = np.abs(m) / maxabs
        hues = np.array([PALETTE[g % len(PALETTE)] for g in dim_ordering.group_of],
                        dtype=float)
        # white -> hue interpolation per pixel
        col = 255.0 * (1.0 - t[:, :, None]) + hues[None, :, :] * t[:, :, None]
        img = np.clip(np.rint(col), 0, 255).astype(np.uint8)
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    header = (
        f"P6\n# sparsevmf palette v{PALETTE_VERSION} maxabs={maxabs!r} mode={mode}\n"
        f"{img.shape[1]} {img.shape[0]}\n255\n"
    )
    try:
        with open(out_path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(img.tobytes())
    except OSError as err:
        raise OSError(f"cannot write pixel map to {out_path}: {err}") from err


def save_ordering_csv(ordering: DimensionOrdering, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["original_dim", "position", "group_id", "n_j"])
        for pos, dim in enumerate(ordering.perm):
            writer.writerow([int(dim), pos, int(ordering.group_of[pos]), int(ordering.n[pos])])
