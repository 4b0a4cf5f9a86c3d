"""3D connected-component labeling via union-find.

Foreground voxels are joined across 6-, 18-, or 26-neighborhoods using a
disjoint-set forest with path halving and union by size. Components are
numbered 1..C in scan order of their first voxel, so labeling is fully
deterministic.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, ShapeError

_OFFSETS_26 = [
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) > (0, 0, 0)
]


def _forward_offsets(connectivity: int):
    if connectivity not in (6, 18, 26):
        raise ConfigurationError(
            f"connectivity must be 6, 18, or 26, got {connectivity}"
        )
    limit = {6: 1, 18: 2, 26: 3}[connectivity]
    return [o for o in _OFFSETS_26 if sum(abs(v) for v in o) <= limit]


def _window(shape, offset, side: str):
    # paired views shifted by `offset`: index i in the "low" view is adjacent
    # to index i in the "high" view
    out = []
    for d, o in zip(shape, offset):
        if o == 0:
            out.append(slice(0, d))
        elif side == "low":
            out.append(slice(0, d - o) if o > 0 else slice(-o, d))
        else:
            out.append(slice(o, d) if o > 0 else slice(0, d + o))
    return tuple(out)


def label_components(binary: np.ndarray, connectivity: int = 26) -> np.ndarray:
    """Label connected foreground components, 0 for background.

    Returns an int32 array of the input shape with components numbered by
    first appearance in C scan order.
    """
    binary = np.asarray(binary)
    if binary.ndim != 3:
        raise ShapeError(f"labeling expects a 3D array, got shape {binary.shape}")
    offsets = _forward_offsets(connectivity)
    fg = binary != 0
    n = int(fg.sum())
    labels = np.zeros(binary.shape, dtype=np.int32)
    if n == 0:
        return labels

    ids = np.full(binary.shape, -1, dtype=np.int64)
    ids[fg] = np.arange(n)

    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for offset in offsets:
        lo = _window(binary.shape, offset, "low")
        hi = _window(binary.shape, offset, "high")
        both = fg[lo] & fg[hi]
        if not both.any():
            continue
        for a, b in zip(ids[lo][both], ids[hi][both]):
            ra, rb = find(a), find(b)
            if ra == rb:
                continue
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]

    roots = np.array([find(i) for i in range(n)], dtype=np.int64)
    # component numbers follow the scan order of each root's first voxel
    order = np.zeros(n, dtype=np.int32)
    next_label = 0
    root_label: dict[int, int] = {}
    for i in range(n):
        r = int(roots[i])
        if r not in root_label:
            next_label += 1
            root_label[r] = next_label
        order[i] = root_label[r]
    labels[fg] = order
    return labels


def component_sizes(labels: np.ndarray) -> np.ndarray:
    """Voxel count per component; index c holds the size of component c.

    Index 0 counts background and is kept for direct indexing.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        return np.zeros(1, dtype=np.int64)
    return np.bincount(labels.ravel()).astype(np.int64)


def keep_largest(binary: np.ndarray, k: int = 2, connectivity: int = 26) -> np.ndarray:
    """Keep the k largest components of a binary mask, dropping the rest.

    Size ties resolve to the lower component number, which corresponds to
    earlier scan order. Fewer than k components pass through unchanged.
    """
    if k < 1:
        raise ConfigurationError(f"k must be at least 1, got {k}")
    labels = label_components(binary, connectivity=connectivity)
    sizes = component_sizes(labels)
    n_comp = len(sizes) - 1
    if n_comp <= k:
        return (labels > 0).astype(np.uint8)
    comp_ids = np.arange(1, n_comp + 1)
    # stable sort on descending size keeps lower ids first among ties
    keep = comp_ids[np.argsort(-sizes[1:], kind="stable")][:k]
    return np.isin(labels, keep).astype(np.uint8)
