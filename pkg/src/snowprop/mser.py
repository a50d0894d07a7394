"""Maximally stable extremal region detection from first principles.

The detector sweeps thresholds low-to-high and maintains the connected
components of {intensity <= T} with a union-find over pixels, batched
per distinct gray level. Every distinct component pixel set becomes a
node of the component tree (birth level, area, tight bbox, seed pixel,
parent, main child). Stability is judged along branches of that tree:

  v(n) = (area(up_d(n)) - area(down_d(n))) / area(n)

where up_d walks d parent steps (stopping before the whole-image root)
and down_d walks d steps along the main-child chain (the largest child
at each merge, ties to the child holding the smallest row-major pixel).
Walking in tree steps rather than raw intensity offsets makes the
selection depend only on the component structure, so any remap of the
intensities that preserves their order leaves the reported pixel sets
unchanged. A node is reported when v is a local minimum against its
parent and main child, v <= max_variation and the area bounds hold;
nested survivors closer in area than min_diversity are pruned keeping
the more stable (ties keep the smaller). The whole-image root is never
a candidate. Bright-on-dark runs the same sweep on the inverted image
and reports levels back in original intensities (255 - sweep level).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .boxes import Box
from .imaging import require_gray

FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.uint8)

_POLARITIES = ("dark-on-bright", "bright-on-dark", "both")


@dataclass(frozen=True)
class MserParams:
    delta: int = 5
    min_area: int = 10
    max_area_fraction: float = 0.05
    max_variation: float = 0.5
    min_diversity: float = 0.2
    polarity: str = "both"

    def validate(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.min_area <= 0:
            raise ValueError("min_area must be positive")
        if not 0 < self.max_area_fraction <= 1:
            raise ValueError("max_area_fraction must be in (0, 1]")
        if self.max_variation <= 0:
            raise ValueError("max_variation must be positive")
        if not 0 <= self.min_diversity <= 1:
            raise ValueError("min_diversity must be in [0, 1]")
        if self.polarity not in _POLARITIES:
            raise ValueError(f"polarity must be one of {_POLARITIES}")


@dataclass(frozen=True)
class ExtremalRegion:
    """One reported region: a 4-connected pixel set plus bookkeeping.

    Pixels are stored run-length encoded as (row, x_start, x_end) with
    x_end exclusive; coordinates are in the frame of the image the
    detector ran on (scale_level tells which pyramid level that was).
    """

    level: int
    area: int
    variation: float
    bbox: Box
    polarity: str
    runs: tuple[tuple[int, int, int], ...]
    scale_level: int = 0

    def iter_pixels(self):
        for y, x0, x1 in self.runs:
            for x in range(x0, x1):
                yield (x, y)

    def pixel_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.iter_pixels())

    def paint(self, canvas: np.ndarray, weight) -> None:
        """Add weight to the region footprint on a 2D accumulator."""
        for y, x0, x1 in self.runs:
            canvas[y, x0:x1] += weight

    def count_inside(self, mask: np.ndarray) -> int:
        """Number of footprint pixels where mask is nonzero."""
        total = 0
        for y, x0, x1 in self.runs:
            total += int(np.count_nonzero(mask[y, x0:x1]))
        return total

    def to_dict(self) -> dict:
        return {
            "level": int(self.level),
            "area": int(self.area),
            "variation": float(self.variation),
            "polarity": self.polarity,
            "scale_level": int(self.scale_level),
            "bbox": [int(self.bbox.x), int(self.bbox.y), int(self.bbox.w), int(self.bbox.h)],
        }


def region_sort_key(r: ExtremalRegion):
    pol = 0 if r.polarity == "dark" else 1
    return (pol, r.level, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.area)


@dataclass
class _Tree:
    """Component tree arrays; index -1 means 'none' throughout."""

    level: np.ndarray
    area: np.ndarray
    x0: np.ndarray
    y0: np.ndarray
    x1: np.ndarray
    y1: np.ndarray
    seed: np.ndarray
    parent: np.ndarray
    main: np.ndarray
    root: int = field(default=-1)


def _find_many(parent: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Vectorized union-find root lookup with one-shot compression."""
    roots = parent[idx]
    while True:
        nxt = parent[roots]
        if np.array_equal(nxt, roots):
            break
        roots = nxt
    parent[idx] = roots
    return roots


class _Columns:
    """Append-by-block numpy buffer with random access to filled rows."""

    def __init__(self, dtype):
        self.buf = np.empty(1024, dtype=dtype)
        self.size = 0

    def extend(self, values: np.ndarray) -> None:
        need = self.size + values.size
        if need > self.buf.size:
            cap = max(need, 2 * self.buf.size)
            grown = np.empty(cap, dtype=self.buf.dtype)
            grown[: self.size] = self.buf[: self.size]
            self.buf = grown
        self.buf[self.size : need] = values
        self.size = need

    def view(self) -> np.ndarray:
        return self.buf[: self.size]


def _component_tree(img: np.ndarray) -> _Tree:
    """Distinct components of the <=T sweep, as a parent-linked node table.

    Pixels activate in level order; the components merged or grown at
    each level are resolved in one batch (connected components of the
    root-pair graph, then segment reductions), so no per-pixel python
    loop runs.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    h, w = img.shape
    n = h * w
    flat = img.ravel()

    order = np.argsort(flat, kind="stable").astype(np.int64)
    sorted_levels = flat[order]
    bucket_bounds = np.flatnonzero(np.diff(sorted_levels)) + 1
    starts = np.concatenate(([0], bucket_bounds))
    ends = np.concatenate((bucket_bounds, [n]))
    bucket_levels = sorted_levels[starts]

    parent = np.arange(n, dtype=np.int64)  # inactive pixels point to self
    comp_area = np.zeros(n, dtype=np.int64)
    comp_x0 = np.zeros(n, dtype=np.int32)
    comp_y0 = np.zeros(n, dtype=np.int32)
    comp_x1 = np.zeros(n, dtype=np.int32)
    comp_y1 = np.zeros(n, dtype=np.int32)
    comp_minpix = np.zeros(n, dtype=np.int64)
    comp_node = np.full(n, -1, dtype=np.int64)

    cols = {name: _Columns(np.int64) for name in ("level", "area", "x0", "y0", "x1", "y1", "seed", "main")}
    child_links: list[np.ndarray] = []
    parent_links: list[np.ndarray] = []
    node_count = 0
    levels_done = 0

    for start, end, lev in zip(starts, ends, bucket_levels):
        new = order[start:end]
        comp_area[new] = 1
        xs = new % w
        ys = new // w
        comp_x0[new] = xs
        comp_x1[new] = xs
        comp_y0[new] = ys
        comp_y1[new] = ys
        comp_minpix[new] = new

        # Edges from new pixels to active 4-neighbors (same level included).
        edge_a = []
        edge_b = []
        for mask, off in (
            (xs > 0, -1),
            (xs < w - 1, 1),
            (ys > 0, -w),
            (ys < h - 1, w),
        ):
            nb = new[mask] + off
            live = flat[nb] <= lev
            if live.any():
                edge_a.append(new[mask][live])
                edge_b.append(nb[live])

        group_roots = np.empty(0, dtype=np.int64)
        member_roots = np.empty(0, dtype=np.int64)
        member_group = np.empty(0, dtype=np.int64)
        if edge_a:
            ra = _find_many(parent, np.concatenate(edge_a))
            rb = _find_many(parent, np.concatenate(edge_b))
            diff = ra != rb
            if diff.any():
                lo = np.minimum(ra[diff], rb[diff])
                hi = np.maximum(ra[diff], rb[diff])
                keys = np.unique(lo * n + hi)
                u = keys // n
                v = keys % n
                involved = np.unique(np.concatenate([u, v]))
                m = involved.size
                ui = np.searchsorted(involved, u)
                vi = np.searchsorted(involved, v)
                graph = coo_matrix((np.ones(ui.size, np.int8), (ui, vi)), shape=(m, m))
                _, labels = connected_components(graph, directed=False)

                # Group-contiguous member order; first row per group is the
                # member with the largest area (ties to smallest min pixel),
                # which becomes the merged component's root.
                sort = np.lexsort((comp_minpix[involved], -comp_area[involved], labels))
                member_roots = involved[sort]
                member_group = labels[sort]
                firsts = np.flatnonzero(np.concatenate(([True], member_group[1:] != member_group[:-1])))
                group_roots = member_roots[firsts]

                garea = np.add.reduceat(comp_area[member_roots], firsts)
                gx0 = np.minimum.reduceat(comp_x0[member_roots], firsts)
                gy0 = np.minimum.reduceat(comp_y0[member_roots], firsts)
                gx1 = np.maximum.reduceat(comp_x1[member_roots], firsts)
                gy1 = np.maximum.reduceat(comp_y1[member_roots], firsts)
                gminpix = np.minimum.reduceat(comp_minpix[member_roots], firsts)

                parent[member_roots] = group_roots[member_group]
                comp_area[group_roots] = garea
                comp_x0[group_roots] = gx0
                comp_y0[group_roots] = gy0
                comp_x1[group_roots] = gx1
                comp_y1[group_roots] = gy1
                comp_minpix[group_roots] = gminpix

        # Every component that changed this level holds >= 1 new pixel.
        touched = np.unique(_find_many(parent, new))
        ids = node_count + np.arange(touched.size, dtype=np.int64)
        node_count += touched.size
        cols["level"].extend(np.full(touched.size, lev, np.int64))
        cols["area"].extend(comp_area[touched])
        cols["x0"].extend(comp_x0[touched].astype(np.int64))
        cols["y0"].extend(comp_y0[touched].astype(np.int64))
        cols["x1"].extend(comp_x1[touched].astype(np.int64))
        cols["y1"].extend(comp_y1[touched].astype(np.int64))
        cols["seed"].extend(comp_minpix[touched])

        # Child nodes: the pre-level nodes of all merged members, plus the
        # previous node of components that only grew.
        if group_roots.size:
            owner = ids[np.searchsorted(touched, group_roots[member_group])]
            keep = comp_node[member_roots] >= 0
            cand_child = comp_node[member_roots][keep]
            cand_owner = owner[keep]
            solo = ~np.isin(touched, group_roots, assume_unique=True)
        else:
            cand_child = np.empty(0, dtype=np.int64)
            cand_owner = np.empty(0, dtype=np.int64)
            solo = np.ones(touched.size, dtype=bool)
        grow_prev = comp_node[touched[solo]]
        grew = grow_prev >= 0
        cand_child = np.concatenate([cand_child, grow_prev[grew]])
        cand_owner = np.concatenate([cand_owner, ids[solo][grew]])

        main = np.full(touched.size, -1, dtype=np.int64)
        if cand_child.size:
            area_buf = cols["area"].view()
            seed_buf = cols["seed"].view()
            csort = np.lexsort((seed_buf[cand_child], -area_buf[cand_child], cand_owner))
            owners_sorted = cand_owner[csort]
            cfirst = np.concatenate(([True], owners_sorted[1:] != owners_sorted[:-1]))
            main[owners_sorted[cfirst] - ids[0]] = cand_child[csort][cfirst]
            child_links.append(cand_child)
            parent_links.append(cand_owner)
        cols["main"].extend(main)
        comp_node[touched] = ids

        levels_done += 1
        if levels_done % 4 == 0:
            parent = parent[parent]  # keep chains short for the vectorized finds

    node_parent = np.full(node_count, -1, dtype=np.int64)
    if child_links:
        node_parent[np.concatenate(child_links)] = np.concatenate(parent_links)

    tree = _Tree(
        level=cols["level"].view().copy(),
        area=cols["area"].view().copy(),
        x0=cols["x0"].view().copy(),
        y0=cols["y0"].view().copy(),
        x1=cols["x1"].view().copy(),
        y1=cols["y1"].view().copy(),
        seed=cols["seed"].view().copy(),
        parent=node_parent,
        main=cols["main"].view().copy(),
    )
    roots = np.flatnonzero(tree.parent < 0)
    assert roots.size == 1, "threshold sweep must end in a single component"
    tree.root = int(roots[0])
    return tree


def _variations(tree: _Tree, delta: int) -> np.ndarray:
    nn = tree.level.size
    idx = np.arange(nn, dtype=np.int64)

    up = idx.copy()
    for _ in range(delta):
        p = tree.parent[up]
        step = (p >= 0) & (p != tree.root)
        up = np.where(step, p, up)

    down = idx.copy()
    for _ in range(delta):
        c = tree.main[down]
        down = np.where(c >= 0, c, down)

    return (tree.area[up] - tree.area[down]) / tree.area.astype(np.float64)


def _select_stable(tree: _Tree, params: MserParams, image_area: int):
    """Indices of reported nodes plus their variations."""
    v = _variations(tree, params.delta)
    nn = v.size

    v_parent = np.full(nn, np.inf)
    has_p = (tree.parent >= 0) & (tree.parent != tree.root)
    v_parent[has_p] = v[tree.parent[has_p]]
    v_child = np.full(nn, np.inf)
    has_c = tree.main >= 0
    v_child[has_c] = v[tree.main[has_c]]

    max_area = params.max_area_fraction * image_area
    cand = (
        (v <= v_parent)
        & (v <= v_child)
        & (v <= params.max_variation)
        & (tree.area >= params.min_area)
        & (tree.area <= max_area)
    )
    cand[tree.root] = False

    alive = cand.copy()
    order = sorted(np.flatnonzero(cand).tolist(), key=lambda i: (tree.area[i], tree.seed[i]))
    for i in order:
        if not alive[i]:
            continue
        a = int(tree.parent[i])
        while a >= 0 and not (cand[a] and alive[a]):
            a = int(tree.parent[a])
        if a < 0:
            continue
        diversity = (tree.area[a] - tree.area[i]) / float(tree.area[a])
        if diversity < params.min_diversity:
            if v[i] <= v[a]:
                alive[a] = False
            else:
                alive[i] = False
    return np.flatnonzero(alive), v


def _runs_from_mask(mask: np.ndarray, oy: int, ox: int) -> tuple[tuple[int, int, int], ...]:
    runs = []
    for row in range(mask.shape[0]):
        line = mask[row]
        padded = np.empty(line.size + 2, dtype=bool)
        padded[0] = padded[-1] = False
        padded[1:-1] = line
        edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
        for s, e in zip(edges[0::2], edges[1::2]):
            runs.append((oy + row, ox + int(s), ox + int(e)))
    return tuple(runs)


def _recover_region(sweep_img: np.ndarray, tree: _Tree, node: int):
    """Materialize a node's pixel set as RLE runs, via its bbox crop."""
    x0, y0 = int(tree.x0[node]), int(tree.y0[node])
    x1, y1 = int(tree.x1[node]), int(tree.y1[node])
    crop = sweep_img[y0 : y1 + 1, x0 : x1 + 1] <= tree.level[node]
    labels, _ = ndimage.label(crop, structure=FOUR_CONN)
    sy, sx = divmod(int(tree.seed[node]), sweep_img.shape[1])
    mask = labels == labels[sy - y0, sx - x0]
    runs = _runs_from_mask(mask, y0, x0)
    assert sum(e - s for _, s, e in runs) == int(tree.area[node])
    return runs


def _sweep(sweep_img: np.ndarray, params: MserParams, polarity_tag: str, scale_level: int):
    tree = _component_tree(sweep_img)
    picked, v = _select_stable(tree, params, sweep_img.size)
    out = []
    for node in picked.tolist():
        birth = int(tree.level[node])
        level = birth if polarity_tag == "dark" else 255 - birth
        bbox = Box(
            int(tree.x0[node]),
            int(tree.y0[node]),
            int(tree.x1[node] - tree.x0[node] + 1),
            int(tree.y1[node] - tree.y0[node] + 1),
        )
        out.append(
            ExtremalRegion(
                level=level,
                area=int(tree.area[node]),
                variation=float(v[node]),
                bbox=bbox,
                polarity=polarity_tag,
                runs=_recover_region(sweep_img, tree, node),
                scale_level=scale_level,
            )
        )
    out.sort(key=region_sort_key)
    return out


def detect_mser(img: np.ndarray, params: MserParams | None = None, scale_level: int = 0) -> list[ExtremalRegion]:
    """All maximally stable extremal regions of one grayscale image.

    dark-on-bright sweeps the image itself, bright-on-dark sweeps the
    inverted image; 'both' concatenates the two (dark block first),
    each block ordered by (level, x, y, w, h).
    """
    img = require_gray(img)
    params = params or MserParams()
    params.validate()
    regions: list[ExtremalRegion] = []
    if params.polarity in ("dark-on-bright", "both"):
        regions.extend(_sweep(img, params, "dark", scale_level))
    if params.polarity in ("bright-on-dark", "both"):
        regions.extend(_sweep((255 - img.astype(np.int16)).astype(np.uint8), params, "bright", scale_level))
    return regions


def dump_regions(regions: list[ExtremalRegion], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump([r.to_dict() for r in regions], f, indent=2, sort_keys=True)
        f.write("\n")
