"""Location handling: unit-square scaling, max-min ordering, and
nearest-previously-ordered-neighbor conditioning sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import _fastpath as _fp
from .errors import DegenerateDomainError, DuplicateLocationError

__all__ = [
    "LocationSet",
    "OrderedNeighborGraph",
    "scale_to_unit_square",
    "maxmin_order",
    "build_conditioning_sets",
    "build_graph",
]

# exhaustive predecessor scans below this size; kd-tree above
_BRUTE_KNN_MAX = 2000


@dataclass(frozen=True)
class LocationSet:
    """Distinct 2-D locations scaled into the unit square.

    ``original_bounds`` records the affine map (x0, y0, scale) with
    scaled = (raw - (x0, y0)) / scale, so that real coordinates can be
    round-tripped. Both axes share one scale factor (the larger axis range)
    to preserve isotropy.
    """

    coords: np.ndarray
    original_bounds: tuple[float, float, float]

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def to_raw(self, scaled: np.ndarray) -> np.ndarray:
        x0, y0, s = self.original_bounds
        return np.asarray(scaled, dtype=float) * s + np.array([x0, y0])

    def scale_like(self, raw: np.ndarray) -> np.ndarray:
        """Apply this set's affine map to other raw coordinates (e.g. a
        prediction grid); results may fall outside [0, 1]^2."""
        x0, y0, s = self.original_bounds
        return (np.asarray(raw, dtype=float) - np.array([x0, y0])) / s


def scale_to_unit_square(raw_coords) -> LocationSet:
    """Scale raw coordinates into [0, 1]^2 with a common factor on both axes.

    Each axis is offset by its minimum; both are divided by the larger axis
    range, so all scaled distances equal raw distances divided by one scalar.
    """
    raw = np.asarray(raw_coords, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 2:
        raise ValueError(f"expected (n, 2) coordinates, got shape {raw.shape}")
    n = raw.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 locations, got {n}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("coordinates must be finite")
    mins = raw.min(axis=0)
    ranges = raw.max(axis=0) - mins
    scale = float(ranges.max())
    if scale == 0.0:
        raise DegenerateDomainError("all locations identical on both axes")
    if np.unique(raw, axis=0).shape[0] != n:
        raise DuplicateLocationError("duplicate locations are not allowed")
    scaled = (raw - mins) / scale
    return LocationSet(scaled, (float(mins[0]), float(mins[1]), scale))


def maxmin_order(locs: LocationSet) -> np.ndarray:
    """Exact max-min distance ordering of the locations.

    The first site is the one nearest the centroid; each following site
    maximizes its minimum distance to all already-selected sites. Distance
    ties break to the lowest original index, so the result is deterministic.
    """
    coords = np.ascontiguousarray(locs.coords)
    centroid = coords.mean(axis=0)
    d2 = np.sum((coords - centroid) ** 2, axis=1)
    start = int(np.argmin(d2))  # argmin takes the first (lowest index) on ties
    return _fp.maxmin_order_core(coords, start)


@dataclass(frozen=True)
class OrderedNeighborGraph:
    """Max-min order plus per-site conditioning sets.

    ``neighbors[i]`` lists ordering *positions* (-1 padded) of the
    min(m, i) nearest earlier-ordered sites, sorted by nondecreasing
    distance to site i; ``order[p]`` maps a position back to the original
    location index. Immutable after construction and safe to share.
    """

    order: np.ndarray
    neighbors: np.ndarray
    lengths: np.ndarray
    m: int
    coords_ordered: np.ndarray

    @property
    def n(self) -> int:
        return self.order.shape[0]

    def neighbor_positions(self, i: int) -> np.ndarray:
        return self.neighbors[i, : self.lengths[i]]

    def neighbors_original(self, i: int) -> np.ndarray:
        """Conditioning set of ordered index i as original location indices."""
        return self.order[self.neighbor_positions(i)]

    @cached_property
    def neighbor_offsets(self) -> np.ndarray:
        """(n, m, 2) raw offsets neighbor - site in unit-square units."""
        n, m = self.neighbors.shape
        out = np.zeros((n, m, 2))
        idx = np.where(self.neighbors >= 0, self.neighbors, 0)
        out[:] = self.coords_ordered[idx] - self.coords_ordered[:, None, :]
        out[self.neighbors < 0] = 0.0
        return out

    @cached_property
    def neighbor_dists(self) -> np.ndarray:
        """(n, m) distances to conditioning-set members (0 in padding)."""
        return np.sqrt(np.sum(self.neighbor_offsets**2, axis=2))

    @cached_property
    def _log_dist_stacks(self) -> tuple[np.ndarray, np.ndarray]:
        """Log site-neighbor and neighbor-pair distances for the table path."""
        n, m = self.neighbors.shape
        logd_site = np.zeros((n, m))
        logd_pair = np.zeros((n, m, m))
        idx = np.where(self.neighbors >= 0, self.neighbors, 0)
        pts = self.coords_ordered[idx]  # (n, m, 2)
        ds = self.neighbor_dists
        with np.errstate(divide="ignore"):
            logd_site[:] = np.where(ds > 0, np.log(np.maximum(ds, 1e-300)), 0.0)
            dp = np.sqrt(
                np.sum((pts[:, :, None, :] - pts[:, None, :, :]) ** 2, axis=3)
            )
            logd_pair[:] = np.where(dp > 0, np.log(np.maximum(dp, 1e-300)), 0.0)
        return logd_site, logd_pair

    def data_in_order(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float)[self.order]


def _knn_tree(coords: np.ndarray, tiebreak: np.ndarray, m: int):
    """kd-tree predecessor search with exact (distance, tiebreak) resolution."""
    n = coords.shape[0]
    nbr = np.full((n, m), -1, dtype=np.int64)
    nlen = np.minimum(np.arange(n), m).astype(np.int64)
    tree = cKDTree(coords)
    pending = np.arange(1, n)
    k_query = min(n, 2 * m + 2)
    while pending.size:
        dd, ii = tree.query(coords[pending], k=k_query)
        if k_query == 1:
            ii = ii[:, None]
        retry = []
        for row, i in enumerate(pending):
            need = min(m, i)
            cand = ii[row]
            pre = cand[(cand < i)]
            if pre.size < need and k_query < n:
                retry.append(i)
                continue
            d2 = np.sum((coords[pre] - coords[i]) ** 2, axis=1)
            sel = np.lexsort((tiebreak[pre], d2))
            if pre.size > need:
                ds = d2[sel]
                if ds[need - 1] == ds[need] and k_query < n:
                    retry.append(i)  # tie across the cut; widen the window
                    continue
            elif pre.size == need and pre.size < i and k_query < n:
                # all retrieved predecessors selected: an unretrieved one could
                # tie the last; widen unless the window already covers radius
                if d2[sel[-1]] >= dd[row][-1] ** 2:
                    retry.append(i)
                    continue
            nbr[i, :need] = pre[sel[:need]]
        if not retry:
            break
        pending = np.asarray(retry, dtype=np.int64)
        k_query = min(n, 2 * k_query)
    return nbr, nlen


def build_conditioning_sets(
    locs: LocationSet, order: np.ndarray, m: int
) -> OrderedNeighborGraph:
    """Conditioning sets of the min(m, i-1) nearest earlier-ordered sites.

    Members are sorted by nondecreasing distance (ties to the lowest
    original index). Uses an exhaustive scan for small n and a kd-tree with
    exact tie resolution above _BRUTE_KNN_MAX sites.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    order = np.asarray(order, dtype=np.int64)
    n = locs.n
    if order.shape != (n,) or np.unique(order).shape[0] != n:
        raise ValueError("order must be a permutation of the location indices")
    coords_ord = np.ascontiguousarray(locs.coords[order])
    tiebreak = order.astype(np.float64)  # lowest original index wins ties
    if n <= _BRUTE_KNN_MAX:
        nbr = np.empty((n, m), dtype=np.int64)
        nlen = np.empty(n, dtype=np.int64)
        _fp.knn_predecessors_brute(coords_ord, tiebreak, m, nbr, nlen)
    else:
        nbr, nlen = _knn_tree(coords_ord, tiebreak, m)
    return OrderedNeighborGraph(
        order=order, neighbors=nbr, lengths=nlen, m=m, coords_ordered=coords_ord
    )


def build_graph(locs: LocationSet, m: int) -> OrderedNeighborGraph:
    """maxmin_order + build_conditioning_sets in one call."""
    return build_conditioning_sets(locs, maxmin_order(locs), m)
