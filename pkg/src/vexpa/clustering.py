"""Density-based cluster detection over the pooled decimation eigenvalues.

Eigenvalues that stay put across decimations form dense clusters, eigenvalues
that only model noise scatter.  Every s-side point (an estimate of
``lambda**s``) is tied through ``(k, i)`` to the u-side point it was derived
from, which lets s-side clusters be searched inside each u-side cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .decimation import Strategy, candidate_sets, euclid_recover

# distances below this are treated as rounding noise, not cluster structure
RESOLUTION_FLOOR = 1e-8


class Side(str, Enum):
    U = "u-side"
    S = "s-side"


class Scenario(str, Enum):
    STANDARD = "standard"
    OUTLIER = "outlier"
    COLLISION = "collision"


@dataclass(frozen=True)
class EigenPoint:
    value: complex
    k: int
    i: int
    side: Side
    amplitude: complex = 0j


@dataclass
class PointSet:
    """The pooled u-side and s-side eigenvalues with their ``(k, i)`` links."""

    u_points: list[EigenPoint]
    s_points: list[EigenPoint]
    dangling: list[EigenPoint] = field(default_factory=list)

    def __post_init__(self):
        keys = {}
        for idx, p in enumerate(self.u_points):
            if (p.k, p.i) in keys:
                raise ValueError(f"duplicate u-side key {(p.k, p.i)}")
            keys[(p.k, p.i)] = idx
        self._u_index = keys
        linked = []
        for p in self.s_points:
            (linked if (p.k, p.i) in keys else self.dangling).append(p)
        self.s_points = linked

    def u_index_of(self, p: EigenPoint) -> int:
        return self._u_index[(p.k, p.i)]


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    centroid: complex
    radius: float

    @property
    def cardinality(self) -> int:
        return len(self.members)

    @classmethod
    def from_members(cls, members: Sequence[int], values: np.ndarray) -> "Cluster":
        members = tuple(sorted(members))
        pts = values[list(members)]
        c = complex(np.mean(pts))
        return cls(members, c, float(np.max(np.abs(pts - c))))


def neighbourhoods(points: np.ndarray, delta: float) -> list[np.ndarray]:
    pts = np.asarray(points, dtype=complex)
    D = np.abs(pts[:, None] - pts[None, :])
    return [np.flatnonzero(row <= delta) for row in D]


def dbscan(points, delta: float, m_delta: int) -> tuple[list[Cluster], list[int]]:
    """DBSCAN in the complex plane.

    A point is core when at least ``m_delta`` points (itself included) lie
    within ``delta``.  Clusters are grown in input order; a border point
    reachable from several clusters joins the first one.  Returns the
    clusters and the indices of noise points.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if m_delta < 1:
        raise ValueError(f"m_delta must be >= 1, got {m_delta}")
    pts = np.asarray(points, dtype=complex)
    n = len(pts)
    if n == 0:
        return [], []
    nbrs = neighbourhoods(pts, delta)
    core = np.array([len(nb) >= m_delta for nb in nbrs])
    labels = np.full(n, -1)
    cluster_members: list[list[int]] = []
    for p in range(n):
        if labels[p] != -1 or not core[p]:
            continue
        cid = len(cluster_members)
        members = []
        labels[p] = cid
        queue = [p]
        while queue:
            q = queue.pop(0)
            members.append(q)
            if not core[q]:
                continue
            for r in nbrs[q]:
                if labels[r] == -1:
                    labels[r] = cid
                    queue.append(r)
        cluster_members.append(members)
    clusters = [Cluster.from_members(m, pts) for m in cluster_members]
    noise = [int(p) for p in np.flatnonzero(labels == -1)]
    return clusters, noise


def one_per_decimation(cluster: Cluster, values: np.ndarray, decimations: Sequence[int],
                       m_delta: int) -> tuple[Cluster | None, list[int]]:
    """Keep at most one member per decimation, the one nearest the cluster median.

    Returns the thinned cluster (``None`` if it drops below ``m_delta``) and
    the indices that were removed.
    """
    members = list(cluster.members)
    pts = values[members]
    centre = complex(np.median(pts.real), np.median(pts.imag))
    best: dict[int, int] = {}
    for idx in members:
        k = decimations[idx]
        if k not in best or abs(values[idx] - centre) < abs(values[best[k]] - centre):
            best[k] = idx
    kept = sorted(best.values())
    dropped = sorted(set(members) - set(kept))
    if len(kept) < m_delta:
        return None, members
    if not dropped:
        return cluster, []
    return Cluster.from_members(kept, values), dropped


def trim_cluster(cluster: Cluster, values: np.ndarray, m_delta: int,
                 factor: float) -> tuple[Cluster | None, list[int]]:
    """Release members lying farther than ``factor`` times the median member
    distance from the cluster median.

    For isotropic Gaussian scatter a good member is released with probability
    ``2**(-factor**2)``.  Returns the trimmed cluster (``None`` below
    ``m_delta``) and the released indices.
    """
    members = np.array(cluster.members)
    pts = values[members]
    centre = complex(np.median(pts.real), np.median(pts.imag))
    dist = np.abs(pts - centre)
    keep = dist <= max(factor * float(np.median(dist)), RESOLUTION_FLOOR)
    dropped = members[~keep].tolist()
    if keep.sum() < m_delta:
        return None, members.tolist()
    if not dropped:
        return cluster, []
    return Cluster.from_members(members[keep].tolist(), values), dropped


def cluster_points(points: Sequence[EigenPoint], delta: float, m_delta: int,
                   trim: float | None = None):
    """DBSCAN followed by the one-point-per-decimation rule and, with ``trim``
    set, robust trimming of far-off members."""
    values = np.array([p.value for p in points], dtype=complex)
    ks = [p.k for p in points]
    raw, noise = dbscan(values, delta, m_delta)
    clusters = []
    noise = list(noise)
    for c in raw:
        thinned, dropped = one_per_decimation(c, values, ks, m_delta)
        noise.extend(dropped)
        if thinned is not None and trim is not None:
            thinned, dropped = trim_cluster(thinned, values, m_delta, trim)
            noise.extend(dropped)
        if thinned is not None:
            clusters.append(thinned)
    return clusters, sorted(noise)


def nearest_neighbour_distances(values: np.ndarray, k: int = 1) -> np.ndarray:
    """Distance from every point to its ``k``-th nearest other point."""
    values = np.asarray(values, dtype=complex)
    if len(values) <= k:
        return np.full(len(values), np.inf)
    D = np.abs(values[:, None] - values[None, :])
    np.fill_diagonal(D, np.inf)
    return np.sort(D, axis=1)[:, k - 1]


def default_delta(values, u: int, factor: float = 3.0) -> float:
    """Data-driven neighbourhood radius: ``factor`` times the median nearest-neighbour
    distance, capped at ``pi / (4u)`` and kept above ``RESOLUTION_FLOOR``."""
    cap = np.pi / (4 * u)
    nn = nearest_neighbour_distances(np.asarray(values))
    nn = nn[np.isfinite(nn)]
    if len(nn) == 0:
        return cap
    d = factor * float(np.median(nn))
    return float(min(max(d, RESOLUTION_FLOOR), cap))


@dataclass
class LinkedCluster:
    u_cluster: Cluster
    s_points: list[EigenPoint]
    s_clusters: list[Cluster]
    s_noise: list[int]


def link_clusters(u_clusters: Sequence[Cluster], point_set: PointSet, delta_s: float,
                  m_delta_s: int, trim: float | None = None) -> list[LinkedCluster]:
    """Cluster, per u-side cluster, the s-side points linked to its members."""
    if point_set.dangling:
        raise ValueError(f"{len(point_set.dangling)} s-side points have no u-side partner")
    by_u: dict[int, list[EigenPoint]] = {}
    for p in point_set.s_points:
        by_u.setdefault(point_set.u_index_of(p), []).append(p)
    linked = []
    for c in u_clusters:
        s_pts = [p for m in c.members for p in by_u.get(m, [])]
        s_clusters, s_noise = cluster_points(s_pts, delta_s, m_delta_s, trim) if s_pts else ([], [])
        linked.append(LinkedCluster(c, s_pts, s_clusters, s_noise))
    return linked


@dataclass
class ClusterReport:
    """Pooled points with their cluster labels, ``-1`` marking noise.

    ``s_labels`` pairs the u-side cluster a point was gathered under with the
    s-side cluster it joined there.
    """

    u_points: list[EigenPoint]
    s_points: list[EigenPoint]
    u_labels: list[int]
    s_labels: list[tuple[int, int]]
    u_clusters: list[Cluster]
    s_clusters: list[list[Cluster]]

    @classmethod
    def build(cls, point_set: PointSet, linked: Sequence[LinkedCluster]) -> "ClusterReport":
        u_labels = [-1] * len(point_set.u_points)
        for c, lc in enumerate(linked):
            for m in lc.u_cluster.members:
                u_labels[m] = c
        s_index = {id(p): n for n, p in enumerate(point_set.s_points)}
        s_labels = [(-1, -1)] * len(point_set.s_points)
        for c, lc in enumerate(linked):
            for m, p in enumerate(lc.s_points):
                s_labels[s_index[id(p)]] = (c, -1)
            for j, sc in enumerate(lc.s_clusters):
                for m in sc.members:
                    s_labels[s_index[id(lc.s_points[m])]] = (c, j)
        return cls(list(point_set.u_points), list(point_set.s_points), u_labels, s_labels,
                   [lc.u_cluster for lc in linked], [list(lc.s_clusters) for lc in linked])

    def rows(self):
        """``(side, k, i, re, im, u_cluster, s_cluster)`` for every point."""
        for p, c in zip(self.u_points, self.u_labels):
            yield (p.side.value, p.k, p.i, p.value.real, p.value.imag, c, -1)
        for p, (c, j) in zip(self.s_points, self.s_labels):
            yield (p.side.value, p.k, p.i, p.value.real, p.value.imag, c, j)

    def to_dict(self) -> dict:
        return {
            "u_clusters": [{"cardinality": c.cardinality, "radius": c.radius,
                            "centroid": [c.centroid.real, c.centroid.imag]} for c in self.u_clusters],
            "s_clusters": [[{"cardinality": c.cardinality, "radius": c.radius,
                             "centroid": [c.centroid.real, c.centroid.imag]} for c in group]
                           for group in self.s_clusters],
            "u_noise": self.u_labels.count(-1),
            "n_u_points": len(self.u_points),
            "n_s_points": len(self.s_points),
        }


@dataclass
class ValidationRecord:
    lambda_: complex
    u_count: int
    s_count: int
    u_radius: float
    s_radius: float
    scenario: Scenario
    decimations: frozenset[int]
    s_decimations: frozenset[int]
    u_centroid: complex
    s_centroid: complex
    ambiguous: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda": [self.lambda_.real, self.lambda_.imag],
            "u_cluster_count": self.u_count,
            "s_cluster_count": self.s_count,
            "u_radius": self.u_radius,
            "s_radius": self.s_radius,
            "scenario": self.scenario.value,
            "decimations": sorted(self.decimations),
            "s_decimations": sorted(self.s_decimations),
            "u_centroid": [self.u_centroid.real, self.u_centroid.imag],
            "s_centroid": [self.s_centroid.real, self.s_centroid.imag],
            "ambiguous": self.ambiguous,
        }


def classify_and_validate(linked: Sequence[LinkedCluster], u_points: Sequence[EigenPoint],
                          u: int, s: int, strategy: Strategy | str = Strategy.STABILIZED
                          ) -> tuple[list[ValidationRecord], list[LinkedCluster]]:
    """Turn linked clusters into validated eigenvalues.

    One record per s-side cluster.  Returns the records and the u-side
    clusters that had no s-side cluster (unvalidated).
    """
    strategy = Strategy(strategy)
    records, unvalidated = [], []
    for lc in linked:
        if not lc.s_clusters:
            unvalidated.append(lc)
            continue
        uc = lc.u_cluster
        u_ks = frozenset(u_points[m].k for m in uc.members)
        if len(lc.s_clusters) > 1:
            scenario = Scenario.COLLISION
        elif lc.s_clusters[0].cardinality == uc.cardinality:
            scenario = Scenario.STANDARD
        else:
            scenario = Scenario.OUTLIER
        for sc in lc.s_clusters:
            if strategy is Strategy.EUCLID:
                lam, ambiguous = euclid_recover(uc.centroid, sc.centroid, u, s), False
            else:
                cand = candidate_sets(uc.centroid, sc.centroid, u, s)
                lam, ambiguous = cand.matched, cand.ambiguous
            records.append(ValidationRecord(
                lambda_=complex(lam),
                u_count=uc.cardinality,
                s_count=sc.cardinality,
                u_radius=uc.radius,
                s_radius=sc.radius,
                scenario=scenario,
                decimations=u_ks,
                s_decimations=frozenset(lc.s_points[m].k for m in sc.members),
                u_centroid=uc.centroid,
                s_centroid=sc.centroid,
                ambiguous=ambiguous,
            ))
    return records, unvalidated
