"""Branching river networks: topology, distances, weights, covariates.

A network is a forest of stream segments oriented toward outlets. Each
segment knows its single downstream neighbour (or none, for an outlet),
its length in meters and its Shreve order. Sites live on segments at an
``upstream_offset`` measured from the segment's downstream end.

Two sites are *flow-connected* when one lies on the downstream flow path
of the other; flow-unconnected pairs share only a junction further
downstream. Distances are measured along the stream ("hydrologic"
distance), never across land.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .exceptions import NetworkError
from .utils import knn_mean


@dataclass(frozen=True)
class Segment:
    segment_id: int
    downstream_id: int | None
    length: float
    shreve_order: int

    def __post_init__(self):
        if self.length <= 0:
            raise NetworkError(f"segment {self.segment_id}: length must be positive")
        if self.shreve_order < 1:
            raise NetworkError(f"segment {self.segment_id}: Shreve order must be >= 1")


@dataclass(frozen=True)
class Site:
    site_id: int
    segment_id: int
    upstream_offset: float
    easting: float
    northing: float
    covariates: Mapping[str, float] = field(default_factory=dict)


class StreamNetwork:
    """Immutable river network; all query methods are pure.

    Construction validates the topology (forest, no cycles), Shreve
    consistency (each order is the sum of its immediate upstream orders,
    leaves have order 1) and site placement (0 <= offset <= segment
    length). Sites sitting exactly at a junction are re-assigned to the
    downstream segment with offset equal to that segment's length, so
    every physical point has one canonical representation.
    """

    def __init__(self, segments: Iterable[Segment], sites: Iterable[Site]):
        self._segments: dict[int, Segment] = {}
        for seg in segments:
            if seg.segment_id in self._segments:
                raise NetworkError(f"duplicate segment id {seg.segment_id}")
            self._segments[seg.segment_id] = seg
        self._children: dict[int, list[int]] = {sid: [] for sid in self._segments}
        for seg in self._segments.values():
            if seg.downstream_id is not None:
                if seg.downstream_id not in self._segments:
                    raise NetworkError(
                        f"segment {seg.segment_id} drains to unknown segment {seg.downstream_id}"
                    )
                self._children[seg.downstream_id].append(seg.segment_id)
        self._validate_forest()
        self._validate_shreve()

        # distance from a segment's downstream end to its outlet
        self._downstream_length: dict[int, float] = {}
        self._root: dict[int, int] = {}
        self._depth: dict[int, int] = {}
        for sid in self._segments:
            self._trace_downstream(sid)

        self._sites: dict[int, Site] = {}
        for site in sites:
            if site.site_id in self._sites:
                raise NetworkError(f"duplicate site id {site.site_id}")
            self._sites[site.site_id] = self._canonical(site)

        self._matrix_cache: dict[tuple[int, ...], dict[str, np.ndarray]] = {}

    # -- construction helpers -------------------------------------------------

    def _validate_forest(self):
        for start in self._segments:
            seen = set()
            sid = start
            while sid is not None:
                if sid in seen:
                    raise NetworkError(f"cycle detected through segment {start}")
                seen.add(sid)
                sid = self._segments[sid].downstream_id

    def _validate_shreve(self):
        for sid, seg in self._segments.items():
            kids = self._children[sid]
            expected = 1 if not kids else sum(self._segments[k].shreve_order for k in kids)
            if seg.shreve_order != expected:
                raise NetworkError(
                    f"segment {sid}: Shreve order {seg.shreve_order} != {expected} "
                    "(sum of upstream orders, leaves are 1)"
                )

    def _trace_downstream(self, sid: int):
        if sid in self._downstream_length:
            return
        chain = []
        cur = sid
        while cur is not None and cur not in self._downstream_length:
            chain.append(cur)
            cur = self._segments[cur].downstream_id
        if cur is None:
            base_len, base_depth, root = 0.0, 0, chain[-1]
        else:
            base_len = self._downstream_length[cur] + self._segments[cur].length
            base_depth = self._depth[cur] + 1
            root = self._root[cur]
        for i, s in enumerate(reversed(chain)):
            self._downstream_length[s] = base_len
            self._depth[s] = base_depth + i
            self._root[s] = root
            base_len += self._segments[s].length

    def _canonical(self, site: Site) -> Site:
        seg = self._segment(site.segment_id)
        if not 0.0 <= site.upstream_offset <= seg.length:
            raise NetworkError(
                f"site {site.site_id}: offset {site.upstream_offset} outside "
                f"[0, {seg.length}] on segment {seg.segment_id}"
            )
        # junction tie-break: the downstream segment owns the point
        if site.upstream_offset == 0.0 and seg.downstream_id is not None:
            down = self._segments[seg.downstream_id]
            return Site(
                site.site_id, down.segment_id, down.length,
                site.easting, site.northing, site.covariates,
            )
        return site

    def _segment(self, segment_id: int) -> Segment:
        try:
            return self._segments[segment_id]
        except KeyError:
            raise NetworkError(f"unknown segment id {segment_id}") from None

    def _site(self, site_id: int) -> Site:
        try:
            return self._sites[site_id]
        except KeyError:
            raise NetworkError(f"unknown site id {site_id}") from None

    # -- basic accessors ------------------------------------------------------

    @property
    def segment_ids(self) -> list[int]:
        return sorted(self._segments)

    @property
    def site_ids(self) -> list[int]:
        return sorted(self._sites)

    def segment(self, segment_id: int) -> Segment:
        return self._segment(segment_id)

    def site(self, site_id: int) -> Site:
        return self._site(site_id)

    def covariate_names(self) -> list[str]:
        names: set[str] = set()
        for site in self._sites.values():
            names.update(site.covariates)
        return sorted(names)

    def with_extra_sites(self, sites: Iterable[Site]) -> "StreamNetwork":
        """New network sharing this topology with additional sites."""
        return StreamNetwork(self._segments.values(), list(self._sites.values()) + list(sites))

    # -- spatial queries ------------------------------------------------------

    def _dist_to_outlet(self, site: Site) -> float:
        return site.upstream_offset + self._downstream_length[site.segment_id]

    def _common_downstream(self, seg_a: int, seg_b: int) -> int:
        a, b = seg_a, seg_b
        while self._depth[a] > self._depth[b]:
            a = self._segments[a].downstream_id
        while self._depth[b] > self._depth[a]:
            b = self._segments[b].downstream_id
        while a != b:
            a = self._segments[a].downstream_id
            b = self._segments[b].downstream_id
        return a

    def flow_connected(self, a: int, b: int) -> bool:
        """True iff one site lies on the other's downstream flow path.

        A site is flow-connected to itself. Sites on different network
        components never share flow.
        """
        sa, sb = self._site(a), self._site(b)
        if self._root[sa.segment_id] != self._root[sb.segment_id]:
            return False
        common = self._common_downstream(sa.segment_id, sb.segment_id)
        return common == sa.segment_id or common == sb.segment_id

    def hydrologic_distance(self, a: int, b: int) -> float:
        """Stream distance between two sites of one network component.

        For flow-unconnected pairs this is the sum of each site's distance
        to their common downstream junction.
        """
        sa, sb = self._site(a), self._site(b)
        if self._root[sa.segment_id] != self._root[sb.segment_id]:
            raise NetworkError(f"sites {a} and {b} lie on disconnected components")
        da, db = self._dist_to_outlet(sa), self._dist_to_outlet(sb)
        common = self._common_downstream(sa.segment_id, sb.segment_id)
        if common == sa.segment_id or common == sb.segment_id:
            return abs(da - db)
        junction = self._downstream_length[common] + self._segments[common].length
        return (da - junction) + (db - junction)

    def tailup_weight(self, a: int, b: int) -> float:
        """Junction weight for the tail-up covariance; 0 when flow-unconnected.

        The weight is the product over junctions on the path from the
        upstream site to the downstream site of
        sqrt(order_incoming / order_outgoing), with Shreve order as the
        additive function.
        """
        sa, sb = self._site(a), self._site(b)
        if not self.flow_connected(a, b):
            return 0.0
        up, down = (sa, sb) if self._dist_to_outlet(sa) >= self._dist_to_outlet(sb) else (sb, sa)
        w = 1.0
        sid = up.segment_id
        while sid != down.segment_id:
            nxt = self._segments[sid].downstream_id
            w *= np.sqrt(self._segments[sid].shreve_order / self._segments[nxt].shreve_order)
            sid = nxt
        return float(w)

    def euclidean_distance(self, a: int, b: int) -> float:
        sa, sb = self._site(a), self._site(b)
        return float(np.hypot(sa.easting - sb.easting, sa.northing - sb.northing))

    def interpolate_covariate(self, target: tuple[float, float], name: str, k: int = 3) -> float:
        """Unweighted mean of ``name`` at the k Euclidean-nearest sites."""
        carriers = [s for s in self._sites.values() if name in s.covariates]
        if not carriers:
            raise NetworkError(f"unknown covariate {name!r}")
        if len(carriers) < k:
            raise NetworkError(
                f"covariate {name!r} present at {len(carriers)} sites, need k={k}"
            )
        pts = np.array([[s.easting, s.northing] for s in carriers])
        vals = np.array([s.covariates[name] for s in carriers])
        return float(knn_mean(pts, vals, np.asarray(target, dtype=float), k=k)[0])

    # -- matrices for covariance assembly -------------------------------------

    def site_matrices(self, site_ids: Iterable[int]) -> dict[str, np.ndarray]:
        """Pairwise hydrologic/Euclidean distances, connectivity and tail-up
        weights for an ordered site list. Cached per site tuple."""
        key = tuple(site_ids)
        cached = self._matrix_cache.get(key)
        if cached is not None:
            return cached
        n = len(key)
        hydro = np.zeros((n, n))
        euclid = np.zeros((n, n))
        connected = np.eye(n, dtype=bool)
        weights = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                hydro[i, j] = hydro[j, i] = self.hydrologic_distance(key[i], key[j])
                euclid[i, j] = euclid[j, i] = self.euclidean_distance(key[i], key[j])
                c = self.flow_connected(key[i], key[j])
                connected[i, j] = connected[j, i] = c
                if c:
                    weights[i, j] = weights[j, i] = self.tailup_weight(key[i], key[j])
        out = {"hydro": hydro, "euclid": euclid, "connected": connected, "weights": weights}
        self._matrix_cache[key] = out
        return out


# -- file I/O -----------------------------------------------------------------

def load_network(segments_path, sites_path) -> StreamNetwork:
    """Read a network from the CSV edge list plus site file.

    Segments: ``segment_id,downstream_id,length_m,shreve_order`` with an
    empty ``downstream_id`` marking an outlet. Sites:
    ``site_id,segment_id,offset_m,easting,northing,cov1,...``.
    """
    seg_df = pd.read_csv(segments_path, float_precision="round_trip")
    required = ["segment_id", "downstream_id", "length_m", "shreve_order"]
    if list(seg_df.columns[:4]) != required:
        raise NetworkError(f"segment file must start with columns {required}")
    segments = [
        Segment(
            int(row.segment_id),
            None if pd.isna(row.downstream_id) else int(row.downstream_id),
            float(row.length_m),
            int(row.shreve_order),
        )
        for row in seg_df.itertuples()
    ]
    site_df = pd.read_csv(sites_path, float_precision="round_trip")
    required = ["site_id", "segment_id", "offset_m", "easting", "northing"]
    if list(site_df.columns[:5]) != required:
        raise NetworkError(f"site file must start with columns {required}")
    cov_names = list(site_df.columns[5:])
    sites = [
        Site(
            int(row.site_id),
            int(row.segment_id),
            float(row.offset_m),
            float(row.easting),
            float(row.northing),
            {c: float(getattr(row, c)) for c in cov_names},
        )
        for row in site_df.itertuples()
    ]
    return StreamNetwork(segments, sites)


def save_network(net: StreamNetwork, segments_path, sites_path):
    seg_rows = []
    for sid in net.segment_ids:
        seg = net.segment(sid)
        seg_rows.append(
            {
                "segment_id": seg.segment_id,
                "downstream_id": "" if seg.downstream_id is None else seg.downstream_id,
                "length_m": seg.length,
                "shreve_order": seg.shreve_order,
            }
        )
    pd.DataFrame(seg_rows).to_csv(segments_path, index=False)
    cov_names = net.covariate_names()
    site_rows = []
    for sid in net.site_ids:
        s = net.site(sid)
        row = {
            "site_id": s.site_id,
            "segment_id": s.segment_id,
            "offset_m": s.upstream_offset,
            "easting": s.easting,
            "northing": s.northing,
        }
        row.update({c: s.covariates.get(c, np.nan) for c in cov_names})
        site_rows.append(row)
    pd.DataFrame(site_rows).to_csv(sites_path, index=False)
