"""Construction of graphs with prescribed orbit sizes, and edge-count bounds.

Cluster ``j`` of a :class:`ClusterSpec` owns the contiguous vertex block
``offset[j] .. offset[j] + r_j - 1``; vertex ``offset[j] + p`` carries label
``(j, p)``.  Chaining clusters along a path and linking ``v^a_{p mod r_a}`` to
``v^b_{p mod r_b}`` for ``p < lcm(r_a, r_b)`` makes each cluster an orbit of
the automorphism group, provided the smallest cluster is closed into a
directed cycle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .graph import DirectedGraph

MAX_EXACT_CLUSTERS = 20

PathOrder = tuple[int, ...]


class CapacityError(ValueError):
    """Input is larger than an exhaustive method is allowed to handle."""


@dataclass(frozen=True)
class ClusterSpec:
    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(self.sizes)
        if not sizes:
            raise ValueError("at least one cluster is required")
        for r in sizes:
            if isinstance(r, bool) or int(r) != r or r < 1:
                raise ValueError(f"cluster sizes must be positive integers, got {r!r}")
        object.__setattr__(self, "sizes", tuple(int(r) for r in sizes))

    @classmethod
    def parse(cls, text: str) -> "ClusterSpec":
        """Parse ``"3,3,3"`` style input."""
        try:
            sizes = tuple(int(tok) for tok in text.split(",") if tok.strip())
        except ValueError:
            raise ValueError(f"cannot parse cluster sizes from {text!r}") from None
        return cls(sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(itertools.accumulate((0,) + self.sizes[:-1]))

    @property
    def min_cluster(self) -> int:
        """Index of the smallest cluster; ties go to the lowest index."""
        return min(range(self.k), key=lambda j: (self.sizes[j], j))


def lcm(a: int, b: int) -> int:
    return a // math.gcd(a, b) * b


def _check_path(spec: ClusterSpec, path: Sequence[int]) -> PathOrder:
    path = tuple(int(i) for i in path)
    if sorted(path) != list(range(spec.k)):
        raise ValueError(f"path {path} is not a permutation of 0..{spec.k - 1}")
    return path


def path_weight(spec: ClusterSpec, path: Sequence[int]) -> int:
    r = spec.sizes
    return sum(lcm(r[a], r[b]) for a, b in zip(path, path[1:]))


def predicted_edge_count(spec: ClusterSpec, path: Sequence[int]) -> int:
    path = _check_path(spec, path)
    r_min = spec.sizes[spec.min_cluster]
    return path_weight(spec, path) + (r_min if r_min >= 2 else 0)


def build_os_graph(spec: ClusterSpec, path: Optional[Sequence[int]] = None) -> DirectedGraph:
    """Build the labeled graph whose orbits are exactly the clusters of ``spec``.

    ``path`` lists cluster indices in visiting order (default ``0..k-1``).
    """
    path = _check_path(spec, range(spec.k) if path is None else path)
    r, off = spec.sizes, spec.offsets
    edges: list[tuple[int, int]] = []
    for a, b in zip(path, path[1:]):
        for p in range(lcm(r[a], r[b])):
            edges.append((off[a] + p % r[a], off[b] + p % r[b]))
    star = spec.min_cluster
    if r[star] > 1:
        for p in range(r[star]):
            edges.append((off[star] + p, off[star] + (p + 1) % r[star]))
    labels = tuple((j, p) for j in range(spec.k) for p in range(r[j]))
    return DirectedGraph(spec.n, tuple(edges), labels)


# -- lower bound --------------------------------------------------------------


def lower_bound(spec: ClusterSpec) -> tuple[int, list[tuple[int, int]]]:
    """Kruskal MST over the complete cluster graph weighted by lcm of sizes."""
    r = spec.sizes
    parent = list(range(spec.k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    candidates = sorted(
        (lcm(r[i], r[j]), i, j) for i, j in itertools.combinations(range(spec.k), 2)
    )
    total, tree = 0, []
    for w, i, j in candidates:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
            total += w
            tree.append((i, j))
            if len(tree) == spec.k - 1:
                break
    return total, tree


# -- best path (upper bound) ------------------------------------------------------


def _weight_matrix(spec: ClusterSpec) -> list[list[int]]:
    r = spec.sizes
    return [[lcm(a, b) for b in r] for a in r]


def held_karp_path(spec: ClusterSpec) -> tuple[int, PathOrder]:
    """Minimum-weight Hamiltonian path on the cluster graph, by subset DP."""
    k = spec.k
    if k > MAX_EXACT_CLUSTERS:
        raise CapacityError(
            f"exact path search supports at most {MAX_EXACT_CLUSTERS} clusters "
            f"(got {k}); use heuristic mode"
        )
    if k == 1:
        return 0, (0,)
    w_py = _weight_matrix(spec)
    inf = 1 << 61
    if max(map(max, w_py)) * k >= inf:
        raise OverflowError("cluster sizes too large for the exact path search")
    w = np.array(w_py, dtype=np.int64)

    full = 1 << k
    dp = np.full((full, k), inf, dtype=np.int64)
    for j in range(k):
        dp[1 << j, j] = 0
    masks = np.arange(full, dtype=np.int64)
    popcount = np.zeros(full, dtype=np.int64)
    for j in range(k):
        popcount += (masks >> j) & 1
    for size in range(2, k + 1):
        layer = masks[popcount == size]
        for j in range(k):
            sel = layer[(layer >> j) & 1 == 1]
            prev = sel ^ (1 << j)
            dp[sel, j] = (dp[prev] + w[:, j]).min(axis=1)

    mask = full - 1
    end = int(np.argmin(dp[mask]))
    best = int(dp[mask, end])
    order = [end]
    while mask != (1 << order[-1]):
        j = order[-1]
        prev = mask ^ (1 << j)
        cost = dp[mask, j]
        i = next(i for i in range(k) if (prev >> i) & 1 and dp[prev, i] + w[i, j] == cost)
        order.append(i)
        mask = prev
    order.reverse()
    return best, tuple(order)


def heuristic_path(spec: ClusterSpec) -> tuple[int, PathOrder]:
    """Nearest-neighbour paths from every start, each polished by 2-opt."""
    k = spec.k
    w = _weight_matrix(spec)
    best: Optional[tuple[int, list[int]]] = None
    for start in range(k):
        path = [start]
        left = set(range(k)) - {start}
        while left:
            last = path[-1]
            nxt = min(left, key=lambda j: (w[last][j], j))
            path.append(nxt)
            left.remove(nxt)
        path = _two_opt(path, w)
        cost = sum(w[a][b] for a, b in zip(path, path[1:]))
        if best is None or cost < best[0]:
            best = (cost, path)
    assert best is not None
    return best[0], tuple(best[1])


def _two_opt(path: list[int], w: list[list[int]]) -> list[int]:
    # open path: reversing path[i..j] changes at most the two boundary edges
    k = len(path)
    improved = True
    while improved:
        improved = False
        for i in range(k - 1):
            for j in range(i + 1, k):
                delta = 0
                if i > 0:
                    delta += w[path[i - 1]][path[j]] - w[path[i - 1]][path[i]]
                if j < k - 1:
                    delta += w[path[i]][path[j + 1]] - w[path[j]][path[j + 1]]
                if delta < 0:
                    path[i : j + 1] = path[i : j + 1][::-1]
                    improved = True
    return path


@dataclass(frozen=True)
class BoundsReport:
    """Edge-count bounds for a cluster spec.

    ``upper`` follows the k=1 convention (``r_1`` if ``r_1 > 1`` else 0);
    ``literal_upper`` is the formula read literally (best path weight plus the
    smallest size).  ``built_edges`` is what the builder produces on
    ``upper_path``; it is one less than ``upper`` when the smallest size is 1.
    """

    lower: int
    upper: int
    lower_tree: tuple[tuple[int, int], ...]
    upper_path: PathOrder
    exact_upper_is_certified: bool
    path_weight: int
    literal_upper: int
    built_edges: int
    note: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "m": self.lower,
            "M": self.upper,
            "tree": [list(e) for e in self.lower_tree],
            "path": list(self.upper_path),
            "certified": self.exact_upper_is_certified,
            "path_weight": self.path_weight,
            "literal_M": self.literal_upper,
            "built_edges": self.built_edges,
            "note": self.note,
        }


def best_path(
    spec: ClusterSpec, mode: Literal["exact", "heuristic"] = "exact"
) -> tuple[int, PathOrder]:
    if mode == "exact":
        return held_karp_path(spec)
    if mode == "heuristic":
        return heuristic_path(spec)
    raise ValueError(f"unknown path mode {mode!r}")


def upper_bound(
    spec: ClusterSpec, mode: Literal["exact", "heuristic"] = "exact"
) -> BoundsReport:
    weight, path = best_path(spec, mode)
    r_min = min(spec.sizes)
    literal = weight + r_min
    note = None
    if spec.k == 1:
        upper = r_min if r_min > 1 else 0
        note = "single cluster: M is the cycle length built (0 for a lone vertex)"
    else:
        upper = literal
        if r_min == 1:
            note = "smallest cluster has size 1: no cycle is built, so built_edges = M - 1"
    m, tree = lower_bound(spec)
    return BoundsReport(
        lower=m,
        upper=upper,
        lower_tree=tuple(tree),
        upper_path=path,
        exact_upper_is_certified=(mode == "exact"),
        path_weight=weight,
        literal_upper=literal,
        built_edges=predicted_edge_count(spec, path),
        note=note,
    )


# -- special families -------------------------------------------------------------


@dataclass(frozen=True)
class EdgeCountCertificate:
    """Edge count achieved by the builder on ``path`` for a special family.

    kind:
      ``"equal"``         all sizes equal and > 1; ``bound`` = n, and no
                          graph of this orbit type has fewer edges.
      ``"divisibility"``  sizes form a divisibility chain (k >= 2); ``bound`` = n.
      ``"bounded"``       all sizes <= q; ``bound`` = n + (q-1)q(2q-1)/6 + q.
    ``optimal`` is True when ``edges`` is known to be the minimum possible.
    """

    kind: str
    bound: int
    edges: int
    path: PathOrder
    optimal: bool
    q: Optional[int] = None


def cubic_slack(q: int) -> int:
    return (q - 1) * q * (2 * q - 1) // 6 + q


def corollary_edge_counts(spec: ClusterSpec) -> EdgeCountCertificate:
    """Classify ``spec`` into the strongest special family that applies.

    Every spec is bounded by its largest size, so a certificate always exists.
    """
    r, n = spec.sizes, spec.n
    ascending = tuple(sorted(range(spec.k), key=lambda j: (r[j], j)))
    edges = predicted_edge_count(spec, ascending)
    m, _ = lower_bound(spec)
    if len(set(r)) == 1 and r[0] > 1:
        return EdgeCountCertificate("equal", n, edges, ascending, optimal=True)
    if spec.k >= 2 and all(
        b % a == 0 for a, b in zip(sorted(r), sorted(r)[1:])
    ):
        # with a size-1 cluster the result is a spanning tree, hence minimal
        optimal = edges == m or edges == n - 1
        return EdgeCountCertificate("divisibility", n, edges, ascending, optimal)
    q = max(r)
    return EdgeCountCertificate(
        "bounded", n + cubic_slack(q), edges, ascending, optimal=(edges == m), q=q
    )
