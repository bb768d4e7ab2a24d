"""Orientation-preserving automorphisms of directed graphs and their orbits.

Two routes to the orbit partition:

* :func:`orbits_bruteforce` enumerates every permutation (small graphs only).
* :func:`compute_orbits` runs color refinement plus an
  individualization-refinement search for a generating set of Aut(G).
  The search walks one leftmost path of the search tree; at each level,
  deepest first, it tries to map that level's base vertex onto every other
  vertex of the target cell that is not yet known to share its orbit.  The
  generators found this way generate the whole group (stabilizer chain).
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import DirectedGraph, degree_profile, is_weakly_connected
from .synthesis import CapacityError, ClusterSpec, _check_path

Permutation = tuple[int, ...]

MAX_BRUTEFORCE_N = 10
_CHUNK = 1 << 18


@dataclass(frozen=True)
class OrbitPartition:
    """Orbits ordered by their smallest vertex; ``orbit_id[v]`` indexes ``orbits``."""

    orbits: tuple[tuple[int, ...], ...]
    orbit_id: tuple[int, ...]

    @classmethod
    def from_groups(cls, n: int, groups: Iterable[Iterable[int]]) -> "OrbitPartition":
        orbits = sorted(tuple(sorted(g)) for g in groups)
        orbit_id = [-1] * n
        for i, orb in enumerate(orbits):
            for v in orb:
                if orbit_id[v] != -1:
                    raise ValueError(f"vertex {v} appears in two orbits")
                orbit_id[v] = i
        if -1 in orbit_id:
            raise ValueError("orbits do not cover every vertex")
        return cls(tuple(orbits), tuple(orbit_id))

    @property
    def sizes(self) -> list[int]:
        return [len(o) for o in self.orbits]

    def to_dict(self) -> dict:
        return {
            "orbits": [list(o) for o in self.orbits],
            "orbit_id": list(self.orbit_id),
            "sizes": self.sizes,
        }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra

    def groups(self) -> list[list[int]]:
        out: dict[int, list[int]] = {}
        for v in range(len(self.parent)):
            out.setdefault(self.find(v), []).append(v)
        return list(out.values())


def is_automorphism(g: DirectedGraph, psi: Sequence[int]) -> bool:
    if len(psi) != g.n:
        raise ValueError(f"permutation has length {len(psi)}, graph has {g.n} vertices")
    if sorted(psi) != list(range(g.n)):
        return False
    edges = g.edge_set
    return all((psi[h], psi[t]) in edges for h, t in g.edges)


@lru_cache(maxsize=None)
def _all_permutations(n: int) -> np.ndarray:
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(n))),
        dtype=np.int8,
        count=math.factorial(n) * n,
    )
    return flat.reshape(-1, n)


def orbits_bruteforce(g: DirectedGraph) -> OrbitPartition:
    """Exact orbits by testing all ``n!`` permutations."""
    n = g.n
    if n > MAX_BRUTEFORCE_N:
        raise CapacityError(f"brute-force orbits limited to n <= {MAX_BRUTEFORCE_N}, got {n}")
    if n == 0:
        return OrbitPartition((), ())
    perms = _all_permutations(n)
    adj = np.zeros((n, n), dtype=bool)
    heads = np.array([h for h, _ in g.edges], dtype=np.intp)
    tails = np.array([t for _, t in g.edges], dtype=np.intp)
    adj[heads, tails] = True
    reach = np.eye(n, dtype=bool)
    for start in range(0, len(perms), _CHUNK):
        chunk = perms[start : start + _CHUNK]
        # edge count is fixed, so mapping edges into edges is a bijection;
        # filtering one edge at a time keeps the surviving set small
        for h, t in zip(heads, tails):
            chunk = chunk[adj[chunk[:, h], chunk[:, t]]]
            if not len(chunk):
                break
        # the full group is enumerated, so v's orbit is {psi(v)} over all psi
        reach[np.arange(n)[None, :], chunk] = True
    groups = {tuple(int(v) for v in np.flatnonzero(row)) for row in reach}
    return OrbitPartition.from_groups(n, groups)


# -- refinement search -----------------------------------------------------------


def _rank(keys: list) -> list[int]:
    table = {key: i for i, key in enumerate(sorted(set(keys)))}
    return [table[key] for key in keys]


class _Search:
    def __init__(self, g: DirectedGraph):
        self.g = g
        self.n = g.n
        self.out = g.out_neighbors
        self.inc = g.in_neighbors

    def refine(self, colors: list[int]) -> list[int]:
        """Coarsest equitable refinement; colors are canonical dense ranks."""
        out, inc = self.out, self.inc
        colors = _rank(colors)
        count = max(colors) + 1 if colors else 0
        while True:
            keys = [
                (
                    colors[v],
                    tuple(sorted(colors[w] for w in out[v])),
                    tuple(sorted(colors[w] for w in inc[v])),
                )
                for v in range(self.n)
            ]
            colors = _rank(keys)
            new_count = max(colors) + 1 if colors else 0
            if new_count == count:
                return colors
            count = new_count

    @staticmethod
    def individualize(colors: list[int], v: int) -> list[int]:
        return [2 * c + (u != v) for u, c in enumerate(colors)]

    @staticmethod
    def target_cell(colors: list[int]) -> Optional[list[int]]:
        """Smallest non-singleton cell (ties: lowest color), or None if discrete."""
        sizes = Counter(colors)
        cands = [(s, c) for c, s in sizes.items() if s > 1]
        if not cands:
            return None
        _, color = min(cands)
        return [v for v, c in enumerate(colors) if c == color]

    @staticmethod
    def invariant(colors: list[int]) -> tuple[int, ...]:
        sizes = Counter(colors)
        return tuple(sizes[c] for c in range(len(sizes)))

    def generators(self) -> tuple[list[Permutation], OrbitPartition]:
        n = self.n
        uf = _UnionFind(n)
        if n == 0:
            return [], OrbitPartition((), ())
        root = self.refine(_rank(degree_profile(self.g)))

        # leftmost path
        levels = []
        colors = root
        while True:
            cell = self.target_cell(colors)
            levels.append((colors, cell))
            if cell is None:
                break
            colors = self.refine(self.individualize(colors, cell[0]))
        self.first_leaf = colors
        self.path_invariants = [self.invariant(c) for c, _ in levels]

        gens: list[Permutation] = []
        for depth in range(len(levels) - 2, -1, -1):
            colors, cell = levels[depth]
            base = cell[0]
            for w in cell[1:]:
                if uf.find(w) == uf.find(base):
                    continue
                gamma = self._find(self.refine(self.individualize(colors, w)), depth + 1)
                if gamma is None:
                    continue
                gens.append(gamma)
                for v in range(n):
                    uf.union(v, gamma[v])
        return gens, OrbitPartition.from_groups(n, uf.groups())

    def _find(self, colors: list[int], depth: int) -> Optional[Permutation]:
        if self.invariant(colors) != self.path_invariants[depth]:
            return None
        cell = self.target_cell(colors)
        if cell is None:
            # first leaf and this leaf are both discrete with the same color set
            pos = {c: v for v, c in enumerate(colors)}
            gamma = tuple(pos[c] for c in self.first_leaf)
            return gamma if is_automorphism(self.g, gamma) else None
        for w in cell:
            found = self._find(self.refine(self.individualize(colors, w)), depth + 1)
            if found is not None:
                return found
        return None


def automorphism_generators(g: DirectedGraph) -> list[Permutation]:
    """A generating set of Aut(G) (empty when the group is trivial)."""
    gens, _ = _Search(g).generators()
    return gens


def compute_orbits(g: DirectedGraph) -> OrbitPartition:
    _, partition = _Search(g).generators()
    return partition


def canonical_rotation(spec: ClusterSpec, path: Optional[Sequence[int]] = None) -> Permutation:
    """Shift every cluster by one position: ``(j, p) -> (j, (p + 1) mod r_j)``.

    This is an automorphism of ``build_os_graph(spec, path)`` for every path.
    """
    if path is not None:
        _check_path(spec, path)
    psi = []
    for off, r in zip(spec.offsets, spec.sizes):
        psi.extend(off + (p + 1) % r for p in range(r))
    return tuple(psi)


def rotation_from_labels(g: DirectedGraph) -> Optional[Permutation]:
    """The cluster-shift permutation read off a labeled graph's ``(j, p)`` labels."""
    if g.labels is None:
        return None
    index = {lb: v for v, lb in enumerate(g.labels)}
    size = Counter(j for j, _ in g.labels)
    return tuple(index[(j, (p + 1) % size[j])] for j, p in g.labels)


@dataclass(frozen=True)
class OsCertificate:
    spec: ClusterSpec
    partition: OrbitPartition
    weakly_connected: bool
    sizes_match: bool

    @property
    def valid(self) -> bool:
        return self.weakly_connected and self.sizes_match

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "sizes": list(self.spec.sizes),
            "orbit_sizes": self.partition.sizes,
            "weakly_connected": self.weakly_connected,
            "sizes_match": self.sizes_match,
            "orbits": [list(o) for o in self.partition.orbits],
        }


def certify_os(g: DirectedGraph, spec: ClusterSpec) -> OsCertificate:
    partition = compute_orbits(g)
    match = sorted(partition.sizes) == sorted(spec.sizes)
    return OsCertificate(spec, partition, is_weakly_connected(g), match)
