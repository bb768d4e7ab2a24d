"""Oriented graphs: validation, incidence matrix, connectivity and I/O."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

Edge = tuple[int, int]
Label = tuple[int, int]


class GraphError(ValueError):
    """Raised for malformed graphs (self-loops, duplicate edges, bad indices)."""


@dataclass(frozen=True)
class DirectedGraph:
    """Vertices ``0..n-1`` and oriented edges ``(head, tail)``.

    ``labels[v] = (j, p)`` optionally names vertex ``v`` as member ``p`` of
    cluster ``j`` (both 0-based).
    """

    n: int
    edges: tuple[Edge, ...] = ()
    labels: Optional[tuple[Label, ...]] = None

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise GraphError(f"vertex count must be non-negative, got {n}")
        edges = tuple((int(h), int(t)) for h, t in self.edges)
        seen = set()
        for h, t in edges:
            if not (0 <= h < n and 0 <= t < n):
                raise GraphError(f"edge ({h}, {t}) has an endpoint outside [0, {n})")
            if h == t:
                raise GraphError(f"self-loop at vertex {h}")
            if (h, t) in seen:
                raise GraphError(f"duplicate oriented edge ({h}, {t})")
            seen.add((h, t))
        labels = self.labels
        if labels is not None:
            labels = tuple((int(j), int(p)) for j, p in labels)
            if len(labels) != n:
                raise GraphError(f"expected {n} labels, got {len(labels)}")
            if len(set(labels)) != n:
                raise GraphError("vertex labels must be distinct")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", labels)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    @cached_property
    def out_neighbors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for h, t in self.edges:
            out[h].append(t)
        return tuple(tuple(x) for x in out)

    @cached_property
    def in_neighbors(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n)]
        for h, t in self.edges:
            inc[t].append(h)
        return tuple(tuple(x) for x in inc)

    def clusters(self) -> Optional[list[list[int]]]:
        """Vertices grouped by the cluster id of their label, or None if unlabeled."""
        if self.labels is None:
            return None
        groups: dict[int, list[int]] = {}
        for v, (j, _) in enumerate(self.labels):
            groups.setdefault(j, []).append(v)
        return [groups[j] for j in sorted(groups)]

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [[h, t] for h, t in self.edges],
            "labels": None if self.labels is None else [[j, p] for j, p in self.labels],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "DirectedGraph":
        try:
            n = data["n"]
            edges = data["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"graph JSON needs 'n' and 'edges': {exc}") from None
        labels = data.get("labels")
        if any(len(e) != 2 for e in edges):
            raise GraphError("every edge must be a [head, tail] pair")
        return cls(
            n,
            tuple(tuple(e) for e in edges),
            None if labels is None else tuple(tuple(lb) for lb in labels),
        )

    @classmethod
    def from_json(cls, text: str) -> "DirectedGraph":
        return cls.from_dict(json.loads(text))

    def to_dot(self, name: str = "G") -> str:
        def vname(v: int) -> str:
            if self.labels is None:
                return f"v{v}"
            j, p = self.labels[v]
            return f"v_{j}_{p}"

        lines = [f"digraph {name} {{"]
        for v in range(self.n):
            if self.labels is None:
                lines.append(f"  {vname(v)};")
            else:
                # set312 has 12 colors, numbered from 1
                color = self.labels[v][0] % 12 + 1
                lines.append(
                    f"  {vname(v)} [colorscheme=set312, style=filled, fillcolor={color}];"
                )
        for h, t in self.edges:
            lines.append(f"  {vname(h)} -> {vname(t)};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def incidence_matrix(g: DirectedGraph) -> np.ndarray:
    """Vertex-by-edge matrix with +1 at each edge's head and -1 at its tail."""
    mat = np.zeros((g.n, g.m), dtype=np.int64)
    if g.m:
        cols = np.arange(g.m)
        heads = np.fromiter((h for h, _ in g.edges), dtype=np.int64, count=g.m)
        tails = np.fromiter((t for _, t in g.edges), dtype=np.int64, count=g.m)
        mat[heads, cols] = 1
        mat[tails, cols] = -1
    return mat


def is_weakly_connected(g: DirectedGraph) -> bool:
    if g.n <= 1:
        return True
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in g.out_neighbors[v] + g.in_neighbors[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.n


def degree_profile(g: DirectedGraph) -> list[tuple[int, int]]:
    """Per-vertex ``(in_degree, out_degree)``."""
    indeg = Counter(t for _, t in g.edges)
    outdeg = Counter(h for h, _ in g.edges)
    return [(indeg[v], outdeg[v]) for v in range(g.n)]


def from_edges(n: int, edges: Sequence[Sequence[int]]) -> DirectedGraph:
    return DirectedGraph(n, tuple(tuple(e) for e in edges))
