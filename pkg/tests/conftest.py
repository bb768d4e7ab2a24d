import itertools

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from orbitforge.graph import DirectedGraph
from orbitforge.synthesis import ClusterSpec, lcm

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[-1])):
            terminalreporter.write_line(line)


# -- strategies ---------------------------------------------------------------


@st.composite
def digraphs(draw, max_n=8):
    n = draw(st.integers(0, max_n))
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return DirectedGraph(n, tuple(chosen))


@st.composite
def cluster_specs(draw, max_k=7, max_r=6):
    sizes = draw(st.lists(st.integers(1, max_r), min_size=1, max_size=max_k))
    return ClusterSpec(tuple(sizes))


@st.composite
def specs_with_paths(draw, max_k=7, max_r=6):
    spec = draw(cluster_specs(max_k, max_r))
    path = draw(st.permutations(range(spec.k)))
    return spec, tuple(path)


# -- independent oracles ----------------------------------------------------------


def exhaustive_tree_min(sizes) -> int:
    """Minimum lcm-weight spanning tree by trying every (k-1)-edge subset."""
    k = len(sizes)
    if k == 1:
        return 0
    pairs = list(itertools.combinations(range(k), 2))
    best = None
    for tree in itertools.combinations(pairs, k - 1):
        parent = list(range(k))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        acyclic = True
        for i, j in tree:
            ri, rj = find(i), find(j)
            if ri == rj:
                acyclic = False
                break
            parent[ri] = rj
        if acyclic:
            w = sum(lcm(sizes[i], sizes[j]) for i, j in tree)
            best = w if best is None else min(best, w)
    return best


def exhaustive_path_min(sizes) -> tuple[int, list[tuple[int, ...]]]:
    """Minimum lcm-weight Hamiltonian path and every path attaining it."""
    k = len(sizes)
    best, arg = None, []
    for perm in itertools.permutations(range(k)):
        if k > 1 and perm[0] > perm[-1]:
            continue
        w = sum(lcm(sizes[a], sizes[b]) for a, b in zip(perm, perm[1:]))
        if best is None or w < best:
            best, arg = w, [perm]
        elif w == best:
            arg.append(perm)
    return best, arg


def union_find_connected(n, edges) -> bool:
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for h, t in edges:
        parent[find(h)] = find(t)
    return len({find(v) for v in range(n)}) <= 1


def random_digraph(rng: np.random.Generator, n: int, density: float) -> DirectedGraph:
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < density]
    return DirectedGraph(n, tuple(edges))


def symmetric_digraph(rng: np.random.Generator, n: int, density: float) -> DirectedGraph:
    """Union of edge orbits under a random permutation, so Aut(G) is usually nontrivial."""
    sigma = rng.permutation(n)
    edges = set()
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < density:
                a, b = i, j
                while (a, b) not in edges:
                    edges.add((a, b))
                    a, b = int(sigma[a]), int(sigma[b])
    return DirectedGraph(n, tuple(sorted(edges)))
