"""Closed-loop simulation of homogeneous diffusively coupled agents.

Agents follow ``x' = -x + u + alpha`` with output ``y = x``; every edge runs
the static controller ``mu(zeta) = a1 + a2 (zeta + cos zeta)`` on
``zeta = E^T y`` and feeds back ``u = -E mu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import DirectedGraph, incidence_matrix

EPS_GAMMA = 1e-6


class SimulationError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class NetworkParams:
    alpha: float
    a1: float
    a2: float

    def __post_init__(self):
        for name in ("alpha", "a1", "a2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.a2 <= 0:
            raise ValueError(f"controller gain a2 must be positive, got {self.a2}")

    @property
    def gamma0(self) -> float:
        """Controller output at zero input: a1 + a2 * cos(0)."""
        return self.a1 + self.a2

    def clustering_regime(self, eps: float = EPS_GAMMA) -> bool:
        """True when zero is not a steady-state controller output at zero input."""
        return abs(self.gamma0) > eps

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "a1": self.a1, "a2": self.a2}


@dataclass(frozen=True)
class SimulationConfig:
    t_max: float = 50.0
    dt: float = 1e-3
    steady_tol: float = 1e-8
    cluster_tol: float = 1e-3
    seed: int = 0
    x0: Optional[tuple[float, ...]] = None  # None: uniform on [-5, 5]^n from seed
    sample_every: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_max >= self.dt:
            raise ValueError("t_max must be at least dt")
        if not (self.steady_tol > 0 and self.cluster_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")

    def initial_state(self, n: int) -> np.ndarray:
        if self.x0 is not None:
            x0 = np.asarray(self.x0, dtype=float)
            if x0.shape != (n,):
                raise ValueError(f"x0 has shape {x0.shape}, expected ({n},)")
            return x0.copy()
        return np.random.default_rng([self.seed, 1]).uniform(-5.0, 5.0, n)


@dataclass
class SimulationResult:
    times: np.ndarray
    states: np.ndarray
    final_state: np.ndarray
    converged: bool
    residual: float
    detected_partition: list[list[int]] = field(default_factory=list)

    @property
    def steady_state(self) -> Optional[np.ndarray]:
        return self.final_state if self.converged else None


def controller_map(zeta, p: NetworkParams):
    return p.a1 + p.a2 * (zeta + np.cos(zeta))


class _Network:
    """Edge index arrays and incidence matrix, computed once per graph."""

    def __init__(self, g: DirectedGraph):
        self.n = g.n
        self.heads = np.array([h for h, _ in g.edges], dtype=np.intp)
        self.tails = np.array([t for _, t in g.edges], dtype=np.intp)
        self.E = incidence_matrix(g).astype(float)

    def field(self, x: np.ndarray, p: NetworkParams) -> np.ndarray:
        zeta = x[self.heads] - x[self.tails]
        mu = p.a1 + p.a2 * (zeta + np.cos(zeta))
        return -x - self.E @ mu + p.alpha

    def jacobian(self, x: np.ndarray, p: NetworkParams) -> np.ndarray:
        zeta = x[self.heads] - x[self.tails]
        slope = p.a2 * (1.0 - np.sin(zeta))
        return -np.eye(self.n) - (self.E * slope) @ self.E.T


def vector_field(x: Sequence[float], g: DirectedGraph, p: NetworkParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise ValueError(f"state has shape {x.shape}, graph has {g.n} vertices")
    return _Network(g).field(x, p)


def simulate(
    g: DirectedGraph,
    p: NetworkParams,
    cfg: SimulationConfig = SimulationConfig(),
    allow_consensus: bool = False,
) -> SimulationResult:
    """Integrate with fixed-step RK4 until ``|x'|_inf < steady_tol`` or ``t_max``."""
    if not allow_consensus and not p.clustering_regime():
        raise ValueError(
            "a1 + a2 is (numerically) zero, which drives the network to consensus; "
            "pass allow_consensus=True to simulate it anyway"
        )
    net = _Network(g)
    x = cfg.initial_state(g.n)
    times, states = [0.0], [x.copy()]
    # non-finite states are detected and raised inside the loop
    with np.errstate(over="ignore", invalid="ignore"):
        x, t_end, converged, residual = _rk4_loop(net, p, cfg, x, times, states)
    if times[-1] != t_end:
        times.append(t_end)
        states.append(x.copy())
    return SimulationResult(
        times=np.array(times),
        states=np.array(states),
        final_state=x,
        converged=converged,
        residual=residual,
        detected_partition=detect_clusters(x, cfg.cluster_tol),
    )


def _rk4_loop(net, p, cfg, x, times, states):
    dt = cfg.dt
    steps = int(round(cfg.t_max / dt))
    converged = False
    step = 0
    while True:
        k1 = net.field(x, p)
        residual = float(np.max(np.abs(k1), initial=0.0))
        if not math.isfinite(residual):
            raise SimulationError(f"state became non-finite at t = {step * dt:.6g}")
        if residual < cfg.steady_tol:
            converged = True
            break
        if step == steps:
            break
        k2 = net.field(x + 0.5 * dt * k1, p)
        k3 = net.field(x + 0.5 * dt * k2, p)
        k4 = net.field(x + dt * k3, p)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        step += 1
        if step % cfg.sample_every == 0:
            times.append(step * dt)
            states.append(x.copy())
    return x, step * dt, converged, residual


def steady_state_solve(
    g: DirectedGraph,
    p: NetworkParams,
    y_init: Optional[Sequence[float]] = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    max_halvings: int = 30,
) -> np.ndarray:
    """Damped Newton iteration for the equilibrium ``-y - E mu(E^T y) + alpha = 0``."""
    net = _Network(g)
    y = np.full(g.n, p.alpha) if y_init is None else np.array(y_init, dtype=float)
    if y.shape != (g.n,):
        raise ValueError(f"y_init has shape {y.shape}, expected ({g.n},)")
    F = net.field(y, p)
    res = float(np.max(np.abs(F), initial=0.0))
    for _ in range(max_iter):
        if res < tol:
            return y
        step = np.linalg.solve(net.jacobian(y, p), -F)
        lam = 1.0
        for _ in range(max_halvings + 1):
            y_new = y + lam * step
            F_new = net.field(y_new, p)
            res_new = float(np.max(np.abs(F_new), initial=0.0))
            if res_new < res:
                break
            lam *= 0.5
        else:
            raise SolverError(f"line search stalled at residual {res:.3e}")
        y, F, res = y_new, F_new, res_new
    if res < tol:
        return y
    raise SolverError(f"Newton did not converge in {max_iter} iterations (residual {res:.3e})")


def detect_clusters(y: Sequence[float], cluster_tol: float) -> list[list[int]]:
    """Group agents whose sorted values are separated by gaps no larger than ``cluster_tol``.

    Clusters are listed by their smallest agent index.
    """
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("cannot cluster non-finite values")
    order = np.argsort(y, kind="stable")
    groups: list[list[int]] = []
    prev = None
    for i in order:
        if prev is None or y[i] - prev > cluster_tol:
            groups.append([])
        groups[-1].append(int(i))
        prev = y[i]
    return sorted(sorted(grp) for grp in groups)


def check_invariance(y: Sequence[float], psi: Sequence[int], tol: float) -> bool:
    y = np.asarray(y, dtype=float)
    if len(psi) != len(y):
        raise ValueError(f"permutation length {len(psi)} != vector length {len(y)}")
    if len(y) == 0:
        return True
    return float(np.max(np.abs(y[np.asarray(psi)] - y))) <= tol


def sample_params(seed: int, eps: float = EPS_GAMMA, max_tries: int = 100) -> NetworkParams:
    """Draw alpha ~ logU[0.1, 1], a1 ~ N(0, 10^2), a2 ~ logU[0.1, 10]."""
    rng = np.random.default_rng([seed, 0])
    for _ in range(max_tries):
        alpha = 10.0 ** rng.uniform(-1.0, 0.0)
        a1 = rng.normal(0.0, 10.0)
        a2 = 10.0 ** rng.uniform(-1.0, 1.0)
        params = NetworkParams(float(alpha), float(a1), float(a2))
        if params.clustering_regime(eps):
            return params
    raise RuntimeError(f"could not sample parameters with |a1 + a2| > {eps}")
