"""Command-line entry point: ``orbitforge <command> ...``.

Machine-readable output (JSON/CSV) goes to stdout or files; human-oriented
messages go to stderr.  Exit codes: 0 success, 1 verification or
convergence failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .automorphism import (
    automorphism_generators,
    certify_os,
    compute_orbits,
    orbits_bruteforce,
    rotation_from_labels,
)
from .graph import DirectedGraph, GraphError
from .simulation import (
    NetworkParams,
    SimulationConfig,
    SimulationError,
    check_invariance,
    sample_params,
    simulate,
    steady_state_solve,
)
from .synthesis import (
    MAX_EXACT_CLUSTERS,
    CapacityError,
    ClusterSpec,
    best_path,
    build_os_graph,
    predicted_edge_count,
    upper_bound,
)

INVARIANCE_TOL = 1e-6


class UsageError(Exception):
    pass


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False) + "\n"


def parse_ints(text: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"cannot parse {what} from {text!r}") from None


def parse_spec(text: str) -> ClusterSpec:
    try:
        return ClusterSpec.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_seeds(text: str) -> list[int]:
    """``a..b`` is the half-open range [a, b); otherwise a comma list."""
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            return list(range(int(lo), int(hi)))
        except ValueError:
            raise UsageError(f"bad seed range {text!r}") from None
    return list(parse_ints(text, "seeds"))


def load_graph(path: str) -> DirectedGraph:
    try:
        return DirectedGraph.from_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read graph {path}: {exc}") from None


def choose_path(spec: ClusterSpec, path_arg: Optional[str], optimize: Optional[str]):
    if path_arg is not None and optimize is not None:
        raise UsageError("--path and --optimize-path are mutually exclusive")
    if path_arg is not None:
        path = parse_ints(path_arg, "path")
        if sorted(path) != list(range(spec.k)):
            raise UsageError(f"--path must be a permutation of 0..{spec.k - 1}")
        return path
    if optimize is not None:
        try:
            return best_path(spec, optimize)[1]
        except CapacityError as exc:
            raise UsageError(str(exc)) from None
    return tuple(range(spec.k))


def invariance_holds(g: DirectedGraph, y, tol: float = INVARIANCE_TOL) -> bool:
    perms = automorphism_generators(g)
    rot = rotation_from_labels(g)
    if rot is not None:
        perms.append(rot)
    return all(check_invariance(y, psi, tol) for psi in perms)


def write_trajectory_csv(result) -> str:
    n = result.states.shape[1] if result.states.ndim == 2 else 0
    rows = ["t," + ",".join(f"y{i}" for i in range(n))]
    for t, x in zip(result.times, result.states):
        rows.append(",".join([repr(float(t))] + [repr(float(v)) for v in x]))
    return "\n".join(rows) + "\n"


def run_simulation(g: DirectedGraph, seed: int, t_max: float, dt: float, consensus: bool):
    params = sample_params(seed)
    if consensus:
        params = NetworkParams(params.alpha, -params.a2, params.a2)
    cfg = SimulationConfig(t_max=t_max, dt=dt, seed=seed)
    result = simulate(g, params, cfg, allow_consensus=consensus)
    summary = {
        "seed": seed,
        "converged": result.converged,
        "steady_state": [float(v) for v in result.final_state] if result.converged else None,
        "clusters": result.detected_partition,
        "params": params.to_dict(),
        "invariance_check": bool(result.converged and invariance_holds(g, result.final_state)),
    }
    return result, summary


# -- commands -----------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = parse_spec(args.sizes)
    path = choose_path(spec, args.path, args.optimize_path)
    g = build_os_graph(spec, path)
    predicted = predicted_edge_count(spec, path)
    info = {"sizes": list(spec.sizes), "path": list(path), "predicted_edges": predicted, "edges": g.m}
    if args.out:
        atomic_write(args.out, g.to_json())
        info["out"] = args.out
    if args.dot:
        atomic_write(args.dot, g.to_dot())
    print(f"predicted edges: {predicted}, built edges: {g.m}", file=sys.stderr)
    sys.stdout.write(dumps(info) if args.out else g.to_json())
    return 0


def cmd_bounds(args) -> int:
    spec = parse_spec(args.sizes)
    try:
        report = upper_bound(spec, args.mode)
    except CapacityError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(dumps(report.to_dict()))
    return 0


def cmd_verify(args) -> int:
    g = load_graph(args.graph)
    spec = parse_spec(args.sizes)
    cert = certify_os(g, spec)
    sys.stdout.write(dumps(cert.to_dict()))
    if not cert.valid:
        reasons = []
        if not cert.weakly_connected:
            reasons.append("graph is not weakly connected")
        if not cert.sizes_match:
            reasons.append(f"orbit sizes {sorted(cert.partition.sizes)} != {sorted(spec.sizes)}")
        print("verification failed: " + "; ".join(reasons), file=sys.stderr)
        return 1
    return 0


def cmd_orbits(args) -> int:
    g = load_graph(args.graph)
    try:
        part = orbits_bruteforce(g) if args.bruteforce else compute_orbits(g)
    except CapacityError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.write(dumps(part.to_dict()))
    return 0


def cmd_simulate(args) -> int:
    g = load_graph(args.graph)
    try:
        result, summary = run_simulation(g, args.seed, args.t_max, args.dt, args.consensus)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return 1
    if args.out:
        atomic_write(args.out, write_trajectory_csv(result))
    else:
        sys.stdout.write(write_trajectory_csv(result))
    if args.summary:
        atomic_write(args.summary, dumps(summary))
    if not result.converged:
        print(f"not converged by t = {args.t_max} (residual {result.residual:.3e})", file=sys.stderr)
        return 1
    return 0


@dataclass
class PipelineReport:
    spec: ClusterSpec
    path: tuple[int, ...]
    bounds: dict
    built_edges: int
    certificate: dict
    runs: list[dict]

    @property
    def passed(self) -> bool:
        return (
            self.certificate["valid"]
            and all(r["converged"] for r in self.runs)
            and all(r["invariance_check"] for r in self.runs)
        )

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.spec.sizes),
            "path": list(self.path),
            "bounds": self.bounds,
            "built_edges": self.built_edges,
            "certificate": self.certificate,
            "runs": self.runs,
            "pass": self.passed,
        }


def _pipeline_run(job):
    g, seed, t_max, dt = job
    try:
        _, summary = run_simulation(g, seed, t_max, dt, consensus=False)
    except SimulationError as exc:
        summary = {"seed": seed, "converged": False, "error": str(exc), "invariance_check": False}
    summary.setdefault("ode_newton_gap", None)
    if summary["converged"]:
        params = NetworkParams(**summary["params"])
        y = steady_state_solve(g, params, summary["steady_state"])
        summary["ode_newton_gap"] = max(
            (abs(a - b) for a, b in zip(y, summary["steady_state"])), default=0.0
        )
    return summary


def thread_count() -> int:
    raw = os.environ.get("ORBITFORGE_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise UsageError(f"ORBITFORGE_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_pipeline(spec: ClusterSpec, path, seeds: Sequence[int], t_max: float, dt: float,
                 bounds_mode: str = "exact", workers: int = 1) -> PipelineReport:
    g = build_os_graph(spec, path)
    bounds = upper_bound(spec, bounds_mode if spec.k <= MAX_EXACT_CLUSTERS else "heuristic")
    cert = certify_os(g, spec)
    jobs = [(g, s, t_max, dt) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_pipeline_run, jobs))
    else:
        runs = [_pipeline_run(job) for job in jobs]
    return PipelineReport(spec, tuple(path), bounds.to_dict(), g.m, cert.to_dict(), runs)


def cmd_pipeline(args) -> int:
    spec = parse_spec(args.sizes)
    optimize = args.optimize_path
    if args.path is None and optimize is None:
        optimize = "exact" if spec.k <= MAX_EXACT_CLUSTERS else "heuristic"
    path = choose_path(spec, args.path, optimize)
    seeds = parse_seeds(args.seeds)
    report = run_pipeline(spec, path, seeds, args.t_max, args.dt, workers=thread_count())
    text = dumps(report.to_dict())
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    print("pipeline " + ("passed" if report.passed else "FAILED"), file=sys.stderr)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orbitforge",
        description="Synthesize graphs with prescribed automorphism orbit sizes and check them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="build a graph whose orbits have the given sizes")
    p.add_argument("--sizes", required=True, help="comma-separated cluster sizes, e.g. 3,3,3")
    p.add_argument("--path", help="cluster visiting order, e.g. 0,1,2 (default: spec order)")
    p.add_argument("--optimize-path", choices=("exact", "heuristic"))
    p.add_argument("--out", help="graph JSON output file (default: stdout)")
    p.add_argument("--dot", help="also write a Graphviz DOT file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bounds", help="print lower/upper edge-count bounds as JSON")
    p.add_argument("--sizes", required=True)
    p.add_argument("--mode", choices=("exact", "heuristic"), default="exact")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="certify that a graph has the given orbit sizes")
    p.add_argument("--graph", required=True)
    p.add_argument("--sizes", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("orbits", help="print the automorphism orbit partition")
    p.add_argument("--graph", required=True)
    p.add_argument("--bruteforce", action="store_true", help="enumerate all n! permutations")
    p.set_defaults(func=cmd_orbits)

    p = sub.add_parser("simulate", help="simulate the coupled network on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--consensus", action="store_true", help="force a1 = -a2")
    p.add_argument("--out", help="trajectory CSV (default: stdout)")
    p.add_argument("--summary", help="summary JSON file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="synthesize, verify and simulate over a seed range")
    p.add_argument("--sizes", required=True)
    p.add_argument("--path")
    p.add_argument(
        "--optimize-path", choices=("exact", "heuristic"), help="default: exact when --path is absent"
    )
    p.add_argument("--seeds", default="0..10", help="half-open range a..b or comma list")
    p.add_argument("--t-max", type=float, default=50.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, GraphError) as exc:
        parser.error(str(exc))  # exits with status 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
