"""Command-line entry point.

Wires graph/bundle/potential JSON inputs into the verification pipelines
and emits JSON reports. Exit codes: 0 all asserted bounds pass, 1 input
error, 2 bound violation. Reports echo the seed and config so a run is
reproducible byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import SCHEMA_VERSION, __version__
from .bundle import EndomorphismField, UnitaryConnection, decompose_potential, HermitianBundle, load_bundle
from .compactness import (
    PotentialDecomposition,
    certify_compactness,
    check_domination,
    check_hs_bound,
    check_resolvent_laplace,
)
from .control import ControlPair, F2Family, check_integrability, fit_control
from .graph import GraphFormatError, build_exhaustion, load_graph, path_graph, validate_graph, Measure
from .heat import (
    DEFAULT_TIMES,
    dump_kernel,
    kernel_from_semigroup,
    load_kernel,
    minimal_kernel,
    verify_axioms,
    verify_rho_bound,
)
from .operators import add_potential, assemble_covariant, assemble_laplacian

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VIOLATION = 2


def _parse_times(spec: str | None):
    if not spec:
        return DEFAULT_TIMES
    return tuple(sorted(float(x) for x in spec.split(",")))


def _parse_exhaustion(spec: str):
    """root=ID,radii=1,2,3"""
    root = None
    radii = None
    for part in spec.split(";"):
        if part.startswith("root="):
            root = part[len("root="):]
        elif part.startswith("radii="):
            radii = [int(x) for x in part[len("radii="):].split(",")]
    if root is None or radii is None:
        # allow comma form root=ID,radii=...
        head, _, tail = spec.partition(",radii=")
        if head.startswith("root=") and tail:
            root = head[len("root="):]
            radii = [int(x) for x in tail.split(",")]
    if root is None or radii is None:
        raise ValueError("exhaustion spec must be root=ID,radii=r1,r2,...")
    return root, radii


def _emit(report: dict, out_path, seed):
    report = {"schema_version": SCHEMA_VERSION, "seed": seed, **report}
    text = json.dumps(report, indent=1, sort_keys=True)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_graph_validate(args) -> int:
    g = load_graph(args.graph)
    rep = validate_graph(g)
    _emit({"command": "graph validate", "violations": rep.violations,
           "pass": rep.ok}, args.out, args.seed)
    return EXIT_OK if rep.ok else EXIT_VIOLATION


def cmd_heat_kernel(args) -> int:
    g = load_graph(args.graph)
    H = assemble_laplacian(g)
    k = kernel_from_semigroup(H, _parse_times(args.times))
    dump_kernel(k, args.out or "kernel.json")
    return EXIT_OK


def cmd_heat_verify(args) -> int:
    if args.kernel:
        # verify a stored kernel file; no generating operator, so the
        # continuity probe is skipped
        k = load_kernel(args.kernel)
        axioms = verify_axioms(k)
        rho_bound = verify_rho_bound(k)
        ok = axioms.ok and rho_bound.ok
        _emit({"command": "heat verify", "axioms": axioms.to_dict(),
               "rho_bound": rho_bound.to_dict(), "pass": ok},
              args.out, args.seed)
        return EXIT_OK if ok else EXIT_VIOLATION
    if not args.graph:
        raise ValueError("heat verify needs --graph or --kernel")
    g = load_graph(args.graph)
    H = assemble_laplacian(g)
    k = kernel_from_semigroup(H, _parse_times(args.times))
    axioms = verify_axioms(k, H)
    rho_bound = verify_rho_bound(k)
    report = {"command": "heat verify", "axioms": axioms.to_dict(),
              "rho_bound": rho_bound.to_dict()}
    ok = axioms.ok and rho_bound.ok
    if args.exhaustion:
        root, radii = _parse_exhaustion(args.exhaustion)
        ex = build_exhaustion(g, root, radii)
        mk = minimal_kernel(g, ex, _parse_times(args.times))
        report["minimal_kernel"] = mk.to_dict()
        ok = ok and mk.monotone_ok
    report["pass"] = ok
    _emit(report, args.out, args.seed)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_heat_minimal(args) -> int:
    g = load_graph(args.graph)
    root, radii = _parse_exhaustion(args.exhaustion)
    ex = build_exhaustion(g, root, radii)
    mk = minimal_kernel(g, ex, _parse_times(args.times))
    _emit({"command": "heat minimal", **mk.to_dict(), "pass": mk.monotone_ok},
          args.out, args.seed)
    return EXIT_OK if mk.monotone_ok else EXIT_VIOLATION


def cmd_control_check(args) -> int:
    if args.family == "power":
        f2 = F2Family.power(args.C, args.gamma)
    elif args.family == "constant":
        f2 = F2Family.constant(args.C)
    elif args.family == "bakry-emery":
        f2 = F2Family.bakry_emery(args.C, args.m, args.beta, args.R)
    else:
        raise ValueError(f"unknown family {args.family}")
    verdict = check_integrability(f2, args.q)
    _emit({"command": "control check", "verdict": verdict.to_dict(),
           "pass": True}, args.out, args.seed)
    return EXIT_OK


def cmd_control_fit(args) -> int:
    k = load_kernel(args.kernel)
    pair, cert = fit_control(k, args.family, args.q)
    report = {
        "command": "control fit",
        "F1": {v: pair.F1[v] for v in k.vertices},
        "F2": {"kind": pair.F2.kind, "C": pair.F2.C, "gamma": pair.F2.gamma},
        "q": pair.q,
        "certificate": cert.to_dict(),
        "pass": cert.ok,
    }
    _emit(report, args.out, args.seed)
    return EXIT_OK if cert.ok else EXIT_VIOLATION


def cmd_dominate_check(args) -> int:
    g = load_graph(args.graph)
    bundle, connection, potentials = load_bundle(args.bundle, g.vertices)
    if connection is None:
        connection = UnitaryConnection.trivial(g, bundle.rank)
    H_scal = assemble_laplacian(g)
    H_cov = assemble_covariant(g, bundle.rank, connection)
    if args.potential:
        H_cov = add_potential(H_cov, potentials[args.potential])
    rng = np.random.default_rng(args.seed)
    times = _parse_times(args.times)
    a_grid = tuple(float(x) for x in args.a.split(","))
    rows = check_domination(H_cov, H_scal, times, a_grid, args.trials, rng)
    ok = all(r.ok for r in rows)
    _emit({"command": "dominate check", "ledger": [r.to_dict() for r in rows],
           "pass": ok}, args.out, args.seed)
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_compact_certify(args) -> int:
    g = load_graph(args.graph)
    if args.bundle:
        bundle, connection, potentials = load_bundle(args.bundle, g.vertices)
        if connection is None:
            connection = UnitaryConnection.trivial(g, bundle.rank)
        H = assemble_covariant(g, bundle.rank, connection)
        W = potentials[args.potential]
    else:
        bundle = HermitianBundle.trivial(g.vertices, 1)
        H = assemble_laplacian(g)
        with open(args.potential) as fh:
            W = EndomorphismField.scalar(json.load(fh))
    kind, _, value = args.decomp.partition(":")
    if kind != "threshold":
        raise ValueError("only threshold:<c> decompositions are supported here")
    W1, W2 = decompose_potential(W, "threshold", bundle, threshold=float(value))
    k = kernel_from_semigroup(assemble_laplacian(g), _parse_times(args.times))
    pair, cert = fit_control(k, "graph", args.q)
    root, radii = _parse_exhaustion(args.levels)
    ex = build_exhaustion(g, root, radii)
    pd = PotentialDecomposition.build(W, W1, W2, pair, Measure.from_rho(g))
    report = certify_compactness(pd, H, pair, ex, args.a, args.topk)
    ok = report.verdict == "hypotheses-verified" and cert.ok
    _emit({"command": "compact certify", "control_certificate": cert.to_dict(),
           **report.to_dict(), "pass": ok}, args.out, args.seed)
    return EXIT_OK if ok else EXIT_VIOLATION


def build_coulomb_demo(n: int, kappa: float, theta: float):
    """Path host with a uniform magnetic phase and the inverse-square
    decaying potential W(x_j) = kappa / (1 + j^2), split by threshold."""
    g = path_graph(n)
    phases = {}
    for i in range(n - 1):
        phases[(f"v{i}", f"v{i+1}")] = theta
    connection = UnitaryConnection.from_edge_phases(g, phases)
    w_values = {f"v{j}": kappa / (1.0 + j * j) for j in range(n)}
    W = EndomorphismField.scalar(w_values)
    return g, connection, W


def cmd_demo_coulomb(args) -> int:
    g, connection, W = build_coulomb_demo(args.n, args.kappa, args.theta)
    bundle = HermitianBundle.trivial(g.vertices, 1)
    rng = np.random.default_rng(args.seed)
    H_scal = assemble_laplacian(g)
    H_cov = assemble_covariant(g, 1, connection)
    times = _parse_times(args.times)
    k = kernel_from_semigroup(H_scal, times)
    ledger = []
    axioms = verify_axioms(k, H_scal)
    rho_rep = verify_rho_bound(k)
    pair, cert = fit_control(k, "graph", 1.0)
    W1, W2 = decompose_potential(W, "threshold", bundle, threshold=args.threshold)
    w1_map = {v: float(np.real(W1.get(v)[0, 0])) for v in g.vertices}
    hs_rows = check_hs_bound(w1_map, k, pair, t=0.5)
    ledger += hs_rows
    ledger.append(check_resolvent_laplace(H_scal, a=1.0))
    dom_rows = check_domination(H_cov, H_scal, times=(0.1, 1.0),
                                a_values=(1.0,), trials=5, rng=rng)
    ledger += dom_rows
    radii = [args.n // 4, args.n // 2, 3 * args.n // 4, args.n - 1]
    ex = build_exhaustion(g, "v0", radii)
    pd = PotentialDecomposition.build(W, W1, W2, pair, Measure.from_rho(g))
    report = certify_compactness(pd, H_cov, pair, ex, a=args.a, k_top=args.topk)
    transitions = list(report.drift)  # insertion order = level order
    drift_last = report.drift[transitions[-1]] if transitions else 0.0
    ok = (axioms.ok and rho_rep.ok and cert.ok
          and all(r.ok for r in ledger)
          and report.verdict == "hypotheses-verified"
          and drift_last < args.drift_tol)
    _emit({
        "command": "demo coulomb-lattice",
        "config": {"n": args.n, "kappa": args.kappa, "theta": args.theta,
                   "threshold": args.threshold, "a": args.a},
        "axioms": axioms.to_dict(),
        "rho_bound": rho_rep.to_dict(),
        "control_certificate": cert.to_dict(),
        "ledger": [r.to_dict() for r in ledger],
        "compactness": report.to_dict(),
        "last_level_drift": drift_last,
        "pass": ok,
    }, args.out, args.seed)
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heatcert")
    p.add_argument("--version", action="version",
                   version=f"heatcert {__version__} (report schema v{SCHEMA_VERSION})")
    sub = p.add_subparsers(dest="group", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        sp.add_argument("--times", default=None)

    graph = sub.add_parser("graph").add_subparsers(dest="action", required=True)
    sp = graph.add_parser("validate")
    sp.add_argument("--graph", required=True)
    common(sp)
    sp.set_defaults(func=cmd_graph_validate)

    heat = sub.add_parser("heat").add_subparsers(dest="action", required=True)
    sp = heat.add_parser("kernel")
    sp.add_argument("--graph", required=True)
    common(sp)
    sp.set_defaults(func=cmd_heat_kernel)
    sp = heat.add_parser("verify")
    sp.add_argument("--graph", default=None)
    sp.add_argument("--kernel", default=None)
    sp.add_argument("--exhaustion", default=None)
    common(sp)
    sp.set_defaults(func=cmd_heat_verify)
    sp = heat.add_parser("minimal")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--exhaustion", required=True)
    common(sp)
    sp.set_defaults(func=cmd_heat_minimal)

    control = sub.add_parser("control").add_subparsers(dest="action", required=True)
    sp = control.add_parser("check")
    sp.add_argument("--family", default="power")
    sp.add_argument("--C", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, default=0.0)
    sp.add_argument("--m", type=int, default=1)
    sp.add_argument("--beta", type=float, default=0.0)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--q", type=float, default=1.0)
    common(sp)
    sp.set_defaults(func=cmd_control_check)
    sp = control.add_parser("fit")
    sp.add_argument("--kernel", required=True)
    sp.add_argument("--family", default="graph", choices=("graph", "power"))
    sp.add_argument("--q", type=float, default=1.0)
    common(sp)
    sp.set_defaults(func=cmd_control_fit)

    dom = sub.add_parser("dominate").add_subparsers(dest="action", required=True)
    sp = dom.add_parser("check")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--bundle", required=True)
    sp.add_argument("--potential", default=None)
    sp.add_argument("--a", default="0.5,1,2,4")
    sp.add_argument("--trials", type=int, default=20)
    common(sp)
    sp.set_defaults(func=cmd_dominate_check)

    comp = sub.add_parser("compact").add_subparsers(dest="action", required=True)
    sp = comp.add_parser("certify")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--bundle", default=None)
    sp.add_argument("--potential", required=True)
    sp.add_argument("--decomp", default="threshold:0.1")
    sp.add_argument("--q", type=float, default=1.0)
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--levels", required=True)
    sp.add_argument("--topk", type=int, default=5)
    common(sp)
    sp.set_defaults(func=cmd_compact_certify)

    demo = sub.add_parser("demo").add_subparsers(dest="action", required=True)
    sp = demo.add_parser("coulomb-lattice")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--theta", type=float, default=0.3)
    sp.add_argument("--threshold", type=float, default=0.1)
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--topk", type=int, default=5)
    sp.add_argument("--drift-tol", type=float, default=1e-3)
    common(sp)
    sp.set_defaults(func=cmd_demo_coulomb)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (GraphFormatError, FileNotFoundError, KeyError, ValueError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
