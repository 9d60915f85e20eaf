"""Command-line interface.

Subcommands: generate, bp-run, tree-sim, de-solve, de-sweep, boundary-gap,
compare, oracle. Exit codes: 0 success, 1 invalid input, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import oracle as oracle_mod
from .errors import ValidationError
from .experiments import ExperimentSpec, run_experiment, spec_from_json
from .graph import load_graph, sample_sbm, save_graph
from .model import validate_params
from .seeds import derive_seed


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    parser.add_argument("--workers", type=int, default=0, help="worker processes, 0 = auto")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--config", default=None,
                        help="JSON experiment config; other flags are ignored")


def _model_flags(parser: argparse.ArgumentParser, with_n: bool) -> None:
    if with_n:
        parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--a", type=float, required=True)
    parser.add_argument("--b", type=float, required=True)
    parser.add_argument("--alpha", type=float, required=True)


def _warn_regime(n: int, a: float, b: float) -> None:
    # The analysis regime keeps a/b bounded and degrees n^{o(1)}; flag, never enforce.
    if a / b > 100.0:
        print(f"warning: a/b = {a / b:.3g} > 100 is far from the a/b = O(1) regime",
              file=sys.stderr)
    if n > 0 and a > n ** 0.25:
        print(f"warning: a = {a:.3g} exceeds n^(1/4) = {n ** 0.25:.3g}; "
              "neighborhoods may not be tree-like", file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="localbp")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a labeled graph and write it to disk")
    _common(g)
    _model_flags(g, with_n=True)

    r = sub.add_parser("bp-run", help="run message passing on a graph")
    _common(r)
    r.add_argument("--graph", default=None, help="directory of a stored graph")
    r.add_argument("--generate", action="store_true", help="sample a fresh graph")
    r.add_argument("--n", type=int)
    r.add_argument("--a", type=float)
    r.add_argument("--b", type=float)
    r.add_argument("--alpha", type=float)
    r.add_argument("--t", type=int, default=1)

    ts = sub.add_parser("tree-sim", help="Monte Carlo tree accuracy estimates")
    _common(ts)
    _model_flags(ts, with_n=False)
    ts.add_argument("--t", type=int, required=True)
    ts.add_argument("--replicas", type=int, default=10000)
    ts.add_argument("--mode", choices=["exact", "noisy", "both"], default="both",
                    help="which boundary initialization to report")

    ds = sub.add_parser("de-solve", help="density-evolution fixed points")
    _common(ds)
    ds.add_argument("--mu", type=float, required=True)
    ds.add_argument("--alpha", type=float, required=True)
    ds.add_argument("--quad", type=int, default=61)
    ds.add_argument("--tol", type=float, default=1e-12)

    dw = sub.add_parser("de-sweep", help="error curves over a mu grid")
    _common(dw)
    dw.add_argument("--mu-min", type=float, required=True)
    dw.add_argument("--mu-max", type=float, required=True)
    dw.add_argument("--mu-steps", type=int, required=True)
    dw.add_argument("--alphas", required=True, help="comma-separated alpha list")
    dw.add_argument("--quad", type=int, default=61)
    dw.add_argument("--tol", type=float, default=1e-12)

    bg = sub.add_parser("boundary-gap", help="boundary-sensitivity sequence e(1..t)")
    _common(bg)
    _model_flags(bg, with_n=False)
    bg.add_argument("--t", type=int, required=True)
    bg.add_argument("--replicas", type=int, default=10000)

    cp = sub.add_parser("compare", help="graph accuracy vs tree and limit predictions")
    _common(cp)
    _model_flags(cp, with_n=True)
    cp.add_argument("--t", type=int, required=True)
    cp.add_argument("--replicas", type=int, default=10, help="graph seeds")
    cp.add_argument("--tree-replicas", type=int, default=10000)

    orc = sub.add_parser("oracle", help="brute-force posterior on a small stored graph")
    _common(orc)
    orc.add_argument("--graph", required=True)
    orc.add_argument("--vertex", type=int, required=True)
    return ap


def _dispatch(args) -> int:
    if args.config is not None:
        manifest = run_experiment(spec_from_json(args.config))
        print(json.dumps({"out_dir": manifest["spec"]["out_dir"],
                          "content_hash": manifest["content_hash"]}, indent=2))
        return 0

    if args.command == "generate":
        p = validate_params(args.n, args.a, args.b, args.alpha)
        _warn_regime(p.n, p.a, p.b)
        g = sample_sbm(p, args.seed)
        paths = save_graph(args.out, g, p, args.seed)
        print(json.dumps({"n": p.n, "num_edges": g.num_edges, **paths}, indent=2))
        return 0

    if args.command == "oracle":
        g, p, _ = load_graph(args.graph)
        res = oracle_mod.exact_graph_posterior(g, p, args.vertex)
        print(json.dumps({"vertex": args.vertex, "p_plus": res.p_plus,
                          "log_partition": res.log_partition,
                          "enumerated_states": res.enumerated_states}, indent=2))
        return 0

    common = dict(out_dir=args.out, master_seed=args.seed, workers=args.workers)
    if args.command == "bp-run":
        if args.graph is None and not args.generate:
            raise ValidationError("bp-run needs --graph or --generate with model flags")
        if args.graph is None:
            if args.n is None or args.a is None or args.b is None or args.alpha is None:
                raise ValidationError("--generate needs --n --a --b --alpha")
            _warn_regime(args.n, args.a, args.b)
            spec = ExperimentSpec(kind="graph_bp", t=args.t, n=args.n, a=args.a,
                                  b=args.b, alpha=args.alpha, **common)
        else:
            spec = ExperimentSpec(kind="graph_bp", t=args.t, graph_dir=args.graph, **common)
        manifest = run_experiment(spec)
        print(json.dumps(manifest["result"], indent=2))
        return 0

    if args.command == "tree-sim":
        spec = ExperimentSpec(kind="tree_sim", t=args.t, replicas=args.replicas,
                              n=0, a=args.a, b=args.b, alpha=args.alpha, **common)
        manifest = run_experiment(spec)
        if args.mode != "both":
            wanted = {"exact": "p_star", "noisy": "q_star"}[args.mode]
            path = manifest["artifacts"]["metrics"]
            lines = open(path).read().splitlines()
            kept = [lines[0]] + [ln for ln in lines[1:] if ln.startswith(wanted + ",")]
            open(path, "w").write("\n".join(kept) + "\n")
        print(json.dumps({"metrics": manifest["artifacts"]["metrics"]}, indent=2))
        return 0

    if args.command == "de-solve":
        spec = ExperimentSpec(kind="de_solve", mu=args.mu, alpha=args.alpha,
                              quad_points=args.quad, tol=args.tol, **common)
        manifest = run_experiment(spec)
        print(open(manifest["artifacts"]["result"]).read())
        return 0

    if args.command == "de-sweep":
        alphas = [float(x) for x in args.alphas.split(",") if x]
        import numpy as np
        grid = [float(x) for x in np.linspace(args.mu_min, args.mu_max, args.mu_steps)]
        spec = ExperimentSpec(kind="de_sweep", mu_grid=grid, alpha_list=alphas,
                              quad_points=args.quad, tol=args.tol, **common)
        manifest = run_experiment(spec)
        print(json.dumps(manifest["artifacts"], indent=2))
        return 0

    if args.command == "boundary-gap":
        spec = ExperimentSpec(kind="boundary_gap", t=args.t, replicas=args.replicas,
                              n=0, a=args.a, b=args.b, alpha=args.alpha, **common)
        manifest = run_experiment(spec)
        print(json.dumps({"metrics": manifest["artifacts"]["metrics"]}, indent=2))
        return 0

    if args.command == "compare":
        _warn_regime(args.n, args.a, args.b)
        spec = ExperimentSpec(kind="compare", t=args.t, replicas=args.replicas,
                              tree_replicas=args.tree_replicas, n=args.n, a=args.a,
                              b=args.b, alpha=args.alpha, **common)
        manifest = run_experiment(spec)
        print(json.dumps({"compare": manifest["artifacts"]["compare"]}, indent=2))
        return 0

    raise ValidationError(f"unknown command {args.command!r}")  # pragma: no cover


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
