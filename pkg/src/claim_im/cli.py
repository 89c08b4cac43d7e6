"""Command line: ``train``, ``evaluate``, ``goal``, ``influence`` and ``config``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

import argparse
import ast
import hashlib
import json
import logging
import os
import sys
import tempfile
import shutil
import warnings

import numpy as np

from . import __version__
from .agent import ClaimAgent
from .diffusion import DiffusionConfig, MAX_EXACT_EDGES, estimate_influence, exact_influence
from .exceptions import ClaimError, ConfigurationError, OracleTooLargeError
from .goal import GoalGenerator
from .graph import initial_observation, read_edge_list
from .influence import greedy_select
from .qnet import load_params, save_params
from .trainer import evaluate, graph_estimates
from ._validation import child_rng

logger = logging.getLogger("claim_im")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


# -- configuration -----------------------------------------------------------

def parse_value(text):
    text = text.strip()
    if text.lower() in ("none", "null"):
        return None
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment line."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = parse_value(value)
    return out


def format_config(params):
    return "".join(f"{k} = {params[k]!r}\n" for k in sorted(params))


def build_agent(config_path=None, overrides=(), seed=None, base=None):
    params = dict(base or {})
    if config_path:
        params.update(read_config(config_path))
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip()] = parse_value(v)
    if seed is not None:
        params["random_state"] = seed
    valid = ClaimAgent().get_params()
    unknown = sorted(set(params) - set(valid))
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {unknown}")
    agent = ClaimAgent(**params)
    agent.to_config()  # validates
    return agent


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_graphs(paths):
    missing = [p for p in paths if not os.path.isfile(p)]
    if missing:
        raise UsageError(f"graph file(s) not found: {', '.join(missing)}")
    return [read_edge_list(p) for p in paths]


# -- commands ------------------------------------------------------------------

def cmd_train(args):
    base = None
    graph_paths = list(args.graphs)
    seed = args.seed
    if args.manifest:
        with open(args.manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        base = manifest["config"]
        graph_paths = graph_paths or manifest["inputs"]["graphs"]
        if seed is None:
            seed = manifest["seed"]
    if not graph_paths:
        raise UsageError("at least one training edge list is required")
    agent = build_agent(args.config, args.set, seed, base)
    graphs = _load_graphs(graph_paths)

    # write into a scratch directory and move into place so that failures leave no outputs
    os.makedirs(os.path.dirname(os.path.abspath(args.out)) or ".", exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".claim-train-", dir=os.path.dirname(os.path.abspath(args.out)))
    try:
        agent.fit(graphs)
        ckpt = os.path.join(tmp, "checkpoint.bin")
        metrics = os.path.join(tmp, "metrics.csv")
        save_params(agent.params_, ckpt)
        agent.metrics_.write_episodes_csv(metrics)
        manifest = {
            "code_version": __version__,
            "seed": int(agent.random_state),
            "config": agent.get_params(),
            "inputs": {
                "graphs": [os.path.abspath(p) for p in graph_paths],
                "sha256": {os.path.abspath(p): file_digest(p) for p in graph_paths},
            },
            "outputs": {"checkpoint": "checkpoint.bin", "metrics": "metrics.csv"},
        }
        with open(os.path.join(tmp, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if os.path.exists(args.out):
            shutil.rmtree(args.out)
        os.replace(tmp, args.out)
    finally:
        if os.path.exists(tmp):
            shutil.rmtree(tmp)
    print(f"wrote {args.out}/checkpoint.bin, metrics.csv, manifest.json")
    return EXIT_OK


def _eval_one(policy, graph, cfg, runs, seed, params, gi):
    m = evaluate(policy, [graph], cfg, runs, seed=seed + gi, params=params, policy_name=policy)
    return [row["influence"] for row in m.evaluations]


def cmd_evaluate(args):
    base = None
    params = None
    if args.policy == "checkpoint":
        if not args.checkpoint or not os.path.isfile(args.checkpoint):
            raise UsageError("--policy checkpoint requires an existing --checkpoint file")
        manifest = os.path.join(os.path.dirname(os.path.abspath(args.checkpoint)), "manifest.json")
        if os.path.isfile(manifest):
            with open(manifest, encoding="utf-8") as fh:
                base = json.load(fh)["config"]
        params = load_params(args.checkpoint)
    agent = build_agent(args.config, args.set, None, base)
    cfg = agent.to_config()
    graphs = _load_graphs(args.graphs)
    seed = args.seed if args.seed is not None else cfg.rng_seed
    policy = "qnet" if args.policy == "checkpoint" else args.policy

    jobs = max(1, args.jobs)
    if jobs > 1 and len(graphs) > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=min(jobs, len(graphs)))(
            delayed(_eval_one)(policy, g, cfg, args.runs, seed, params, gi)
            for gi, g in enumerate(graphs)
        )
    else:
        results = [_eval_one(policy, g, cfg, args.runs, seed, params, gi)
                   for gi, g in enumerate(graphs)]

    print(f"{'graph':<40} {'policy':<10} {'mean':>10} {'std':>10} {'runs':>6}")
    rows = []
    for path, vals in zip(args.graphs, results):
        vals = np.asarray(vals)
        print(f"{os.path.basename(path):<40} {args.policy:<10} {vals.mean():>10.3f} "
              f"{vals.std():>10.3f} {len(vals):>6d}")
        for r, v in enumerate(vals):
            rows.append((path, r, args.policy, float(v)))
    if args.out:
        import csv

        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["graph", "run", "policy", "influence"])
            for row in rows:
                w.writerow([row[0], row[1], row[2], repr(row[3])])
    return EXIT_OK


def cmd_goal(args):
    if args.graph:
        g = _load_graphs([args.graph])[0]
        from .env import EpisodeConfig

        ecfg = EpisodeConfig(s_size=args.s, k_seeds=args.k, p=args.p)
        v, e, i_est = graph_estimates(g, ecfg, args.estimate_samples, child_rng(args.seed, "goal"))
        v = args.v if args.v is not None else v
        e = args.e if args.e is not None else e
        i_est = args.i if args.i is not None else i_est
    else:
        if None in (args.v, args.e, args.i):
            raise UsageError("give --graph or all of --v, --e and --i")
        g, v, e, i_est = None, args.v, args.e, args.i
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gen = GoalGenerator(v, e, i_est, args.s).fit()
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"v_est = {v}")
    print(f"e_est = {e}")
    print(f"i_est = {gen.estimates_.i_est}")
    print(f"p_prime = {gen.p_prime_:.4f}")
    print(f"r = {gen.r_:.6g}")
    print(f"K1 = {gen.k1_:.6g}")
    print(f"L = {gen.L_:.6g}")
    print(f"J = {gen.J_:.6g}")
    if g is not None and args.samples:
        rng = child_rng(args.seed, "goal-samples")
        for _ in range(args.samples):
            s = rng.choice(np.asarray(g.node_ids), size=args.s, replace=False)
            sub = initial_observation(g, s.tolist())
            n_s = len(sub.nodes) - len(sub.initial_set)
            print(f"start={sorted(int(x) for x in s)} n_s={n_s} goal={gen.goal(n_s):.4f}")
    return EXIT_OK


def cmd_influence(args):
    g = _load_graphs([args.graph])[0]
    cfg = DiffusionConfig(p=args.p, n_sims=args.n_sims, rng_seed=args.seed)
    if args.exact:
        if g.edge_count > MAX_EXACT_EDGES:
            raise OracleTooLargeError(
                f"--exact enumerates 2^|E| live-edge sets and supports at most "
                f"{MAX_EXACT_EDGES} edges; this graph has {g.edge_count}"
            )
        sel = greedy_select(g, args.k, cfg, oracle="exact")
        value = exact_influence(g, sel.seeds, args.p)
    else:
        sel = greedy_select(g, args.k, cfg)
        value = estimate_influence(g, sel.seeds, cfg)
    print("seeds = " + " ".join(str(s) for s in sel.seeds))
    print(f"influence = {value:.6f}")
    return EXIT_OK


def cmd_config(args):
    if args.print_defaults:
        sys.stdout.write(format_config(ClaimAgent().get_params()))
        return EXIT_OK
    if args.check:
        agent = build_agent(args.check)
        sys.stdout.write(format_config(agent.get_params()))
        return EXIT_OK
    raise UsageError("config needs --print-defaults or --check FILE")


def build_parser():
    parser = argparse.ArgumentParser(prog="claim-im", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a discovery policy")
    p.add_argument("graphs", nargs="*", help="training edge lists")
    p.add_argument("--config")
    p.add_argument("--manifest", help="rerun from a previous manifest.json")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="run")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="average influence of a policy on test graphs")
    p.add_argument("graphs", nargs="+")
    p.add_argument("--policy", choices=["checkpoint", "random", "change"], default="checkpoint")
    p.add_argument("--checkpoint")
    p.add_argument("--config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="per-run CSV")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("goal", help="calibrate the goal heuristic")
    p.add_argument("--graph")
    p.add_argument("--v", type=float)
    p.add_argument("--e", type=float)
    p.add_argument("--i", type=float)
    p.add_argument("--s", type=int, default=5)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--estimate-samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_goal)

    p = sub.add_parser("influence", help="greedy influence maximisation on one graph")
    p.add_argument("graph")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--n-sims", type=int, default=1000)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("config", help="show or check configuration")
    p.add_argument("--print-defaults", action="store_true")
    p.add_argument("--check", metavar="FILE")
    p.set_defaults(func=cmd_config)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, OracleTooLargeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ClaimError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
