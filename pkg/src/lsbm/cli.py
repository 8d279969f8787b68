"""Command line entry point: ``lsbm <subcommand> --config run.toml --seed S --out PATH``.

Data goes to files; progress and summaries go to standard error. The
``threshold`` subcommand also prints its numbers to standard output.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bp, graphgen, harness, ldp, tree
from .config import ConfigError, bp_config_from, load_config, model_from_config, section
from .harness import fmt, write_csv
from .model import derive_label_quantities, tau, unlabelled_condition

log = logging.getLogger("lsbm")


def _tree_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence([seed & (2**64 - 1), i]).generate_state(1, np.uint64)[0])


def _svg_path(out: Path) -> Path:
    return out.with_suffix(".svg")


def cmd_threshold(args, cfg):
    params = model_from_config(cfg)
    t = tau(params)
    star = harness.critical_eps(params.a, params.b)
    header = ("a", "b", "lambda", "tau", "tau_gt_1", "unlabelled_condition", "eps_star")
    row = (params.a, params.b, params.mean_degree, t, t > 1,
           unlabelled_condition(params.a, params.b), star)
    print(f"tau = {fmt(t)}  (lambda = {fmt(params.mean_degree)})")
    print(f"eps* (two-label family, a={fmt(params.a)}, b={fmt(params.b)}) = {fmt(star)}")
    print("label  eps  theta  obs_prob  weight")
    for r in derive_label_quantities(params):
        print(f"{r.label}  {fmt(r.eps)}  {fmt(r.theta)}  {fmt(r.obs_prob)}  {fmt(r.weight)}")
    if args.out:
        write_csv(args.out, header, [row])


def cmd_gen_graph(args, cfg):
    params = model_from_config(cfg)
    n = int(section(cfg, "graph").get("n", 1000))
    g = graphgen.sample_graph(params, n, args.seed)
    graphgen.write_graph(g, args.out)
    log.info("wrote %d nodes, %d edges to %s (types in %s)", n, g.num_edges, args.out,
             graphgen.types_path_for(args.out))


def cmd_bp(args, cfg):
    params = model_from_config(cfg)
    bcfg = bp_config_from(cfg)
    g = graphgen.read_graph(args.graph, params.labels, types_source=False)
    trace = [] if args.trace else None
    marg, iters, conv = bp.run_bp(g, params, bcfg, args.seed, trace=trace)
    est = bp.estimate_types(marg)
    out = Path(args.out)
    graphgen._write_lines(out, [f"{i} {fmt(p)}" for i, p in enumerate(marg.probs.tolist())])
    graphgen.write_node_values(Path(str(out) + ".est"), est.tolist())
    if trace is not None:
        write_csv(args.trace, ("iter", "max_change"), trace)
    log.info("bp: %d iterations, converged=%s", iters, conv)
    if args.types:
        truth = graphgen.read_node_values(args.types, g.n, int_values=True)
        log.info("overlap with %s: %s", args.types, fmt(bp.overlap(truth, est)))


def _sweep_spec(cfg, master_seed: int) -> harness.SweepSpec:
    s = section(cfg, "sweep")
    try:
        return harness.SweepSpec(
            pairs=tuple(tuple(p) for p in s.get("pairs", [[5, 5]])),
            eps_grid=tuple(s.get("eps_grid", np.linspace(0.0, 0.5, 9).tolist())),
            n=int(s.get("n", 5000)),
            seeds=tuple(s.get("seeds", [1, 2, 3, 4, 5])),
            bp_cfg=bp_config_from(cfg),
            master_seed=master_seed,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sweep]: {exc}") from exc


def cmd_sweep(args, cfg):
    spec = _sweep_spec(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = harness.run_sweep(spec, workers=args.workers, progress=True)
    result.write_csv(out / "sweep.csv")
    harness.emit_plot_data(result, out, plot=not args.no_plot)
    for a, b in result.pairs():
        star = harness.critical_eps(a, b)
        for eps, q, se, _ in result.summary(a, b):
            log.info("a=%g b=%g eps=%.4f (eps*=%.4f) mean Q=%.4f +- %.4f", a, b, eps, star, q, se)


def cmd_tree_delta(args, cfg):
    params = model_from_config(cfg)
    t = section(cfg, "tree")
    depths = [int(d) for d in t.get("depths", [2, 3, 4, 5, 6])]
    n_trees = int(t.get("n_trees", 10))
    reps = int(t.get("reps", 2000))
    rows = []
    for i in range(n_trees):
        s = _tree_seed(args.seed, i)
        sk = tree.sample_gw_skeleton(params, max(depths), s)
        for d in depths:
            dh, se = tree.estimate_delta(sk, d, reps, params, _tree_seed(s, d))
            bd = tree.conductance_bounds(sk, d, params)
            ok = bd.lower - 3 * se <= dh <= bd.upper + 3 * se
            rows.append((i, s, d, len(sk.boundary(d)), dh, se, bd.r_eff, bd.lower, bd.upper, ok))
    write_csv(args.out, ("tree", "seed", "d", "boundary", "delta_hat", "se", "r_eff",
                         "lower", "upper", "sandwich_ok"), rows)
    log.info("sandwich holds in %d of %d cases", sum(r[-1] for r in rows), len(rows))
    if not args.no_plot:
        from .plotting import plot_delta

        arr = np.array([r[2:9] for r in rows], dtype=float)
        means = [arr[arr[:, 0] == d].mean(axis=0) for d in depths]
        plot_delta(depths, [m[2] for m in means], [m[5] for m in means],
                   [m[6] for m in means], _svg_path(Path(args.out)))


def cmd_tree_chi(args, cfg):
    params = model_from_config(cfg)
    t = section(cfg, "tree")
    d_min, d_max = int(t.get("d_min", 4)), int(t.get("d_max", 12))
    n_trees = int(t.get("n_trees", 50))
    rows, profiles, slopes = [], [], []
    depths = np.arange(d_min, d_max + 1)
    i = 0
    attempts = 0
    while len(profiles) < n_trees:
        s = _tree_seed(args.seed, attempts)
        attempts += 1
        if attempts > 100 * n_trees:
            raise RuntimeError("too few surviving trees")
        tr = tree.sample_gw_tree(params, d_max, s)
        lc = tree.chi_profile(tr, params, d_max)
        if not np.all(np.isfinite(lc[depths])):
            continue
        for d in depths:
            rows.append((i, s, int(d), float(lc[d]), math.exp(lc[d])))
        profiles.append(lc[depths])
        slopes.append(tree.chi_slope(lc, depths))
        i += 1
    write_csv(args.out, ("tree", "seed", "d", "log_chi", "chi"), rows)
    log_tau = math.log(tau(params)) if tau(params) > 0 else -math.inf
    log.info("mean slope of log chi(d) over d=%d..%d: %.4f (log tau = %.4f)",
             d_min, d_max, float(np.mean(slopes)), log_tau)
    if not args.no_plot:
        from .plotting import plot_chi

        plot_chi(depths, np.array(profiles), log_tau, _svg_path(Path(args.out)))


def cmd_rate_fn(args, cfg):
    params = model_from_config(cfg)
    r = section(cfg, "rate")
    dist = ldp.WeightDistribution.from_params(params)
    lam = params.mean_degree
    span = dist.w_max - dist.w_min
    x_min = float(r.get("x_min", dist.w_min - 0.05 * max(span, 1e-3)))
    x_max = float(r.get("x_max", dist.w_max + 0.05 * max(span, 1e-3)))
    xs = np.linspace(x_min, x_max, int(r.get("points", 201)))
    rows = ldp.tabulate_rate(dist, lam, xs)
    write_csv(args.out, ("x", "h0", "h", "prediction"), rows)
    window = ldp.rate_window(dist, lam)
    sup, _ = ldp.sup_linear_minus_rate(dist, 2.0)
    log.info("window [w-, w+] = [%s, %s]; mean weight %s", fmt(window[0]), fmt(window[1]),
             fmt(dist.mean))
    log.info("max_x (2x - h0) = %s, log E exp(2W) = %s", fmt(sup), fmt(ldp.log_mgf(dist, 2.0)))
    if "x" in r:
        x = float(r["x"])
        growth = ldp.empirical_growth(params, x, int(r.get("d_max", 12)),
                                      int(r.get("trials", 200)), args.seed)
        path = Path(args.out).with_name(Path(args.out).stem + "_growth.csv")
        write_csv(path, ("d", "mean_root", "geo_mean_root", "surviving", "zero_fraction"),
                  [(g.d, g.mean_root, g.geo_mean_root, g.surviving, g.zero_fraction)
                   for g in growth])
        log.info("x=%s: prediction %s, empirical geometric mean at d=%d %s", fmt(x),
                 fmt(ldp.growth_prediction(dist, lam, x)), growth[-1].d,
                 fmt(growth[-1].geo_mean_root))
    if not args.no_plot:
        from .plotting import plot_rate

        plot_rate(rows, window, _svg_path(Path(args.out)))


COMMANDS = {
    "threshold": (cmd_threshold, "print tau and the two-label critical eps"),
    "gen-graph": (cmd_gen_graph, "sample a labelled SBM graph to an edge list"),
    "bp": (cmd_bp, "run belief propagation on an edge list"),
    "sweep": (cmd_sweep, "overlap-versus-eps sweep with plot data"),
    "tree-delta": (cmd_tree_delta, "root reconstruction advantage and its bounds on GW trees"),
    "tree-chi": (cmd_tree_chi, "noise sensitivity chi(d) on GW trees"),
    "rate-fn": (cmd_rate_fn, "tabulate the Cramer transform and rate function"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsbm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=name != "threshold", help="output path")
        if name in ("sweep", "tree-delta", "tree-chi", "rate-fn"):
            p.add_argument("--no-plot", action="store_true", help="skip the SVG figure")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1)
        if name == "bp":
            p.add_argument("--graph", required=True, help="edge-list file")
            p.add_argument("--types", help="true types file, used only for scoring")
            p.add_argument("--trace", help="write (iter, max_change) CSV here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    handler, _ = COMMANDS[args.command]
    try:
        cfg = load_config(args.config)
        handler(args, cfg)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        log.error("error: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
