"""Command-line entry point: ``sbmclt <command> ...``.

Exit status is 0 on success or PASS, 1 on a FAIL verdict and 2 on usage or
model errors. Human summaries go to stdout with 6 significant digits;
files written under ``--out`` carry 17.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import modelio
from .errors import SBMError
from .graph import sample_sbm
from .modelio import fmt6
from .spectral import Frame, limit_law, reduce_d1_check, solve_rho

log = logging.getLogger("sbmclt")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _vec(a) -> str:
    return "[" + ", ".join(fmt6(x) for x in np.asarray(a).reshape(-1)) + "]"


def _mat(a) -> str:
    return "[" + ", ".join(_vec(row) for row in np.atleast_2d(a)) + "]"


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _verdict(ok: bool) -> int:
    print("verdict: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve_rho(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    sol = solve_rho(kernel, profile, tol=args.tol)
    print(f"lambda1: {fmt6(sol.lambda1)}")
    print(f"supercritical: {str(sol.supercritical).lower()}")
    print(f"rho: {_vec(sol.rho)}")
    print(f"iterations: {sol.iterations}")
    print(f"residual: {sol.residual:.3g}")
    if args.out:
        modelio.write_json(
            args.out,
            {"kind": "rho", "rho": sol.rho, "lambda1": sol.lambda1, "supercritical": sol.supercritical,
             "iterations": sol.iterations, "residual": sol.residual},
        )
    return EXIT_OK


def cmd_limit_law(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    law = limit_law(kernel, profile, args.frame)
    print(f"frame: {law.frame.value}")
    print(f"rho: {_vec(law.rho)}")
    print(f"mean: {_vec(law.mean)}")
    print(f"covariance: {_mat(law.covariance)}")
    if args.out:
        modelio.write_json(
            args.out,
            {"kind": "limit_law", "frame": law.frame.value, "rho": law.rho, "mean": law.mean,
             "covariance": law.covariance, "J": law.J, "D": np.diag(law.D)},
        )
    return EXIT_OK


def cmd_sample(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    profile = profile.with_n(args.n)
    edge_fh = open(args.dump_edges, "w", encoding="utf-8") if args.dump_edges else None
    try:
        sink = None
        if edge_fh is not None:
            edge_fh.write(f"# schema_version: {modelio.SCHEMA_VERSION}\n# u v\n")

            def sink(us, vs):
                np.savetxt(edge_fh, np.column_stack([us, vs]), fmt="%d")

        s = sample_sbm(kernel, profile, args.seed, edge_sink=sink)
    finally:
        if edge_fh is not None:
            edge_fh.close()
    print(f"N: {s.N}")
    print(f"edges: {s.n_edges}")
    print(f"components: {s.tallies.shape[0]}")
    for l, row in enumerate(s.tallies[: args.top], start=1):
        print(f"C({l}): size={int(row.sum())} counts={list(int(x) for x in row)}")
    if args.dump_components:
        modelio.write_components_csv(args.dump_components, [s])
    return EXIT_OK


def _config(args, kernel, profile, n_list, **extra) -> ex.ExperimentConfig:
    return ex.ExperimentConfig(
        kernel,
        profile,
        n_list=n_list,
        replicas=args.replicas,
        base_seed=args.seed,
        threads=args.threads,
        out_dir=args.out,
        **extra,
    )


def cmd_clt(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    res = ex.run_clt_experiment(_config(args, kernel, profile, args.n_list, frame=args.frame), arbitrate=args.arbitrate)
    print(f"frame: {res.frame.value}")
    print(f"theory mean: {_vec(res.theory_mean)}")
    print(f"theory covariance: {_mat(res.theory_cov)}")
    for row in res.per_n:
        m = row["moments"]
        print(
            f"n={row['n']}: mean={_vec(m['sample_mean'])} mean_err={fmt6(row['mean_error'])} "
            f"(4SE={fmt6(4 * row['max_se'])}) cov_rel_err={fmt6(row['cov_rel_error'])} "
            f"skew={_vec(m['skewness'])} exkurt={_vec(m['excess_kurtosis'])}"
        )
    print(f"monotone covariance shrinkage: {str(res.monotone_cov).lower()}")
    print(f"normality indicators ok: {str(res.normality_ok).lower()}")
    if res.arbitration is not None:
        errs = res.arbitration["cov_rel_error_vs_stated_law"]
        print("arbitration: " + ", ".join(f"{k}={fmt6(v)}" for k, v in errs.items()))
        print("matching frames: " + (", ".join(res.arbitration["matching_frames"]) or "none"))
    return _verdict(res.verdict)


def cmd_lln(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    res = ex.run_lln_experiment(_config(args, kernel, profile, args.n_list))
    print(f"supercritical: {str(res.supercritical).lower()}")
    print("n  mean_dev  q99_dev  frac<0.01  max_second  second/lnN  var(giant/N)")
    for row in res.table:
        print(
            f"{row['n']}  {fmt6(row['mean_deviation'])}  {fmt6(row['q99_deviation'])}  "
            f"{fmt6(row['fraction_within_tol'])}  {row['max_second_size']}  "
            f"{fmt6(row['second_over_logN'])}  {fmt6(row['giant_fraction_variance'])}"
        )
    for r in res.variance_ratios:
        print(f"variance ratio n={r['n']} -> {2 * r['n']}: {fmt6(r['ratio'])}")
    return _verdict(res.verdict)


def cmd_walk_verify(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    rep = ex.run_walk_identity_test(_config(args, kernel, profile, [args.n], y0=args.y0))
    print(f"N: {rep.N}  v: {_vec(rep.v)}  alpha (Bonferroni): {fmt6(rep.alpha_bonferroni)}")
    for label, rows in (("walk vs graph", rep.identity), ("walk vs walk", rep.null_control)):
        for r in rows:
            print(f"{label}: {r['functional']}: D={fmt6(r['D'])} p={fmt6(r['p'])}")
    print(f"mean largest jump walk={_vec(rep.walk_mean_largest)} graph={_vec(rep.graph_mean_largest)}")
    return _verdict(rep.verdict)


def cmd_fluct(args) -> int:
    kernel, profile = modelio.load_model(args.model)
    rep = ex.run_fluctuation_check(_config(args, kernel, profile, [args.n], grid=args.grid))
    print(f"N: {rep.N}  grid: {_vec(rep.grid)}")
    print(f"max relative covariance error: {fmt6(rep.max_rel_error)}")
    print(f"max |z| cross-type covariance: {fmt6(rep.cross_type_max_z)}")
    return _verdict(rep.verdict)


def cmd_er_baseline(args) -> int:
    rep = ex.er_baseline(args.c, args.n_list, args.replicas, args.seed, threads=args.threads, out_dir=args.out)
    print(f"c: {fmt6(rep.c)}  rho: {fmt6(rep.rho)}  sigma2: {fmt6(rep.sigma2)}")
    for row in rep.table:
        print(
            f"n={row['n']}: mean_fraction={fmt6(row['mean_fraction'])} (SE {fmt6(row['se_fraction'])}) "
            f"variance={fmt6(row['variance'])} rel_err={fmt6(row['variance_rel_error'])}"
        )
    return _verdict(rep.verdict)


def cmd_d1_check(args) -> int:
    rep = reduce_d1_check(args.c, args.lam)
    print(f"variance residual: {rep.variance_residual:.3g}")
    print(f"mean residual: {rep.mean_residual:.3g}")
    return _verdict(rep.ok)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbmclt", description="Giant-component laws of stochastic block models.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def model_cmd(name, help_text, func):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("model", type=Path, help="model file (d, K, mu, optional Lambda and beta)")
        p.set_defaults(func=func)
        return p

    def randomized(p, replicas: int):
        p.add_argument("--seed", type=int, required=True, help="base seed (required)")
        p.add_argument("--replicas", type=int, default=replicas)
        p.add_argument("--threads", type=int, default=ex.default_threads())
        p.add_argument("--out", type=Path, default=None, help="directory for CSV/JSON/data files")

    p = model_cmd("solve-rho", "survival vector rho", cmd_solve_rho)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", type=Path, default=None, help="write JSON result here")

    p = model_cmd("limit-law", "mean and covariance of the Gaussian limit", cmd_limit_law)
    p.add_argument("--frame", type=Frame, choices=list(Frame), default=Frame.K_WEIGHTED)
    p.add_argument("--out", type=Path, default=None, help="write JSON result here")

    p = model_cmd("sample", "draw one graph and tally its components", cmd_sample)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--top", type=int, default=5, help="components to print")
    p.add_argument("--dump-components", type=Path, default=None, metavar="CSV")
    p.add_argument("--dump-edges", type=Path, default=None, metavar="TXT", help="one 'u v' pair per line")

    p = model_cmd("clt", "Monte Carlo check of the giant-component CLT", cmd_clt)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--frame", type=Frame, choices=list(Frame), default=Frame.K_WEIGHTED)
    p.add_argument("--arbitrate", action="store_true", help="compare both frames against the stated covariance")
    randomized(p, 2000)

    p = model_cmd("lln", "law of large numbers and second-component size", cmd_lln)
    p.add_argument("--n-list", type=_int_list, required=True)
    randomized(p, 500)

    p = model_cmd("walk-verify", "walk-side vs graph-side hitting paths (KS)", cmd_walk_verify)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--y0", type=float, default=0.005)
    randomized(p, 5000)

    p = model_cmd("fluct", "covariance of the clock fluctuation field", cmd_fluct)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--grid", type=_float_list, default=list(ex.ExperimentConfig.grid))
    randomized(p, 5000)

    p = sub.add_parser("er-baseline", help="Erdos-Renyi giant against rho(c) and sigma^2(c)")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--n-list", type=_int_list, required=True)
    randomized(p, 2000)
    p.set_defaults(func=cmd_er_baseline)

    p = sub.add_parser("d1-check", help="d=1 reduction of the limit law")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.set_defaults(func=cmd_d1_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (SBMError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
