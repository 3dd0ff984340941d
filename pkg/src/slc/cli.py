"""Command-line driver: ``slc <command> [options]``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
A ``--config FILE`` of ``key=value`` lines supplies defaults for any flag
of the chosen command; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, greedy
from .distributions import SPECTRUM_KINDS, ExtendedWeightCtx, SubsetWeightFn, preset_kernel, read_kernel, write_kernel
from .experiments import ExperimentConfig, compare_proposals, figure1, figure2, start_chains, write_csv, write_psrf
from .polynomial import read_polynomial
from .sampler import PROPOSALS, STATISTICS, Chain, chain_seeds, exact_distribution, make_rng, random_initial_state
from .transforms import polarize, scaled_homogenize
from .verify import is_slc_homogeneous


# exact normalization for the mixing bound is enumerated up to this ground set size
BOUND_MAX_N = 16


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _gamma(text: str):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}") from None


def _add_mixing_flags(p):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--spectrum", choices=SPECTRUM_KINDS, default="smooth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=3)
    p.add_argument("--threshold", type=float, default=1.05)
    p.add_argument("--check-every", type=int, default=1000)
    p.add_argument("--max-steps", type=int, default=10**6)
    p.add_argument("--statistic", choices=STATISTICS, default="log_weight")
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--variant", choices=diagnostics.VARIANTS, default="classic")
    p.add_argument("--out", default=".")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slc", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key=value file of flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-kernel", help="write a random PSD kernel with a preset spectrum")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--spectrum", choices=SPECTRUM_KINDS, default="smooth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("sample", help="run MH chains and write per-chain trace CSVs")
    p.add_argument("--kernel", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--proposal", choices=PROPOSALS, default="mu")
    p.add_argument("--statistic", choices=STATISTICS, default="log_weight")
    p.add_argument("--init", choices=("greedy", "random", "spread"), default="greedy")
    p.add_argument("--epsilon", type=float, default=0.05, help="target accuracy of the reported mixing bound")
    p.add_argument("--out", default=".")

    p = sub.add_parser("diagnose", help="PSRF curve and mixing time from trace CSVs")
    p.add_argument("traces", nargs="+")
    p.add_argument("--threshold", type=float, default=1.05)
    p.add_argument("--check-every", type=int, default=1000)
    p.add_argument("--burnin", type=int, default=0)
    p.add_argument("--variant", choices=diagnostics.VARIANTS, default="classic")
    p.add_argument("--out", default="psrf.csv")

    p = sub.add_parser("optimize", help="mode finding on a sqrt-det weight function")
    p.add_argument("--kernel", required=True)
    p.add_argument("--algo", choices=("distorted", "double", "monotone", "brute"), required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--d", type=int, help="cardinality cap (default n)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=_gamma, default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=1, help="double greedy repetitions to average")

    p = sub.add_parser("verify", help="SLC certificate for a polynomial file")
    p.add_argument("path")
    p.add_argument("--tol", type=float)
    p.add_argument("--homogenize", type=int, metavar="K",
                   help="apply scaled homogenization to degree K and polarize first")

    p = sub.add_parser("figure1", help="mixing time against the cap d at fixed n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=_int_list, required=True)
    _add_mixing_flags(p)

    p = sub.add_parser("figure2", help="mixing time against n at a fixed cap d")
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--d", type=int, required=True)
    _add_mixing_flags(p)

    p = sub.add_parser("compare-proposals", help="mu proposal against the plain H_d nu proposal")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seeds", type=_int_list, default=[0])
    _add_mixing_flags(p)
    return parser


def _config_args(path: str) -> list[str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = []
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out += ["--" + key.replace("_", "-"), value]
    return out


def _expand_config(argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return rest
    extra = _config_args(known.config)
    cmd = next((i for i, a in enumerate(rest) if not a.startswith("-")), None)
    if cmd is None:
        return rest
    return rest[: cmd + 1] + extra + rest[cmd + 1:]


def _load_kernel(path: str):
    with open(path) as fh:
        return read_kernel(fh)


def _weight_fn(args) -> SubsetWeightFn:
    kernel = _load_kernel(args.kernel)
    d = kernel.n if args.d is None else args.d
    if not 1 <= d <= kernel.n:
        raise UsageError(f"--d must lie in [1, {kernel.n}]")
    return SubsetWeightFn.sqrt_det(kernel, d, args.alpha)


def cmd_gen_kernel(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be positive")
    spec = preset_kernel(args.n, args.spectrum, args.seed)
    if args.out == "-":
        write_kernel(spec, sys.stdout)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="\n") as fh:
            write_kernel(spec, fh)
    return 0


def cmd_sample(args) -> int:
    if args.steps < 0 or args.chains < 1:
        raise UsageError("--steps must be >= 0 and --chains >= 1")
    if not 0.0 < args.epsilon < 1.0:
        raise UsageError("--epsilon must lie in (0, 1)")
    ctx = ExtendedWeightCtx(_weight_fn(args))
    if args.init == "spread":
        if args.chains < 2:
            raise UsageError("--init spread needs at least two chains")
        chains = start_chains(ctx, args.seed, args.chains, (), args.proposal)
    else:
        chains = []
        for ss in chain_seeds(args.seed, args.chains):
            rng = make_rng(ss)
            S0 = random_initial_state(ctx, rng) if args.init == "random" else "greedy"
            chains.append(Chain(ctx, S0, rng, proposal=args.proposal))
    law = exact_distribution(ctx.base) if ctx.n <= BOUND_MAX_N and ctx.d >= 8 else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, chain in enumerate(chains):
        k0, lw0 = chain.k, chain.current_lw
        bound = _start_bound(law, ctx, chain.state, args.epsilon)
        ks, lws, acc, _ = chain.advance(args.steps)
        ks = np.concatenate([[k0], ks])
        stats = np.concatenate([[lw0], lws]) if args.statistic == "log_weight" else ks.astype(float)
        acc = np.concatenate([[False], acc])
        rows = ((t, int(ks[t]), float(stats[t]), int(acc[t])) for t in range(ks.size))
        write_csv(out / f"chain_{i}.csv", ["step", "k", "stat", "accepted"], rows)
        ground = sorted(int(x) for x in chain.state if x < ctx.n)
        print(json.dumps({"chain": i, "final_ground_set": ground,
                          "acceptance_rate": float(acc[1:].mean()) if args.steps else None,
                          "mixing_time_bound": bound}))
    return 0


def _start_bound(law, ctx, state, epsilon):
    """Mixing-time bound from the chain's start, or None without an exact partition function."""
    if law is None:
        return None
    ground = frozenset(x for x in state if x < ctx.n)
    p = law.get(ground, 0.0)
    if p <= 0.0:
        return None
    try:
        return diagnostics.mixing_time_bound(ctx.d, len(ground), math.log(p), epsilon)
    except ValueError:
        return None


def _read_trace(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "stat" not in reader.fieldnames:
            raise ValueError(f"{path}: missing 'stat' column")
        return np.array([float(row["stat"]) for row in reader])


def cmd_diagnose(args) -> int:
    if len(args.traces) < 2:
        raise UsageError("need at least two trace files")
    if args.check_every < 1 or args.burnin < 0:
        raise UsageError("--check-every must be positive and --burnin non-negative")
    traces = [_read_trace(p) for p in args.traces]
    report = diagnostics.empirical_mixing_time(traces, args.threshold, args.check_every,
                                               args.burnin, args.variant)
    write_psrf(Path(args.out), report)
    print(f"mixed_at={'none' if report.mixed_at is None else report.mixed_at}")
    return 0


def _exhaustive_gamma(fn, n) -> float:
    return max(0.0, greedy.weak_submodularity_gap(fn, n))


def cmd_optimize(args) -> int:
    nu = _weight_fn(args)
    n = nu.n
    k = nu.d_cap if args.k is None else args.k
    if args.algo != "double" and not 0 <= k <= nu.d_cap:
        raise UsageError(f"--k must lie in [0, {nu.d_cap}]")
    weight = nu.weight
    bound = None
    if args.algo == "brute":
        res = greedy.brute_force_opt(weight, n, k)
    elif args.algo == "distorted":
        if k < 1:
            raise UsageError("distorted greedy needs --k >= 1")
        gamma = (greedy.gamma_weak(nu.d_cap) if nu.d_cap >= 2 else 1.0) if args.gamma == "auto" else args.gamma
        res = greedy.distorted_greedy_log(nu, k)
        if n <= greedy.MAX_BRUTE_N:
            obj = greedy._log_objective(nu, k)
            opt = greedy.brute_force_opt(obj.rho, n, k).selected
            bound = greedy.log_distorted_greedy_bound(obj.eta(opt), obj.cost(opt), len(opt), gamma)
    elif args.algo == "monotone":
        gamma = _exhaustive_gamma(weight, n) if args.gamma == "auto" else args.gamma
        res = greedy.monotone_greedy(weight, n, k)
        if n <= greedy.MAX_BRUTE_N:
            opt = greedy.brute_force_opt(weight, n, k)
            bound = greedy.monotone_greedy_bound(opt.value, k, k, gamma) if k else 0.0
    else:
        if nu.d_cap < n:
            raise ValueError("double greedy needs weights defined on all subsets; drop --d")
        if args.runs < 1:
            raise UsageError("--runs must be positive")
        gamma = _exhaustive_gamma(weight, n) if args.gamma == "auto" else args.gamma
        runs = [greedy.double_greedy(weight, gamma, n, ss) for ss in chain_seeds(args.seed, args.runs)]
        res = runs[0]
        res = greedy.GreedyResult(res.selected, float(np.mean([r.value for r in runs])), res.trace)
        if n <= greedy.MAX_BRUTE_N:
            bound = greedy.double_greedy_bound(greedy.brute_force_opt(weight, n).value, n, gamma)
    value = float(res.value)
    print(json.dumps({
        "selected": res.sorted(),
        "value": value,
        "bound": bound,
        "bound_satisfied": None if bound is None else bool(value >= bound - 1e-9 * max(1.0, abs(bound))),
    }))
    return 0


def cmd_verify(args) -> int:
    with open(args.path) as fh:
        f = read_polynomial(fh)
    if args.homogenize is not None:
        f = polarize(scaled_homogenize(f, args.homogenize), args.homogenize)
    verdict = is_slc_homogeneous(f, args.tol)
    print(json.dumps(verdict.as_dict()))
    return 0


def _experiment_config(args, n, d_list, n_list=()) -> ExperimentConfig:
    return ExperimentConfig(
        n=n, d_list=d_list, alpha=args.alpha, spectrum_kind=args.spectrum, chains=args.chains,
        psrf_threshold=args.threshold, check_every=args.check_every, max_steps=args.max_steps,
        master_seed=args.seed, output_dir=args.out, statistic=args.statistic, burnin=args.burnin,
        variant=args.variant, n_list=list(n_list),
    )


def _print_mixing(label, results):
    for key, run in results.items():
        print(f"{label}={key} mixed_at={'none' if run.report.mixed_at is None else run.report.mixed_at}")


def cmd_figure1(args) -> int:
    cfg = _experiment_config(args, args.n, args.d)
    _print_mixing("d", figure1(cfg))
    return 0


def cmd_figure2(args) -> int:
    cfg = _experiment_config(args, max(args.n), [args.d], args.n)
    _print_mixing("n", figure2(cfg))
    return 0


def cmd_compare(args) -> int:
    cfg = _experiment_config(args, args.n, [args.d])
    for seed, mu, hd in compare_proposals(cfg, args.seeds):
        print(f"seed={seed} mixed_at_mu={mu} mixed_at_hd={hd}")
    return 0


COMMANDS = {
    "gen-kernel": cmd_gen_kernel,
    "sample": cmd_sample,
    "diagnose": cmd_diagnose,
    "optimize": cmd_optimize,
    "verify": cmd_verify,
    "figure1": cmd_figure1,
    "figure2": cmd_figure2,
    "compare-proposals": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_expand_config(argv))
    except UsageError as exc:
        parser.error(str(exc))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, OSError, IndexError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"slc: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
