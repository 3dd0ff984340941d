"""Mixing-time experiments: run chains until the PSRF falls below threshold.

Every run is a pure function of its arguments, so runs are farmed out to
worker processes (``SLC_THREADS``) and results come back in submission order.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import PsrfReport, checkpoints, psrf_curve
from .distributions import SPECTRUM_KINDS, ExtendedWeightCtx, SubsetWeightFn, preset_kernel
from .sampler import STATISTICS, Chain, chain_seeds, make_rng, random_initial_state, spread_sizes


@dataclass
class ExperimentConfig:
    n: int
    d_list: list[int]
    alpha: float = 1.0
    spectrum_kind: str = "smooth"
    chains: int = 3
    psrf_threshold: float = 1.05
    check_every: int = 1000
    max_steps: int = 10**6
    master_seed: int = 0
    output_dir: str = "."
    statistic: str = "log_weight"
    burnin: int = 0
    variant: str = "classic"
    n_list: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("need at least two chains")
        if self.spectrum_kind not in SPECTRUM_KINDS:
            raise ValueError(f"unknown spectrum {self.spectrum_kind!r}")
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")
        if self.check_every < 1 or self.max_steps < self.check_every:
            raise ValueError("need 1 <= check_every <= max_steps")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.burnin < 0:
            raise ValueError("burnin must be non-negative")


@dataclass
class MixingRun:
    report: PsrfReport
    steps: int


def worker_count() -> int:
    raw = os.environ.get("SLC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"SLC_THREADS must be an integer, got {raw!r}") from None


def parallel_map(fn, jobs):
    """``map`` over jobs, in worker processes when SLC_THREADS > 1."""
    jobs = list(jobs)
    workers = min(worker_count(), len(jobs))
    if workers <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def start_chains(ctx: ExtendedWeightCtx, seed: int, chains: int, key: tuple, proposal: str = "mu") -> list[Chain]:
    """Chains with independent streams and ground-set sizes spread over [0, top]."""
    out = []
    for size, ss in zip(spread_sizes(ctx, chains), chain_seeds(seed, chains, *key)):
        rng = make_rng(ss)
        S0 = random_initial_state(ctx, rng, size=size)
        out.append(Chain(ctx, S0, rng, proposal=proposal))
    return out


def run_until_mixed(chains: list[Chain], threshold: float = 1.05, check_every: int = 1000,
                    max_steps: int = 10**6, statistic: str = "log_weight", burnin: int = 0,
                    variant: str = "classic", block: int | None = None) -> MixingRun:
    """Advance all chains in blocks until a checkpoint's R-hat drops below threshold.

    Stops at the end of the block containing the first passing checkpoint, or
    at ``max_steps``.  The report covers every checkpoint computed.
    """
    if block is None:
        block = check_every * max(1, 10_000 // check_every)
    parts = [[_stat(c, statistic)] for c in chains]
    steps = 0
    report = PsrfReport([], threshold, None)
    while steps < max_steps:
        todo = min(block, max_steps - steps)
        for c, p in zip(chains, parts):
            ks, lws, _, _ = c.advance(todo)
            p.append(lws if statistic == "log_weight" else ks.astype(float))
        steps += todo
        X = np.vstack([np.concatenate(p) for p in parts])
        parts = [[row] for row in X]
        its = checkpoints(X.shape[1], check_every, burnin)
        if its.size:
            rhat = psrf_curve(X[:, burnin:], its - burnin, variant)
            report = PsrfReport.from_checkpoints(its, rhat, threshold)
            if report.mixed_at is not None:
                break
    return MixingRun(report, steps)


def _stat(chain: Chain, statistic: str) -> np.ndarray:
    return np.array([chain.current_lw if statistic == "log_weight" else float(chain.k)])


def mixing_run(n: int, d: int, cfg: ExperimentConfig, seed: int, key: tuple, proposal: str = "mu") -> MixingRun:
    kernel = preset_kernel(n, cfg.spectrum_kind, seed)
    ctx = ExtendedWeightCtx(SubsetWeightFn.sqrt_det(kernel, d, cfg.alpha))
    chains = start_chains(ctx, seed, cfg.chains, key, proposal)
    return run_until_mixed(chains, cfg.psrf_threshold, cfg.check_every, cfg.max_steps,
                           cfg.statistic, cfg.burnin, cfg.variant)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_psrf(path: Path, report: PsrfReport) -> None:
    write_csv(path, ["iteration", "rhat"], report.checkpoints)


def figure1(cfg: ExperimentConfig) -> dict[int, MixingRun]:
    """Mixing time against the cardinality cap d at fixed n."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for d in cfg.d_list:
        if not 1 <= d <= cfg.n:
            raise ValueError(f"d = {d} must lie in [1, n]")
    runs = parallel_map(mixing_run, [(cfg.n, d, cfg, cfg.master_seed, (d,)) for d in cfg.d_list])
    results = dict(zip(cfg.d_list, runs))
    for d, run in results.items():
        write_psrf(out / f"psrf_d{d}.csv", run.report)
    write_csv(out / "mixtime.csv", ["d", "mixed_at"], [(d, r.report.mixed_at) for d, r in results.items()])
    return results


def figure2(cfg: ExperimentConfig) -> dict[int, MixingRun]:
    """Mixing time against the ground set size n at a fixed cap d."""
    if len(cfg.d_list) != 1:
        raise ValueError("figure2 takes a single d")
    d = cfg.d_list[0]
    ns = cfg.n_list or [cfg.n]
    for n in ns:
        if d > n:
            raise ValueError(f"d = {d} exceeds n = {n}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = parallel_map(mixing_run, [(n, d, cfg, cfg.master_seed, (d, n)) for n in ns])
    results = dict(zip(ns, runs))
    for n, run in results.items():
        write_psrf(out / f"psrf_n{n}.csv", run.report)
    write_csv(out / "mixtime.csv", ["n", "mixed_at"], [(n, r.report.mixed_at) for n, r in results.items()])
    return results


def compare_proposals(cfg: ExperimentConfig, seeds, out_name: str = "compare.csv") -> list[tuple]:
    """Paired mixing times of the mu proposal and the plain H_d nu proposal.

    Both variants of a seed share the kernel and the chain streams.
    """
    if len(cfg.d_list) != 1:
        raise ValueError("compare-proposals takes a single d")
    d = cfg.d_list[0]
    if not 1 <= d <= cfg.n:
        raise ValueError(f"d = {d} must lie in [1, n]")
    seeds = list(seeds)
    jobs = [(cfg.n, d, cfg, s, (d,), p) for s in seeds for p in ("mu", "hd")]
    runs = parallel_map(mixing_run, jobs)
    rows = [(s, runs[2 * i].report.mixed_at, runs[2 * i + 1].report.mixed_at) for i, s in enumerate(seeds)]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / out_name, ["seed", "mixed_at_mu", "mixed_at_hd"], rows)
    return rows
