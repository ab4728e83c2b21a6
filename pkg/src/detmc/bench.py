"""Experiment driver: synthetic instances, phase-transition sweeps,
condition-number studies, and solver comparison tables.

Experiments are deterministic per (config, seed): trial seeds are spawned
from a master seed sequence, results are sorted before emission, and
wall-time columns are the only nondeterministic output.
"""

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ialm, metrics, pgd, scaled_pgd
from .errors import DivergenceError, ParameterError
from .graphs import bernoulli_mask, random_biregular
from .sampling import ground_truth_from_svd, observe

SUCCESS_THRESHOLD = 1e-6  # relative error defining a successful recovery


def synthetic_low_rank(n1, n2, r, cond, seed):
    """Random rank-r ground truth with a prescribed condition number.

    Gaussian factors are orthonormalized by QR and the spectrum is spaced
    geometrically from ``cond`` down to 1.  The achieved coherence is
    whatever the random subspaces give; it is recorded, not targeted.
    """
    if r > min(n1, n2):
        raise ParameterError(f"rank {r} exceeds min dimension")
    if cond < 1:
        raise ParameterError("condition number must be at least 1")
    rng = np.random.default_rng(seed)
    U = np.linalg.qr(rng.standard_normal((n1, r)))[0]
    V = np.linalg.qr(rng.standard_normal((n2, r)))[0]
    S = cond ** np.linspace(1.0, 0.0, r) if r > 1 else np.array([float(cond)])
    return ground_truth_from_svd(U, S, V)


@dataclass
class ExperimentConfig:
    n1: int = 512
    n2: int = 512
    r: int = 3
    r_list: tuple = ()  # per-rank sweeps; defaults to (r,)
    kappa_list: tuple = (1.0, 5.0, 10.0)
    degrees: tuple = (8, 10, 12, 16, 24, 36)
    trials: int = 20
    tol: float = 1e-4
    solvers: tuple = ("ialm", "pgd", "scaled-pgd")
    seed: int = 0
    eta: float | None = None  # solver default when None
    lam: float = 0.5
    max_iter: int = 2000
    threads: int = 1
    success_threshold: float = SUCCESS_THRESHOLD
    eval_every: int = 1
    stall_window: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        degs = tuple(self.degrees)
        if any(b <= a for a, b in zip(degs, degs[1:])):
            raise ParameterError("sweep values must be strictly increasing")
        if not self.r_list:
            self.r_list = (self.r,)


@dataclass
class TrialRecord:
    solver: str
    graph: str
    seed: int
    success: bool
    iterations: int
    wall_seconds: float
    final_rel_error: float
    fitted_rate: float = float("nan")


def _solver_config(name, cfg, log_dist=False, max_iter=None):
    max_iter = max_iter if max_iter is not None else cfg.max_iter
    if name == "pgd":
        kw = {"max_iter": max_iter, "tol": cfg.tol, "lam": cfg.lam,
              "log_dist": log_dist, "eval_every": cfg.eval_every,
              "stall_window": cfg.stall_window}
        if cfg.eta is not None:
            kw["eta"] = cfg.eta
        return pgd.PgdConfig(**kw)
    if name == "scaled-pgd":
        kw = {"max_iter": max_iter, "tol": cfg.tol, "log_dist": log_dist,
              "eval_every": cfg.eval_every, "stall_window": cfg.stall_window}
        if cfg.eta is not None:
            kw["eta"] = cfg.eta
        return scaled_pgd.ScaledPgdConfig(**kw)
    if name == "ialm":
        return ialm.IalmConfig(max_iter=max_iter, tol=cfg.tol)
    raise ParameterError(f"unknown solver {name!r}")


def run_trial(solver, obs, r, gt, cfg, log_dist=False, max_iter=None):
    """One solver run wrapped into a TrialRecord (plus the trace)."""
    sconf = _solver_config(solver, cfg, log_dist=log_dist, max_iter=max_iter)
    try:
        if solver == "pgd":
            _, trace = pgd.solve(obs, r, sconf, gt=gt)
        elif solver == "scaled-pgd":
            _, trace = scaled_pgd.solve(obs, r, sconf, gt=gt)
        else:
            _, trace = ialm.solve(obs, sconf, gt=gt)
        diverged = False
    except DivergenceError as exc:
        trace = exc.trace
        diverged = True
    rel = trace.final_rel_error
    record = TrialRecord(
        solver=solver,
        graph="",
        seed=-1,
        success=(not diverged) and rel < cfg.success_threshold,
        iterations=trace.iterations[-1] if trace.iterations else 0,
        wall_seconds=trace.solver_seconds,
        final_rel_error=rel,
    )
    return record, trace


# ---------------------------------------------------------------------------
# phase transition (deterministic vs Bernoulli sampling)
# ---------------------------------------------------------------------------


def run_phase_transition(cfg, solver="pgd", kappa=1.0):
    """Success-ratio sweep over sampling rates for certified-graph vs
    Bernoulli sampling.  Returns rows (sampler, p, success_ratio, mean_iters).
    """
    rows = []
    for d in cfg.degrees:
        try:
            graph = random_biregular(
                cfg.n1, cfg.n2, d, seed=np.random.SeedSequence((cfg.seed, d)).entropy
            )
        except ParameterError as exc:
            warnings.warn(f"skipping degree {d}: {exc}")
            rows.append({"sampler": "skipped", "p": d / cfg.n2,
                         "success_ratio": float("nan"), "mean_iters": float("nan")})
            continue
        p = graph.rate

        def one_trial(args):
            sampler, t = args
            ss = np.random.SeedSequence((cfg.seed, d, t))
            gt_seed, mask_seed = ss.spawn(2)
            gt = synthetic_low_rank(cfg.n1, cfg.n2, cfg.r, kappa, gt_seed)
            if sampler == "deterministic":
                pattern = graph
            else:
                pattern = bernoulli_mask(cfg.n1, cfg.n2, p, mask_seed)
            obs = observe(gt.matrix, pattern)
            trial_cfg = ExperimentConfig(
                n1=cfg.n1, n2=cfg.n2, r=cfg.r, trials=1,
                tol=cfg.success_threshold, seed=cfg.seed, eta=cfg.eta,
                lam=cfg.lam, max_iter=cfg.max_iter,
                success_threshold=cfg.success_threshold,
                eval_every=cfg.eval_every,
                stall_window=cfg.stall_window,
            )
            rec, _ = run_trial(solver, obs, cfg.r, gt, trial_cfg)
            return sampler, rec

        tasks = [(s, t) for s in ("deterministic", "bernoulli") for t in range(cfg.trials)]
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(one_trial, tasks))
        else:
            results = [one_trial(task) for task in tasks]

        for sampler in ("deterministic", "bernoulli"):
            recs = [r for s, r in results if s == sampler]
            rows.append({
                "sampler": sampler,
                "p": p,
                "success_ratio": sum(r.success for r in recs) / len(recs),
                "mean_iters": float(np.mean([r.iterations for r in recs])),
            })
    return rows


# ---------------------------------------------------------------------------
# condition-number convergence study
# ---------------------------------------------------------------------------


def run_convergence_comparison(cfg, degree=60, solvers=("pgd", "scaled-pgd")):
    """Full error traces per (solver, kappa, r) plus fitted per-iteration rates.

    Returns (trace_rows, rate_rows); trace rows are long-format
    (solver, kappa, r, iter, rel_error).
    """
    trace_rows = []
    rate_rows = []
    for r in cfg.r_list:
        for kappa in cfg.kappa_list:
            ss = np.random.SeedSequence((cfg.seed, int(10 * kappa), r))
            gt_seed, graph_seed = ss.spawn(2)
            gt = synthetic_low_rank(cfg.n1, cfg.n2, r, kappa, gt_seed)
            graph = random_biregular(cfg.n1, cfg.n2, degree, seed=graph_seed.entropy)
            obs = observe(gt.matrix, graph)
            for solver in solvers:
                rec, trace = run_trial(solver, obs, r, gt, cfg)
                errs = np.asarray(trace.rel_error)
                for k, e in zip(trace.iterations, errs):
                    trace_rows.append({
                        "solver": solver, "kappa": kappa, "r": r,
                        "iter": k, "rel_error": e,
                    })
                # fit on the geometric decay band, skipping the initial
                # transient and the numerical floor
                keep = np.isfinite(errs) & (errs > 1e-10) & (errs < 1e-2)
                window = errs[keep]
                rate = metrics.fit_linear_rate(window) if window.size >= 5 else float("nan")
                iters_to_tol = trace.iterations_to(cfg.tol)
                rate_rows.append({
                    "solver": solver, "kappa": kappa, "r": r,
                    "rate": rate,
                    "iters_to_tol": -1 if iters_to_tol is None else iters_to_tol,
                    "final_rel_error": rec.final_rel_error,
                })
    return trace_rows, rate_rows


# ---------------------------------------------------------------------------
# solver comparison table
# ---------------------------------------------------------------------------


def run_solver_comparison(cfg, kappa=1.0):
    """Mean iterations / wall seconds per (solver, rank, degree).

    The same ground truths and graph are shared across solvers at each
    sweep point; timing runs execute serially.
    """
    rows = []
    for r in cfg.r_list:
        for d in cfg.degrees:
            graph = random_biregular(
                cfg.n1, cfg.n2, d,
                seed=np.random.SeedSequence((cfg.seed, 1000 + d)).entropy,
            )
            obs_list = []
            for t in range(cfg.trials):
                gt = synthetic_low_rank(
                    cfg.n1, cfg.n2, r, kappa,
                    np.random.SeedSequence((cfg.seed, d, r, t)),
                )
                obs_list.append((gt, observe(gt.matrix, graph)))
            for solver in cfg.solvers:
                recs = []
                for gt, obs in obs_list:
                    rec, _ = run_trial(solver, obs, r, gt, cfg)
                    recs.append(rec)
                rows.append({
                    "solver": solver,
                    "rank": r,
                    "degree": d,
                    "p": graph.rate,
                    "mean_iters": float(np.mean([x.iterations for x in recs])),
                    "mean_wall_seconds": float(np.mean([x.wall_seconds for x in recs])),
                    "std_wall_seconds": float(np.std([x.wall_seconds for x in recs])),
                    "mean_rel_error": float(np.mean([x.final_rel_error for x in recs])),
                    "trials": cfg.trials,
                })
    return rows


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def write_csv(rows, path, drop=()):
    """Write dict rows as CSV; column order follows the first row."""
    if not rows:
        raise ParameterError("no rows to write")
    fields = [k for k in rows[0] if k not in drop]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fields])


def write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
