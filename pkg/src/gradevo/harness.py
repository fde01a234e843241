"""Experiment orchestration: configs, seeded runs, CSV and figure output.

An experiment is `runs` independent seeded optimizations of one algorithm
on one problem. Each run writes a per-generation CSV, the experiment
writes one summary CSV and a timing log (wall time stays out of the CSVs
so identical seeds give byte-identical data files). Per-run seed is
base seed + run index, so scheduling order cannot change results.
"""

from __future__ import annotations

import csv
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .classic import ClassicCmaes, ClassicDe, ClassicGa, ClassicPso
from .diffevo import ALGORITHMS as DIFF_ALGORITHMS
from .diffevo import DiffConfig
from .outer import Adam, PlateauScheduler, RunRecord, run_loop
from .plots import SummaryStats, summary_stats
from .problems import Problem, benchmark_names, make_problem
from .relax import RelaxConfig, Rng
from .wine import MlpSpec, WineProblem, mlp_forward, mse_loss, write_synthetic_wine

ENV_OUTDIR = "GRADEVO_OUTDIR"

CLASSIC_ALGORITHMS = {
    "pso": ClassicPso,
    "ga": ClassicGa,
    "de": ClassicDe,
    "cmaes": ClassicCmaes,
}
# "adam" trains the wine network by plain backprop; it is the baseline arm
# of the regression comparison, not an evolutionary algorithm.
ALGO_NAMES = tuple(CLASSIC_ALGORITHMS) + tuple(DIFF_ALGORITHMS) + ("adam",)


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, flat so it pickles to workers."""

    algo: str = "cmaes-diff"
    problem: str = "sphere"
    dim: int = 30
    pop: int = 100
    budget: int = 150000
    runs: int = 5
    seed: int = 0
    lr: float = 0.01
    loss: str = "best"
    tau: float = 1.0
    sigma0: float = 0.0          # 0 means the algorithm's default
    variant: str = "rand1"
    elitism: bool = True
    hard_masks: bool = True
    hard_selection: bool = False
    patience: int = 100
    lr_factor: float = 0.5
    min_lr: float = 1e-5
    lo: float = -100.0
    hi: float = 100.0
    wine_data: str = ""          # empty -> bundled synthetic table
    out_dir: str = ""            # empty -> $GRADEVO_OUTDIR or cwd
    workers: int = 1
    label: str = ""

    def __post_init__(self):
        if self.algo not in ALGO_NAMES:
            raise ValueError(
                f"unknown algorithm {self.algo!r}; choose from {ALGO_NAMES}"
            )
        known = benchmark_names() + ("wine",)
        if self.problem not in known:
            raise ValueError(
                f"unknown problem {self.problem!r}; choose from {known}"
            )
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.pop < 1:
            raise ValueError(f"pop must be >= 1, got {self.pop}")
        if self.budget < self.pop:
            raise ValueError(
                f"budget must be >= pop ({self.pop}), got {self.budget}"
            )
        if self.lr < 0.0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.tau <= 0.0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.loss not in ("best", "mean"):
            raise ValueError(f"loss must be 'best' or 'mean', got {self.loss!r}")
        if self.algo == "adam" and self.problem != "wine":
            raise ValueError("the adam arm only applies to the wine problem")

    def resolved_label(self) -> str:
        if self.label:
            return self.label
        if self.problem == "wine":
            return f"{self.algo}-wine"
        return f"{self.algo}-{self.problem}-d{self.dim}"


_DEFAULTS = ExperimentConfig()


def _coerce(key: str, text: str):
    cur = getattr(_DEFAULTS, key)
    if isinstance(cur, bool):           # bool before int: bool is an int
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean for {key!r}, got {text!r}")
    if isinstance(cur, int):
        return int(text)
    if isinstance(cur, float):
        return float(text)
    return text


def parse_config_file(path: str) -> dict:
    """Flat key=value text, ``#`` comments; returns coerced overrides."""
    names = {f.name for f in fields(ExperimentConfig)}
    vals: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, text = (part.strip() for part in line.split("=", 1))
            if key not in names:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            vals[key] = _coerce(key, text)
    return vals


def synthetic_wine_path() -> str:
    """Materialize the bundled synthetic wine table once per machine."""
    path = Path(tempfile.gettempdir()) / "gradevo-synthetic-wine.csv"
    if not path.exists():
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".csv")
        os.close(fd)
        write_synthetic_wine(tmp)
        os.replace(tmp, path)           # atomic; content is deterministic
    return str(path)


def build_problem(cfg: ExperimentConfig) -> Problem:
    if cfg.problem == "wine":
        path = cfg.wine_data or synthetic_wine_path()
        # the perturbed targets are part of the dataset: one noise draw per
        # experiment (keyed on the base seed), shared by every run and arm
        return WineProblem.from_file(path, noise_seed=cfg.seed)
    return make_problem(cfg.problem, cfg.dim, cfg.lo, cfg.hi)


def build_algo(cfg: ExperimentConfig, problem: Problem, seed: int):
    rng = Rng(seed)
    if cfg.algo == "pso":
        return ClassicPso(problem, cfg.pop, rng)
    if cfg.algo == "ga":
        return ClassicGa(problem, cfg.pop, rng)
    if cfg.algo == "de":
        return ClassicDe(problem, cfg.pop, rng, variant=cfg.variant)
    if cfg.algo == "cmaes":
        return ClassicCmaes(problem, cfg.pop, rng, sigma0=cfg.sigma0 or None)
    dc = DiffConfig(
        loss=cfg.loss,
        relax=RelaxConfig(tau=cfg.tau, hard_masks=cfg.hard_masks,
                          hard_selection=cfg.hard_selection),
        elitism=cfg.elitism,
    )
    cls = DIFF_ALGORITHMS[cfg.algo]
    if cfg.algo == "de-diff":
        return cls(problem, cfg.pop, rng, dc, variant=cfg.variant)
    if cfg.algo == "cmaes-diff":
        return cls(problem, cfg.pop, rng, dc, sigma0=cfg.sigma0 or None)
    return cls(problem, cfg.pop, rng, dc)


def _run_adam(cfg: ExperimentConfig, problem: WineProblem, seed: int,
              run_idx: int):
    """Backprop baseline: full-batch Adam on the wine network.

    One epoch = one gradient step on the whole table; epochs play the role
    of fitness evaluations in the records so the arms share a budget axis.
    """
    from .tape import Tape

    rng = Rng(seed)
    tape = Tape()
    theta = tape.param("theta", problem.domain.sample(rng, 1))
    opt = Adam(tape.params, lr=cfg.lr)
    spec: MlpSpec = problem.spec
    targets = problem.targets.reshape(-1, 1)
    records: list[RunRecord] = []
    best = math.inf
    try:
        for epoch in range(cfg.budget):
            tape.zero_grad()
            feats = tape.constant(problem.features)
            targ = tape.constant(targets)
            pred = mlp_forward(tape, theta.read(), feats, spec)
            loss = mse_loss(tape, pred, targ)
            tape.backward(loss)
            opt.step()
            best = min(best, float(loss.value[0, 0]))
            records.append(
                RunRecord(run_idx, epoch, epoch + 1, best, opt.lr, {})
            )
            tape.reset()
    except Exception as exc:
        return records, f"{type(exc).__name__}: {exc}"
    return records, None


def run_single(cfg: ExperimentConfig, run_idx: int):
    """One seeded run; module-level so process pools can import it."""
    seed = cfg.seed + run_idx
    problem = build_problem(cfg)
    if cfg.algo == "adam":
        records, err = _run_adam(cfg, problem, seed, run_idx)
        return run_idx, records, err
    algo = build_algo(cfg, problem, seed)
    opt = sched = None
    if cfg.algo in DIFF_ALGORITHMS:
        opt = Adam(algo.tape.params, lr=cfg.lr)
        sched = PlateauScheduler(opt, patience=cfg.patience,
                                 factor=cfg.lr_factor, min_lr=cfg.min_lr)
    records, err = run_loop(algo, problem, cfg.budget, opt, sched, run=run_idx)
    return run_idx, records, err


def _fnum(x) -> str:
    # repr round-trips doubles exactly, keeping CSVs byte-stable per seed
    return repr(float(x))


def write_run_csv(path, records: list) -> None:
    hyper_keys = list(records[0].hyper.keys()) if records else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "generation", "n_evals", "best_fitness", "lr"]
                   + hyper_keys)
        for r in records:
            w.writerow(
                [r.run, r.generation, r.n_evals, _fnum(r.best_fitness),
                 _fnum(r.lr)] + [_fnum(r.hyper[k]) for k in hyper_keys]
            )


_SUMMARY_FIELDS = ("label", "algo", "problem", "dim", "pop", "budget",
                   "runs", "seed", "mean", "std", "median", "min", "max",
                   "q1", "q3", "failed")


def write_summary_csv(path, cfg: ExperimentConfig, stats: SummaryStats,
                      failed: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_SUMMARY_FIELDS)
        w.writerow([
            cfg.resolved_label(), cfg.algo, cfg.problem, cfg.dim, cfg.pop,
            cfg.budget, cfg.runs, cfg.seed, _fnum(stats.mean),
            _fnum(stats.std), _fnum(stats.median), _fnum(stats.min),
            _fnum(stats.max), _fnum(stats.q1), _fnum(stats.q3), failed,
        ])


def experiment_dir(cfg: ExperimentConfig) -> Path:
    root = Path(cfg.out_dir or os.environ.get(ENV_OUTDIR, "") or os.getcwd())
    return root / cfg.resolved_label()


def run_experiment(cfg: ExperimentConfig, quiet: bool = False):
    """Execute all runs, write CSVs and timing, return (stats, exp_dir).

    A failed run still writes its partial CSV and is excluded from the
    summary (with a warning); only a fully failed experiment raises.
    """
    exp_dir = experiment_dir(cfg)
    exp_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    results: dict[int, tuple[list, object]] = {}
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(run_single, cfg, i) for i in range(cfg.runs)]
            for fut in futures:
                idx, records, err = fut.result()
                results[idx] = (records, err)
    else:
        for i in range(cfg.runs):
            idx, records, err = run_single(cfg, i)
            results[idx] = (records, err)
    wall = time.perf_counter() - t0

    finals = []
    failures = []
    for i in range(cfg.runs):
        records, err = results[i]
        write_run_csv(exp_dir / f"run_{i:03d}.csv", records)
        if err is not None or not records:
            failures.append((i, err or "no records"))
        else:
            finals.append(records[-1].best_fitness)

    for i, err in failures:
        print(f"warning: run {i} of {cfg.resolved_label()} failed: {err}",
              file=sys.stderr)
    if not finals:
        raise RuntimeError(
            f"all {cfg.runs} runs of {cfg.resolved_label()} failed; "
            f"first error: {failures[0][1]}"
        )

    stats = summary_stats(finals)
    write_summary_csv(exp_dir / "summary.csv", cfg, stats, len(failures))
    with open(exp_dir / "timing.log", "w") as fh:
        fh.write(f"wall_seconds={wall:.3f}\n")
        fh.write(f"completed={len(finals)} failed={len(failures)}\n")
    if not quiet:
        print(
            f"{cfg.resolved_label()}: mean={stats.mean:.6g} "
            f"std={stats.std:.6g} median={stats.median:.6g} "
            f"min={stats.min:.6g} max={stats.max:.6g} "
            f"({len(finals)}/{cfg.runs} runs, {wall:.1f}s)"
        )
    return stats, exp_dir


def load_run_csv(path):
    """Read one per-run CSV back as (header, rows as float array)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(cell) for cell in row] for row in reader]
    return header, np.array(rows, dtype=float)


def load_experiment(exp_dir):
    """Collect an experiment directory into (label, evals, curves, finals).

    ``evals`` is the shared n_evals axis (truncated to the shortest run),
    ``curves`` the (runs, G) best-fitness matrix, ``finals`` the last
    best fitness of each completed run.
    """
    exp_dir = Path(exp_dir)
    run_files = sorted(exp_dir.glob("run_*.csv"))
    if not run_files:
        raise FileNotFoundError(f"no run CSVs under {exp_dir}")
    label = exp_dir.name
    summary = exp_dir / "summary.csv"
    if summary.exists():
        with open(summary, newline="") as fh:
            reader = csv.reader(fh)
            head = next(reader)
            row = next(reader)
            label = row[head.index("label")]
    series = []
    evals = None
    for rf in run_files:
        header, rows = load_run_csv(rf)
        if rows.size == 0:
            continue
        series.append(rows[:, header.index("best_fitness")])
        e = rows[:, header.index("n_evals")]
        evals = e if evals is None or len(e) < len(evals) else evals
    if not series:
        raise ValueError(f"every run CSV under {exp_dir} is empty")
    g = min(len(s) for s in series)
    curves = np.stack([s[:g] for s in series])
    finals = np.array([s[-1] for s in series])
    return label, np.asarray(evals)[:g], curves, finals
