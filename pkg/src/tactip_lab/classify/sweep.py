"""Accuracy as a function of the stack length T, averaged over seeded trials."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

THREADS_ENV = "TACTIP_LAB_THREADS"


def worker_count(default: int = 1) -> int:
    """Worker cap from TACTIP_LAB_THREADS (ignored when unset or not a positive integer)."""
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return default
    return n if n > 0 else default


@dataclass
class SweepRow:
    T: int
    accuracies: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    seed: int = 0

    def means(self) -> np.ndarray:
        return np.array([r.mean for r in self.rows])

    def row(self, T: int) -> SweepRow:
        for r in self.rows:
            if r.T == T:
                return r
        raise KeyError(T)

    def spearman(self) -> float:
        """Rank correlation between T and mean accuracy (nan when undefined)."""
        if len(self.rows) < 2:
            return float("nan")
        res = spearmanr([r.T for r in self.rows], self.means())
        return float(res.statistic)

    def to_csv(self) -> str:
        lines = ["T,mean,std,trials"]
        for r in self.rows:
            lines.append(f"{r.T},{r.mean:.6f},{r.std:.6f},{len(r.accuracies)}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def trial_seed(seed: int, trial: int) -> int:
    return seed + trial


def t_sweep(run, T_values=range(1, 11), trials: int = 20, seed: int = 0,
            workers: int | None = None) -> SweepResult:
    """Call ``run(T, trial_seed)`` for every T and trial and collect accuracies.

    Runs are independent, so they may execute on a thread pool; results are
    placed by (T, trial) and do not depend on completion order.
    """
    T_values = [int(t) for t in T_values]
    if any(t < 1 for t in T_values):
        raise ValueError("T values must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(t, k) for t in T_values for k in range(trials)]
    n = workers if workers is not None else worker_count()

    def one(job):
        t, k = job
        return float(run(t, trial_seed(seed, k)))

    if n > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            acc = list(pool.map(one, jobs))
    else:
        acc = [one(j) for j in jobs]
    grid = np.array(acc).reshape(len(T_values), trials)
    return SweepResult([SweepRow(t, list(grid[i])) for i, t in enumerate(T_values)], seed)
