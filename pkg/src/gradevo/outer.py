"""Outer optimisation loop: Adam over tape params, LR plateau scheduling,
and the generation loop shared by classical and differentiable runs.

One outer iteration is one inner generation: build the generation graph,
backpropagate the generation loss, step every trainable slot with Adam,
adjust the learning rate on stagnation, then commit the stepped state. A
run over ``max_evals`` evaluations performs exactly
ceil(max_evals / pop_size) generations of pop_size evaluations each; the
lazy initial-population evaluation happens before the loop and is not part
of that count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tape import Param


class Adam:
    """Adam with bias correction over named tape params.

    ``step()`` applies the update in place and remembers each slot's
    displacement so the commit phase can replay it on top of a staged
    candidate. A missing gradient counts as zero (the slot keeps its value);
    a non-finite gradient is an error naming the parameter.
    """

    def __init__(self, params, lr: float = 0.01, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params: list[Param] = list(params)
        if lr < 0.0:
            raise ValueError(f"learning rate must be >= 0, got {lr}")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = {p.name: np.zeros_like(p.raw.value) for p in self.params}
        self._v = {p.name: np.zeros_like(p.raw.value) for p in self.params}
        self._last_delta = {}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p in self.params:
            g = p.raw.grad
            if g is None:
                g = np.zeros_like(p.raw.value)
            if not np.all(np.isfinite(g)):
                raise RuntimeError(
                    f"non-finite gradient for parameter {p.name!r}"
                )
            m = self._m[p.name] = b1 * self._m[p.name] + (1.0 - b1) * g
            v = self._v[p.name] = b2 * self._v[p.name] + (1.0 - b2) * (g * g)
            delta = -self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.raw.value = p.raw.value + delta
            self._last_delta[p.name] = delta

    def delta(self, name: str, shape=None) -> np.ndarray:
        """Displacement applied to ``name`` by the most recent step."""
        if name in self._last_delta:
            return self._last_delta[name]
        if shape is None:
            raise KeyError(f"no recorded step for parameter {name!r}")
        return np.zeros(shape)


class PlateauScheduler:
    """Halve the learning rate after ``patience`` non-improving generations.

    Improvement means the monitored value drops below the best seen by more
    than ``tol``; anything smaller counts as no improvement. The learning
    rate never goes below ``min_lr``.
    """

    def __init__(self, optimizer: Adam, patience: int = 100,
                 factor: float = 0.5, min_lr: float = 1e-5,
                 tol: float = 1e-12):
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {factor}")
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.optimizer = optimizer
        self.patience = int(patience)
        self.factor = float(factor)
        self.min_lr = float(min_lr)
        self.tol = float(tol)
        self.best = math.inf
        self.bad = 0

    def step(self, metric: float) -> float:
        if metric < self.best - self.tol:
            self.best = float(metric)
            self.bad = 0
        else:
            self.bad += 1
            if self.bad >= self.patience:
                self.optimizer.lr = max(
                    self.optimizer.lr * self.factor, self.min_lr
                )
                self.bad = 0
        return self.optimizer.lr


@dataclass
class RunRecord:
    """One generation's bookkeeping row."""

    run: int
    generation: int
    n_evals: int
    best_fitness: float
    lr: float
    hyper: dict = field(default_factory=dict)


def run_loop(algo, problem, max_evals: int, optimizer: Adam = None,
             scheduler: PlateauScheduler = None, run: int = 0):
    """Drive ``algo`` for ceil(max_evals / pop_size) generations.

    Works for both classical algorithms (plain ``generation()`` calls) and
    differentiable ones (zero_grad / backward / step / commit / reset per
    generation). Returns (records, error): on an exception the records
    collected so far come back along with a short failure marker, otherwise
    error is None.
    """
    if max_evals < 1:
        raise ValueError(f"max_evals must be >= 1, got {max_evals}")
    n_gens = math.ceil(max_evals / algo.pop_size)
    is_diff = hasattr(algo, "tape")
    records: list[RunRecord] = []

    init = getattr(algo, "_ensure_init", None)
    if init is not None:
        init()
    offset = problem.n_evals

    try:
        for g in range(n_gens):
            if is_diff:
                algo.tape.zero_grad()
                loss = algo.generation()
                algo.tape.backward(loss)
                if optimizer is not None:
                    optimizer.step()
                if scheduler is not None:
                    scheduler.step(algo.current_best())
                algo.update_state(optimizer)
                algo.tape.reset()
                best = algo.best_fitness
            else:
                best = algo.generation()
            lr = optimizer.lr if optimizer is not None else 0.0
            records.append(
                RunRecord(run, g, problem.n_evals - offset, float(best),
                          float(lr), algo.hyperparams())
            )
    except Exception as exc:  # partial records plus a marker
        return records, f"{type(exc).__name__}: {exc}"
    return records, None
