"""Classical population algorithms: PSO, real-coded GA, DE and CMA-ES.

These are the plain, non-differentiable references. They share a calling
convention with the differentiable variants: construct with a problem, a
population size and an Rng, then call ``generation()`` repeatedly; each call
costs exactly ``pop_size`` evaluations. The initial population evaluation
(PSO/GA/DE) happens lazily on the first generation and is not part of that
per-generation count.

``generation(noise=...)`` accepts a dict produced by ``draw_noise()`` so
tests can freeze or share the stochastic draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .problems import Problem
from .relax import Rng


@dataclass(frozen=True)
class CmaConstants:
    """Strategy constants shared by the classical and learnable CMA-ES.

    Derived from the standard log-rank recombination weights over the top
    half of the population; these stay fixed even when recombination itself
    uses learned weights, keeping the path time-scales well behaved.
    """

    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    chi_n: float


def cma_constants(dim: int, lam: int) -> CmaConstants:
    mu = lam // 2
    w = np.log((lam + 1) / 2.0) - np.log(np.arange(1, mu + 1))
    weights = w / w.sum()
    me = float(1.0 / np.sum(weights**2))
    c_sigma = (me + 2.0) / (dim + me + 5.0)
    d_sigma = (
        1.0 + 2.0 * max(0.0, math.sqrt((me - 1.0) / (dim + 1.0)) - 1.0) + c_sigma
    )
    c_c = (4.0 + me / dim) / (dim + 4.0 + 2.0 * me / dim)
    c_1 = 2.0 / ((dim + 1.3) ** 2 + me)
    c_mu = min(1.0 - c_1, 2.0 * (me - 2.0 + 1.0 / me) / ((dim + 2.0) ** 2 + me))
    chi_n = math.sqrt(dim) * (1.0 - 1.0 / (4.0 * dim) + 1.0 / (21.0 * dim * dim))
    return CmaConstants(mu, weights, me, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n)


def tournament_select(fit: np.ndarray, rng: Rng, k: int) -> int:
    """Index of the tournament winner: k entrants drawn without replacement,
    lowest fitness wins, earlier entrant wins ties."""
    n = fit.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"tournament size {k} out of range for population {n}")
    order = rng.permutation(n)[:k]
    return int(order[np.argmin(fit[order])])


def cholesky_with_jitter(C: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor with escalating diagonal jitter.

    Starts at 1e-12 * trace(C)/d and multiplies by 10 for up to 6 retries
    before giving up with a diagnostic error.
    """
    d = C.shape[0]
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-12 * max(np.trace(C), 1e-300) / d
    eye = np.eye(d)
    for _ in range(6):
        try:
            return np.linalg.cholesky(C + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise RuntimeError(
        f"covariance factorization failed at jitter {jitter:.3e}; "
        "matrix is badly conditioned or not symmetric"
    )


class ClassicPso:
    """Global-best particle swarm with inertia weight.

    v' = omega v + c1 r1 (pbest - x) + c2 r2 (gbest - x), then x' = x + v'.
    Velocities clamp to +-velocity_clamp times the box width per dimension;
    positions clamp to the box.
    """

    name = "pso"

    def __init__(self, problem: Problem, pop_size: int, rng: Rng,
                 omega: float = 0.7298, c1: float = 1.49618, c2: float = 1.49618,
                 velocity_clamp: float = 0.2, init=None):
        self.problem = problem
        self.pop_size = int(pop_size)
        self.rng = rng
        self.omega = float(omega)
        self.c1 = float(c1)
        self.c2 = float(c2)
        dom = problem.domain
        self.vmax = velocity_clamp * dom.width
        self.X = dom.clip(np.array(init, dtype=float)) if init is not None \
            else dom.sample(rng, self.pop_size)
        self.V = np.zeros_like(self.X)
        self._initialised = False
        self.pbest = None
        self.pfit = None
        self.best_x = None
        self.best_fitness = math.inf

    def _ensure_init(self):
        if self._initialised:
            return
        fit = self.problem.eval_array(self.X)
        self.pbest = self.X.copy()
        self.pfit = fit.copy()
        b = int(np.argmin(fit))
        self.best_x = self.X[b].copy()
        self.best_fitness = float(fit[b])
        self._initialised = True

    def draw_noise(self) -> dict:
        n, d = self.X.shape
        return {"r1": self.rng.uniform(n, d), "r2": self.rng.uniform(n, d)}

    def hyperparams(self) -> dict:
        return {"omega": self.omega, "c1": self.c1, "c2": self.c2}

    def generation(self, noise: dict = None) -> float:
        self._ensure_init()
        if noise is None:
            noise = self.draw_noise()
        dom = self.problem.domain
        self.X, self.V = kernels.pso_step(
            self.X, self.V, self.pbest, self.best_x,
            noise["r1"], noise["r2"], self.omega, self.c1, self.c2,
            self.vmax, dom.lower, dom.upper,
        )
        fit = self.problem.eval_array(self.X)
        better = fit < self.pfit
        self.pbest[better] = self.X[better]
        self.pfit[better] = fit[better]
        b = int(np.argmin(self.pfit))
        if self.pfit[b] < self.best_fitness:
            self.best_fitness = float(self.pfit[b])
            self.best_x = self.pbest[b].copy()
        return self.best_fitness


class ClassicGa:
    """Generational real-coded GA: tournament selection, SBX, polynomial
    mutation, single elite.

    Each generation builds pop_size offspring (one SBX child per offspring
    slot; the crossover gate fires per offspring) and the incumbent best
    replaces the worst offspring, so the best fitness never increases and
    each generation costs exactly pop_size evaluations.
    """

    name = "ga"

    def __init__(self, problem: Problem, pop_size: int, rng: Rng,
                 crossover_rate: float = 0.9, mutation_rate: float = None,
                 eta_c: float = 15.0, eta_m: float = 20.0,
                 k_tournament: int = 2, init=None):
        self.problem = problem
        self.pop_size = int(pop_size)
        self.rng = rng
        self.crossover_rate = float(crossover_rate)
        self.mutation_rate = (
            1.0 / problem.dim if mutation_rate is None else float(mutation_rate)
        )
        self.eta_c = float(eta_c)
        self.eta_m = float(eta_m)
        self.k_tournament = int(k_tournament)
        dom = problem.domain
        self.X = dom.clip(np.array(init, dtype=float)) if init is not None \
            else dom.sample(rng, self.pop_size)
        self.fit = None
        self.best_x = None
        self.best_fitness = math.inf
        self._initialised = False

    def _ensure_init(self):
        if self._initialised:
            return
        self.fit = self.problem.eval_array(self.X)
        b = int(np.argmin(self.fit))
        self.best_x = self.X[b].copy()
        self.best_fitness = float(self.fit[b])
        self._initialised = True

    def draw_noise(self) -> dict:
        self._ensure_init()
        n, d = self.X.shape
        parents = np.empty((n, 2), dtype=np.int64)
        for i in range(n):
            parents[i, 0] = tournament_select(self.fit, self.rng, self.k_tournament)
            parents[i, 1] = tournament_select(self.fit, self.rng, self.k_tournament)
        return {
            "parents": parents,
            "cx_gate": self.rng.uniform(n, 1).ravel(),
            "sbx_u": self.rng.uniform(n, d),
            "mut_gate": self.rng.uniform(n, d),
            "mut_u": self.rng.uniform(n, d),
        }

    def hyperparams(self) -> dict:
        return {
            "eta_c": self.eta_c,
            "eta_m": self.eta_m,
            "crossover_rate": self.crossover_rate,
            "mutation_rate": self.mutation_rate,
        }

    def generation(self, noise: dict = None) -> float:
        self._ensure_init()
        if noise is None:
            noise = self.draw_noise()
        dom = self.problem.domain
        p1 = self.X[noise["parents"][:, 0]]
        p2 = self.X[noise["parents"][:, 1]]
        crossed, _ = kernels.sbx_children(p1, p2, noise["sbx_u"], self.eta_c)
        gate = (noise["cx_gate"] < self.crossover_rate)[:, None]
        children = np.where(gate, crossed, p1)
        children = kernels.poly_mutation(
            children, noise["mut_u"], noise["mut_gate"] < self.mutation_rate,
            self.eta_m, dom.lower, dom.upper,
        )
        cfit = self.problem.eval_array(children)
        b = int(np.argmin(cfit))
        if cfit[b] < self.best_fitness:
            self.best_fitness = float(cfit[b])
            self.best_x = children[b].copy()
        else:
            w = int(np.argmax(cfit))
            children[w] = self.best_x
            cfit[w] = self.best_fitness
        self.X = children
        self.fit = cfit
        return self.best_fitness


class ClassicDe:
    """Differential evolution with binomial crossover and greedy replacement.

    Mutation variants: "rand1" (x_r1 + F (x_r2 - x_r3)) and "best1"
    (current-to-best/1: x_i + F (x_best - x_i) + F (x_r1 - x_r2)). Trials
    clamp to the box; a slot is replaced when the trial is no worse, so
    per-slot fitness never worsens. No extra elitism: greedy replacement
    already preserves the best.
    """

    name = "de"

    def __init__(self, problem: Problem, pop_size: int, rng: Rng,
                 f_scale: float = 0.5, cr: float = 0.9,
                 variant: str = "rand1", init=None):
        if variant not in ("rand1", "best1"):
            raise ValueError(f"unknown DE variant {variant!r}")
        if pop_size < 4:
            raise ValueError("DE needs a population of at least 4")
        self.problem = problem
        self.pop_size = int(pop_size)
        self.rng = rng
        self.f_scale = float(f_scale)
        self.cr = float(cr)
        self.variant = variant
        dom = problem.domain
        self.X = dom.clip(np.array(init, dtype=float)) if init is not None \
            else dom.sample(rng, self.pop_size)
        self.fit = None
        self.best_x = None
        self.best_fitness = math.inf
        self._initialised = False

    def _ensure_init(self):
        if self._initialised:
            return
        self.fit = self.problem.eval_array(self.X)
        b = int(np.argmin(self.fit))
        self.best_x = self.X[b].copy()
        self.best_fitness = float(self.fit[b])
        self._initialised = True

    def draw_noise(self) -> dict:
        n, d = self.X.shape
        k = 3 if self.variant == "rand1" else 2
        idx = np.empty((n, k), dtype=np.int64)
        for i in range(n):
            idx[i] = self.rng.distinct_indices(n, k, exclude=i)
        return {
            "idx": idx,
            "tau": self.rng.uniform(n, d),
            "jrand": self.rng.integers(0, d, size=n).astype(np.int64),
        }

    def hyperparams(self) -> dict:
        return {"f_scale": self.f_scale, "cr": self.cr}

    def generation(self, noise: dict = None) -> float:
        self._ensure_init()
        if noise is None:
            noise = self.draw_noise()
        dom = self.problem.domain
        idx = noise["idx"]
        F = self.f_scale
        if self.variant == "rand1":
            donors = self.X[idx[:, 0]] + F * (self.X[idx[:, 1]] - self.X[idx[:, 2]])
        else:
            donors = (
                self.X
                + F * (self.best_x[None, :] - self.X)
                + F * (self.X[idx[:, 0]] - self.X[idx[:, 1]])
            )
        trial = kernels.de_trial(
            self.X, donors, noise["tau"], noise["jrand"], self.cr,
            dom.lower, dom.upper,
        )
        tfit = self.problem.eval_array(trial)
        win = tfit <= self.fit
        self.X[win] = trial[win]
        self.fit[win] = tfit[win]
        b = int(np.argmin(self.fit))
        if self.fit[b] < self.best_fitness:
            self.best_fitness = float(self.fit[b])
            self.best_x = self.X[b].copy()
        return self.best_fitness


class ClassicCmaes:
    """CMA-ES with cumulative step-size adaptation and rank-one plus rank-mu
    covariance updates.

    Sampling goes through the lower Cholesky factor of C; the conjugate
    evolution path is whitened with a triangular solve against that same
    factor. Offspring clamp to the box and the clamped points feed both the
    evaluations and the distribution update, keeping the two consistent.
    """

    name = "cmaes"

    def __init__(self, problem: Problem, pop_size: int = None, rng: Rng = None,
                 sigma0: float = None, mean0=None):
        self.problem = problem
        d = problem.dim
        self.pop_size = int(pop_size) if pop_size else 4 + int(3 * math.log(d))
        if self.pop_size < 2:
            raise ValueError("CMA-ES needs at least 2 offspring")
        self.rng = rng
        dom = problem.domain
        self.mean = (
            np.array(mean0, dtype=float).ravel()
            if mean0 is not None else dom.sample(rng, 1)[0]
        )
        self.sigma = float(sigma0) if sigma0 else 0.3 * float(dom.width.max())

        k = cma_constants(d, self.pop_size)
        self.mu = k.mu
        self.weights = k.weights
        self.mu_eff = k.mu_eff
        self.c_sigma = k.c_sigma
        self.d_sigma = k.d_sigma
        self.c_c = k.c_c
        self.c_1 = k.c_1
        self.c_mu = k.c_mu
        self.chi_n = k.chi_n

        self.C = np.eye(d)
        self.p_sigma = np.zeros(d)
        self.p_c = np.zeros(d)
        self.gen_count = 0
        self.best_x = None
        self.best_fitness = math.inf

    def draw_noise(self) -> dict:
        return {"z": self.rng.normal(self.problem.dim, self.pop_size)}

    def hyperparams(self) -> dict:
        return {"sigma": self.sigma}

    def generation(self, noise: dict = None) -> float:
        if noise is None:
            noise = self.draw_noise()
        d = self.problem.dim
        dom = self.problem.domain
        L = cholesky_with_jitter(self.C)
        Y = (L @ noise["z"]).T                      # (lam, d)
        X = dom.clip(self.mean + self.sigma * Y)
        fit = self.problem.eval_array(X)
        order = np.argsort(fit, kind="stable")
        sel = order[: self.mu]

        mean_old = self.mean
        mean_new = self.weights @ X[sel]
        y_w = (mean_new - mean_old) / self.sigma

        # whiten the mean shift with the sampling factor: L dz = y_w
        dz = solve_triangular(L, y_w, lower=True)
        cs = self.c_sigma
        self.p_sigma = (1.0 - cs) * self.p_sigma + math.sqrt(
            cs * (2.0 - cs) * self.mu_eff
        ) * dz

        self.gen_count += 1
        norm = np.linalg.norm(self.p_sigma)
        denom = math.sqrt(1.0 - (1.0 - cs) ** (2 * self.gen_count))
        h_sigma = 1.0 if norm / denom < (1.4 + 2.0 / (d + 1.0)) * self.chi_n else 0.0

        cc = self.c_c
        self.p_c = (1.0 - cc) * self.p_c + h_sigma * math.sqrt(
            cc * (2.0 - cc) * self.mu_eff
        ) * y_w

        Ysel = (X[sel] - mean_old) / self.sigma
        rank_mu = Ysel.T @ (self.weights[:, None] * Ysel)
        delta_h = (1.0 - h_sigma) * cc * (2.0 - cc)
        self.C = (
            (1.0 - self.c_1 - self.c_mu) * self.C
            + self.c_1 * (np.outer(self.p_c, self.p_c) + delta_h * self.C)
            + self.c_mu * rank_mu
        )
        self.C = 0.5 * (self.C + self.C.T)

        self.sigma *= math.exp((cs / self.d_sigma) * (norm / self.chi_n - 1.0))
        self.mean = mean_new

        b = int(np.argmin(fit))
        if fit[b] < self.best_fitness:
            self.best_fitness = float(fit[b])
            self.best_x = X[b].copy()
        return self.best_fitness
