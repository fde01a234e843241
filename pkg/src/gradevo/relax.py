"""Reparameterized stochastic building blocks.

Three samplers cover every random operator in the differentiable algorithms:

* ``pathwise_gaussian``: location-scale normals, x = mean + scale * z.
* ``gumbel_sigmoid``: Binary-Concrete relaxation of a Bernoulli gate,
  soft = sigmoid((log u - log(1 - u) + alpha) / tau), optionally followed by
  a straight-through hard threshold at 0.5 so P(hard = 1) = sigmoid(alpha)
  for any temperature.
* ``gumbel_softmax``: Concrete relaxation of a categorical draw,
  softmax((log u - log(1 - u) + logits) / tau), optionally straight-through
  one-hot at the argmax.

Noise enters as plain constants, so gradients flow only through the
distribution parameters (the pathwise estimator). Every sampler accepts the
uniform/normal draws explicitly, which is what frozen-noise gradient checks
and the classical-equivalence tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tape import Tape, Var

_UCLIP = 1e-12


class Rng:
    """Seeded random source; all algorithm randomness flows through one.

    Uniform draws are clipped to (1e-12, 1 - 1e-12) so logit transforms stay
    finite.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._g = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, rows: int, cols: int = 1) -> np.ndarray:
        u = self._g.random((rows, cols))
        return np.clip(u, _UCLIP, 1.0 - _UCLIP)

    def normal(self, rows: int, cols: int = 1) -> np.ndarray:
        return self._g.standard_normal((rows, cols))

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high)."""
        return self._g.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._g.permutation(n)

    def distinct_indices(self, n: int, k: int, exclude: int) -> np.ndarray:
        """k distinct indices from range(n), all different from ``exclude``."""
        if k >= n:
            raise ValueError(f"cannot draw {k} distinct indices from {n} excluding one")
        picked: list[int] = []
        while len(picked) < k:
            c = int(self._g.integers(0, n))
            if c != exclude and c not in picked:
                picked.append(c)
        return np.array(picked, dtype=np.int64)


@dataclass
class RelaxConfig:
    """Shared knobs for the relaxed operators inside a differentiable run.

    ``tau`` is the relaxation temperature (fixed, not learned).
    ``hard_masks`` switches Bernoulli gates to straight-through hard 0/1
    forwards. ``hard_selection`` does the same for categorical parent picks;
    the default keeps selection soft (mixtures).
    """

    tau: float = 1.0
    hard_masks: bool = True
    hard_selection: bool = False

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError(f"temperature must be positive, got {self.tau}")


def logistic_noise(u: np.ndarray) -> np.ndarray:
    """log u - log(1 - u): a standard logistic sample from a uniform one."""
    return np.log(u) - np.log1p(-u)


def pathwise_gaussian(tape: Tape, mean: Var, scale: Var, rng: Rng = None,
                      z: np.ndarray = None) -> Var:
    """Sample mean + scale * z with z ~ N(0, I) entering as a constant.

    ``scale`` may be a (1, 1) scalar, an array matching ``mean`` elementwise,
    or an (n, n) matrix against an (n, 1) mean, in which case the sample is
    mean + tril(scale) @ z. Elementwise scales must be non-negative.
    """
    matrix_form = (
        scale.rows == scale.cols
        and scale.rows > 1
        and mean.shape == (scale.rows, 1)
    )
    if not matrix_form:
        if scale.shape != mean.shape and scale.shape != (1, 1):
            raise ValueError(
                f"scale shape {scale.shape} incompatible with mean {mean.shape}"
            )
        if np.any(scale.value < 0.0):
            raise ValueError("elementwise scale must be non-negative")
    if z is None:
        if rng is None:
            raise ValueError("need either rng or explicit z")
        zr = mean.rows if not matrix_form else scale.rows
        z = rng.normal(zr, 1 if matrix_form else mean.cols)
    zc = tape.constant(z)
    if matrix_form:
        return tape.add(mean, tape.lower_tri_matvec(scale, zc))
    return tape.add(mean, tape.mul(scale, zc))


def _broadcast_logits(tape: Tape, noise_c: Var, alpha: Var, inv_tau: float) -> Var:
    """(noise + alpha) / tau with alpha scalar, row vector, or full shape."""
    a_scaled = tape.mul(alpha, tape.constant([[inv_tau]]))
    if alpha.shape == noise_c.shape or alpha.shape == (1, 1):
        return tape.add(noise_c, a_scaled)
    if alpha.rows == 1 and alpha.cols == noise_c.cols:
        return tape.add_rowvec(noise_c, a_scaled)
    raise ValueError(
        f"alpha shape {alpha.shape} does not broadcast onto {noise_c.shape}"
    )


def gumbel_sigmoid(tape: Tape, alpha: Var, tau: float = 1.0, rng: Rng = None,
                   u: np.ndarray = None, shape=None, hard: bool = True) -> Var:
    """Relaxed Bernoulli gate with logit ``alpha``.

    Returns soft values in (0, 1), or with ``hard`` a straight-through mask
    whose forward entries are exactly 0.0 or 1.0 (threshold soft > 0.5).
    """
    if tau <= 0.0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if u is None:
        if rng is None:
            raise ValueError("need either rng or explicit u")
        out_shape = shape if shape is not None else alpha.shape
        u = rng.uniform(*out_shape)
    u = np.clip(np.asarray(u, dtype=np.float64), _UCLIP, 1.0 - _UCLIP)
    noise_c = tape.constant(logistic_noise(u) / tau)
    s = _broadcast_logits(tape, noise_c, alpha, 1.0 / tau)
    soft = tape.sigmoid(s)
    if not hard:
        return soft
    hard_vals = (soft.value > 0.5).astype(np.float64)
    return tape.straight_through(tape.constant(hard_vals), soft)


def gumbel_softmax(tape: Tape, logits: Var, tau: float = 1.0, rng: Rng = None,
                   u: np.ndarray = None, rows: int = 1, forbid=None,
                   hard: bool = False) -> Var:
    """Relaxed categorical rows over shared ``logits``.

    ``logits`` is a (1, N) row (a (N, 1) column is transposed on the fly) and
    the result has ``rows`` independent rows, each a point on the simplex.
    ``forbid`` is an optional boolean (rows, N) mask of categories forced to
    exactly zero weight (used to keep an individual from selecting itself).
    With ``hard`` the forward is the one-hot argmax, straight-through.
    """
    if tau <= 0.0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if logits.cols == 1 and logits.rows > 1:
        logits = tape.transpose(logits)
    n = logits.cols
    if n < 2:
        raise ValueError(f"categorical relaxation needs >= 2 categories, got {n}")
    if u is None:
        if rng is None:
            raise ValueError("need either rng or explicit u")
        u = rng.uniform(rows, n)
    u = np.clip(np.asarray(u, dtype=np.float64), _UCLIP, 1.0 - _UCLIP)
    if u.shape != (rows, n):
        raise ValueError(f"u has shape {u.shape}, expected ({rows}, {n})")
    g = logistic_noise(u)
    if forbid is not None:
        forbid = np.asarray(forbid, dtype=bool)
        if forbid.shape != (rows, n):
            raise ValueError(f"forbid has shape {forbid.shape}, expected ({rows}, {n})")
        g = np.where(forbid, -1e30, g)
    # constant per-row shift by the max perturbed logit keeps exp in range and
    # leaves gradients untouched (softmax shift invariance)
    total = g + logits.value
    shift = total.max(axis=1, keepdims=True)
    noise_c = tape.constant((g - shift) / tau)
    a_scaled = tape.mul(logits, tape.constant([[1.0 / tau]]))
    s = tape.add_rowvec(noise_c, a_scaled)
    e = tape.exp(s)
    denom = tape.row_sum(e)
    soft = tape.mul_colvec(e, tape.powc(denom, -1.0))
    if not hard:
        return soft
    winners = np.argmax(soft.value, axis=1)
    onehot = np.zeros((rows, n))
    onehot[np.arange(rows), winners] = 1.0
    return tape.straight_through(tape.constant(onehot), soft)
