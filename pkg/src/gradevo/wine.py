"""Red-wine quality regression: data handling and the on-tape MLP.

The regression target is the quality score plus multiplicative-style noise,
target_i = quality_i + exp(z_i) with z_i ~ N(0, 1), drawn per run seed. The
noise floor of the mean-squared error is therefore Var[exp(Z)] =
(e - 1) * e, about 4.67, which is what a perfect regressor converges to.

Features are used raw, deliberately unstandardised, and the 1665 network
parameters start uniform in [-10, 10]: with tanh hidden units this puts most
of the first layer deep into saturation, the regime the experiment probes.

``load_wine`` reads the standard semicolon-separated table (12 columns,
header row). ``write_synthetic_wine`` generates a fixed, seed-pinned table in
the same format with realistic feature scales for offline runs; pass a real
winequality-red.csv to ``load_wine`` and everything downstream is unchanged.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .problems import BoxDomain, Problem
from .tape import Tape, Var

WINE_COLUMNS = (
    "fixed acidity",
    "volatile acidity",
    "citric acid",
    "residual sugar",
    "chlorides",
    "free sulfur dioxide",
    "total sulfur dioxide",
    "density",
    "pH",
    "sulphates",
    "alcohol",
    "quality",
)

N_FEATURES = 11
_SYNTH_SEED = 761843902
_SYNTH_ROWS = 1599

# per-feature generation profile: mean, std, lower clip, decimals
_FEATURE_PROFILE = (
    (8.32, 1.74, 4.0, 1),     # fixed acidity
    (0.53, 0.18, 0.10, 2),    # volatile acidity
    (0.27, 0.19, 0.0, 2),     # citric acid
    (2.54, 1.41, 0.9, 1),     # residual sugar
    (0.087, 0.047, 0.012, 3), # chlorides
    (15.9, 10.5, 1.0, 1),     # free sulfur dioxide
    (46.5, 32.9, 6.0, 1),     # total sulfur dioxide
    (0.9967, 0.0019, 0.990, 5),
    (3.31, 0.15, 2.7, 2),     # pH
    (0.66, 0.17, 0.33, 2),    # sulphates
    (10.42, 1.07, 8.4, 1),    # alcohol
)


def write_synthetic_wine(path: str, n_rows: int = _SYNTH_ROWS) -> str:
    """Write a deterministic stand-in table in the UCI red-wine format.

    The file is identical across calls (internal fixed seed): feature
    marginals match the published summary statistics and quality correlates
    positively with alcohol and negatively with volatile acidity, as in the
    real data. Returns the path.
    """
    g = np.random.Generator(np.random.PCG64(_SYNTH_SEED))
    z = g.standard_normal((n_rows, N_FEATURES))
    cols = []
    for j, (mu, sd, lo, dec) in enumerate(_FEATURE_PROFILE):
        col = np.maximum(mu + sd * z[:, j], lo)
        cols.append(np.round(col, dec))
    q_latent = 5.64 + 0.45 * z[:, 10] - 0.35 * z[:, 1] + 0.18 * z[:, 9] \
        + 0.55 * g.standard_normal(n_rows)
    quality = np.clip(np.rint(q_latent), 3, 8).astype(int)

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(";".join(f'"{c}"' for c in WINE_COLUMNS) + "\n")
        for i in range(n_rows):
            fields = []
            for j, (_, _, _, dec) in enumerate(_FEATURE_PROFILE):
                fields.append(f"{cols[j][i]:.{dec}f}")
            fields.append(str(quality[i]))
            fh.write(";".join(fields) + "\n")
    return path


def load_wine(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Parse a semicolon-separated wine table.

    Returns (features, quality) with features (n, 11) and quality (n,).
    Malformed rows raise ValueError naming the 1-based line number.
    """
    features = []
    quality = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=";", quotechar='"')
        for ln, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if ln == 1:
                if len(row) != len(WINE_COLUMNS):
                    raise ValueError(
                        f"{path}: line 1: expected {len(WINE_COLUMNS)} header "
                        f"fields, got {len(row)}"
                    )
                continue
            if len(row) != len(WINE_COLUMNS):
                raise ValueError(
                    f"{path}: line {ln}: expected {len(WINE_COLUMNS)} fields, "
                    f"got {len(row)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError:
                bad = next(v for v in row if not _is_float(v))
                raise ValueError(
                    f"{path}: line {ln}: could not parse field {bad!r}"
                ) from None
            features.append(vals[:N_FEATURES])
            quality.append(vals[N_FEATURES])
    if not features:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(features), np.asarray(quality)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def noisy_targets(quality: np.ndarray, seed: int) -> np.ndarray:
    """quality + exp(N(0, 1)), one independent draw per row per seed."""
    g = np.random.Generator(np.random.PCG64(int(seed)))
    return quality + np.exp(g.standard_normal(quality.shape[0]))


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected 11 -> n_hidden (tanh) -> 1 regressor."""

    n_in: int = N_FEATURES
    n_hidden: int = 128
    n_out: int = 1

    @property
    def n_params(self) -> int:
        return (
            self.n_in * self.n_hidden
            + self.n_hidden
            + self.n_hidden * self.n_out
            + self.n_out
        )

    def unpack_spans(self):
        """Column spans of (W1, b1, W2, b2) inside the flat parameter row.

        W1 is stored row-major: parameter k of the first span sits at
        W1[k // n_hidden, k % n_hidden].
        """
        a = self.n_in * self.n_hidden
        b = a + self.n_hidden
        c = b + self.n_hidden * self.n_out
        d = c + self.n_out
        return (0, a), (a, b), (b, c), (c, d)


def mlp_forward(tape: Tape, params: Var, features: Var, spec: MlpSpec) -> Var:
    """Predictions of the MLP whose weights live in one flat (1, P) row."""
    if params.shape != (1, spec.n_params):
        raise ValueError(
            f"params must be (1, {spec.n_params}), got {params.shape}"
        )
    (w1a, w1b), (b1a, b1b), (w2a, w2b), (b2a, b2b) = spec.unpack_spans()
    W1 = tape.reshape(tape.slice_cols(params, w1a, w1b), spec.n_in, spec.n_hidden)
    b1 = tape.slice_cols(params, b1a, b1b)
    W2 = tape.reshape(tape.slice_cols(params, w2a, w2b), spec.n_hidden, spec.n_out)
    b2 = tape.slice_cols(params, b2a, b2b)
    h = tape.tanh(tape.add_rowvec(tape.matmul(features, W1), b1))
    return tape.add(tape.matmul(h, W2), b2)


def mse_loss(tape: Tape, pred: Var, target: Var) -> Var:
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss: {pred.shape} vs {target.shape}")
    return tape.mean(tape.powc(tape.sub(pred, target), 2.0))


def mlp_mse_array(params: np.ndarray, features: np.ndarray, targets: np.ndarray,
                  spec: MlpSpec) -> np.ndarray:
    """Plain-numpy MSE for a (k, P) batch of parameter rows."""
    (w1a, w1b), (b1a, b1b), (w2a, w2b), (b2a, b2b) = spec.unpack_spans()
    out = np.empty(params.shape[0])
    for i in range(params.shape[0]):
        p = params[i]
        W1 = p[w1a:w1b].reshape(spec.n_in, spec.n_hidden)
        b1 = p[b1a:b1b]
        W2 = p[w2a:w2b].reshape(spec.n_hidden, spec.n_out)
        b2 = p[b2a:b2b]
        pred = np.tanh(features @ W1 + b1) @ W2 + b2
        out[i] = np.mean((pred.ravel() - targets) ** 2)
    return out


class WineProblem(Problem):
    """Full-batch MSE of the 1665-parameter MLP on a wine table.

    The search box is [-10, 10]^1665, matching the uniform initialisation.
    """

    def __init__(self, features: np.ndarray, targets: np.ndarray,
                 spec: MlpSpec = MlpSpec(), lo: float = -10.0, hi: float = 10.0):
        features = np.asarray(features, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if features.ndim != 2 or features.shape[1] != spec.n_in:
            raise ValueError(f"features must be (n, {spec.n_in})")
        if targets.shape[0] != features.shape[0]:
            raise ValueError("features and targets disagree on row count")
        super().__init__("wine", BoxDomain.cube(spec.n_params, lo, hi))
        self.spec = spec
        self.features = features
        self.targets = targets

    @classmethod
    def from_file(cls, path: str, noise_seed: int, **kw) -> "WineProblem":
        feats, quality = load_wine(path)
        return cls(feats, noisy_targets(quality, noise_seed), **kw)

    def _eval_array(self, X):
        return mlp_mse_array(X, self.features, self.targets, self.spec)

    def _eval_pop(self, tape, X):
        feats = tape.constant(self.features)
        targ = tape.constant(self.targets.reshape(-1, 1))
        losses = []
        for i in range(X.rows):
            row = tape.slice_rows(X, i, i + 1) if X.rows > 1 else X
            pred = mlp_forward(tape, row, feats, self.spec)
            losses.append(mse_loss(tape, pred, targ))
        if len(losses) == 1:
            return losses[0]
        return tape.concat_scalars(losses)
