"""Wine table loading, the tiny MLP and its MSE objective."""

import numpy as np
import pytest

from gradevo.harness import synthetic_wine_path
from gradevo.tape import Tape
from gradevo.wine import (
    MlpSpec,
    WineProblem,
    load_wine,
    mlp_forward,
    mlp_mse_array,
    mse_loss,
    noisy_targets,
    write_synthetic_wine,
)


@pytest.fixture(scope="module")
def table(tmp_path_factory):
    path = tmp_path_factory.mktemp("wine") / "wine.csv"
    write_synthetic_wine(str(path))
    return str(path)


def test_synthetic_table_shape(table):
    feats, quality = load_wine(table)
    assert feats.shape == (1599, 11)
    assert quality.shape == (1599,)
    assert np.all(np.isfinite(feats))
    assert np.all((quality >= 0) & (quality <= 10))


def test_synthetic_table_deterministic(table, tmp_path):
    other = tmp_path / "again.csv"
    write_synthetic_wine(str(other))
    assert open(table, "rb").read() == open(str(other), "rb").read()


def test_bundled_path_loads():
    feats, _ = load_wine(synthetic_wine_path())
    assert feats.shape[0] == 1599


def test_loader_reports_line_numbers(tmp_path):
    header = ";".join(['"a"'] * 12)
    p = tmp_path / "bad_fields.csv"
    p.write_text(header + "\n1;2;3\n")
    with pytest.raises(ValueError, match="line 2: expected 12 fields, got 3"):
        load_wine(str(p))

    p2 = tmp_path / "bad_value.csv"
    row = ";".join(["1"] * 11) + ";banana"
    p2.write_text(header + "\n" + row + "\n")
    with pytest.raises(ValueError, match="line 2: could not parse field 'banana'"):
        load_wine(str(p2))

    p3 = tmp_path / "empty.csv"
    p3.write_text(header + "\n")
    with pytest.raises(ValueError, match="no data rows"):
        load_wine(str(p3))

    p4 = tmp_path / "bad_header.csv"
    p4.write_text("a;b;c\n")
    with pytest.raises(ValueError, match="line 1"):
        load_wine(str(p4))


def test_noisy_targets_add_lognormal_noise():
    q = np.full(50_000, 5.0)
    y = noisy_targets(q, seed=3)
    noise = y - q
    assert np.all(noise > 0)  # exp of a normal is positive
    # E[exp(N(0,1))] = exp(1/2)
    assert abs(noise.mean() - np.exp(0.5)) < 0.05
    np.testing.assert_array_equal(noisy_targets(q, 3), y)
    assert not np.array_equal(noisy_targets(q, 4), y)


def test_spec_parameter_count():
    spec = MlpSpec()
    # 11*128 weights + 128 biases + 128 weights + 1 bias
    assert spec.n_params == 11 * 128 + 128 + 128 + 1 == 1665


def test_zero_params_give_zero_predictions():
    spec = MlpSpec()
    feats = np.random.default_rng(0).normal(size=(7, 11))
    targets = np.arange(7.0)
    mse = mlp_mse_array(np.zeros((1, spec.n_params)), feats, targets, spec)
    np.testing.assert_allclose(mse[0], np.mean(targets ** 2), rtol=1e-12)


def test_micro_network_hand_oracle():
    # 1 input, 1 hidden unit, 1 output: pred = w2 tanh(w1 x + b1) + b2
    spec = MlpSpec(n_in=1, n_hidden=1)
    assert spec.n_params == 4
    w1, b1, w2, b2 = 0.5, -0.25, 2.0, 0.125
    params = np.array([[w1, b1, w2, b2]])
    x = np.array([[0.8]])
    target = np.array([1.0])
    pred = w2 * np.tanh(w1 * 0.8 + b1) + b2
    expect = (pred - 1.0) ** 2
    got = mlp_mse_array(params, x, target, spec)
    np.testing.assert_allclose(got[0], expect, rtol=1e-12)


def test_tape_forward_matches_array_reference():
    spec = MlpSpec()
    rng = np.random.default_rng(1)
    params = rng.uniform(-1, 1, size=(1, spec.n_params))
    feats = rng.normal(size=(13, 11))
    targets = rng.normal(size=13)
    t = Tape()
    pred = mlp_forward(t, t.constant(params), t.constant(feats), spec)
    loss = mse_loss(t, pred, t.constant(targets.reshape(-1, 1)))
    np.testing.assert_allclose(
        loss.item(), mlp_mse_array(params, feats, targets, spec)[0], rtol=1e-10
    )


def test_mlp_forward_rejects_wrong_width():
    t = Tape()
    with pytest.raises(ValueError):
        mlp_forward(t, t.constant(np.zeros((1, 10))), t.constant(np.zeros((2, 11))),
                    MlpSpec())


def test_mse_known_value():
    # predictions (0, 0) against targets (1, 3): ((0-1)^2 + (0-3)^2) / 2 = 5
    t = Tape()
    pred = t.constant([[0.0], [0.0]])
    targ = t.constant([[1.0], [3.0]])
    assert mse_loss(t, pred, targ).item() == 5.0


def test_unpack_spans_cover_every_parameter_once():
    spec = MlpSpec()
    covered = np.zeros(spec.n_params, dtype=int)
    for a, b in spec.unpack_spans():
        covered[a:b] += 1
    assert np.all(covered == 1)


def test_wine_problem_counts_and_gradient(table):
    prob = WineProblem.from_file(table, noise_seed=0)
    assert prob.dim == 1665
    assert prob.domain.lower[0] == -10.0 and prob.domain.upper[0] == 10.0
    X = np.zeros((3, 1665))
    vals = prob.eval_array(X)
    assert vals.shape == (3,)
    assert prob.n_evals == 3
    # tape gradient vs finite differences on a couple of coordinates
    rng = np.random.default_rng(2)
    x0 = rng.uniform(-0.5, 0.5, size=(1, 1665))
    t = Tape()
    px = t.param("x", x0)
    loss = prob.eval_pop(t, px.raw)
    t.backward(loss)
    g = px.raw.grad
    h = 1e-4  # the loss sits near 30, so a larger step keeps cancellation down
    for j in (0, 700, 1664):
        xp, xm = x0.copy(), x0.copy()
        xp[0, j] += h
        xm[0, j] -= h
        fd = (prob.eval_array(xp)[0] - prob.eval_array(xm)[0]) / (2 * h)
        np.testing.assert_allclose(g[0, j], fd, rtol=1e-4, atol=1e-10)


def test_wine_problem_input_validation():
    with pytest.raises(ValueError):
        WineProblem(np.zeros((4, 10)), np.zeros(4))
    with pytest.raises(ValueError):
        WineProblem(np.zeros((4, 11)), np.zeros(5))
