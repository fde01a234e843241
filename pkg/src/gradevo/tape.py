"""Reverse-mode automatic differentiation on an append-only tape.

Every value is a 2-D float64 array wrapped in a :class:`Var` that remembers
which tape node produced it. Recording an operation appends a node holding
the forward value, the parent node ids and a vjp closure; :meth:`Tape.backward`
walks the nodes in reverse id order and accumulates vector-Jacobian products
into per-node gradient buffers.

Shape rules are strict: binary elementwise ops require identical shapes, with
the single exception that a (1, 1) scalar broadcasts against any shape (the
scalar's gradient is then the sum over the broadcast positions). Row- and
column-vector broadcasts have their own dedicated ops so the intent is
explicit in the graph.

Trainable leaves are created through :meth:`Tape.param` and survive
:meth:`Tape.reset`, which drops every other node so the next generation can
be recorded on a short tape.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


def _as2d(values) -> Array:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise ValueError(f"tape values must be at most 2-D, got shape {a.shape}")
    return a


def _is_scalar(a: Array) -> bool:
    return a.shape == (1, 1)


def _reduce_to(g: Array, shape) -> Array:
    # collapse a broadcast gradient back onto a (1, 1) scalar parent
    if g.shape == shape:
        return g
    return np.array([[g.sum()]])


class Var:
    """One tape node: forward value, parents, vjp and a gradient buffer."""

    __slots__ = ("tape", "nid", "op", "value", "grad", "trainable", "_parents", "_vjp")

    def __init__(self, tape, nid, op, value, parents=(), vjp=None, trainable=False):
        self.tape = tape
        self.nid = nid
        self.op = op
        self.value = value
        self.grad = None
        self.trainable = trainable
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def item(self) -> float:
        if not _is_scalar(self.value):
            raise ValueError(f"item() on non-scalar Var of shape {self.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Var(nid={self.nid}, op={self.op!r}, shape={self.shape})"

    # operator sugar; floats wrap into constant scalars
    def _coerce(self, other) -> "Var":
        if isinstance(other, Var):
            return other
        return self.tape.constant(np.array([[float(other)]]))

    def __add__(self, other):
        return self.tape.add(self, self._coerce(other))

    def __radd__(self, other):
        return self.tape.add(self._coerce(other), self)

    def __sub__(self, other):
        return self.tape.sub(self, self._coerce(other))

    def __rsub__(self, other):
        return self.tape.sub(self._coerce(other), self)

    def __mul__(self, other):
        return self.tape.mul(self, self._coerce(other))

    def __rmul__(self, other):
        return self.tape.mul(self._coerce(other), self)

    def __truediv__(self, other):
        return self.tape.div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return self.tape.div(self._coerce(other), self)

    def __neg__(self):
        return self.tape.neg(self)

    def __pow__(self, exponent):
        if isinstance(exponent, Var):
            return self.tape.pow(self, exponent)
        return self.tape.powc(self, float(exponent))

    def __matmul__(self, other):
        return self.tape.matmul(self, other)


class Param:
    """A named trainable leaf, optionally read through a positivity transform.

    ``transform`` is "identity" or "exp". ``read()`` returns the transformed
    on-tape Var ready to use in a graph; ``value()`` returns the transformed
    values as a plain array.
    """

    def __init__(self, tape, name: str, raw: Var, transform: str = "identity"):
        if transform not in ("identity", "exp"):
            raise ValueError(f"unknown transform {transform!r}")
        self.tape = tape
        self.name = name
        self.raw = raw
        self.transform = transform

    def read(self) -> Var:
        if self.transform == "exp":
            return self.tape.exp(self.raw)
        return self.raw

    def value(self) -> Array:
        if self.transform == "exp":
            return np.exp(self.raw.value)
        return self.raw.value.copy()

    def set(self, values) -> None:
        a = _as2d(values)
        if a.shape != self.raw.value.shape:
            raise ValueError(
                f"param {self.name!r} has shape {self.raw.value.shape}, got {a.shape}"
            )
        self.raw.value = a.copy()


class Tape:
    """Append-only node arena with reverse-order gradient accumulation."""

    def __init__(self):
        self.nodes: list[Var] = []
        self.params: list[Param] = []

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------

    def _record(self, op, value, parents=(), vjp=None, trainable=False) -> Var:
        v = Var(
            self,
            len(self.nodes),
            op,
            value,
            tuple(p.nid for p in parents),
            vjp,
            trainable,
        )
        self.nodes.append(v)
        return v

    def constant(self, values) -> Var:
        return self._record("const", _as2d(values).copy())

    def param(self, name: str, values, transform: str = "identity") -> Param:
        if any(p.name == name for p in self.params):
            raise ValueError(f"duplicate param name {name!r}")
        raw = self._record("param", _as2d(values).copy(), trainable=True)
        p = Param(self, name, raw, transform)
        self.params.append(p)
        return p

    def size(self) -> int:
        return len(self.nodes)

    # ------------------------------------------------------------------
    # elementwise binary ops (exact shapes, or one side a (1,1) scalar)
    # ------------------------------------------------------------------

    def _check_binary(self, a: Var, b: Var, op: str):
        if a.shape != b.shape and not _is_scalar(a.value) and not _is_scalar(b.value):
            raise ValueError(
                f"{op}: shapes {a.shape} and {b.shape} do not match and neither is scalar"
            )

    def add(self, a: Var, b: Var) -> Var:
        self._check_binary(a, b, "add")
        sa, sb = a.shape, b.shape

        def vjp(g):
            return _reduce_to(g, sa), _reduce_to(g, sb)

        return self._record("add", a.value + b.value, (a, b), vjp)

    def sub(self, a: Var, b: Var) -> Var:
        self._check_binary(a, b, "sub")
        sa, sb = a.shape, b.shape

        def vjp(g):
            return _reduce_to(g, sa), _reduce_to(-g, sb)

        return self._record("sub", a.value - b.value, (a, b), vjp)

    def mul(self, a: Var, b: Var) -> Var:
        self._check_binary(a, b, "mul")
        av, bv = a.value, b.value

        def vjp(g):
            return _reduce_to(g * bv, av.shape), _reduce_to(g * av, bv.shape)

        return self._record("mul", av * bv, (a, b), vjp)

    def div(self, a: Var, b: Var) -> Var:
        self._check_binary(a, b, "div")
        if np.any(b.value == 0.0):
            raise ValueError("div: divisor contains an exact zero")
        av, bv = a.value, b.value

        def vjp(g):
            return (
                _reduce_to(g / bv, av.shape),
                _reduce_to(-g * av / (bv * bv), bv.shape),
            )

        return self._record("div", av / bv, (a, b), vjp)

    def pow(self, a: Var, b: Var) -> Var:
        """a ** b with a Var exponent. Requires base >= 0.

        d/da = b * a**(b-1); d/db = a**b * log(a) where a > 0, zero at a == 0.
        """
        self._check_binary(a, b, "pow")
        if np.any(a.value < 0.0):
            raise ValueError("pow: negative base with Var exponent")
        av, bv = a.value, b.value
        out = np.power(av, bv)

        def vjp(g):
            da = g * bv * np.power(av, bv - 1.0)
            safe = np.where(av > 0.0, av, 1.0)
            db = g * out * np.where(av > 0.0, np.log(safe), 0.0)
            return _reduce_to(da, av.shape), _reduce_to(db, bv.shape)

        return self._record("pow", out, (a, b), vjp)

    def powc(self, a: Var, exponent: float) -> Var:
        """a ** c for a constant exponent; negative bases need integer c."""
        c = float(exponent)
        if np.any(a.value < 0.0) and c != int(c):
            raise ValueError("powc: negative base with non-integer exponent")
        av = a.value
        out = np.power(av, c)

        def vjp(g):
            return (g * c * np.power(av, c - 1.0),)

        return self._record("powc", out, (a,), vjp)

    def minimum(self, a: Var, b: Var) -> Var:
        self._check_binary(a, b, "minimum")
        av, bv = a.value, b.value
        take_a = av <= bv  # a wins ties

        def vjp(g):
            return (
                _reduce_to(g * take_a, av.shape),
                _reduce_to(g * ~take_a, bv.shape),
            )

        return self._record("minimum", np.minimum(av, bv), (a, b), vjp)

    def maximum(self, a: Var, b: Var) -> Var:
        self._check_binary(a, b, "maximum")
        av, bv = a.value, b.value
        take_a = av >= bv

        def vjp(g):
            return (
                _reduce_to(g * take_a, av.shape),
                _reduce_to(g * ~take_a, bv.shape),
            )

        return self._record("maximum", np.maximum(av, bv), (a, b), vjp)

    # ------------------------------------------------------------------
    # elementwise unary ops
    # ------------------------------------------------------------------

    def neg(self, a: Var) -> Var:
        return self._record("neg", -a.value, (a,), lambda g: (-g,))

    def exp(self, a: Var) -> Var:
        out = np.exp(a.value)
        return self._record("exp", out, (a,), lambda g: (g * out,))

    def log(self, a: Var) -> Var:
        if np.any(a.value <= 0.0):
            raise ValueError("log: argument must be strictly positive")
        av = a.value
        return self._record("log", np.log(av), (a,), lambda g: (g / av,))

    def sqrt(self, a: Var) -> Var:
        if np.any(a.value < 0.0):
            raise ValueError("sqrt: argument must be non-negative")
        out = np.sqrt(a.value)
        return self._record("sqrt", out, (a,), lambda g: (g * 0.5 / out,))

    def sin(self, a: Var) -> Var:
        av = a.value
        return self._record("sin", np.sin(av), (a,), lambda g: (g * np.cos(av),))

    def cos(self, a: Var) -> Var:
        av = a.value
        return self._record("cos", np.cos(av), (a,), lambda g: (-g * np.sin(av),))

    def tanh(self, a: Var) -> Var:
        out = np.tanh(a.value)
        return self._record("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self, a: Var) -> Var:
        av = a.value
        # stable two-branch logistic
        out = np.where(av >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(av))),
                       np.exp(-np.abs(av)) / (1.0 + np.exp(-np.abs(av))))
        return self._record(
            "sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),)
        )

    def abs(self, a: Var) -> Var:
        av = a.value
        return self._record("abs", np.abs(av), (a,), lambda g: (g * np.sign(av),))

    # ------------------------------------------------------------------
    # reductions
    # ------------------------------------------------------------------

    def sum(self, a: Var) -> Var:
        shape = a.shape

        def vjp(g):
            return (np.full(shape, g[0, 0]),)

        return self._record("sum", np.array([[a.value.sum()]]), (a,), vjp)

    def mean(self, a: Var) -> Var:
        shape = a.shape
        n = a.value.size

        def vjp(g):
            return (np.full(shape, g[0, 0] / n),)

        return self._record("mean", np.array([[a.value.mean()]]), (a,), vjp)

    def min_with_index(self, a: Var) -> tuple[Var, int]:
        """Full reduction to the minimum value plus its flat index.

        Ties go to the lowest flat index (C order); the full incoming gradient
        is routed to that single winning entry.
        """
        idx = int(np.argmin(a.value))
        shape = a.shape

        def vjp(g):
            z = np.zeros(shape)
            z.flat[idx] = g[0, 0]
            return (z,)

        out = self._record(
            "min_with_index", np.array([[a.value.flat[idx]]]), (a,), vjp
        )
        return out, idx

    def max_with_index(self, a: Var) -> tuple[Var, int]:
        idx = int(np.argmax(a.value))
        shape = a.shape

        def vjp(g):
            z = np.zeros(shape)
            z.flat[idx] = g[0, 0]
            return (z,)

        out = self._record(
            "max_with_index", np.array([[a.value.flat[idx]]]), (a,), vjp
        )
        return out, idx

    def row_sum(self, a: Var) -> Var:
        cols = a.cols

        def vjp(g):
            return (np.repeat(g, cols, axis=1),)

        return self._record("row_sum", a.value.sum(axis=1, keepdims=True), (a,), vjp)

    def row_prod(self, a: Var) -> Var:
        """Product over each row. Gradient uses leave-one-out products built
        from left/right cumulative products, which stays exact when a row
        contains zeros."""
        av = a.value
        n, d = av.shape
        ones = np.ones((n, 1))
        left = np.cumprod(av, axis=1)
        left = np.concatenate([ones, left[:, :-1]], axis=1)
        right = np.cumprod(av[:, ::-1], axis=1)[:, ::-1]
        right = np.concatenate([right[:, 1:], ones], axis=1)
        loo = left * right

        def vjp(g):
            return (g * loo,)

        return self._record("row_prod", av.prod(axis=1, keepdims=True), (a,), vjp)

    # ------------------------------------------------------------------
    # linear algebra
    # ------------------------------------------------------------------

    def matmul(self, a: Var, b: Var) -> Var:
        if a.cols != b.rows:
            raise ValueError(f"matmul: inner dims {a.shape} @ {b.shape}")
        av, bv = a.value, b.value

        def vjp(g):
            return g @ bv.T, av.T @ g

        return self._record("matmul", av @ bv, (a, b), vjp)

    def matvec(self, a: Var, x: Var) -> Var:
        if x.cols != 1:
            raise ValueError(f"matvec: x must be a column vector, got {x.shape}")
        return self.matmul(a, x)

    def transpose(self, a: Var) -> Var:
        return self._record("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))

    def outer(self, a: Var, b: Var) -> Var:
        if a.cols != 1 or b.cols != 1:
            raise ValueError("outer: both arguments must be column vectors")
        av, bv = a.value, b.value

        def vjp(g):
            return g @ bv, g.T @ av

        return self._record("outer", av @ bv.T, (a, b), vjp)

    def lower_tri_matvec(self, L: Var, z: Var) -> Var:
        """tril(L) @ z. Entries on or below the diagonal participate; the
        gradient to strictly upper entries is exactly zero."""
        if L.rows != L.cols:
            raise ValueError(f"lower_tri_matvec: L must be square, got {L.shape}")
        if z.shape != (L.rows, 1):
            raise ValueError(
                f"lower_tri_matvec: z must be ({L.rows}, 1), got {z.shape}"
            )
        Lv = np.tril(L.value)
        zv = z.value

        def vjp(g):
            return np.tril(g @ zv.T), Lv.T @ g

        return self._record("lower_tri_matvec", Lv @ zv, (L, z), vjp)

    # ------------------------------------------------------------------
    # shape / selection ops
    # ------------------------------------------------------------------

    def slice_cols(self, a: Var, j0: int, j1: int) -> Var:
        if not (0 <= j0 < j1 <= a.cols):
            raise ValueError(f"slice_cols: [{j0}:{j1}] out of range for {a.shape}")
        shape = a.shape

        def vjp(g):
            z = np.zeros(shape)
            z[:, j0:j1] = g
            return (z,)

        return self._record("slice_cols", a.value[:, j0:j1].copy(), (a,), vjp)

    def slice_rows(self, a: Var, i0: int, i1: int) -> Var:
        if not (0 <= i0 < i1 <= a.rows):
            raise ValueError(f"slice_rows: [{i0}:{i1}] out of range for {a.shape}")
        shape = a.shape

        def vjp(g):
            z = np.zeros(shape)
            z[i0:i1, :] = g
            return (z,)

        return self._record("slice_rows", a.value[i0:i1, :].copy(), (a,), vjp)

    def reshape(self, a: Var, rows: int, cols: int) -> Var:
        if rows * cols != a.value.size:
            raise ValueError(f"reshape: {a.shape} to ({rows}, {cols})")
        shape = a.shape

        def vjp(g):
            return (g.reshape(shape),)

        return self._record(
            "reshape", a.value.reshape(rows, cols).copy(), (a,), vjp
        )

    def concat_scalars(self, items: Sequence[Var]) -> Var:
        """Stack k scalar Vars into a (k, 1) column."""
        if not items:
            raise ValueError("concat_scalars: empty sequence")
        for v in items:
            if not _is_scalar(v.value):
                raise ValueError("concat_scalars: all items must be (1, 1)")
        vals = np.array([[v.value[0, 0]] for v in items])

        def vjp(g):
            return tuple(g[i : i + 1, :].copy() for i in range(len(items)))

        return self._record("concat_scalars", vals, tuple(items), vjp)

    def add_rowvec(self, a: Var, b: Var) -> Var:
        """(n, m) + (1, m) broadcast over rows."""
        if b.rows != 1 or b.cols != a.cols:
            raise ValueError(f"add_rowvec: {a.shape} + {b.shape}")

        def vjp(g):
            return g, g.sum(axis=0, keepdims=True)

        return self._record("add_rowvec", a.value + b.value, (a, b), vjp)

    def mul_rowvec(self, a: Var, b: Var) -> Var:
        """(n, m) * (1, m) broadcast over rows."""
        if b.rows != 1 or b.cols != a.cols:
            raise ValueError(f"mul_rowvec: {a.shape} * {b.shape}")
        av, bv = a.value, b.value

        def vjp(g):
            return g * bv, (g * av).sum(axis=0, keepdims=True)

        return self._record("mul_rowvec", av * bv, (a, b), vjp)

    def mul_colvec(self, a: Var, b: Var) -> Var:
        """(n, m) * (n, 1) broadcast over columns."""
        if b.cols != 1 or b.rows != a.rows:
            raise ValueError(f"mul_colvec: {a.shape} * {b.shape}")
        av, bv = a.value, b.value

        def vjp(g):
            return g * bv, (g * av).sum(axis=1, keepdims=True)

        return self._record("mul_colvec", av * bv, (a, b), vjp)

    # ------------------------------------------------------------------
    # gradient flow control
    # ------------------------------------------------------------------

    def clamp(self, a: Var, lo, hi) -> Var:
        """Hard clamp to [lo, hi] with the usual subgradient: gradient passes
        unchanged strictly inside the box and is zero where the value sits on
        or outside a bound."""
        lov = np.asarray(lo, dtype=np.float64)
        hiv = np.asarray(hi, dtype=np.float64)
        av = a.value
        inside = (av > lov) & (av < hiv)

        def vjp(g):
            return (g * inside,)

        return self._record("clamp", np.clip(av, lov, hiv), (a,), vjp)

    def detach(self, a: Var) -> Var:
        return self._record("detach", a.value.copy())

    def straight_through(self, hard, soft: Var) -> Var:
        """Forward the hard values, backpropagate as if they were ``soft``."""
        hv = hard.value if isinstance(hard, Var) else _as2d(hard)
        if hv.shape != soft.shape:
            raise ValueError(
                f"straight_through: hard {hv.shape} vs soft {soft.shape}"
            )

        def vjp(g):
            return (g,)

        return self._record("straight_through", hv.copy(), (soft,), vjp)

    # ------------------------------------------------------------------
    # backward / lifecycle
    # ------------------------------------------------------------------

    def backward(self, loss: Var) -> None:
        """Accumulate d(loss)/d(node) into every reachable node's ``grad``.

        Each call propagates a fresh unit seed and adds its contribution on
        top of whatever the buffers already hold, so two backward calls
        without an intervening zero_grad double the gradients.
        """
        if loss.tape is not self:
            raise ValueError("backward: loss belongs to a different tape")
        if not _is_scalar(loss.value):
            raise ValueError(f"backward: loss must be scalar, got {loss.shape}")
        contrib: list = [None] * len(self.nodes)
        contrib[loss.nid] = np.ones((1, 1))
        for nid in range(loss.nid, -1, -1):
            g = contrib[nid]
            if g is None:
                continue
            node = self.nodes[nid]
            if node._vjp is None:
                continue
            parent_grads = node._vjp(g)
            for pid, pg in zip(node._parents, parent_grads):
                if contrib[pid] is None:
                    contrib[pid] = pg.copy()
                else:
                    contrib[pid] += pg
        for nid, c in enumerate(contrib):
            if c is None:
                continue
            node = self.nodes[nid]
            if node.grad is None:
                node.grad = c
            else:
                node.grad = node.grad + c

    def zero_grad(self) -> None:
        for node in self.nodes:
            node.grad = None

    def reset(self) -> None:
        """Drop every node except registered params, renumbering their ids.

        Param values and gradient buffers survive; any Var recorded after the
        params becomes invalid and must not be used again.
        """
        fresh: list[Var] = []
        for p in self.params:
            p.raw.nid = len(fresh)
            p.raw._parents = ()
            fresh.append(p.raw)
        self.nodes = fresh


# ----------------------------------------------------------------------
# composite helpers built from primitive ops
# ----------------------------------------------------------------------


def softmax_rows(tape: Tape, s: Var) -> Var:
    """Row-wise softmax. Subtracts a detached per-row max before exp; the
    shift is a constant so gradients are those of the exact softmax."""
    shift = tape.constant(s.value.max(axis=1, keepdims=True) * np.ones((1, s.cols)))
    e = tape.exp(tape.sub(s, shift))
    denom = tape.row_sum(e)
    inv = tape.powc(denom, -1.0)
    return tape.mul_colvec(e, inv)


def softmax_col(tape: Tape, s: Var) -> Var:
    """Softmax over a (n, 1) column vector."""
    if s.cols != 1:
        raise ValueError(f"softmax_col expects a column, got {s.shape}")
    t = tape.transpose(s)
    return tape.transpose(softmax_rows(tape, t))
