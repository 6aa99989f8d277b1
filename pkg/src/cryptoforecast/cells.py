"""LSTM and GRU cell math: gate parameters, single steps, sequence kernels.

Both cell kinds keep their gate weights stacked row-wise in one fused
(W, U, b) triple so a whole step is two matrix products.  The sigmoid
gates come first so they can be activated in a single contiguous block:

* LSTM rows, in order: input gate ``i``, forget gate ``f``, output gate
  ``o``, candidate ``c`` (4H rows).  The update is

    ``i = sigmoid(W_i x + U_i h + b_i)``        (likewise ``f`` and ``o``)
    ``c_t = f * c_prev + i * tanh(W_c x + U_c h + b_c)``
    ``h_t = o * tanh(c_t)``

* GRU rows, in order: update gate ``u``, reset gate ``r``, candidate
  ``c`` (3H rows).  The candidate applies the reset gate to the previous
  hidden state before the recurrent product:

    ``u = sigmoid(W_u x + U_u h + b_u)``        (likewise ``r``)
    ``n = tanh(W_c x + U_c (r * h) + b_c)``
    ``h_t = (1 - u) * h_prev + u * n``

The sequence kernels run time-major (arrays shaped ``(time, batch,
dim)``) so every per-step slice is contiguous, and they record the
activations needed for an exact reverse-mode gradient.  All arithmetic
is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LSTM_GATE_ORDER = ("i", "f", "o", "c")
GRU_GATE_ORDER = ("u", "r", "c")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(eq=False)
class CellParams:
    """Fused per-cell weights: ``w`` (G*H, D), ``u`` (G*H, H), ``b`` (G*H,).

    G is 4 for LSTM and 3 for GRU; the row blocks follow
    :data:`LSTM_GATE_ORDER` / :data:`GRU_GATE_ORDER`.  The same container
    is reused for shape-congruent gradients.
    """

    w: np.ndarray
    u: np.ndarray
    b: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.u.shape[1]

    @property
    def input_size(self) -> int:
        return self.w.shape[1]

    @property
    def n_gates(self) -> int:
        return self.w.shape[0] // self.u.shape[1]

    def gate_block(self, index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Views of (w, u, b) for one gate, by position in the stacked order."""
        h = self.hidden_size
        rows = slice(index * h, (index + 1) * h)
        return self.w[rows], self.u[rows], self.b[rows]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.w, self.u, self.b


@dataclass
class CellState:
    """Recurrent state: hidden vector ``h`` and, for LSTM only, cell vector ``c``."""

    h: np.ndarray
    c: np.ndarray | None = None


def _check_step_shapes(params: CellParams, x_t: np.ndarray, h: np.ndarray, gates: int):
    hsize = params.hidden_size
    if params.w.shape[0] != gates * hsize or params.b.shape[0] != gates * hsize:
        raise ValueError("fused gate rows inconsistent with hidden size")
    if x_t.shape != (params.input_size,):
        raise ValueError(f"expected input shape ({params.input_size},), got {x_t.shape}")
    if h.shape != (hsize,):
        raise ValueError(f"expected hidden shape ({hsize},), got {h.shape}")


def lstm_step(params: CellParams, x_t, state: CellState) -> CellState:
    """One LSTM update on plain vectors.  Reference path for the fast kernels."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(state.h, dtype=np.float64)
    if state.c is None:
        raise ValueError("LSTM state requires a cell vector")
    c_prev = np.asarray(state.c, dtype=np.float64)
    _check_step_shapes(params, x_t, h_prev, gates=4)
    if c_prev.shape != h_prev.shape:
        raise ValueError("hidden and cell vectors must have equal shape")

    hsize = params.hidden_size
    a = params.w @ x_t + params.u @ h_prev + params.b
    i = sigmoid(a[:hsize])
    f = sigmoid(a[hsize : 2 * hsize])
    o = sigmoid(a[2 * hsize : 3 * hsize])
    g = np.tanh(a[3 * hsize :])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return CellState(h=h, c=c)


def gru_step(params: CellParams, x_t, h_prev) -> np.ndarray:
    """One GRU update on plain vectors.  Reference path for the fast kernels."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    _check_step_shapes(params, x_t, h_prev, gates=3)

    hsize = params.hidden_size
    a_ur = params.w[: 2 * hsize] @ x_t + params.u[: 2 * hsize] @ h_prev + params.b[: 2 * hsize]
    u = sigmoid(a_ur[:hsize])
    r = sigmoid(a_ur[hsize:])
    a_c = params.w[2 * hsize :] @ x_t + params.u[2 * hsize :] @ (r * h_prev) + params.b[2 * hsize :]
    n = np.tanh(a_c)
    return (1.0 - u) * h_prev + u * n


@dataclass(eq=False)
class LstmTape:
    """Activations recorded by :func:`lstm_forward` for the backward pass.

    All arrays are time-major.  ``s`` holds the three sigmoid gates in
    one (T, B, 3H) block ordered i, f, o; ``g`` is the candidate tanh.
    """

    x: np.ndarray  # (T, B, D) layer input
    s: np.ndarray  # (T, B, 3H) sigmoid gates i|f|o
    g: np.ndarray  # (T, B, H) candidate tanh
    c: np.ndarray  # (T, B, H) cell state
    tc: np.ndarray  # (T, B, H) tanh of cell state
    h: np.ndarray  # (T, B, H) hidden sequence


@dataclass(eq=False)
class GruTape:
    """Activations recorded by :func:`gru_forward` for the backward pass."""

    x: np.ndarray  # (T, B, D)
    s: np.ndarray  # (T, B, 2H) sigmoid gates u|r
    n: np.ndarray  # (T, B, H) candidate tanh
    rh: np.ndarray  # (T, B, H) reset-scaled previous hidden state
    h: np.ndarray  # (T, B, H) hidden sequence


def lstm_forward(params: CellParams, x: np.ndarray, store_tape: bool = True):
    """Run an LSTM over a time-major batch of sequences from zero state.

    Returns the hidden sequence (T, B, H) and, when requested, the tape
    consumed by :func:`lstm_backward`.
    """
    steps, batch, _ = x.shape
    hsize = params.hidden_size
    xp = x.reshape(steps * batch, -1) @ params.w.T
    xp += params.b
    xp = xp.reshape(steps, batch, 4 * hsize)
    ut = np.ascontiguousarray(params.u.T)

    h = np.zeros((batch, hsize))
    c = np.zeros((batch, hsize))
    h_seq = np.empty((steps, batch, hsize))
    if store_tape:
        sig_gates = np.empty((steps, batch, 3 * hsize))
        cand = np.empty((steps, batch, hsize))
        cells_ = np.empty((steps, batch, hsize))
        tcells = np.empty((steps, batch, hsize))

    for t in range(steps):
        a = xp[t] + h @ ut
        s = sigmoid(a[:, : 3 * hsize])
        g = np.tanh(a[:, 3 * hsize :])
        i = s[:, :hsize]
        f = s[:, hsize : 2 * hsize]
        o = s[:, 2 * hsize :]
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        h_seq[t] = h
        if store_tape:
            sig_gates[t] = s
            cand[t] = g
            cells_[t] = c
            tcells[t] = tc

    if not store_tape:
        return h_seq, None
    return h_seq, LstmTape(x=x, s=sig_gates, g=cand, c=cells_, tc=tcells, h=h_seq)


def lstm_backward(params: CellParams, tape: LstmTape, dh_seq: np.ndarray):
    """Exact gradient of an LSTM sequence pass.

    ``dh_seq`` holds the loss gradient w.r.t. every hidden output (zeros
    where a step's output is unused).  Returns (parameter gradients as a
    :class:`CellParams`, gradient w.r.t. the layer input).
    """
    steps, batch, hsize = tape.h.shape
    da = np.empty((steps, batch, 4 * hsize))
    dh_carry = np.zeros((batch, hsize))
    dc_carry = np.zeros((batch, hsize))

    for t in reversed(range(steps)):
        s = tape.s[t]
        i = s[:, :hsize]
        f = s[:, hsize : 2 * hsize]
        o = s[:, 2 * hsize :]
        g = tape.g[t]
        tc = tape.tc[t]
        c_prev = tape.c[t - 1] if t > 0 else 0.0

        dh = dh_seq[t] + dh_carry
        dc = dh * o * (1.0 - tc * tc) + dc_carry
        da_t = da[t]
        da_t[:, :hsize] = (dc * g) * i * (1.0 - i)
        da_t[:, hsize : 2 * hsize] = (dc * c_prev) * f * (1.0 - f)
        da_t[:, 2 * hsize : 3 * hsize] = (dh * tc) * o * (1.0 - o)
        da_t[:, 3 * hsize :] = (dc * i) * (1.0 - g * g)
        dh_carry = da_t @ params.u
        dc_carry = dc * f

    flat = da.reshape(steps * batch, 4 * hsize)
    dw = flat.T @ tape.x.reshape(steps * batch, -1)
    # h_prev is zero at t=0, so the recurrent gradient only sums t >= 1.
    du = da[1:].reshape(-1, 4 * hsize).T @ tape.h[:-1].reshape(-1, hsize)
    db = flat.sum(axis=0)
    dx = (flat @ params.w).reshape(tape.x.shape)
    return CellParams(w=dw, u=du, b=db), dx


def gru_forward(params: CellParams, x: np.ndarray, store_tape: bool = True):
    """Run a GRU over a time-major batch of sequences from zero state."""
    steps, batch, _ = x.shape
    hsize = params.hidden_size
    w_ur = params.w[: 2 * hsize]
    w_c = params.w[2 * hsize :]
    u_ur_t = np.ascontiguousarray(params.u[: 2 * hsize].T)
    u_c_t = np.ascontiguousarray(params.u[2 * hsize :].T)

    flat_x = x.reshape(steps * batch, -1)
    xp_ur = (flat_x @ w_ur.T + params.b[: 2 * hsize]).reshape(steps, batch, 2 * hsize)
    xp_c = (flat_x @ w_c.T + params.b[2 * hsize :]).reshape(steps, batch, hsize)

    h = np.zeros((batch, hsize))
    h_seq = np.empty((steps, batch, hsize))
    if store_tape:
        sig_gates = np.empty((steps, batch, 2 * hsize))
        cand = np.empty((steps, batch, hsize))
        resets = np.empty((steps, batch, hsize))

    for t in range(steps):
        s = sigmoid(xp_ur[t] + h @ u_ur_t)
        u = s[:, :hsize]
        r = s[:, hsize:]
        rh = r * h
        n = np.tanh(xp_c[t] + rh @ u_c_t)
        h = (1.0 - u) * h + u * n
        h_seq[t] = h
        if store_tape:
            sig_gates[t] = s
            cand[t] = n
            resets[t] = rh

    if not store_tape:
        return h_seq, None
    return h_seq, GruTape(x=x, s=sig_gates, n=cand, rh=resets, h=h_seq)


def gru_backward(params: CellParams, tape: GruTape, dh_seq: np.ndarray):
    """Exact gradient of a GRU sequence pass; mirrors :func:`lstm_backward`."""
    steps, batch, hsize = tape.h.shape
    u_ur = params.u[: 2 * hsize]
    u_c = params.u[2 * hsize :]
    da_ur = np.empty((steps, batch, 2 * hsize))
    da_c = np.empty((steps, batch, hsize))
    dh_carry = np.zeros((batch, hsize))

    for t in reversed(range(steps)):
        s = tape.s[t]
        u = s[:, :hsize]
        r = s[:, hsize:]
        n = tape.n[t]
        h_prev = tape.h[t - 1] if t > 0 else 0.0

        dh = dh_seq[t] + dh_carry
        dan = (dh * u) * (1.0 - n * n)
        drh = dan @ u_c
        da_t = da_ur[t]
        da_t[:, :hsize] = (dh * (n - h_prev)) * u * (1.0 - u)
        da_t[:, hsize:] = (drh * h_prev) * r * (1.0 - r)
        da_c[t] = dan
        dh_carry = dh * (1.0 - u) + drh * r + da_t @ u_ur

    flat_ur = da_ur.reshape(steps * batch, 2 * hsize)
    flat_c = da_c.reshape(steps * batch, hsize)
    flat_x = tape.x.reshape(steps * batch, -1)
    dw = np.concatenate([flat_ur.T @ flat_x, flat_c.T @ flat_x], axis=0)
    du_ur = da_ur[1:].reshape(-1, 2 * hsize).T @ tape.h[:-1].reshape(-1, hsize)
    du_c = flat_c.T @ tape.rh.reshape(steps * batch, hsize)
    du = np.concatenate([du_ur, du_c], axis=0)
    db = np.concatenate([flat_ur.sum(axis=0), flat_c.sum(axis=0)])
    dx = (flat_ur @ params.w[: 2 * hsize] + flat_c @ params.w[2 * hsize :]).reshape(tape.x.shape)
    return CellParams(w=dw, u=du, b=db), dx
