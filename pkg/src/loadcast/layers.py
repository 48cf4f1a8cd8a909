"""Neural network building blocks on top of the tensor engine.

Dense, 1-D convolution, max pooling, GRU/LSTM cells, stacked (optionally
bidirectional) recurrent layers, single-query additive attention, batch
normalization and inverted dropout. Shapes carry a leading batch axis:
dense works on [B, D], convolution/pooling on [B, C, L], recurrent layers
on [B, T, D], attention on [B, M, F].

Weight matrices are Glorot-uniform initialized from the caller's generator;
biases start at zero.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .tensor import ShapeError, Tensor, concat

__all__ = [
    "Layer",
    "Dense",
    "Conv1d",
    "MaxPool1d",
    "GRUCell",
    "LSTMCell",
    "Recurrent",
    "Attention",
    "BatchNorm",
    "Dropout",
    "glorot_uniform",
]


def glorot_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class: tracks parameters, buffers and child layers by name."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._buffers: dict[str, np.ndarray] = {}
        self._children: dict[str, "Layer"] = {}

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def _register_buffer(self, name: str, data: np.ndarray) -> np.ndarray:
        self._buffers[name] = data
        return data

    def _register_child(self, name: str, child: "Layer") -> "Layer":
        self._children[name] = child
        return child

    def parameters(self) -> list[Tensor]:
        out = list(self._params.values())
        for child in self._children.values():
            out.extend(child.parameters())
        return out

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = [(prefix + name, t) for name, t in self._params.items()]
        for cname, child in self._children.items():
            out.extend(child.named_parameters(prefix + cname + "."))
        return out

    def named_buffers(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = [(prefix + name, b) for name, b in self._buffers.items()]
        for cname, child in self._children.items():
            out.extend(child.named_buffers(prefix + cname + "."))
        return out

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Dense(Layer):
    """Affine map x·W + b on the last axis, with optional ReLU."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator,
                 activation: str | None = None):
        super().__init__()
        if activation not in (None, "relu"):
            raise ValueError(f"unsupported activation {activation!r}")
        self.d_in, self.d_out = d_in, d_out
        self.activation = activation
        self.W = self._register("W", glorot_uniform(rng, (d_in, d_out), d_in, d_out))
        self.b = self._register("b", np.zeros(d_out))

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"dense expects last dim {self.d_in}, got {x.shape}")
        if x.ndim != 2:
            y = x @ self.W + self.b
            return y.relu() if self.activation == "relu" else y
        # fused 2-D path: one op instead of matmul + add (+ relu)
        y = x.data @ self.W.data + self.b.data
        mask = None
        if self.activation == "relu":
            mask = y > 0
            y = np.where(mask, y, 0.0)

        def grad_fn(g, tx=x, tw=self.W, tb=self.b, mask=mask):
            ge = g * mask if mask is not None else g
            if tx.requires_grad:
                tx._accumulate(ge @ tw.data.T)
            if tw.requires_grad:
                tw._accumulate(tx.data.T @ ge)
            if tb.requires_grad:
                tb._accumulate(ge.sum(axis=0))

        return Tensor._from_op(y, (x, self.W, self.b), grad_fn, "dense")


def _sliding_windows(x: np.ndarray, width: int, stride: int) -> np.ndarray:
    """Read-only view [B, C, L_out, width] over the last axis."""
    b, c, length = x.shape
    l_out = (length - width) // stride + 1
    sb, sc, sl = x.strides
    return np.lib.stride_tricks.as_strided(
        x, shape=(b, c, l_out, width), strides=(sb, sc, sl * stride, sl),
        writeable=False)


class Conv1d(Layer):
    """Cross-correlation over the last axis: [B, C_in, L] -> [B, C_out, L_out]."""

    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator,
                 padding: str = "same"):
        super().__init__()
        if padding not in ("same", "valid"):
            raise ValueError(f"padding must be 'same' or 'valid', got {padding!r}")
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.padding = padding
        self.W = self._register(
            "W", glorot_uniform(rng, (c_out, c_in, kernel), c_in * kernel, c_out * kernel))
        self.b = self._register("b", np.zeros(c_out))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[1] != self.c_in:
            raise ShapeError(f"conv1d expects [B, {self.c_in}, L], got {x.shape}")
        length = x.shape[2]
        k = self.kernel
        if self.padding == "same":
            left = (k - 1) // 2
            right = k - 1 - left
        else:
            if length < k:
                raise ShapeError(f"conv1d valid padding needs L >= {k}, got L={length}")
            left = right = 0
        w, b = self.W, self.b

        xp = np.pad(x.data, ((0, 0), (0, 0), (left, right))) if left or right else x.data
        win = _sliding_windows(xp, k, 1)
        out_data = np.einsum("bclk,ock->bol", win, w.data, optimize=True)
        out_data += b.data[None, :, None]

        def grad_fn(g, tx=x, tw=w, tb=b, xp=xp, win=win, pad=(left, right)):
            if tw.requires_grad:
                tw._accumulate(np.einsum("bol,bclk->ock", g, win, optimize=True))
            if tb.requires_grad:
                tb._accumulate(g.sum(axis=(0, 2)))
            if tx.requires_grad:
                gwin = np.einsum("bol,ock->bclk", g, tw.data, optimize=True)
                gxp = np.zeros_like(xp)
                l_out = g.shape[2]
                for kk in range(k):
                    gxp[:, :, kk:kk + l_out] += gwin[:, :, :, kk]
                lft, rgt = pad
                tx._accumulate(gxp[:, :, lft:gxp.shape[2] - rgt] if (lft or rgt) else gxp)

        return Tensor._from_op(out_data, (x, w, b), grad_fn, "conv1d")


class MaxPool1d(Layer):
    """Channelwise windowed max; gradient routes to the first maximal index."""

    def __init__(self, size: int = 2, stride: int = 2):
        super().__init__()
        self.size, self.stride = size, stride

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3:
            raise ShapeError(f"maxpool1d expects [B, C, L], got {x.shape}")
        length = x.shape[2]
        if length < self.size:
            raise ShapeError(f"maxpool1d needs L >= {self.size}, got L={length}")
        win = _sliding_windows(x.data, self.size, self.stride)
        idx = win.argmax(axis=3)  # first max on ties
        out_data = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]

        def grad_fn(g, tx=x, idx=idx, stride=self.stride):
            b, c, l_out = g.shape
            gx = np.zeros_like(tx.data)
            pos = idx + stride * np.arange(l_out)[None, None, :]
            bi = np.arange(b)[:, None, None]
            ci = np.arange(c)[None, :, None]
            np.add.at(gx, (bi, ci, pos), g)
            tx._accumulate(gx)

        return Tensor._from_op(np.ascontiguousarray(out_data), (x,), grad_fn, "maxpool1d")


class GRUCell(Layer):
    """Gated recurrent unit, reset-before-candidate formulation.

    Gate weights are stored packed for speed: ``W`` holds the input maps
    for z|r|h as column blocks of width H, ``U_zr`` the recurrent maps for
    z|r, ``U_h`` the candidate's recurrent map, ``b`` the z|r|h biases.
    Each block is Glorot-initialized with its own (d_in, hidden) fans.
    """

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.d_in, self.hidden = d_in, hidden
        self.W = self._register("W", np.concatenate(
            [glorot_uniform(rng, (d_in, hidden), d_in, hidden) for _ in range(3)], axis=1))
        self.U_zr = self._register("U_zr", np.concatenate(
            [glorot_uniform(rng, (hidden, hidden), hidden, hidden) for _ in range(2)], axis=1))
        self.U_h = self._register(
            "U_h", glorot_uniform(rng, (hidden, hidden), hidden, hidden))
        self.b = self._register("b", np.zeros(3 * hidden))

    def input_map(self, x: Tensor) -> Tensor:
        """x·W + b for one step or a whole flattened sequence [N, 3H]."""
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"gru expects inputs [..., {self.d_in}], got {x.shape}")
        return x @ self.W + self.b

    def step_premapped(self, xw: Tensor, h_prev: Tensor) -> Tensor:
        """One recurrence step as a single fused op (hand-written backward)."""
        hh = self.hidden
        u_zr, u_h = self.U_zr, self.U_h
        xw_d, h_d = xw.data, h_prev.data
        hu = h_d @ u_zr.data
        z = expit(xw_d[:, :hh] + hu[:, :hh])
        r = expit(xw_d[:, hh:2 * hh] + hu[:, hh:])
        s = r * h_d
        c = np.tanh(xw_d[:, 2 * hh:] + s @ u_h.data)
        out_data = (1.0 - z) * h_d + z * c

        def grad_fn(g, txw=xw, th=h_prev, tuzr=u_zr, tuh=u_h,
                    z=z, r=r, s=s, c=c, h_d=h_d, hh=hh):
            dc = g * z
            da_h = dc * (1.0 - c * c)
            dz = (g * (c - h_d)) * z * (1.0 - z)
            ds = da_h @ tuh.data.T
            dr = (ds * h_d) * r * (1.0 - r)
            dhu = np.concatenate([dz, dr], axis=1)
            if txw.requires_grad:
                txw._accumulate(np.concatenate([dz, dr, da_h], axis=1))
            if th.requires_grad:
                th._accumulate(g * (1.0 - z) + ds * r + dhu @ tuzr.data.T)
            if tuzr.requires_grad:
                tuzr._accumulate(h_d.T @ dhu)
            if tuh.requires_grad:
                tuh._accumulate(s.T @ da_h)

        return Tensor._from_op(out_data, (xw, h_prev, u_zr, u_h), grad_fn, "gru_step")

    def step(self, x_t: Tensor, h_prev: Tensor) -> Tensor:
        if h_prev.shape[-1] != self.hidden:
            raise ShapeError(f"gru expects state [..., {self.hidden}], got {h_prev.shape}")
        return self.step_premapped(self.input_map(x_t), h_prev)

    forward = step


class LSTMCell(Layer):
    """Long short-term memory cell with forget/input/output gates.

    Weights are stored packed: ``W`` [D, 4H] and ``U`` [H, 4H] hold the
    f|i|o|c column blocks, ``b`` the matching biases.
    """

    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.d_in, self.hidden = d_in, hidden
        self.W = self._register("W", np.concatenate(
            [glorot_uniform(rng, (d_in, hidden), d_in, hidden) for _ in range(4)], axis=1))
        self.U = self._register("U", np.concatenate(
            [glorot_uniform(rng, (hidden, hidden), hidden, hidden) for _ in range(4)], axis=1))
        self.b = self._register("b", np.zeros(4 * hidden))

    def input_map(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"lstm expects inputs [..., {self.d_in}], got {x.shape}")
        return x @ self.W + self.b

    def step_premapped(self, xw: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        h_prev, c_prev = state
        hh = self.hidden
        gates = xw + h_prev @ self.U
        f = gates[:, :hh].sigmoid()
        i = gates[:, hh:2 * hh].sigmoid()
        o = gates[:, 2 * hh:3 * hh].sigmoid()
        c_tilde = gates[:, 3 * hh:].tanh()
        c = f * c_prev + i * c_tilde
        h = o * c.tanh()
        return h, c

    def step(self, x_t: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        if state[0].shape[-1] != self.hidden:
            raise ShapeError(f"lstm expects state [..., {self.hidden}], got {state[0].shape}")
        return self.step_premapped(self.input_map(x_t), state)

    forward = step


class Recurrent(Layer):
    """Stacked recurrent layer, optionally bidirectional.

    forward(x [B, T, D]) returns (outputs [B, T, H·dirs], final [B, H·dirs]).
    The final representation concatenates the last forward state with the
    backward state after it has consumed the first step.
    """

    def __init__(self, kind: str, d_in: int, hidden: int, rng: np.random.Generator,
                 layers: int = 1, bidirectional: bool = False):
        super().__init__()
        if kind not in ("gru", "lstm"):
            raise ValueError(f"kind must be 'gru' or 'lstm', got {kind!r}")
        self.kind, self.hidden = kind, hidden
        self.layers, self.bidirectional = layers, bidirectional
        cell_cls = GRUCell if kind == "gru" else LSTMCell
        dirs = 2 if bidirectional else 1
        d = d_in
        for layer in range(layers):
            self._register_child(f"l{layer}_fwd", cell_cls(d, hidden, rng))
            if bidirectional:
                self._register_child(f"l{layer}_bwd", cell_cls(d, hidden, rng))
            d = hidden * dirs

    def _run_direction(self, cell: Layer, xw_all: Tensor, batch: int, t_steps: int,
                       reverse: bool) -> list[Tensor]:
        """Scan one direction; returns per-step states indexed by time.

        ``xw_all`` [B, T, gates·H] is the precomputed input map for every
        step, so the scan itself only runs the recurrent matmuls.
        """
        out: list = [None] * t_steps
        order = range(t_steps - 1, -1, -1) if reverse else range(t_steps)
        if self.kind == "lstm":
            state = (Tensor(np.zeros((batch, self.hidden))),
                     Tensor(np.zeros((batch, self.hidden))))
            for t in order:
                state = cell.step_premapped(xw_all[:, t, :], state)
                out[t] = state[0]
            return out
        h = Tensor(np.zeros((batch, self.hidden)))
        for t in order:
            h = cell.step_premapped(xw_all[:, t, :], h)
            out[t] = h
        return out

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        if x.ndim != 3:
            raise ShapeError(f"recurrent expects [B, T, D], got {x.shape}")
        batch, t_steps, _ = x.shape
        if t_steps < 1:
            raise ShapeError("empty sequence")
        seq = x
        final = None
        for layer in range(self.layers):
            d = seq.shape[2]
            flat = seq.reshape(batch * t_steps, d)
            fwd_cell = self._children[f"l{layer}_fwd"]
            xw = fwd_cell.input_map(flat)
            xw = xw.reshape(batch, t_steps, xw.shape[1])
            fwd = self._run_direction(fwd_cell, xw, batch, t_steps, reverse=False)
            if self.bidirectional:
                bwd_cell = self._children[f"l{layer}_bwd"]
                xwb = bwd_cell.input_map(flat)
                xwb = xwb.reshape(batch, t_steps, xwb.shape[1])
                # bwd[t] = backward state after consuming x_t
                bwd = self._run_direction(bwd_cell, xwb, batch, t_steps, reverse=True)
                per_step = [concat([f, b], axis=1) for f, b in zip(fwd, bwd)]
                final = concat([fwd[-1], bwd[0]], axis=1)
            else:
                per_step = fwd
                final = fwd[-1]
            seq = concat([s.reshape(batch, 1, s.shape[1]) for s in per_step], axis=1)
        return seq, final


class Attention(Layer):
    """Single-query additive attention over feature rows.

    score_i = v'·tanh(W f_i + b); weights = softmax(scores);
    context = Σ weights_i · f_i.
    """

    def __init__(self, f_dim: int, attn_dim: int, rng: np.random.Generator):
        super().__init__()
        self.f_dim, self.attn_dim = f_dim, attn_dim
        self.W = self._register("W", glorot_uniform(rng, (f_dim, attn_dim), f_dim, attn_dim))
        self.b = self._register("b", np.zeros(attn_dim))
        self.v = self._register("v", glorot_uniform(rng, (attn_dim, 1), attn_dim, 1))

    def forward(self, feats: Tensor) -> tuple[Tensor, Tensor]:
        if feats.ndim != 3 or feats.shape[2] != self.f_dim:
            raise ShapeError(f"attention expects [B, M, {self.f_dim}], got {feats.shape}")
        batch, m, f = feats.shape
        scores = ((feats @ self.W + self.b).tanh() @ self.v).reshape(batch, m)
        weights = scores.softmax(axis=-1)
        context = (weights.reshape(batch, 1, m) @ feats).reshape(batch, f)
        return context, weights


class BatchNorm(Layer):
    """Batch normalization over the batch axis of [B, F] inputs."""

    def __init__(self, features: int, eps: float = 1e-5, momentum: float = 0.1):
        super().__init__()
        self.features, self.eps, self.momentum = features, eps, momentum
        self.gamma = self._register("gamma", np.ones(features))
        self.beta = self._register("beta", np.zeros(features))
        self.running_mean = self._register_buffer("running_mean", np.zeros(features))
        self.running_var = self._register_buffer("running_var", np.ones(features))

    def forward(self, x: Tensor, train: bool) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.features:
            raise ShapeError(f"batchnorm expects [B, {self.features}], got {x.shape}")
        if train:
            if x.shape[0] < 2:
                raise ShapeError("batchnorm in train mode needs a batch of at least 2")
            mu = x.mean(axis=0)
            xc = x - mu
            var = (xc * xc).mean(axis=0)
            xhat = xc / (var + self.eps).sqrt()
            # population statistics tracked for eval mode
            self.running_mean *= 1.0 - self.momentum
            self.running_mean += self.momentum * mu.data
            self.running_var *= 1.0 - self.momentum
            self.running_var += self.momentum * var.data
        else:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.eps)
        return xhat * self.gamma + self.beta


class Dropout(Layer):
    """Inverted dropout: zero with probability ``rate`` in train mode and
    scale survivors by 1/(1-rate); identity in eval mode."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x: Tensor, train: bool, rng: np.random.Generator | None = None) -> Tensor:
        if not train or self.rate == 0.0:
            return x
        if rng is None:
            raise ValueError("dropout in train mode needs a generator")
        mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * Tensor(mask)
